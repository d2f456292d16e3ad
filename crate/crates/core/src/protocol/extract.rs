//! Extraction of private local randomness from weak local sources `x`, `y`
//! and a shared weak `w`: the communication-free variants and the
//! challenge-round protocol for linear-entropy local sources.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::{BitMatrix, BitString};
use crate::codes::{constant_weight_decode, constant_weight_encode};
use crate::error::{Error, Result};
use crate::extractors::{
    gf2n_error_bound, somewhere_condense, srg_extract, CondenserSpec, SeededExtractorSpec,
    TwoSourceExtractorSpec,
};
use crate::protocol::auth::{Finish, Session};
use crate::protocol::frame::Role;
use crate::protocol::party::{Party, PhasePlan, Plan, SeedSupply, StagePlan, Status};
use crate::protocol::schedule::{schedule_build, ChallengeSchedule};
use crate::protocol::Outcome;

/// `(S_x, S_y) = (Ext2(x, w), Ext2(y, w))` with the field-product
/// extractor; both local sources must have rate above one half.
pub fn extracth_run(
    x: &BitString,
    y: &BitString,
    w: &BitString,
    ext: &TwoSourceExtractorSpec,
    kx: f64,
    ky: f64,
) -> Result<(BitString, BitString)> {
    for (name, s, k) in [("x", x, kx), ("y", y, ky)] {
        if k <= s.len() as f64 / 2.0 {
            return Err(Error::Config(format!(
                "{name} declares k = {k} over {} bits; rate must exceed 1/2",
                s.len()
            )));
        }
    }
    Ok((ext.extract(x, w)?, ext.extract(y, w)?))
}

/// `(S_x, S_y)` from the random-oracle two-source stand-in; simulation only.
pub fn nextract_run(
    x: &BitString,
    y: &BitString,
    w: &BitString,
    m: usize,
    session_seed: u64,
) -> (BitString, BitString) {
    let ext = TwoSourceExtractorSpec::random_oracle(x.len(), w.len(), m, session_seed);
    let sx = ext.extract(x, w).expect("lengths taken from the inputs");
    let ext = TwoSourceExtractorSpec::random_oracle(y.len(), w.len(), m, session_seed);
    (sx, ext.extract(y, w).expect("lengths taken from the inputs"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractParams {
    /// Length of `x` and `y`.
    pub n: usize,
    pub kx: f64,
    pub ky: f64,
    pub w_len: usize,
    pub kw: f64,
    pub condenser_iterations: u32,
    pub condenser_p: u64,
    /// Field size of the row extractor; rows and `w` are resized to it.
    pub field_bits: usize,
    /// Bits per row of `SR_x`, `SR_y`.
    pub sr_len: usize,
    pub slice1: usize,
    pub slice2: usize,
    pub slice3: usize,
    /// Field size of the SR combiner; slices are resized to it.
    pub srg_field_bits: usize,
    pub r3_len: usize,
    pub key_len: usize,
    pub base: u64,
    pub unit: usize,
    pub gamma: f64,
    /// Accept schedules longer than `kw^gamma`.
    pub relax_budget: bool,
    pub session_seed: u64,
}

impl ExtractParams {
    /// The desk-scale instance at 16-bit sources: one condensed row, base 2.
    pub fn desk() -> Self {
        ExtractParams {
            n: 16,
            kx: 8.0,
            ky: 8.0,
            w_len: 16,
            kw: 8.0,
            condenser_iterations: 0,
            condenser_p: 2,
            field_bits: 16,
            sr_len: 8,
            slice1: 4,
            slice2: 2,
            slice3: 8,
            srg_field_bits: 4,
            r3_len: 1,
            key_len: 4,
            base: 2,
            unit: 1,
            gamma: 0.9,
            relax_budget: true,
            session_seed: 0,
        }
    }

    pub fn condenser(&self) -> Result<CondenserSpec> {
        CondenserSpec::new(self.n, self.condenser_iterations, self.condenser_p)
    }

    pub fn rows(&self) -> usize {
        3usize.pow(self.condenser_iterations)
    }

    /// Rounds carrying `x2`.
    pub fn t(&self) -> usize {
        2 * self.rows() * self.slice2
    }

    /// Rounds carrying `r3`.
    pub fn t_prime(&self) -> usize {
        2 * self.r3_len
    }

    pub fn schedule(&self) -> Result<ChallengeSchedule> {
        schedule_build(self.base, self.unit, self.t() + self.t_prime(), usize::MAX)
    }

    pub fn row_extractor(&self) -> Result<TwoSourceExtractorSpec> {
        TwoSourceExtractorSpec::gf2n(self.field_bits, self.sr_len)
    }

    pub fn combiner(&self) -> Result<TwoSourceExtractorSpec> {
        TwoSourceExtractorSpec::gf2n(self.srg_field_bits, self.r3_len)
    }

    /// Tag extractor `Ext(w, row of x1)`.
    pub fn tag_extractor(&self) -> Result<SeededExtractorSpec> {
        Ok(SeededExtractorSpec::random_oracle(
            self.w_len,
            self.slice1,
            self.schedule()?.max_len(),
            self.session_seed,
        ))
    }

    /// Final `Ext(x3, r3)`.
    pub fn key_extractor(&self) -> SeededExtractorSpec {
        SeededExtractorSpec::random_oracle(
            self.rows() * self.slice3,
            self.r3_len,
            self.key_len,
            self.session_seed ^ 0x6b6579,
        )
    }

    pub fn budget(&self) -> f64 {
        self.kw.powf(self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let cond = self.condenser()?;
        if cond.m > self.field_bits {
            return Err(Error::Config(format!(
                "condensed rows of {} bits exceed the {}-bit field",
                cond.m, self.field_bits
            )));
        }
        self.row_extractor()?;
        self.combiner()?;
        if !(self.slice1 <= self.sr_len && self.slice2 <= self.sr_len && self.slice3 <= self.sr_len) {
            return Err(Error::Config(format!(
                "slices {}/{}/{} exceed the {}-bit rows",
                self.slice1, self.slice2, self.slice3, self.sr_len
            )));
        }
        if self.slice1 == 0 || self.slice2 == 0 || self.r3_len == 0 {
            return Err(Error::Config("slice and r3 widths must be positive".into()));
        }
        if self.t_prime() >= self.t() {
            return Err(Error::Config(format!(
                "t' = {} must be below t = {}",
                self.t_prime(),
                self.t()
            )));
        }
        let total = self.schedule()?.max_len();
        if !self.relax_budget && total as f64 > self.budget() {
            return Err(Error::Config(format!(
                "schedule reaches {total} bits, above kw^gamma = {:.1}",
                self.budget()
            )));
        }
        for (name, k, len) in [("x", self.kx, self.n), ("y", self.ky, self.n), ("w", self.kw, self.w_len)] {
            if !(k > 0.0 && k <= len as f64) {
                return Err(Error::Config(format!("{name} declares k = {k} outside (0, {len}]")));
            }
        }
        Ok(())
    }

    pub fn flags(&self) -> Vec<String> {
        let mut f = vec!["simulation-only".to_string(), "stand-in-extractor".to_string()];
        if self.relax_budget && self.schedule().map_or(true, |s| s.max_len() as f64 > self.budget()) {
            f.push("kgamma-budget-relaxed".into());
        }
        f
    }

    /// `min(1, sum of stage bounds)`: both row extractors, the combiner on
    /// uniform slices; stages without a bound count as 1.
    pub fn composed_bound(&self) -> f64 {
        let loss = self.n.saturating_sub(self.field_bits) as f64;
        let kw = self.kw - self.w_len.saturating_sub(self.field_bits) as f64;
        let row = |k: f64| gf2n_error_bound(self.field_bits, self.sr_len, (k - loss).max(0.0), kw.max(0.0));
        let s2 = (self.rows() * self.slice2).min(self.srg_field_bits) as f64;
        let comb = self.rows() as f64 * gf2n_error_bound(self.srg_field_bits, self.r3_len, s2, s2);
        // the final seeded extractor is the oracle stand-in
        let key = 1.0;
        (row(self.kx) + row(self.ky) + comb + key).min(1.0)
    }
}

/// Local values one party derives from its source and `w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceSet {
    pub s1: BitMatrix,
    pub s2: BitMatrix,
    pub s3: BitMatrix,
}

/// Steps 1 to 3: condense, extract each row against `w`, slice.
pub fn slices(src: &BitString, w: &BitString, p: &ExtractParams) -> Result<SliceSet> {
    let rows = somewhere_condense(src, &p.condenser()?)?;
    let ext = p.row_extractor()?;
    let wf = w.resized(p.field_bits);
    let sr = BitMatrix::new(
        rows.rows()
            .iter()
            .map(|r| ext.extract(&r.resized(p.field_bits), &wf))
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok(SliceSet {
        s1: crate::bits::slice(&sr, p.slice1)?,
        s2: crate::bits::slice(&sr, p.slice2)?,
        s3: crate::bits::slice(&sr, p.slice3)?,
    })
}

/// `r3 = SRGExt(y2, x2)`.
pub fn r3_of(y2: &BitMatrix, x2: &BitMatrix, p: &ExtractParams) -> Result<BitString> {
    let comb = p.combiner()?;
    let rows = BitMatrix::new(x2.rows().iter().map(|r| r.resized(comb.n2)).collect())?;
    srg_extract(&y2.flatten(), &rows, &comb)
}

/// What an honest run computes and puts on the wire besides tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractTrace {
    pub x1: BitString,
    pub y1: BitString,
    pub mx: BitString,
    pub my: BitString,
    pub sx: BitString,
    pub sy: BitString,
}

/// The honest run computed directly: the tags are functions of
/// `(w, x1, y1)`, so `(w, x1, y1, mx, my)` determines Eve's view.
pub fn extract_honest(x: &BitString, y: &BitString, w: &BitString, p: &ExtractParams) -> Result<ExtractTrace> {
    let a = slices(x, w, p)?;
    let b = slices(y, w, p)?;
    let r3 = r3_of(&b.s2, &a.s2, p)?;
    let key = p.key_extractor();
    Ok(ExtractTrace {
        x1: a.s1.flatten(),
        y1: b.s1.flatten(),
        mx: constant_weight_encode(&a.s2.flatten()),
        my: constant_weight_encode(&r3),
        sx: key.extract(&a.s3.flatten(), &r3)?,
        sy: key.extract(&b.s3.flatten(), &r3)?,
    })
}

/// How an Extract session's outputs are computed once both parties stop.
pub struct ExtractFinish {
    params: ExtractParams,
    x2: BitMatrix,
    x3: BitString,
    y2: BitMatrix,
    y3: BitString,
}

impl ExtractFinish {
    fn bob_r3(&self, bob: &Party) -> Option<BitString> {
        let m = bob.received().first()?;
        let x2 = constant_weight_decode(m)?;
        let x2 = BitMatrix::unflatten(&x2, self.params.rows()).ok()?;
        r3_of(&self.y2, &x2, &self.params).ok()
    }

    fn alice_r3(&self, alice: &Party) -> Option<BitString> {
        constant_weight_decode(alice.received().get(1)?)
    }

    pub fn outcomes(&self, alice: &Party, bob: &Party) -> (Outcome, Outcome) {
        let key = self.params.key_extractor();
        let out = |p: &Party, r3: Option<BitString>, src: &BitString| match r3 {
            Some(r3) if p.status() == &Status::Accepted => {
                key.extract(src, &r3).map_or(Outcome::Rejected, Outcome::Accepted)
            }
            _ => Outcome::Rejected,
        };
        (
            out(alice, self.alice_r3(alice), &self.x3),
            out(bob, self.bob_r3(bob), &self.y3),
        )
    }

    /// Both accepted but Bob holds a different `x2` or Alice a different `r3`.
    pub fn tampered_accept(&self, alice: &Party, bob: &Party) -> bool {
        if alice.status() != &Status::Accepted || bob.status() != &Status::Accepted {
            return false;
        }
        let bob_x2 = bob.received().first().and_then(constant_weight_decode);
        let bob_r3 = self.bob_r3(bob);
        bob_x2.as_ref() != Some(&self.x2.flatten()) || self.alice_r3(alice) != bob_r3
    }
}

/// Steps 4 to 13 as a two-party session: `x1`, `y1` travel as the seed
/// frames, `mx` is authenticated in rounds `1..=t`, and `my` (derived by
/// Bob from what he received) in rounds `t+1..=t+t'`.
pub fn extract_session(x: &BitString, y: &BitString, w: &BitString, p: &ExtractParams) -> Result<Session> {
    p.validate()?;
    let a = slices(x, w, p)?;
    let b = slices(y, w, p)?;
    let (t, tp) = (p.t(), p.t_prime());
    let plan = Arc::new(Plan {
        plaintext: None,
        stages: vec![
            StagePlan {
                sender: Role::Initiator,
                phases: vec![PhasePlan {
                    fresh_seeds: true,
                    rounds: (1..=t).collect(),
                }],
                expected_weight: Some(t / 2),
            },
            StagePlan {
                sender: Role::Responder,
                phases: vec![PhasePlan {
                    fresh_seeds: false,
                    rounds: (t + 1..=t + tp).collect(),
                }],
                expected_weight: Some(tp / 2),
            },
        ],
        seed_len: p.rows() * p.slice1,
        rows: p.rows(),
        schedule: p.schedule()?,
    });
    let ext = p.tag_extractor()?;
    let mx = constant_weight_encode(&a.s2.flatten());
    let alice = Party::new(
        Role::Initiator,
        plan.clone(),
        ext.clone(),
        w.clone(),
        SeedSupply::Given(vec![a.s1.flatten()]),
        vec![Some(mx), None],
    )?;
    let (y2, pc) = (b.s2.clone(), p.clone());
    let bob = Party::new(
        Role::Responder,
        plan,
        ext,
        w.clone(),
        SeedSupply::Given(vec![b.s1.flatten()]),
        vec![None, None],
    )?
    .with_derive(Box::new(move |_, received| {
        let x2 = received
            .first()
            .and_then(constant_weight_decode)
            .ok_or_else(|| Error::Strategy("received x2 is not a constant-weight word".into()))?;
        let x2 = BitMatrix::unflatten(&x2, pc.rows())?;
        Ok(constant_weight_encode(&r3_of(&y2, &x2, &pc)?))
    }));
    Ok(Session {
        alice,
        bob,
        finish: Finish::Extract(Box::new(ExtractFinish {
            params: p.clone(),
            x2: a.s2,
            x3: a.s3.flatten(),
            y2: b.s2,
            y3: b.s3.flatten(),
        })),
        extra_fresh: [0, 0],
        flags: p.flags(),
    })
}
