//! Challenge-round authentication (single phase, multi-phase with a weight
//! check, and the non-malleable variant over an edit code) and key
//! derivation on top of it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::codes::{edit_encode, EditCodebook};
use crate::error::{Error, Result};
use crate::extractors::toeplitz_extract;
use crate::protocol::frame::{Frame, Role};
use crate::protocol::party::{Party, PhasePlan, Plan, SeedSupply, StagePlan, Status};
use crate::protocol::{pad_to_multiple, AuthParams, Outcome};
use crate::rng::TrialRng;

/// How the outcomes of a finished session are read off the two parties.
pub enum Finish {
    /// Bob outputs the received string; Alice outputs what she sent.
    Auth { m: BitString },
    /// Bob outputs the plaintext iff the authenticated string is its
    /// encoding.
    NAuth {
        m: BitString,
        book: Arc<EditCodebook>,
        t: usize,
    },
    /// Both sides extract a key from `w` with the authenticated seed.
    Key {
        z: BitString,
        book: Arc<EditCodebook>,
        t: usize,
        w: BitString,
        key_len: usize,
    },
    Extract(Box<crate::protocol::extract::ExtractFinish>),
}

/// Two parties wired to one plan, plus the rule for reading outcomes.
pub struct Session {
    pub alice: Party,
    pub bob: Party,
    pub finish: Finish,
    /// Local random bits drawn outside the seed exchanges, per party.
    pub extra_fresh: [usize; 2],
    pub flags: Vec<String>,
}

impl Session {
    pub fn party_mut(&mut self, r: Role) -> &mut Party {
        match r {
            Role::Initiator => &mut self.alice,
            Role::Responder => &mut self.bob,
        }
    }

    pub fn party(&self, r: Role) -> &Party {
        match r {
            Role::Initiator => &self.alice,
            Role::Responder => &self.bob,
        }
    }

    /// The message Alice meant to deliver, for authentication sessions.
    pub fn intended(&self) -> Option<&BitString> {
        match &self.finish {
            Finish::Auth { m } | Finish::NAuth { m, .. } => Some(m),
            _ => None,
        }
    }

    /// Whether Eve's goal is a wrong accepted message (authentication) or
    /// differing keys (key agreement).
    pub fn is_authentication(&self) -> bool {
        matches!(self.finish, Finish::Auth { .. } | Finish::NAuth { .. })
    }

    /// Authentication: Bob accepts a message other than the intended one.
    /// Key agreement: both accept different keys. Extraction: both accept
    /// after a value crossing the channel was changed.
    pub fn eve_wins(&self) -> bool {
        let (a, b) = self.outcomes();
        match &self.finish {
            Finish::Auth { m } | Finish::NAuth { m, .. } => b.value().is_some_and(|v| v != m),
            Finish::Key { .. } => !a.is_rejected() && !b.is_rejected() && a != b,
            Finish::Extract(f) => f.tampered_accept(&self.alice, &self.bob),
        }
    }

    /// Correctness of a finished run: both accepted, and with equal outputs
    /// except for extraction, where each side keeps its own string.
    pub fn agreed(&self, a: &Outcome, b: &Outcome) -> bool {
        if a.is_rejected() || b.is_rejected() {
            return false;
        }
        matches!(self.finish, Finish::Extract(_)) || a == b
    }

    pub fn outcomes(&self) -> (Outcome, Outcome) {
        let ok = |p: &Party| p.status() == &Status::Accepted;
        match &self.finish {
            Finish::Auth { m } => (
                if ok(&self.alice) { Outcome::Accepted(m.clone()) } else { Outcome::Rejected },
                match self.bob.received().first() {
                    Some(r) if ok(&self.bob) => Outcome::Accepted(r.clone()),
                    _ => Outcome::Rejected,
                },
            ),
            Finish::NAuth { m, book, t } => {
                let a = if ok(&self.alice) { Outcome::Accepted(m.clone()) } else { Outcome::Rejected };
                let b = match (self.bob.plaintext_received(), self.bob.received().first()) {
                    (Some(m2), Some(s2)) if ok(&self.bob) => match nauth_encode(m2, book, *t) {
                        Ok(s) if &s == s2 => Outcome::Accepted(m2.clone()),
                        _ => Outcome::Rejected,
                    },
                    _ => Outcome::Rejected,
                };
                (a, b)
            }
            Finish::Key { z, book, t, w, key_len } => {
                let a = if ok(&self.alice) {
                    derive_key(w, z, *key_len).map_or(Outcome::Rejected, Outcome::Accepted)
                } else {
                    Outcome::Rejected
                };
                let b = match (self.bob.plaintext_received(), self.bob.received().first()) {
                    (Some(z2), Some(s2)) if ok(&self.bob) => match nauth_encode(z2, book, *t) {
                        Ok(s) if &s == s2 => derive_key(w, &z2.prefix(z.len()).expect("padded"), *key_len)
                            .map_or(Outcome::Rejected, Outcome::Accepted),
                        _ => Outcome::Rejected,
                    },
                    _ => Outcome::Rejected,
                };
                (a, b)
            }
            Finish::Extract(f) => f.outcomes(&self.alice, &self.bob),
        }
    }
}

/// Per-party seed sources for one trial.
pub struct Seeds {
    pub alice: SeedSupply,
    pub bob: SeedSupply,
}

impl Seeds {
    pub fn fresh(alice: TrialRng, bob: TrialRng, budget: Option<usize>) -> Self {
        Seeds {
            alice: SeedSupply::Fresh { rng: alice, budget },
            bob: SeedSupply::Fresh { rng: bob, budget },
        }
    }
}

fn auth_plan(params: &AuthParams, ell: usize, weight: usize, plaintext: Option<usize>) -> Result<Plan> {
    params.validate()?;
    if ell % params.t != 0 {
        return Err(Error::Config(format!(
            "authenticated length {ell} is not a multiple of t = {}",
            params.t
        )));
    }
    let phase = PhasePlan {
        fresh_seeds: true,
        rounds: (1..=params.t).collect(),
    };
    Ok(Plan {
        plaintext,
        stages: vec![StagePlan {
            sender: Role::Initiator,
            phases: vec![phase; ell / params.t],
            expected_weight: Some(weight),
        }],
        seed_len: params.seed_len()?,
        rows: 1,
        schedule: params.schedule()?,
    })
}

fn parties(
    plan: Plan,
    params: &AuthParams,
    w: &BitString,
    m: &BitString,
    seeds: Seeds,
) -> Result<(Party, Party)> {
    let plan = Arc::new(plan);
    let ext = params.seeded_spec()?;
    let a = Party::new(Role::Initiator, plan.clone(), ext.clone(), w.clone(), seeds.alice, vec![Some(m.clone())])?;
    let b = Party::new(Role::Responder, plan, ext, w.clone(), seeds.bob, vec![None])?;
    Ok((a, b))
}

/// A single-phase session for a `t`-bit message, and Alice's first frame.
/// The seed is given so the caller controls the randomness budget.
pub fn sauth_init(
    w: &BitString,
    m: &BitString,
    params: &AuthParams,
    fresh_seed: BitString,
) -> Result<(Party, Frame)> {
    if m.len() != params.t {
        return Err(Error::LengthMismatch(format!("message of {} bits, t = {}", m.len(), params.t)));
    }
    let need = params.seed_len()?;
    if let Some(b) = params.randomness_budget {
        if b < need {
            return Err(Error::BudgetExhausted { need, left: b });
        }
    }
    let plan = auth_plan(params, params.t, m.weight(), None)?;
    let mut a = Party::new(
        Role::Initiator,
        Arc::new(plan),
        params.seeded_spec()?,
        w.clone(),
        SeedSupply::Given(vec![fresh_seed]),
        vec![Some(m.clone())],
    )?;
    let first = a.start().pop().ok_or_else(|| Error::Config("no opening frame".into()))?;
    Ok((a, first))
}

/// Feeds one frame to a party and returns what it sends back.
pub fn sauth_step(state: &mut Party, incoming: &Frame) -> Vec<Frame> {
    state.receive(incoming)
}

/// `ell/t` phases carrying `m`; Bob knows `wt(m)` in advance.
pub fn auth_session(params: &AuthParams, w: &BitString, m: &BitString, seeds: Seeds) -> Result<Session> {
    let plan = auth_plan(params, m.len(), m.weight(), None)?;
    let (alice, bob) = parties(plan, params, w, m, seeds)?;
    Ok(Session {
        alice,
        bob,
        finish: Finish::Auth { m: m.clone() },
        extra_fresh: [0, 0],
        flags: Vec::new(),
    })
}

/// Blockwise edit encoding of `m` (padded to whole blocks), padded to a
/// multiple of `t`.
pub fn nauth_encode(m: &BitString, book: &EditCodebook, t: usize) -> Result<BitString> {
    let blocks = pad_to_multiple(m, book.lambda_m);
    let mut s = BitString::new();
    for i in (0..blocks.len()).step_by(book.lambda_m.max(1)) {
        s.extend_from(&edit_encode(&blocks.range(i, i + book.lambda_m)?, book)?);
    }
    Ok(pad_to_multiple(&s, t))
}

/// Plaintext `m`, then `Edit(m)` authenticated; Bob accepts `m'` iff the
/// received string equals `Edit(m')`.
pub fn nauth_session(
    params: &AuthParams,
    book: Arc<EditCodebook>,
    w: &BitString,
    m: &BitString,
    seeds: Seeds,
) -> Result<Session> {
    let s = nauth_encode(m, &book, params.t)?;
    if s.len() != params.ell {
        return Err(Error::Config(format!(
            "encoded message has {} bits, ell = {}",
            s.len(),
            params.ell
        )));
    }
    let plain = pad_to_multiple(m, book.lambda_m);
    let plan = auth_plan(params, s.len(), s.weight(), Some(plain.len()))?;
    let (alice, bob) = parties(plan, params, w, &s, seeds)?;
    let alice = alice.with_plaintext(plain)?;
    Ok(Session {
        alice,
        bob,
        finish: Finish::NAuth {
            m: m.clone(),
            book,
            t: params.t,
        },
        extra_fresh: [0, 0],
        flags: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KeyLength {
    /// `k - revealed - 2 log(1/eps)`, from the accounting ledger.
    Accounted { eps: f64 },
    /// A fixed length; reported as not backed by the ledger.
    Fixed { bits: usize },
}

/// The key length the ledger allows, or a configuration error when it is
/// not positive.
pub fn accounted_key_len(params: &AuthParams, spent: usize, eps: f64) -> Result<usize> {
    let len = params.k - spent as f64 - 2.0 * (1.0 / eps).log2();
    if len < 1.0 {
        return Err(Error::Config(format!(
            "key length k - spent - 2 log(1/eps) = {} - {spent} - {:.2} is not positive",
            params.k,
            2.0 * (1.0 / eps).log2()
        )));
    }
    Ok((len.floor() as usize).min(params.n))
}

/// `Ext(w, seed)` with the Toeplitz extractor; the seed fixes the length.
pub fn derive_key(w: &BitString, seed: &BitString, key_len: usize) -> Result<BitString> {
    if seed.len() + 1 != w.len() + key_len {
        return Err(Error::LengthMismatch(format!(
            "key seed of {} bits for a {key_len}-bit key from {} bits",
            seed.len(),
            w.len()
        )));
    }
    toeplitz_extract(w, seed, key_len)
}

/// Alice draws a Toeplitz key seed, authenticates it blockwise, and both
/// sides extract the key from `w`.
pub fn key_agreement_session(
    params: &AuthParams,
    book: Arc<EditCodebook>,
    w: &BitString,
    key_len: KeyLength,
    mut seeds: Seeds,
) -> Result<Session> {
    let probe = auth_plan(params, params.t, 0, None)?;
    let mut flags = Vec::new();
    let len = match key_len {
        KeyLength::Fixed { bits } => {
            flags.push("key-length-fixed".to_string());
            bits
        }
        KeyLength::Accounted { eps } => {
            // sized for the longest seed, 2n - 1 bits
            let per_phase = probe.honest_reveal_bound();
            let s_len = nauth_encode(&BitString::zeros(2 * params.n - 1), &book, params.t)?.len();
            accounted_key_len(params, per_phase * s_len / params.t, eps)?
        }
    };
    if len == 0 || len > params.n {
        return Err(Error::Config(format!("key length {len} outside 1..={}", params.n)));
    }
    let z_len = params.n + len - 1;
    let z = match &mut seeds.alice {
        SeedSupply::Fresh { rng, budget } => {
            if let Some(b) = budget {
                if *b < z_len {
                    return Err(Error::BudgetExhausted { need: z_len, left: *b });
                }
                *b -= z_len;
            }
            BitString::random(z_len, rng)
        }
        SeedSupply::Given(v) => v
            .pop()
            .ok_or_else(|| Error::Config("no key seed supplied".into()))?,
    };
    let s = nauth_encode(&z, &book, params.t)?;
    let mut p = params.clone();
    p.ell = s.len();
    let plain = pad_to_multiple(&z, book.lambda_m);
    let plan = auth_plan(&p, s.len(), s.weight(), Some(plain.len()))?;
    let (alice, bob) = parties(plan, &p, w, &s, seeds)?;
    let alice = alice.with_plaintext(plain)?;
    Ok(Session {
        alice,
        bob,
        finish: Finish::Key {
            z,
            book,
            t: params.t,
            w: w.clone(),
            key_len: len,
        },
        extra_fresh: [z_len, 0],
        flags,
    })
}
