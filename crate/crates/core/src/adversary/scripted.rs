//! Scripted edit attacks on the data-bit stream of one stage.
//!
//! Eve turns the sender's stream into a target stream by an edit script.
//! Every delivery that needs no guessed bits is made as soon as it becomes
//! possible; when nothing is free she makes the delivery needing the fewest
//! guessed bits, preferring the receiver. What she knows of a tag is the
//! longest prefix of it that crossed the channel, keyed by the seed it was
//! computed from.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bits::{flip_alignment, AlignStep, BitString};
use crate::codes::EditCodebook;
use crate::error::{Error, Result};
use crate::protocol::{nauth_encode, pad_to_multiple, Frame, FrameKind, Plan, Role, Slot};
use crate::rng::TrialRng;

use super::{Delivery, EveStrategy};

/// An edit on the sender's stream, by position within the stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Edit {
    Flip { pos: usize },
    /// A literal bit placed before sender position `pos`.
    Insert { pos: usize, bit: bool },
    Delete { pos: usize },
}

/// Where a target bit comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Keep(usize),
    Flip(usize),
    Lit(bool),
}

/// The true tag prefix for a seed: `(seed, per-row length) -> payload`.
/// Only the calibration mode uses it.
pub type OracleFn = Arc<dyn Fn(&BitString, usize) -> BitString + Send + Sync>;

#[derive(Clone)]
pub enum GuessSource {
    Random,
    Zeros,
    /// Guessed bits are right with probability `p`; otherwise the last one
    /// is wrong.
    Oracle { p: f64, tags: OracleFn },
}

impl std::fmt::Debug for GuessSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GuessSource::Random => f.write_str("Random"),
            GuessSource::Zeros => f.write_str("Zeros"),
            GuessSource::Oracle { p, .. } => write!(f, "Oracle {{ p: {p} }}"),
        }
    }
}

#[derive(Clone, Debug)]
enum Plain {
    Forward,
    /// Replace the plaintext only.
    Replace(BitString),
    /// Replace the plaintext and retarget stage 0 onto its encoding.
    Forge { m2: BitString, book: Arc<EditCodebook>, t: usize },
}

#[derive(Clone, Debug)]
struct Known {
    per_row: usize,
    payload: BitString,
}

#[derive(Clone, Debug)]
pub struct ScriptedEve {
    name: String,
    stage: usize,
    edits: Vec<Edit>,
    literal: Option<BitString>,
    replay: Option<usize>,
    plain: Plain,
    guess: GuessSource,

    plan: Option<Plan>,
    slots: Vec<Slot>,
    stage_start: Vec<usize>,
    targets: Vec<Vec<Target>>,
    rng: Option<TrialRng>,
    emitted: [Vec<Frame>; 2],
    seeds_out: [Vec<BitString>; 2],
    seeds_in: [Vec<BitString>; 2],
    delivered: [usize; 2],
    known: HashMap<BitString, Known>,
}

fn ix(r: Role) -> usize {
    match r {
        Role::Initiator => 0,
        Role::Responder => 1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Data,
    Response,
    ForgedSeed,
}

impl ScriptedEve {
    /// Applies `edits` to the stream of stage 0.
    pub fn new(name: impl Into<String>, edits: Vec<Edit>) -> Self {
        ScriptedEve {
            name: name.into(),
            stage: 0,
            edits,
            literal: None,
            replay: None,
            plain: Plain::Forward,
            guess: GuessSource::Random,
            plan: None,
            slots: Vec::new(),
            stage_start: Vec::new(),
            targets: Vec::new(),
            rng: None,
            emitted: [Vec::new(), Vec::new()],
            seeds_out: [Vec::new(), Vec::new()],
            seeds_in: [Vec::new(), Vec::new()],
            delivered: [0, 0],
            known: HashMap::new(),
        }
    }

    pub fn on_stage(mut self, stage: usize) -> Self {
        self.stage = stage;
        self
    }

    pub fn with_guess(mut self, g: GuessSource) -> Self {
        self.guess = g;
        self
    }

    pub fn bitflip(pos: usize) -> Self {
        Self::new(format!("bitflip({pos})"), vec![Edit::Flip { pos }])
    }

    pub fn insert(bit: bool, pos: usize) -> Self {
        Self::new(format!("insert({},{pos})", bit as u8), vec![Edit::Insert { pos, bit }])
    }

    pub fn delete(pos: usize) -> Self {
        Self::new(format!("delete({pos})"), vec![Edit::Delete { pos }])
    }

    /// Flips positions `i` and `j`; weight-preserving when the bits differ.
    pub fn weight_preserving_swap(i: usize, j: usize) -> Self {
        Self::new(
            format!("swap({i},{j})"),
            vec![Edit::Flip { pos: i }, Edit::Flip { pos: j }],
        )
    }

    /// Hands the sender, instead of the receiver's current seed, the
    /// receiver's seed from `window` exchanges earlier.
    pub fn replay(window: usize) -> Self {
        let mut e = Self::new(format!("replay({window})"), Vec::new());
        e.replay = Some(window);
        e
    }

    /// Replaces the whole stream by `forged`.
    pub fn guess_challenges(forged: BitString, guess: GuessSource) -> Self {
        let mut e = Self::new(format!("guess({forged})"), Vec::new()).with_guess(guess);
        e.literal = Some(forged);
        e
    }

    /// Changes the plaintext to `m2` and leaves the rest alone.
    pub fn plaintext_swap(m2: BitString) -> Self {
        let mut e = Self::new(format!("plaintext({m2})"), Vec::new());
        e.plain = Plain::Replace(m2);
        e
    }

    /// Changes the plaintext to `m2` and edits the authenticated string
    /// into the encoding of `m2` with the fewest costly operations.
    pub fn consistent_forgery(m2: BitString, book: Arc<EditCodebook>, t: usize) -> Self {
        let mut e = Self::new(format!("forge({m2})"), Vec::new());
        e.plain = Plain::Forge { m2, book, t };
        e
    }

    fn plan(&self) -> &Plan {
        self.plan.as_ref().expect("begin sets the plan")
    }

    fn stage_len(&self, s: usize) -> usize {
        self.stage_start[s + 1] - self.stage_start[s]
    }

    fn build_targets(&self, len: usize) -> Result<Vec<Target>> {
        let mut out: Vec<Target> = Vec::with_capacity(len + 1);
        if let Some(lit) = &self.literal {
            out.extend(lit.iter().map(Target::Lit));
        } else {
            let mut inserts: Vec<(usize, bool)> = Vec::new();
            let mut flips = vec![false; len];
            let mut dels = vec![false; len];
            for e in &self.edits {
                match *e {
                    Edit::Flip { pos } | Edit::Delete { pos } if pos >= len => {
                        return Err(Error::Strategy(format!("edit at {pos} outside a {len}-bit stream")))
                    }
                    Edit::Insert { pos, .. } if pos > len => {
                        return Err(Error::Strategy(format!("insertion at {pos} outside a {len}-bit stream")))
                    }
                    Edit::Flip { pos } => flips[pos] ^= true,
                    Edit::Delete { pos } => dels[pos] = true,
                    Edit::Insert { pos, bit } => inserts.push((pos, bit)),
                }
            }
            for p in 0..=len {
                out.extend(inserts.iter().filter(|(q, _)| *q == p).map(|&(_, b)| Target::Lit(b)));
                if p < len && !dels[p] {
                    out.push(if flips[p] { Target::Flip(p) } else { Target::Keep(p) });
                }
            }
        }
        // a shortened stream is completed with zeros
        out.truncate(len);
        while out.len() < len {
            out.push(Target::Lit(false));
        }
        Ok(out)
    }

    fn sender(&self, g: usize) -> Role {
        self.plan().stages[self.slots[g].stage].sender
    }

    /// What is known of a tag, cut to `len` per row.
    fn known_prefix(&self, seed: &BitString, len: usize) -> (usize, Vec<BitString>) {
        let rows = self.plan().rows;
        match self.known.get(seed) {
            Some(k) => {
                let have = k.per_row.min(len);
                let parts = (0..rows)
                    .map(|r| k.payload.range(r * k.per_row, r * k.per_row + have).expect("within payload"))
                    .collect();
                (have, parts)
            }
            None => (0, vec![BitString::new(); rows]),
        }
    }

    fn cost(&self, seed: &BitString, len: usize) -> usize {
        let (have, _) = self.known_prefix(seed, len);
        self.plan().rows * (len - have)
    }

    fn forge_payload(&mut self, seed: &BitString, len: usize) -> BitString {
        let (have, parts) = self.known_prefix(seed, len);
        let rows = parts.len();
        let missing = len - have;
        let truth = match &self.guess {
            GuessSource::Oracle { p, tags } if missing > 0 => {
                let ok = self.rng.as_mut().expect("seeded").gen_bool(p.clamp(0.0, 1.0));
                let mut t = tags(seed, len);
                if !ok {
                    let last = t.len() - 1;
                    t.set(last, !t.get(last));
                }
                Some(t)
            }
            _ => None,
        };
        let mut out = BitString::new();
        for (r, part) in parts.into_iter().enumerate() {
            out.extend_from(&part);
            for i in 0..missing {
                let b = match (&truth, &self.guess) {
                    (Some(t), _) => t.get(r * len + have + i),
                    (None, GuessSource::Zeros) => false,
                    _ => self.rng.as_mut().expect("seeded").gen(),
                };
                out.push(b);
            }
        }
        debug_assert_eq!(out.len(), rows * len);
        out
    }

    fn learn(&mut self, seed: &BitString, payload: &BitString) {
        let rows = self.plan().rows;
        let per_row = payload.len() / rows;
        let better = self.known.get(seed).is_none_or(|k| k.per_row < per_row);
        if better {
            self.known.insert(
                seed.clone(),
                Known {
                    per_row,
                    payload: payload.clone(),
                },
            );
        }
    }

    /// The candidate deliveries right now, with their guessed-bit cost.
    fn candidates(&self) -> Vec<(usize, Kind, Role)> {
        let mut out = Vec::new();
        let plan = self.plan();
        for r in [Role::Initiator, Role::Responder] {
            let (i, g) = (ix(r), self.delivered[ix(r)]);
            // seeds
            let e = self.seeds_in[i].len();
            if self.seeds_out[i].len() > e && self.seeds_out[1 - i].len() <= e {
                out.push((usize::MAX / 2, Kind::ForgedSeed, r));
            }
            if g >= self.slots.len() || self.emitted[i].len() < g {
                continue;
            }
            let slot = self.slots[g];
            if self.seeds_in[i].len() < slot.phase as usize || self.seeds_out[i].len() < slot.phase as usize {
                continue;
            }
            let own = &self.seeds_out[i][slot.phase as usize - 1];
            if self.sender(g) == r {
                if self.emitted[i].len() == g + 1 {
                    let len = plan.schedule.c3(slot.round);
                    out.push((self.cost(own, len), Kind::Response, r));
                }
            } else if self.emitted[i].len() == g {
                if let Some(b) = self.target_bit(g) {
                    let len = plan.schedule.data_len(slot.round, b);
                    out.push((self.cost(own, len), Kind::Data, r));
                }
            }
        }
        out
    }

    fn target_bit(&self, g: usize) -> Option<bool> {
        let s = self.slots[g].stage;
        let q = g - self.stage_start[s];
        let sender = ix(self.plan().stages[s].sender);
        let sent = |p: usize| match self.emitted[sender].get(self.stage_start[s] + p)?.kind {
            FrameKind::DataBit { bit } => Some(bit),
            _ => None,
        };
        match self.targets[s][q] {
            Target::Keep(p) => sent(p),
            Target::Flip(p) => sent(p).map(|b| !b),
            Target::Lit(b) => Some(b),
        }
    }

    /// Seeds that can be forwarded, as `(recipient, seed)`.
    fn seed_forwards(&self) -> Vec<Delivery> {
        let mut out = Vec::new();
        for r in [Role::Initiator, Role::Responder] {
            let i = ix(r);
            let e = self.seeds_in[i].len();
            if self.seeds_out[i].len() <= e || self.seeds_out[1 - i].len() <= e {
                continue;
            }
            let mut seed = self.seeds_out[1 - i][e].clone();
            if let Some(w) = self.replay {
                let stage = self.exchange_stage(e + 1);
                if self.plan().stages[stage].sender == r && e >= w {
                    seed = self.seeds_out[1 - i][e - w].clone();
                }
            }
            out.push(Delivery {
                to: r,
                frame: Frame::new(r.peer(), FrameKind::Seed, e as u32 + 1, 0, seed),
            });
        }
        out
    }

    fn exchange_stage(&self, e: usize) -> usize {
        self.slots
            .iter()
            .find(|s| s.phase as usize == e)
            .map_or(0, |s| s.stage)
    }

    fn perform(&mut self, kind: Kind, r: Role) -> Delivery {
        let i = ix(r);
        if kind == Kind::ForgedSeed {
            let len = self.plan().seed_len;
            let e = self.seeds_in[i].len();
            let seed = BitString::random(len, self.rng.as_mut().expect("seeded"));
            self.seeds_in[i].push(seed.clone());
            return Delivery {
                to: r,
                frame: Frame::new(r.peer(), FrameKind::Seed, e as u32 + 1, 0, seed),
            };
        }
        let g = self.delivered[i];
        let slot = self.slots[g];
        let own = self.seeds_out[i][slot.phase as usize - 1].clone();
        self.delivered[i] += 1;
        let sched = self.plan().schedule.clone();
        let (fk, len) = match kind {
            Kind::Response => (FrameKind::Response, sched.c3(slot.round)),
            _ => {
                let b = self.target_bit(g).expect("candidate had a bit");
                (FrameKind::DataBit { bit: b }, sched.data_len(slot.round, b))
            }
        };
        let payload = self.forge_payload(&own, len);
        Delivery {
            to: r,
            frame: Frame::new(r.peer(), fk, slot.phase, slot.round as u32, payload),
        }
    }

    /// Every delivery that is possible now and costs nothing.
    fn flush(&mut self) -> Vec<Delivery> {
        let mut out = Vec::new();
        loop {
            let seeds = self.seed_forwards();
            if !seeds.is_empty() {
                for d in seeds {
                    self.seeds_in[ix(d.to)].push(d.frame.payload.clone());
                    out.push(d);
                }
                continue;
            }
            let free = self.candidates().into_iter().find(|c| c.0 == 0);
            match free {
                Some((_, k, r)) => out.push(self.perform(k, r)),
                None => return out,
            }
        }
    }
}

impl EveStrategy for ScriptedEve {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin(&mut self, plan: &Plan, seed: u64) -> Result<()> {
        if self.stage >= plan.stages.len() {
            return Err(Error::Strategy(format!(
                "stage {} outside a {}-stage plan",
                self.stage,
                plan.stages.len()
            )));
        }
        self.plan = Some(plan.clone());
        self.slots.clear();
        self.stage_start = vec![0];
        for s in 0..plan.stages.len() {
            self.slots.extend(plan.slots(s));
            self.stage_start.push(self.slots.len());
        }
        self.targets = (0..plan.stages.len())
            .map(|s| (0..self.stage_len(s)).map(Target::Keep).collect())
            .collect();
        let own = self.build_targets(self.stage_len(self.stage))?;
        self.targets[self.stage] = own;
        self.rng = Some(TrialRng::seed_from_u64(seed));
        self.emitted = [Vec::new(), Vec::new()];
        self.seeds_out = [Vec::new(), Vec::new()];
        self.seeds_in = [Vec::new(), Vec::new()];
        self.delivered = [0, 0];
        self.known.clear();
        Ok(())
    }

    fn on_emit(&mut self, from: Role, frame: &Frame) -> Vec<Delivery> {
        let i = ix(from);
        match frame.kind {
            FrameKind::Plaintext => {
                let mut f = frame.clone();
                if let Plain::Replace(m2) = &self.plain {
                    f.payload = m2.clone();
                }
                if let Plain::Forge { m2, book, t } = &self.plain {
                    let stage = self.stage;
                    let s = nauth_encode(&frame.payload, book, *t);
                    let s2 = nauth_encode(m2, book, *t);
                    if let (Ok(s), Ok(s2)) = (s, s2) {
                        let steps = flip_alignment(&s, &s2, false);
                        let mut tg = Vec::new();
                        let mut p = 0;
                        for st in steps {
                            match st {
                                AlignStep::Keep => {
                                    tg.push(Target::Keep(p));
                                    p += 1;
                                }
                                AlignStep::Flip => {
                                    tg.push(Target::Flip(p));
                                    p += 1;
                                }
                                AlignStep::Insert(b) => tg.push(Target::Lit(b)),
                                AlignStep::Delete => p += 1,
                            }
                        }
                        let len = self.stage_len(stage);
                        tg.truncate(len);
                        while tg.len() < len {
                            tg.push(Target::Lit(false));
                        }
                        self.targets[stage] = tg;
                        f.payload = pad_to_multiple(m2, book.lambda_m);
                    }
                }
                vec![Delivery { to: from.peer(), frame: f }]
            }
            FrameKind::Seed => {
                self.seeds_out[i].push(frame.payload.clone());
                self.flush()
            }
            FrameKind::DataBit { .. } | FrameKind::Response => {
                let g = self.emitted[i].len();
                if let Some(slot) = self.slots.get(g).copied() {
                    if let Some(seed) = self.seeds_in[i].get(slot.phase as usize - 1).cloned() {
                        self.learn(&seed, &frame.payload);
                    }
                }
                self.emitted[i].push(frame.clone());
                self.flush()
            }
        }
    }

    fn on_idle(&mut self) -> Vec<Delivery> {
        let best = self
            .candidates()
            .into_iter()
            .min_by_key(|&(cost, kind, r)| (cost, kind, r == Role::Initiator));
        let Some((_, kind, r)) = best else {
            return Vec::new();
        };
        let mut out = vec![self.perform(kind, r)];
        out.extend(self.flush());
        out
    }
}
