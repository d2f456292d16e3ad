//! The party state machine shared by every challenge-round protocol.
//!
//! A run is a [`Plan`]: an optional plaintext from the initiator, then
//! stages. In each stage one party (the sender) authenticates a bit string
//! to the other, one data-bit frame per round. Phases inside a stage may
//! start with a fresh seed exchange. Each party keeps two tags:
//! `own = Ext(w, own seed)` to verify what it receives and
//! `peer = Ext(w, peer seed)` to answer with.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::extractors::{PrefixStream, SeededExtractorSpec};
use crate::protocol::frame::{Frame, FrameKind, Role};
use crate::protocol::schedule::ChallengeSchedule;
use crate::rng::TrialRng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub fresh_seeds: bool,
    /// Schedule indices of the rounds, in order.
    pub rounds: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub sender: Role,
    pub phases: Vec<PhasePlan>,
    /// Weight the receiver checks once the stage is complete.
    pub expected_weight: Option<usize>,
}

impl StagePlan {
    pub fn len(&self) -> usize {
        self.phases.iter().map(|p| p.rounds.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    /// Length of the initiator's plaintext, if one is sent.
    pub plaintext: Option<usize>,
    pub stages: Vec<StagePlan>,
    /// Bits per seed frame (all rows).
    pub seed_len: usize,
    /// Rows per tag; seeds split into this many equal rows.
    pub rows: usize,
    pub schedule: ChallengeSchedule,
}

/// Where a data position sits: `(stage, seed exchange number, round)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub stage: usize,
    pub phase: u32,
    pub round: usize,
}

impl Plan {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.seed_len % self.rows != 0 {
            return Err(Error::Config(format!(
                "seed of {} bits does not split into {} rows",
                self.seed_len, self.rows
            )));
        }
        let first_fresh = self
            .stages
            .iter()
            .flat_map(|s| s.phases.first())
            .next()
            .is_none_or(|p| p.fresh_seeds);
        if !first_fresh {
            return Err(Error::Config("the first phase must exchange seeds".into()));
        }
        for s in &self.stages {
            for p in &s.phases {
                if let Some(&bad) = p.rounds.iter().find(|&&r| r == 0 || r > self.schedule.rounds) {
                    return Err(Error::Config(format!(
                        "round {bad} outside the schedule's 1..={}",
                        self.schedule.rounds
                    )));
                }
            }
        }
        Ok(())
    }

    /// Data slots of stage `stage`, in order.
    pub fn slots(&self, stage: usize) -> Vec<Slot> {
        let mut phase = 0u32;
        let mut out = Vec::new();
        for (si, s) in self.stages.iter().enumerate() {
            for p in &s.phases {
                if p.fresh_seeds {
                    phase += 1;
                }
                if si == stage {
                    out.extend(p.rounds.iter().map(|&round| Slot { stage, phase, round }));
                }
            }
        }
        out
    }

    pub fn seed_exchanges(&self) -> usize {
        self.stages
            .iter()
            .flat_map(|s| &s.phases)
            .filter(|p| p.fresh_seeds)
            .count()
    }

    pub fn total_rounds(&self) -> usize {
        self.stages.iter().map(StagePlan::len).sum()
    }

    /// Frames on the wire in an honest run.
    pub fn honest_frames(&self) -> usize {
        self.plaintext.map_or(0, |_| 1) + 2 * self.seed_exchanges() + 2 * self.total_rounds()
    }

    /// Upper bound on the W-derived bits both parties reveal in an honest
    /// run, per row: data frames at `C2` and responses at `C3`.
    pub fn honest_reveal_bound(&self) -> usize {
        self.stages
            .iter()
            .flat_map(|s| &s.phases)
            .flat_map(|p| &p.rounds)
            .map(|&i| self.schedule.c2(i) + self.schedule.c3(i))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum Status {
    Running,
    Accepted,
    Aborted(String),
}

impl Status {
    pub fn is_running(&self) -> bool {
        matches!(self, Status::Running)
    }

    pub fn short(&self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Accepted => "accepted",
            Status::Aborted(_) => "aborted",
        }
    }
}

/// One party's own count of what it spent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyLedger {
    /// Local random bits drawn for seeds.
    pub fresh_bits: usize,
    pub seed_bits_sent: usize,
    /// Longest prefix (per row) sent of each tag, keyed by the seed it came from.
    pub revealed: BTreeMap<BitString, usize>,
    pub rows: usize,
}

impl PartyLedger {
    pub fn w_bits_revealed(&self) -> usize {
        self.rows * self.revealed.values().sum::<usize>()
    }

    fn reveal(&mut self, tag: &BitString, len: usize) {
        let e = self.revealed.entry(tag.clone()).or_insert(0);
        *e = (*e).max(len);
    }
}

pub enum SeedSupply {
    /// Seeds drawn from local randomness, at most `budget` bits in total.
    Fresh { rng: TrialRng, budget: Option<usize> },
    /// Seeds fixed in advance, one per exchange.
    Given(Vec<BitString>),
}

/// Produces the message for a sending stage from what was received in
/// earlier stages.
pub type MessageFn = Box<dyn FnMut(usize, &[BitString]) -> Result<BitString> + Send>;

/// `D` rows of `Ext(w, seed row)`.
pub struct Tag {
    rows: Vec<Box<dyn PrefixStream>>,
}

impl Tag {
    pub fn new(ext: &SeededExtractorSpec, w: &BitString, seed: &BitString, rows: usize) -> Result<Self> {
        let width = seed.len() / rows;
        let rows = (0..rows)
            .map(|r| ext.stream(w, &seed.range(r * width, (r + 1) * width)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tag { rows })
    }

    /// Row prefixes of length `s`, joined.
    pub fn prefix(&mut self, s: usize) -> Result<BitString> {
        let mut out = BitString::new();
        for r in &mut self.rows {
            out.extend_from(&r.prefix(s)?);
        }
        Ok(out)
    }

    pub fn matches(&mut self, payload: &BitString, s: usize) -> Result<bool> {
        if payload.len() != s * self.rows.len() {
            return Ok(false);
        }
        for (k, r) in self.rows.iter_mut().enumerate() {
            if !r.matches_prefix(&payload.range(k * s, (k + 1) * s)?)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub struct Party {
    role: Role,
    plan: Arc<Plan>,
    ext: SeededExtractorSpec,
    w: BitString,
    status: Status,
    seeds: SeedSupply,
    messages: Vec<Option<BitString>>,
    derive: Option<MessageFn>,
    plaintext_out: Option<BitString>,

    stage: usize,
    phase: usize,
    round_pos: usize,
    seed_no: u32,
    need_plaintext: bool,
    need_peer_seed: bool,
    own_tag: Option<Tag>,
    peer_tag: Option<Tag>,
    own_seed: Option<BitString>,
    peer_seed: Option<BitString>,
    received: Vec<BitString>,
    plaintext_in: Option<BitString>,
    ledger: PartyLedger,
    started: bool,
}

impl Party {
    /// `messages[s]` is the bit string to send in stage `s` when this party
    /// is its sender; `None` defers to `derive`.
    pub fn new(
        role: Role,
        plan: Arc<Plan>,
        ext: SeededExtractorSpec,
        w: BitString,
        seeds: SeedSupply,
        messages: Vec<Option<BitString>>,
    ) -> Result<Self> {
        plan.validate()?;
        if ext.m < plan.schedule.max_len() {
            return Err(Error::Config(format!(
                "extractor output {} is shorter than the schedule's {}",
                ext.m,
                plan.schedule.max_len()
            )));
        }
        let exchanges = plan.seed_exchanges();
        match &seeds {
            SeedSupply::Fresh { budget: Some(b), .. } if exchanges * plan.seed_len > *b => {
                return Err(Error::BudgetExhausted {
                    need: exchanges * plan.seed_len,
                    left: *b,
                });
            }
            SeedSupply::Given(v) if v.len() != exchanges || v.iter().any(|s| s.len() != plan.seed_len) => {
                return Err(Error::LengthMismatch(format!(
                    "{} given seeds for {exchanges} exchanges of {} bits",
                    v.len(),
                    plan.seed_len
                )));
            }
            _ => {}
        }
        for (s, stage) in plan.stages.iter().enumerate() {
            if stage.sender == role {
                if let Some(Some(m)) = messages.get(s) {
                    if m.len() != stage.len() {
                        return Err(Error::LengthMismatch(format!(
                            "stage {s} sends {} bits, message has {}",
                            stage.len(),
                            m.len()
                        )));
                    }
                }
            }
        }
        let rows = plan.rows;
        Ok(Party {
            role,
            need_plaintext: role == Role::Responder && plan.plaintext.is_some(),
            plan,
            ext,
            w,
            status: Status::Running,
            seeds,
            messages,
            derive: None,
            plaintext_out: None,
            stage: 0,
            phase: 0,
            round_pos: 0,
            seed_no: 0,
            need_peer_seed: false,
            own_tag: None,
            peer_tag: None,
            own_seed: None,
            peer_seed: None,
            received: Vec::new(),
            plaintext_in: None,
            ledger: PartyLedger {
                rows,
                ..PartyLedger::default()
            },
            started: false,
        })
    }

    pub fn with_derive(mut self, f: MessageFn) -> Self {
        self.derive = Some(f);
        self
    }

    /// The initiator's plaintext frame, sent before the first seed.
    pub fn with_plaintext(mut self, m: BitString) -> Result<Self> {
        if self.role != Role::Initiator || self.plan.plaintext != Some(m.len()) {
            return Err(Error::Config("plaintext does not fit the plan".into()));
        }
        self.plaintext_out = Some(m);
        Ok(self)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn ledger(&self) -> &PartyLedger {
        &self.ledger
    }

    /// Bits received as the receiver of each completed stage, by stage.
    pub fn received(&self) -> &[BitString] {
        &self.received
    }

    pub fn plaintext_received(&self) -> Option<&BitString> {
        self.plaintext_in.as_ref()
    }

    pub fn abort(&mut self, reason: impl Into<String>) {
        if self.status.is_running() {
            self.status = Status::Aborted(reason.into());
        }
    }

    /// First frames: the plaintext if any, then the first seed.
    pub fn start(&mut self) -> Vec<Frame> {
        if self.started {
            return Vec::new();
        }
        self.started = true;
        let mut out = Vec::new();
        if let Some(m) = &self.plaintext_out {
            out.push(Frame::new(self.role, FrameKind::Plaintext, 0, 0, m.clone()));
        }
        if self.plan.stages.iter().all(StagePlan::is_empty) {
            self.status = Status::Accepted;
            return out;
        }
        if let Err(e) = self.enter_phase(&mut out) {
            self.abort(e.to_string());
        }
        out
    }

    /// Processes one incoming frame in arrival order.
    pub fn receive(&mut self, f: &Frame) -> Vec<Frame> {
        let mut out = Vec::new();
        if !self.status.is_running() {
            return out;
        }
        if let Err(e) = self.handle(f, &mut out) {
            self.abort(e.to_string());
        }
        out
    }

    fn tamper(msg: String) -> Error {
        Error::Strategy(msg)
    }

    fn handle(&mut self, f: &Frame, out: &mut Vec<Frame>) -> Result<()> {
        if f.sender() != self.role.peer() {
            return Err(Self::tamper("frame from the wrong direction".into()));
        }
        if self.need_plaintext {
            if f.kind != FrameKind::Plaintext || (f.phase, f.round) != (0, 0) || Some(f.payload.len()) != self.plan.plaintext {
                return Err(Self::tamper("expected the plaintext frame".into()));
            }
            self.plaintext_in = Some(f.payload.clone());
            self.need_plaintext = false;
            return Ok(());
        }
        if self.need_peer_seed {
            if f.kind != FrameKind::Seed || (f.phase, f.round) != (self.seed_no, 0) || f.payload.len() != self.plan.seed_len {
                return Err(Self::tamper(format!("expected seed {}", self.seed_no)));
            }
            self.peer_tag = Some(Tag::new(&self.ext, &self.w, &f.payload, self.plan.rows)?);
            self.peer_seed = Some(f.payload.clone());
            self.need_peer_seed = false;
            if self.is_sender() {
                self.send_data(out)?;
            }
            return Ok(());
        }
        let round = self.round();
        let sched = &self.plan.schedule;
        if self.is_sender() {
            let len = sched.c3(round);
            if f.kind != FrameKind::Response || (f.phase, f.round as usize) != (self.seed_no, round) {
                return Err(Self::tamper(format!("expected the response to round {round}")));
            }
            if !self.own_tag.as_mut().expect("own tag after seeds").matches(&f.payload, len)? {
                return Err(Self::tamper(format!("response to round {round} failed verification")));
            }
            self.advance(out)
        } else {
            let FrameKind::DataBit { bit } = f.kind else {
                return Err(Self::tamper(format!("expected data for round {round}")));
            };
            if (f.phase, f.round as usize) != (self.seed_no, round) {
                return Err(Self::tamper(format!("data frame indices do not match round {round}")));
            }
            let len = sched.data_len(round, bit);
            if !self.own_tag.as_mut().expect("own tag after seeds").matches(&f.payload, len)? {
                return Err(Self::tamper(format!("data for round {round} failed verification")));
            }
            if self.received.len() == self.stage {
                self.received.push(BitString::new());
            }
            self.received[self.stage].push(bit);
            let resp_len = sched.c3(round);
            let payload = self.peer_tag.as_mut().expect("peer tag after seeds").prefix(resp_len)?;
            self.ledger.reveal(self.peer_seed.as_ref().expect("peer seed"), resp_len);
            out.push(Frame::new(self.role, FrameKind::Response, self.seed_no, round as u32, payload));
            self.advance(out)
        }
    }

    fn stage_plan(&self) -> &StagePlan {
        &self.plan.stages[self.stage]
    }

    fn is_sender(&self) -> bool {
        self.stage_plan().sender == self.role
    }

    fn round(&self) -> usize {
        self.stage_plan().phases[self.phase].rounds[self.round_pos]
    }

    fn position(&self) -> usize {
        let s = self.stage_plan();
        s.phases[..self.phase].iter().map(|p| p.rounds.len()).sum::<usize>() + self.round_pos
    }

    fn enter_phase(&mut self, out: &mut Vec<Frame>) -> Result<()> {
        // skip empty phases and stages
        loop {
            if self.stage == self.plan.stages.len() {
                self.status = Status::Accepted;
                return Ok(());
            }
            let plan = self.plan.clone();
            let s = &plan.stages[self.stage];
            if self.phase == s.phases.len() {
                self.finish_stage()?;
                continue;
            }
            let p = &s.phases[self.phase];
            if p.fresh_seeds && !self.need_peer_seed && self.round_pos == 0 && !self.seeded_this_phase() {
                self.new_seed(out)?;
            }
            if p.rounds.is_empty() {
                self.phase += 1;
                continue;
            }
            break;
        }
        if self.is_sender() && !self.need_peer_seed {
            self.send_data(out)?;
        }
        Ok(())
    }

    fn seeded_this_phase(&self) -> bool {
        // seed numbers count exchanges; the current phase has been seeded once
        // the count reaches its index
        let mut n = 0u32;
        for (si, s) in self.plan.stages.iter().enumerate() {
            for (pi, p) in s.phases.iter().enumerate() {
                if p.fresh_seeds {
                    n += 1;
                }
                if si == self.stage && pi == self.phase {
                    return self.seed_no >= n;
                }
            }
        }
        true
    }

    fn new_seed(&mut self, out: &mut Vec<Frame>) -> Result<()> {
        let len = self.plan.seed_len;
        let seed = match &mut self.seeds {
            SeedSupply::Fresh { rng, budget } => {
                if let Some(b) = budget {
                    if *b < len {
                        return Err(Error::BudgetExhausted { need: len, left: *b });
                    }
                    *b -= len;
                }
                self.ledger.fresh_bits += len;
                BitString::random(len, rng as &mut dyn RngCore)
            }
            SeedSupply::Given(v) => v[self.seed_no as usize].clone(),
        };
        self.seed_no += 1;
        self.own_tag = Some(Tag::new(&self.ext, &self.w, &seed, self.plan.rows)?);
        self.own_seed = Some(seed.clone());
        self.ledger.seed_bits_sent += len;
        self.need_peer_seed = true;
        out.push(Frame::new(self.role, FrameKind::Seed, self.seed_no, 0, seed));
        Ok(())
    }

    fn message_bit(&mut self, pos: usize) -> Result<bool> {
        if self.messages.len() <= self.stage {
            self.messages.resize(self.stage + 1, None);
        }
        if self.messages[self.stage].is_none() {
            let f = self
                .derive
                .as_mut()
                .ok_or_else(|| Error::Config(format!("no message for stage {}", self.stage)))?;
            let m = f(self.stage, &self.received)?;
            if m.len() != self.plan.stages[self.stage].len() {
                return Err(Error::LengthMismatch(format!(
                    "derived message of {} bits for a stage of {}",
                    m.len(),
                    self.plan.stages[self.stage].len()
                )));
            }
            self.messages[self.stage] = Some(m);
        }
        Ok(self.messages[self.stage].as_ref().expect("set above").get(pos))
    }

    fn send_data(&mut self, out: &mut Vec<Frame>) -> Result<()> {
        let round = self.round();
        let bit = self.message_bit(self.position())?;
        let len = self.plan.schedule.data_len(round, bit);
        let payload = self.peer_tag.as_mut().expect("peer tag after seeds").prefix(len)?;
        self.ledger.reveal(self.peer_seed.as_ref().expect("peer seed"), len);
        out.push(Frame::new(self.role, FrameKind::DataBit { bit }, self.seed_no, round as u32, payload));
        Ok(())
    }

    fn finish_stage(&mut self) -> Result<()> {
        let plan = self.plan.clone();
        let s = &plan.stages[self.stage];
        if s.sender != self.role {
            if self.received.len() == self.stage {
                self.received.push(BitString::new());
            }
            if let Some(wt) = s.expected_weight {
                let got = self.received[self.stage].weight();
                if got != wt {
                    return Err(Self::tamper(format!(
                        "stage {} received weight {got}, expected {wt}",
                        self.stage
                    )));
                }
            }
        } else if self.received.len() == self.stage {
            self.received.push(BitString::new());
        }
        self.stage += 1;
        self.phase = 0;
        self.round_pos = 0;
        Ok(())
    }

    fn advance(&mut self, out: &mut Vec<Frame>) -> Result<()> {
        self.round_pos += 1;
        if self.round_pos == self.stage_plan().phases[self.phase].rounds.len() {
            self.round_pos = 0;
            self.phase += 1;
        }
        self.enter_phase(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::schedule::schedule_build;
    use crate::rng::derive_rng;

    fn toy_plan() -> Arc<Plan> {
        let schedule = schedule_build(2, 1, 2, 64).unwrap();
        let phase = PhasePlan {
            fresh_seeds: true,
            rounds: vec![1, 2],
        };
        Arc::new(Plan {
            plaintext: None,
            stages: vec![StagePlan {
                sender: Role::Initiator,
                phases: vec![phase.clone(), phase],
                expected_weight: Some(2),
            }],
            seed_len: 127,
            rows: 1,
            schedule,
        })
    }

    fn pair(msg: &str) -> (Party, Party) {
        let plan = toy_plan();
        let ext = SeededExtractorSpec::toeplitz(64, 64, 64.0).unwrap();
        let w = BitString::random(64, &mut derive_rng(1, "w", 0));
        let fresh = |c| SeedSupply::Fresh {
            rng: derive_rng(1, "seed", c),
            budget: None,
        };
        let a = Party::new(Role::Initiator, plan.clone(), ext.clone(), w.clone(), fresh(0), vec![Some(msg.parse().unwrap())]).unwrap();
        let b = Party::new(Role::Responder, plan, ext, w, fresh(1), vec![None]).unwrap();
        (a, b)
    }

    /// Delivers every frame straight through until both sides go quiet.
    fn relay(a: &mut Party, b: &mut Party) -> Vec<Frame> {
        let mut log = Vec::new();
        let mut to_b: Vec<Frame> = a.start();
        let mut to_a: Vec<Frame> = b.start();
        while !(to_a.is_empty() && to_b.is_empty()) {
            let mut next_a = Vec::new();
            let mut next_b = Vec::new();
            for f in to_b.drain(..) {
                log.push(f.clone());
                next_a.extend(b.receive(&f));
            }
            for f in to_a.drain(..) {
                log.push(f.clone());
                next_b.extend(a.receive(&f));
            }
            to_a = next_a;
            to_b = next_b;
        }
        log
    }

    #[test]
    fn honest_relay_accepts() {
        let (mut a, mut b) = pair("0110");
        let log = relay(&mut a, &mut b);
        assert_eq!(a.status(), &Status::Accepted);
        assert_eq!(b.status(), &Status::Accepted);
        assert_eq!(b.received()[0], "0110".parse().unwrap());
        assert_eq!(log.len(), a.plan().honest_frames());
        assert_eq!(a.ledger().fresh_bits, 2 * 127);
        // phase 1 sends 0,1 (C1[1] = 2, C2[2] = 32); phase 2 sends 1,0 (C2[1] = 4, C1[2] = 16)
        assert_eq!(a.ledger().w_bits_revealed(), 32 + 16);
        assert_eq!(b.ledger().w_bits_revealed(), 2 * 64);
    }

    #[test]
    fn mismatched_flag_length_aborts() {
        let (mut a, mut b) = pair("0110");
        let sa = a.start();
        let sb = b.start();
        b.receive(&sa[0]);
        let first = a.receive(&sb[0]);
        let FrameKind::DataBit { bit } = first[0].kind else { panic!() };
        assert!(!bit);
        let mut forged = first[0].clone();
        forged.kind = FrameKind::DataBit { bit: true };
        b.receive(&forged);
        assert!(matches!(b.status(), Status::Aborted(_)));
    }

    #[test]
    fn one_flipped_prefix_bit_aborts() {
        let (mut a, mut b) = pair("0110");
        let sa = a.start();
        let sb = b.start();
        b.receive(&sa[0]);
        let mut first = a.receive(&sb[0]).remove(0);
        let v = first.payload.get(0);
        first.payload.set(0, !v);
        assert!(b.receive(&first).is_empty());
        assert!(matches!(b.status(), Status::Aborted(_)));
    }

    #[test]
    fn budget_is_checked_up_front() {
        let plan = toy_plan();
        let ext = SeededExtractorSpec::toeplitz(64, 64, 64.0).unwrap();
        let r = Party::new(
            Role::Initiator,
            plan,
            ext,
            BitString::zeros(64),
            SeedSupply::Fresh {
                rng: derive_rng(0, "s", 0),
                budget: Some(0),
            },
            vec![None],
        );
        assert!(matches!(r, Err(Error::BudgetExhausted { .. })));
    }
}
