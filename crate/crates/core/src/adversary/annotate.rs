//! Phase annotation of a transcript in Eve's view.
//!
//! Phases start when a party emits the seed of a new exchange. The
//! tampering operations of a stage are read off the cheapest alignment of
//! the bits the sender emitted against the bits the receiver was handed,
//! with not-yet-delivered sender bits free. A delivery is a challenge when
//! the prefix it must match is at least `2 * unit` bits longer than what
//! crossed the channel in the current phase plus what was seen earlier of
//! the tag it is checked against.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::{flip_alignment, AlignStep, BitString};
use crate::protocol::{FrameKind, Role, Slot};

use super::{Action, Transcript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    Insert,
    Delete,
    ZeroToOne,
    OneToZero,
}

impl OpKind {
    pub fn is_bad(self) -> bool {
        self != OpKind::OneToZero
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperOp {
    pub kind: OpKind,
    pub stage: usize,
    pub phase: usize,
    /// Event the operation is attributed to.
    pub seq: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeNote {
    pub seq: usize,
    pub to: Role,
    /// Per-row prefix length the delivery had to match.
    pub demanded: usize,
    /// Per-row bits known to Eve at that point.
    pub information: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseNote {
    pub index: usize,
    pub first_seq: usize,
    pub last_seq: usize,
    pub bad: bool,
    pub challenge: bool,
    pub ops: Vec<TamperOp>,
    pub challenges: Vec<ChallengeNote>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub trial: u64,
    pub strategy: String,
    pub phases: Vec<PhaseNote>,
    pub warnings: Vec<String>,
}

impl Annotation {
    pub fn bad_phases(&self) -> usize {
        self.phases.iter().filter(|p| p.bad).count()
    }

    pub fn challenge_phases(&self) -> usize {
        self.phases.iter().filter(|p| p.challenge).count()
    }
}

fn ix(r: Role) -> usize {
    match r {
        Role::Initiator => 0,
        Role::Responder => 1,
    }
}

pub fn annotate_phases(tr: &Transcript, complete: bool) -> Annotation {
    let plan = &tr.header.plan;
    let rows = plan.rows.max(1);
    let unit = plan.schedule.unit;
    let mut slots: Vec<Slot> = Vec::new();
    for s in 0..plan.stages.len() {
        slots.extend(plan.slots(s));
    }
    let stages = plan.stages.len();
    let mut warnings = Vec::new();
    if !complete {
        warnings.push("transcript ends without its end record; annotated up to the cut".to_string());
    }

    let mut phase = 1usize;
    let mut phase_bounds: Vec<(usize, usize)> = Vec::new();
    let mut seeds_out: [Vec<BitString>; 2] = [Vec::new(), Vec::new()];
    let mut seeds_in: [Vec<BitString>; 2] = [Vec::new(), Vec::new()];
    let mut emitted = [0usize; 2];
    let mut delivered = [0usize; 2];
    // per stage: (bit, phase, seq)
    let mut sent: Vec<Vec<(bool, usize, usize)>> = vec![Vec::new(); stages];
    let mut got: Vec<Vec<(bool, usize, usize)>> = vec![Vec::new(); stages];
    let mut current: HashMap<BitString, usize> = HashMap::new();
    let mut before: HashMap<BitString, usize> = HashMap::new();
    let mut challenges: Vec<(usize, ChallengeNote)> = Vec::new();

    for ev in &tr.events {
        let i = ix(ev.party);
        let f = &ev.frame;
        if ev.action == Action::Emit && f.kind == FrameKind::Seed && f.phase as usize > phase {
            for (k, v) in current.drain() {
                let e = before.entry(k).or_insert(0);
                *e = (*e).max(v);
            }
            phase = f.phase as usize;
        }
        while phase_bounds.len() < phase {
            phase_bounds.push((ev.seq, ev.seq));
        }
        phase_bounds[phase - 1].1 = ev.seq;
        match (ev.action, f.kind) {
            (_, FrameKind::Plaintext) => {}
            (Action::Emit, FrameKind::Seed) => seeds_out[i].push(f.payload.clone()),
            (Action::Deliver, FrameKind::Seed) => seeds_in[i].push(f.payload.clone()),
            (Action::Emit, kind) => {
                let g = emitted[i];
                emitted[i] += 1;
                let Some(slot) = slots.get(g) else { continue };
                if let Some(tag) = seeds_in[i].get(slot.phase as usize - 1) {
                    let e = current.entry(tag.clone()).or_insert(0);
                    *e = (*e).max(f.payload.len() / rows);
                }
                if let FrameKind::DataBit { bit } = kind {
                    if plan.stages[slot.stage].sender == ev.party {
                        sent[slot.stage].push((bit, phase, ev.seq));
                    }
                }
            }
            (Action::Deliver, kind) => {
                let g = delivered[i];
                delivered[i] += 1;
                let Some(slot) = slots.get(g) else { continue };
                if let Some(tag) = seeds_out[i].get(slot.phase as usize - 1) {
                    let demanded = f.payload.len() / rows;
                    let information = current.values().sum::<usize>() + before.get(tag).copied().unwrap_or(0);
                    if demanded >= information + 2 * unit {
                        challenges.push((
                            phase,
                            ChallengeNote {
                                seq: ev.seq,
                                to: ev.party,
                                demanded,
                                information,
                            },
                        ));
                    }
                }
                if let FrameKind::DataBit { bit } = kind {
                    if plan.stages[slot.stage].sender != ev.party {
                        got[slot.stage].push((bit, phase, ev.seq));
                    }
                }
            }
        }
    }
    if tr.capped {
        warnings.push("session stopped at the frame cap".into());
    }

    let mut ops = Vec::new();
    for s in 0..stages {
        let a = BitString::from_bits(sent[s].iter().map(|x| x.0));
        let b = BitString::from_bits(got[s].iter().map(|x| x.0));
        let (mut p, mut q) = (0, 0);
        for st in flip_alignment(&a, &b, true) {
            let op = |kind, at: (bool, usize, usize)| TamperOp {
                kind,
                stage: s,
                phase: at.1,
                seq: at.2,
            };
            match st {
                AlignStep::Keep => {
                    p += 1;
                    q += 1;
                }
                AlignStep::Flip => {
                    let k = if sent[s][p].0 { OpKind::OneToZero } else { OpKind::ZeroToOne };
                    ops.push(op(k, got[s][q]));
                    p += 1;
                    q += 1;
                }
                AlignStep::Insert(_) => {
                    ops.push(op(OpKind::Insert, got[s][q]));
                    q += 1;
                }
                AlignStep::Delete => {
                    ops.push(op(OpKind::Delete, sent[s][p]));
                    p += 1;
                }
            }
        }
    }

    let phases = phase_bounds
        .iter()
        .enumerate()
        .map(|(k, &(first_seq, last_seq))| {
            let index = k + 1;
            let my_ops: Vec<TamperOp> = ops.iter().filter(|o| o.phase == index).cloned().collect();
            let my_ch: Vec<ChallengeNote> = challenges
                .iter()
                .filter(|c| c.0 == index)
                .map(|c| c.1.clone())
                .collect();
            PhaseNote {
                index,
                first_seq,
                last_seq,
                bad: my_ops.iter().any(|o| o.kind.is_bad()),
                challenge: !my_ch.is_empty(),
                ops: my_ops,
                challenges: my_ch,
            }
        })
        .collect();
    Annotation {
        trial: tr.header.trial,
        strategy: tr.header.strategy.clone(),
        phases,
        warnings,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaAudit {
    pub bad_phases: usize,
    /// Pairs of consecutive bad phases with no challenge in either.
    pub violations: Vec<(usize, usize)>,
}

impl LemmaAudit {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that of every two consecutive bad phases at least one is a
/// challenge phase.
pub fn lemma_audit(a: &Annotation) -> LemmaAudit {
    let bad: Vec<&PhaseNote> = a.phases.iter().filter(|p| p.bad).collect();
    let violations = bad
        .windows(2)
        .filter(|w| !w[0].challenge && !w[1].challenge)
        .map(|w| (w[0].index, w[1].index))
        .collect();
    LemmaAudit {
        bad_phases: bad.len(),
        violations,
    }
}
