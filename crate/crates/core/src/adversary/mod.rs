//! The adversarial channel. Every frame a party emits goes to Eve, and
//! parties only ever receive what Eve delivers.

pub mod annotate;
pub mod scripted;

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{Frame, Outcome, Plan, Role, Session, Status};

pub use annotate::{annotate_phases, lemma_audit, Annotation, LemmaAudit, OpKind, PhaseNote, TamperOp};
pub use scripted::{Edit, GuessSource, OracleFn, ScriptedEve, Target};

/// A frame Eve hands to a party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub to: Role,
    pub frame: Frame,
}

pub trait EveStrategy: Send {
    fn name(&self) -> String;

    /// Called before the parties start. `seed` drives any randomness.
    fn begin(&mut self, plan: &Plan, seed: u64) -> Result<()>;

    /// Sees a frame a party emitted; returns frames to deliver now.
    fn on_emit(&mut self, from: Role, frame: &Frame) -> Vec<Delivery>;

    /// Both delivery queues are empty. Returning nothing ends the session.
    fn on_idle(&mut self) -> Vec<Delivery>;
}

/// Forwards every frame unchanged.
#[derive(Clone, Debug, Default)]
pub struct PassiveEve;

impl EveStrategy for PassiveEve {
    fn name(&self) -> String {
        "passive".into()
    }

    fn begin(&mut self, _: &Plan, _: u64) -> Result<()> {
        Ok(())
    }

    fn on_emit(&mut self, from: Role, frame: &Frame) -> Vec<Delivery> {
        vec![Delivery {
            to: from.peer(),
            frame: frame.clone(),
        }]
    }

    fn on_idle(&mut self) -> Vec<Delivery> {
        Vec::new()
    }
}

/// Delivers nothing.
#[derive(Clone, Debug, Default)]
pub struct DropEve;

impl EveStrategy for DropEve {
    fn name(&self) -> String {
        "drop-all".into()
    }

    fn begin(&mut self, _: &Plan, _: u64) -> Result<()> {
        Ok(())
    }

    fn on_emit(&mut self, _: Role, _: &Frame) -> Vec<Delivery> {
        Vec::new()
    }

    fn on_idle(&mut self) -> Vec<Delivery> {
        Vec::new()
    }
}

pub fn strategy_passive() -> PassiveEve {
    PassiveEve
}

pub fn strategy_drop_all() -> DropEve {
    DropEve
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Emit,
    Deliver,
}

/// One frame event: `party` emitted it or had it delivered.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub trial: u64,
    pub seq: usize,
    pub action: Action,
    pub party: Role,
    #[serde(flatten)]
    pub frame: Frame,
    pub status_a: String,
    pub status_b: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub trial: u64,
    pub strategy: String,
    pub strategy_seed: u64,
    pub plan: Plan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Session(SessionHeader),
    Event(Event),
    End { trial: u64, capped: bool, stalled: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub header: SessionHeader,
    pub events: Vec<Event>,
    /// The frame cap stopped the session.
    pub capped: bool,
    /// Eve stopped delivering while a party was still running.
    pub stalled: bool,
}

impl Transcript {
    /// JSON lines: a session record, one record per event, an end record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let line = |r: &Record| serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()));
        writeln!(out, "{}", line(&Record::Session(self.header.clone()))?)?;
        for e in &self.events {
            writeln!(out, "{}", line(&Record::Event(e.clone()))?)?;
        }
        writeln!(
            out,
            "{}",
            line(&Record::End {
                trial: self.header.trial,
                capped: self.capped,
                stalled: self.stalled,
            })?
        )?;
        Ok(())
    }

    /// Reads every transcript in a JSON-lines stream. A transcript without
    /// its end record is returned with `complete = false`.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<(Transcript, bool)>> {
        let mut out: Vec<(Transcript, bool)> = Vec::new();
        for (no, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("transcript line {}: {e}", no + 1)))?;
            match rec {
                Record::Session(h) => out.push((
                    Transcript {
                        header: h,
                        events: Vec::new(),
                        capped: false,
                        stalled: false,
                    },
                    false,
                )),
                Record::Event(e) => match out.last_mut() {
                    Some((t, false)) => t.events.push(e),
                    _ => return Err(Error::Parse(format!("line {}: event outside a session", no + 1))),
                },
                Record::End { capped, stalled, .. } => match out.last_mut() {
                    Some((t, done @ false)) => {
                        t.capped = capped;
                        t.stalled = stalled;
                        *done = true;
                    }
                    _ => return Err(Error::Parse(format!("line {}: end outside a session", no + 1))),
                },
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct SessionResult {
    pub outcome_a: Outcome,
    pub outcome_b: Outcome,
    pub eve_wins: bool,
    /// Both outcomes equal and accepted.
    pub agreed: bool,
    pub transcript: Transcript,
}

/// Runs both parties with `eve` mediating every frame. Deliveries queue per
/// party and are processed alternately; when both queues are empty Eve
/// is asked for more, and when she has nothing the running parties abort.
/// More than ten times the honest frame count also aborts them.
pub fn run_session(session: &mut Session, eve: &mut dyn EveStrategy, trial: u64, eve_seed: u64) -> Result<SessionResult> {
    let plan = session.alice.plan().clone();
    eve.begin(&plan, eve_seed)?;
    let cap = 10 * plan.honest_frames().max(1);
    let mut tr = Transcript {
        header: SessionHeader {
            trial,
            strategy: eve.name(),
            strategy_seed: eve_seed,
            plan,
        },
        events: Vec::new(),
        capped: false,
        stalled: false,
    };
    let mut queues: [VecDeque<Frame>; 2] = [VecDeque::new(), VecDeque::new()];
    let idx = |r: Role| match r {
        Role::Initiator => 0,
        Role::Responder => 1,
    };

    fn log(tr: &mut Transcript, s: &Session, action: Action, party: Role, frame: &Frame) {
        let seq = tr.events.len();
        tr.events.push(Event {
            trial: tr.header.trial,
            seq,
            action,
            party,
            frame: frame.clone(),
            status_a: s.alice.status().short().into(),
            status_b: s.bob.status().short().into(),
        });
    }

    let mut emitted: Vec<(Role, Frame)> = Vec::new();
    for r in [Role::Initiator, Role::Responder] {
        for f in session.party_mut(r).start() {
            emitted.push((r, f));
        }
    }
    let mut delivered = 0usize;
    let mut turn = 0usize;
    loop {
        for (r, f) in emitted.drain(..) {
            log(&mut tr, session, Action::Emit, r, &f);
            for d in eve.on_emit(r, &f) {
                queues[idx(d.to)].push_back(d.frame);
            }
        }
        let pick = if !queues[turn].is_empty() {
            Some(turn)
        } else if !queues[1 - turn].is_empty() {
            Some(1 - turn)
        } else {
            None
        };
        let Some(q) = pick else {
            let more = eve.on_idle();
            if more.is_empty() {
                break;
            }
            for d in more {
                queues[idx(d.to)].push_back(d.frame);
            }
            continue;
        };
        turn = 1 - q;
        if delivered >= cap {
            tr.capped = true;
            break;
        }
        delivered += 1;
        let to = if q == 0 { Role::Initiator } else { Role::Responder };
        let f = queues[q].pop_front().expect("picked a non-empty queue");
        let out = session.party_mut(to).receive(&f);
        log(&mut tr, session, Action::Deliver, to, &f);
        emitted.extend(out.into_iter().map(|f| (to, f)));
    }
    for r in [Role::Initiator, Role::Responder] {
        let p = session.party_mut(r);
        if p.status() == &Status::Running {
            tr.stalled |= !tr.capped;
            p.abort(if tr.capped { "frame cap reached" } else { "channel went quiet" });
        }
    }
    let (outcome_a, outcome_b) = session.outcomes();
    let agreed = session.agreed(&outcome_a, &outcome_b);
    Ok(SessionResult {
        eve_wins: session.eve_wins(),
        agreed,
        outcome_a,
        outcome_b,
        transcript: tr,
    })
}
