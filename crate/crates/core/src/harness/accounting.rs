//! Exact resource counts read off a transcript.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{Action, Transcript};
use crate::bits::BitString;
use crate::protocol::{FrameKind, Role, Slot};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accounting {
    /// Seed bits each party put on the wire.
    pub fresh_a: usize,
    pub fresh_b: usize,
    /// Tag bits revealed by both parties: for every seed, the longest
    /// prefix sent of the tag it keys, times the rows.
    pub w_bits_revealed: usize,
    /// Maximal runs of consecutive emissions by the same party.
    pub rounds: usize,
}

fn ix(r: Role) -> usize {
    match r {
        Role::Initiator => 0,
        Role::Responder => 1,
    }
}

/// Counts from frame payloads only. With `reported_seed_len` every seed
/// frame is charged that many bits instead of its length.
pub fn accounting(tr: &Transcript, reported_seed_len: Option<usize>) -> Accounting {
    let plan = &tr.header.plan;
    let rows = plan.rows.max(1);
    let slots: Vec<Slot> = (0..plan.stages.len()).flat_map(|s| plan.slots(s)).collect();
    let mut fresh = [0usize; 2];
    let mut seeds_in: [Vec<BitString>; 2] = [Vec::new(), Vec::new()];
    let mut emitted = [0usize; 2];
    let mut revealed: [HashMap<BitString, usize>; 2] = [HashMap::new(), HashMap::new()];
    let mut rounds = 0;
    let mut last: Option<Role> = None;
    for ev in &tr.events {
        let i = ix(ev.party);
        let f = &ev.frame;
        match ev.action {
            Action::Deliver => {
                if f.kind == FrameKind::Seed {
                    seeds_in[i].push(f.payload.clone());
                }
            }
            Action::Emit => {
                if last != Some(ev.party) {
                    rounds += 1;
                    last = Some(ev.party);
                }
                match f.kind {
                    FrameKind::Plaintext => {}
                    FrameKind::Seed => fresh[i] += reported_seed_len.unwrap_or(f.payload.len()),
                    FrameKind::DataBit { .. } | FrameKind::Response => {
                        let g = emitted[i];
                        emitted[i] += 1;
                        let Some(seed) = slots.get(g).and_then(|s| seeds_in[i].get(s.phase as usize - 1)) else {
                            continue;
                        };
                        let e = revealed[i].entry(seed.clone()).or_insert(0);
                        *e = (*e).max(f.payload.len() / rows);
                    }
                }
            }
        }
    }
    Accounting {
        fresh_a: fresh[0],
        fresh_b: fresh[1],
        w_bits_revealed: rows * revealed.iter().flat_map(|m| m.values()).sum::<usize>(),
        rounds,
    }
}
