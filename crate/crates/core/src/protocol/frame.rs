use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Alice.
    Initiator,
    /// Bob.
    Responder,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::Initiator => Role::Responder,
            Role::Responder => Role::Initiator,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Initiator => "alice",
            Role::Responder => "bob",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "A->B")]
    AToB,
    #[serde(rename = "B->A")]
    BToA,
}

impl Direction {
    pub fn from_sender(r: Role) -> Self {
        match r {
            Role::Initiator => Direction::AToB,
            Role::Responder => Direction::BToA,
        }
    }

    pub fn sender(self) -> Role {
        match self {
            Direction::AToB => Role::Initiator,
            Direction::BToA => Role::Responder,
        }
    }

    pub fn receiver(self) -> Role {
        self.sender().peer()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AToB => "A->B",
            Direction::BToA => "B->A",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FrameKind {
    Seed,
    DataBit { bit: bool },
    Response,
    Plaintext,
}

/// The wire unit. Tag payloads with several rows are the row prefixes
/// joined end to end.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub dir: Direction,
    #[serde(flatten)]
    pub kind: FrameKind,
    pub phase: u32,
    pub round: u32,
    pub payload: BitString,
}

impl Frame {
    pub fn new(from: Role, kind: FrameKind, phase: u32, round: u32, payload: BitString) -> Self {
        Frame {
            dir: Direction::from_sender(from),
            kind,
            phase,
            round,
            payload,
        }
    }

    pub fn sender(&self) -> Role {
        self.dir.sender()
    }
}
