//! Party-side protocols: the challenge-round authentication family, key
//! derivation, and the local-randomness extraction protocols.

pub mod auth;
pub mod extract;
pub mod frame;
pub mod party;
pub mod schedule;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::extractors::SeededExtractorSpec;

pub use auth::*;
pub use extract::*;
pub use frame::{Direction, Frame, FrameKind, Role};
pub use party::{MessageFn, Party, PartyLedger, PhasePlan, Plan, SeedSupply, Slot, StagePlan, Status, Tag};
pub use schedule::{schedule_build, ChallengeSchedule};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeededChoice {
    #[default]
    Toeplitz,
    RandomOracle,
}

/// Parameters of the challenge-round authentication protocols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuthParams {
    pub n: usize,
    pub k: f64,
    /// Bits per phase.
    pub t: usize,
    /// Authenticated length (codeword length for the non-malleable variant).
    pub ell: usize,
    pub base: u64,
    pub unit: usize,
    pub extractor: SeededChoice,
    pub session_seed: u64,
    pub code_e: f64,
    pub code_rho: f64,
    pub randomness_budget: Option<usize>,
    pub enforce_entropy_precondition: bool,
    pub idealized_seed_accounting: bool,
}

impl AuthParams {
    /// Toeplitz-backed parameters with the default code and schedule base 2.
    pub fn new(n: usize, k: f64, t: usize, ell: usize, unit: usize) -> Self {
        AuthParams {
            n,
            k,
            t,
            ell,
            base: 2,
            unit,
            extractor: SeededChoice::Toeplitz,
            session_seed: 0,
            code_e: crate::codes::DEFAULT_E,
            code_rho: crate::codes::DEFAULT_RHO,
            randomness_budget: None,
            enforce_entropy_precondition: true,
            idealized_seed_accounting: false,
        }
    }

    pub fn schedule(&self) -> Result<ChallengeSchedule> {
        let out = match self.extractor {
            SeededChoice::Toeplitz => self.n,
            SeededChoice::RandomOracle => usize::MAX,
        };
        schedule_build(self.base, self.unit, self.t, out)
    }

    /// Extractor producing exactly the longest scheduled prefix.
    pub fn seeded_spec(&self) -> Result<SeededExtractorSpec> {
        let m = self.schedule()?.max_len();
        match self.extractor {
            SeededChoice::Toeplitz => SeededExtractorSpec::toeplitz(self.n, m, self.k),
            SeededChoice::RandomOracle => Ok(SeededExtractorSpec::random_oracle(
                self.n,
                self.n,
                m,
                self.session_seed,
            )),
        }
    }

    pub fn seed_len(&self) -> Result<usize> {
        Ok(self.seeded_spec()?.d)
    }

    /// Seed cost per exchange as reported: the real seed length, or `3t`
    /// under idealized accounting.
    pub fn reported_seed_len(&self) -> Result<usize> {
        if self.idealized_seed_accounting {
            Ok(3 * self.t)
        } else {
            self.seed_len()
        }
    }

    /// `10 * base^(3t) * ell`.
    pub fn entropy_requirement(&self) -> f64 {
        10.0 * (self.base as f64).powi(3 * self.t as i32) * self.ell as f64
    }

    pub fn precondition_met(&self) -> bool {
        self.k >= self.entropy_requirement()
    }

    /// `2 * base^(3t) * ell`, the closed-form cap on revealed W bits.
    pub fn revealed_bound(&self) -> u128 {
        2 * (self.base as u128).pow(3 * self.t as u32) * self.ell as u128
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.ell == 0 {
            return Err(Error::Config("t and ell must be positive".into()));
        }
        if !(0.0..=self.n as f64).contains(&self.k) {
            return Err(Error::Config(format!("k = {} outside [0, {}]", self.k, self.n)));
        }
        if self.enforce_entropy_precondition && !self.precondition_met() {
            return Err(Error::Config(format!(
                "k = {} is below the required 10 * {}^(3*{}) * {} = {}",
                self.k,
                self.base,
                self.t,
                self.ell,
                self.entropy_requirement()
            )));
        }
        self.seeded_spec()?;
        Ok(())
    }
}

/// A party's final output: an accepted value or the rejection symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Accepted(BitString),
    Rejected,
}

impl Outcome {
    pub fn is_rejected(&self) -> bool {
        matches!(self, Outcome::Rejected)
    }

    pub fn value(&self) -> Option<&BitString> {
        match self {
            Outcome::Accepted(v) => Some(v),
            Outcome::Rejected => None,
        }
    }
}

/// Pads with `10...0` up to a multiple of `t`; lengths already a multiple
/// are left alone.
pub fn pad_to_multiple(s: &BitString, t: usize) -> BitString {
    if t == 0 || s.len() % t == 0 {
        return s.clone();
    }
    let mut out = s.clone();
    out.push(true);
    while out.len() % t != 0 {
        out.push(false);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding() {
        let s: BitString = "0110".parse().unwrap();
        assert_eq!(pad_to_multiple(&s, 4), s);
        assert_eq!(pad_to_multiple(&s, 3).to_string(), "011010");
        assert_eq!(pad_to_multiple(&s, 7).to_string(), "0110100");
    }

    #[test]
    fn precondition_and_bounds() {
        let mut p = AuthParams::new(1 << 14, 2353.0, 4, 16, 1);
        assert!(!p.precondition_met());
        assert!(p.validate().is_err());
        p.enforce_entropy_precondition = false;
        p.validate().unwrap();
        assert_eq!(p.revealed_bound(), 2 * 4096 * 16);
        assert_eq!(p.seed_len().unwrap(), (1 << 14) + 4096 - 1);
        p.idealized_seed_accounting = true;
        assert_eq!(p.reported_seed_len().unwrap(), 12);
    }
}
