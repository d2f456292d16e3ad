//! Strategy names as written in configs, e.g. `swap:0,1@guess=oracle(1)`.
//!
//! ```text
//! spec     = base *("@" modifier)
//! base     = "passive" | "drop-all" | "bitflip:" P | "insert:" P ":" B
//!          | "delete:" P | "swap:" I "," J | "replay:" W | "guess:" BITS
//!          | "plaintext:" BITS | "forge:" BITS
//! modifier = "stage=" S | "guess=" ("random" | "zeros" | "oracle(" p ")")
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversary::{strategy_drop_all, strategy_passive, EveStrategy, GuessSource, ScriptedEve};
use crate::bits::BitString;
use crate::codes::EditCodebook;
use crate::error::{Error, Result};
use crate::extractors::SeededExtractorSpec;
use crate::protocol::Tag;

#[derive(Clone, Debug, PartialEq)]
enum Base {
    Passive,
    DropAll,
    Bitflip(usize),
    Insert(usize, bool),
    Delete(usize),
    Swap(usize, usize),
    Replay(usize),
    Guess(BitString),
    Plaintext(BitString),
    Forge(BitString),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum GuessSpec {
    Random,
    Zeros,
    Oracle(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategySpec {
    text: String,
    base: Base,
    stage: Option<usize>,
    guess: Option<GuessSpec>,
}

/// What a strategy may need from the trial it attacks.
pub struct EveContext<'a> {
    pub w: &'a BitString,
    /// Tag extractor and rows, for the calibration oracle.
    pub tags: Option<(SeededExtractorSpec, usize)>,
    pub book: Option<Arc<EditCodebook>>,
    pub t: usize,
}

fn bad(text: &str, why: &str) -> Error {
    Error::Config(format!("strategy `{text}`: {why}"))
}

fn num(text: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| bad(text, &format!("`{v}` is not a position")))
}

fn bits(text: &str, v: &str) -> Result<BitString> {
    v.trim().parse().map_err(|_| bad(text, &format!("`{v}` is not a bit string")))
}

impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let mut parts = text.split('@');
        let head = parts.next().unwrap_or_default();
        let (name, arg) = head.split_once(':').unwrap_or((head, ""));
        let base = match name {
            "passive" => Base::Passive,
            "drop-all" => Base::DropAll,
            "bitflip" => Base::Bitflip(num(text, arg)?),
            "insert" => {
                let (p, b) = arg.split_once(':').ok_or_else(|| bad(text, "expected insert:POS:BIT"))?;
                let bit = match b.trim() {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad(text, "inserted bit must be 0 or 1")),
                };
                Base::Insert(num(text, p)?, bit)
            }
            "delete" => Base::Delete(num(text, arg)?),
            "swap" => {
                let (i, j) = arg.split_once(',').ok_or_else(|| bad(text, "expected swap:I,J"))?;
                Base::Swap(num(text, i)?, num(text, j)?)
            }
            "replay" => Base::Replay(num(text, arg)?),
            "guess" => Base::Guess(bits(text, arg)?),
            "plaintext" => Base::Plaintext(bits(text, arg)?),
            "forge" => Base::Forge(bits(text, arg)?),
            _ => return Err(bad(text, "unknown strategy")),
        };
        let mut spec = StrategySpec {
            text: text.to_string(),
            base,
            stage: None,
            guess: None,
        };
        for m in parts {
            let (k, v) = m.split_once('=').ok_or_else(|| bad(text, "modifiers are key=value"))?;
            match k.trim() {
                "stage" => spec.stage = Some(num(text, v)?),
                "guess" => {
                    let v = v.trim();
                    spec.guess = Some(match v {
                        "random" => GuessSpec::Random,
                        "zeros" => GuessSpec::Zeros,
                        _ => {
                            let p = v
                                .strip_prefix("oracle(")
                                .and_then(|r| r.strip_suffix(')'))
                                .and_then(|p| p.parse::<f64>().ok())
                                .filter(|p| (0.0..=1.0).contains(p))
                                .ok_or_else(|| bad(text, "guess is random, zeros or oracle(p)"))?;
                            GuessSpec::Oracle(p)
                        }
                    })
                }
                other => return Err(bad(text, &format!("unknown modifier `{other}`"))),
            }
        }
        if matches!(spec.base, Base::Passive | Base::DropAll) && (spec.stage.is_some() || spec.guess.is_some()) {
            return Err(bad(text, "passive and drop-all take no modifiers"));
        }
        Ok(spec)
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for StrategySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for StrategySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl StrategySpec {
    pub fn is_passive(&self) -> bool {
        self.base == Base::Passive
    }

    /// Uses the calibration oracle, so wins say nothing about security.
    pub fn is_calibration(&self) -> bool {
        matches!(self.guess, Some(GuessSpec::Oracle(_)))
    }

    pub fn build(&self, ctx: &EveContext<'_>) -> Result<Box<dyn EveStrategy>> {
        let scripted = match &self.base {
            Base::Passive => return Ok(Box::new(strategy_passive())),
            Base::DropAll => return Ok(Box::new(strategy_drop_all())),
            Base::Bitflip(p) => ScriptedEve::bitflip(*p),
            Base::Insert(p, b) => ScriptedEve::insert(*b, *p),
            Base::Delete(p) => ScriptedEve::delete(*p),
            Base::Swap(i, j) => ScriptedEve::weight_preserving_swap(*i, *j),
            Base::Replay(w) => ScriptedEve::replay(*w),
            Base::Guess(s) => ScriptedEve::guess_challenges(s.clone(), GuessSource::Random),
            Base::Plaintext(m) => ScriptedEve::plaintext_swap(m.clone()),
            Base::Forge(m) => {
                let book = ctx
                    .book
                    .clone()
                    .ok_or_else(|| bad(&self.text, "forgery needs a protocol with an edit code"))?;
                ScriptedEve::consistent_forgery(m.clone(), book, ctx.t)
            }
        };
        let mut e = scripted;
        if let Some(s) = self.stage {
            e = e.on_stage(s);
        }
        if let Some(g) = self.guess {
            e = e.with_guess(match g {
                GuessSpec::Random => GuessSource::Random,
                GuessSpec::Zeros => GuessSource::Zeros,
                GuessSpec::Oracle(p) => {
                    let (ext, rows) = ctx
                        .tags
                        .clone()
                        .ok_or_else(|| bad(&self.text, "no tag extractor for the oracle"))?;
                    let w = ctx.w.clone();
                    GuessSource::Oracle {
                        p,
                        tags: Arc::new(move |seed: &BitString, len: usize| {
                            Tag::new(&ext, &w, seed, rows)
                                .and_then(|mut t| t.prefix(len))
                                .unwrap_or_default()
                        }),
                    }
                }
            });
        }
        Ok(Box::new(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints_back() {
        for s in [
            "passive",
            "drop-all",
            "bitflip:3",
            "insert:2:1",
            "delete:0",
            "swap:0,1@guess=oracle(0.5)",
            "replay:2@stage=1",
            "guess:1010@guess=zeros",
            "plaintext:011",
            "forge:001@guess=oracle(1)",
        ] {
            let spec: StrategySpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        for s in ["bogus", "insert:2:7", "swap:1", "bitflip:x", "passive@stage=1", "swap:0,1@guess=oracle(2)"] {
            assert!(s.parse::<StrategySpec>().is_err(), "{s}");
        }
    }
}
