//! Monte Carlo runner: every `(grid point, strategy)` cell runs its trials
//! on independent derived streams.

use std::collections::HashMap;
use crate::adversary::{run_session, SessionResult, Transcript};
use crate::bits::BitString;
use crate::entropy::{Source, SourceSpec};
use crate::error::{Error, Result};
use crate::par::map_indexed;
use crate::protocol::{
    auth_session, extract_session, key_agreement_session, nauth_session, AuthParams, KeyLength,
    SeededChoice, Seeds, Session,
};
use crate::rng::{derive_rng, derive_u64};

use super::accounting::accounting;
use super::config::{CellParams, Describe, ExperimentConfig, Protocol, SourceConfig};
use super::report::{Report, ReportRow};
use super::stats::Rate;
use super::strategy::{EveContext, StrategySpec};

/// Longest key whose sampled distribution is tabulated.
const KEY_TABLE_BITS: usize = 20;

/// What one trial contributes to its cell.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub correct: bool,
    pub eve_wins: bool,
    pub fresh_a: usize,
    pub fresh_b: usize,
    pub w_bits_revealed: usize,
    pub rounds: usize,
    /// Data bits the plan authenticates.
    pub authenticated: usize,
    pub ledger_ok: bool,
    pub key: Option<BitString>,
    pub flags: Vec<String>,
}

/// Everything needed to run the trials of one cell.
pub struct Cell<'a> {
    pub cfg: &'a ExperimentConfig,
    pub params: CellParams,
    pub strategy: StrategySpec,
    pub point: usize,
    pub strategy_index: usize,
    sources: Vec<Source>,
}

fn sources(cfg: &ExperimentConfig, params: &CellParams) -> Result<Vec<Source>> {
    let specs: Vec<SourceSpec> = match params {
        CellParams::Auth { params, .. } => vec![cfg.source_spec(&cfg.source, params.n, params.k)?],
        CellParams::Extract(p) => {
            let flat = |seed| SourceConfig {
                family: super::config::Family::Flat,
                seed,
                ..SourceConfig::default()
            };
            let x = cfg.source_x.clone().unwrap_or_else(|| flat(1));
            let y = cfg.source_y.clone().unwrap_or_else(|| flat(2));
            vec![
                cfg.source_spec(&cfg.source, p.w_len, p.kw)?,
                cfg.source_spec(&x, p.n, p.kx)?,
                cfg.source_spec(&y, p.n, p.ky)?,
            ]
        }
    };
    specs.iter().map(Source::new).collect()
}

impl<'a> Cell<'a> {
    pub fn new(cfg: &'a ExperimentConfig, params: CellParams, strategy: StrategySpec, point: usize, strategy_index: usize) -> Result<Self> {
        let sources = sources(cfg, &params)?;
        Ok(Cell {
            cfg,
            params,
            strategy,
            point,
            strategy_index,
            sources,
        })
    }

    fn rng(&self, what: &str, trial: u64) -> crate::rng::TrialRng {
        derive_rng(self.cfg.experiment.seed, &format!("point{}/{what}", self.point), trial)
    }

    fn session(&self, trial: u64) -> Result<(Session, BitString)> {
        let w = self.sources[0].sample(&mut self.rng("w", trial));
        match &self.params {
            CellParams::Auth { params, book, key } => {
                let seeds = Seeds::fresh(self.rng("alice", trial), self.rng("bob", trial), params.randomness_budget);
                let mut msg = self.rng("message", trial);
                let s = match (self.cfg.experiment.protocol, book, key) {
                    (Protocol::Auth, _, _) => auth_session(params, &w, &BitString::random(params.ell, &mut msg), seeds)?,
                    (Protocol::Nauth, Some(b), _) => {
                        let blocks = params.ell / b.lambda_c;
                        if blocks == 0 {
                            return Err(Error::Config(format!(
                                "ell = {} is shorter than one {}-bit codeword",
                                params.ell, b.lambda_c
                            )));
                        }
                        let m = BitString::random(blocks * b.lambda_m, &mut msg);
                        nauth_session(params, b.clone(), &w, &m, seeds)?
                    }
                    (Protocol::Key, Some(b), Some(k)) => key_agreement_session(params, b.clone(), &w, *k, seeds)?,
                    _ => unreachable!("grid builds books and key lengths for their protocols"),
                };
                Ok((s, w))
            }
            CellParams::Extract(p) => {
                let x = self.sources[1].sample(&mut self.rng("x", trial));
                let y = self.sources[2].sample(&mut self.rng("y", trial));
                let s = extract_session(&x, &y, &w, p)?;
                Ok((s, w))
            }
        }
    }

    fn eve_context<'w>(&self, w: &'w BitString) -> Result<EveContext<'w>> {
        Ok(match &self.params {
            CellParams::Auth { params, book, .. } => EveContext {
                w,
                tags: Some((params.seeded_spec()?, 1)),
                book: book.clone(),
                t: params.t,
            },
            CellParams::Extract(p) => EveContext {
                w,
                tags: Some((p.tag_extractor()?, p.rows())),
                book: None,
                t: p.t(),
            },
        })
    }

    /// One trial, with its full result.
    pub fn run_trial(&self, trial: u64) -> Result<(TrialOutcome, SessionResult)> {
        let (mut session, w) = self.session(trial)?;
        let mut eve = self.strategy.build(&self.eve_context(&w)?)?;
        let eve_seed = derive_u64(
            self.cfg.experiment.seed,
            &format!("point{}/eve{}", self.point, self.strategy_index),
            trial,
        );
        let r = run_session(&mut session, eve.as_mut(), trial, eve_seed)?;
        let raw = accounting(&r.transcript, None);
        let (la, lb) = (session.alice.ledger(), session.bob.ledger());
        let ledger_ok = la.seed_bits_sent == raw.fresh_a
            && lb.seed_bits_sent == raw.fresh_b
            && la.w_bits_revealed() + lb.w_bits_revealed() == raw.w_bits_revealed;
        let reported = match &self.params {
            CellParams::Auth { params, .. } if params.idealized_seed_accounting => {
                accounting(&r.transcript, Some(params.reported_seed_len()?))
            }
            _ => raw,
        };
        let key = match (&self.params, &r.outcome_a) {
            (CellParams::Auth { key: Some(_), .. }, crate::protocol::Outcome::Accepted(k)) if r.agreed => Some(k.clone()),
            _ => None,
        };
        let out = TrialOutcome {
            correct: r.agreed,
            eve_wins: r.eve_wins,
            fresh_a: reported.fresh_a + session.extra_fresh[0],
            fresh_b: reported.fresh_b + session.extra_fresh[1],
            w_bits_revealed: raw.w_bits_revealed,
            rounds: raw.rounds,
            authenticated: session.alice.plan().total_rounds(),
            ledger_ok,
            key,
            flags: session.flags.clone(),
        };
        Ok((out, r))
    }

    fn describe(&self) -> Describe {
        match &self.params {
            CellParams::Auth { params: p, .. } => Describe {
                n: p.n,
                k: p.k,
                t: p.t,
                ell: p.ell,
                unit: p.unit,
            },
            CellParams::Extract(p) => Describe {
                n: p.n,
                k: p.kw,
                t: p.t(),
                ell: p.t() + p.t_prime(),
                unit: p.unit,
            },
        }
    }

    fn flags(&self) -> Vec<String> {
        let mut f = match &self.params {
            CellParams::Auth { params, key, .. } => auth_flags(params, key.as_ref()),
            CellParams::Extract(p) => p.flags(),
        };
        if self.strategy.is_calibration() {
            f.push("calibration-oracle".into());
        }
        f
    }

    /// Runs `trials` trials and aggregates them in trial order.
    pub fn run(&self, trials: usize) -> ReportRow {
        let results = map_indexed(self.cfg.experiment.exec, trials, |i| self.run_trial(i as u64).map(|r| r.0));
        let mut row = empty_row(self.cfg.experiment.protocol, &self.describe(), &self.strategy, trials as u64);
        row.flags = self.flags();
        let outs = match results.into_iter().collect::<Result<Vec<_>>>() {
            Ok(o) => o,
            Err(e) => {
                row.skipped = Some(e.to_string());
                return row;
            }
        };
        let correct = outs.iter().filter(|o| o.correct).count() as u64;
        let wins = outs.iter().filter(|o| o.eve_wins).count() as u64;
        row.correct = Rate::new(correct, trials as u64);
        row.eve_wins = Rate::new(wins, trials as u64);
        row.fresh_bits_a = outs.iter().map(|o| o.fresh_a).max().unwrap_or(0);
        row.fresh_bits_b = outs.iter().map(|o| o.fresh_b).max().unwrap_or(0);
        row.w_bits_revealed = outs.iter().map(|o| o.w_bits_revealed).max().unwrap_or(0);
        row.rounds = outs.iter().map(|o| o.rounds).max().unwrap_or(0);
        if let CellParams::Auth { params, .. } = &self.params {
            // key agreement authenticates the encoded seed, not ell bits
            let mut p = params.clone();
            p.ell = outs.iter().map(|o| o.authenticated).max().unwrap_or(p.ell);
            row.ell = p.ell;
            row.revealed_bound = Some(revealed_bound(&p));
        }
        row.ledger_mismatches = outs.iter().filter(|o| !o.ledger_ok).count() as u64;
        for o in &outs {
            for f in &o.flags {
                if !row.flags.contains(f) {
                    row.flags.push(f.clone());
                }
            }
        }
        if let Some(d) = sampled_key_distance(outs.iter().filter_map(|o| o.key.as_ref())) {
            row.key_distance = Some(d);
            row.key_distance_kind = Some("sampled".into());
        }
        row
    }
}

fn auth_flags(p: &AuthParams, key: Option<&KeyLength>) -> Vec<String> {
    let mut f = Vec::new();
    if p.extractor == SeededChoice::RandomOracle {
        f.push("simulation-only".into());
        f.push("stand-in-extractor".into());
    }
    if p.idealized_seed_accounting {
        f.push("idealized-accounting".into());
    }
    if !p.precondition_met() {
        f.push("entropy-precondition-waived".into());
    }
    if matches!(key, Some(KeyLength::Fixed { .. })) {
        f.push("key-length-fixed".into());
    }
    f
}

/// `2 * base^(3t) * ell * unit`, saturating.
pub fn revealed_bound(p: &AuthParams) -> u64 {
    let b = p.revealed_bound().saturating_mul(p.unit as u128);
    u64::try_from(b).unwrap_or(u64::MAX)
}

fn empty_row(protocol: Protocol, d: &Describe, s: &StrategySpec, trials: u64) -> ReportRow {
    ReportRow {
        protocol: protocol.name().into(),
        n: d.n,
        k: d.k,
        t: d.t,
        ell: d.ell,
        unit: d.unit,
        strategy: s.to_string(),
        trials,
        correct: Rate::new(0, 0),
        eve_wins: Rate::new(0, 0),
        fresh_bits_a: 0,
        fresh_bits_b: 0,
        w_bits_revealed: 0,
        revealed_bound: None,
        rounds: 0,
        key_distance: None,
        key_distance_kind: None,
        ledger_mismatches: 0,
        flags: Vec::new(),
        skipped: None,
    }
}

/// Distance of the empirical key distribution from uniform.
fn sampled_key_distance<'k>(keys: impl Iterator<Item = &'k BitString>) -> Option<f64> {
    let mut counts: HashMap<&BitString, u64> = HashMap::new();
    let mut len = None;
    let mut total = 0u64;
    for k in keys {
        if *len.get_or_insert(k.len()) != k.len() {
            return None;
        }
        *counts.entry(k).or_insert(0) += 1;
        total += 1;
    }
    let len = len?;
    if len > KEY_TABLE_BITS {
        return None;
    }
    let u = 0.5f64.powi(len as i32);
    let listed: f64 = counts.values().map(|&c| (c as f64 / total as f64 - u).abs()).sum();
    let missing = (1u64 << len) as f64 - counts.len() as f64;
    Some((listed + missing * u) / 2.0)
}

/// Every cell of the config, in grid order and strategy order within a
/// grid point.
pub fn monte_carlo(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rows = Vec::new();
    for (point, gp) in cfg.grid()?.into_iter().enumerate() {
        for (si, s) in cfg.experiment.strategies.iter().enumerate() {
            match &gp {
                Ok(params) => match Cell::new(cfg, params.clone(), s.clone(), point, si) {
                    Ok(cell) => rows.push(cell.run(cfg.experiment.trials)),
                    Err(e) => {
                        let mut r = empty_row(cfg.experiment.protocol, &Describe { n: params.n(), ..Describe::default() }, s, 0);
                        r.skipped = Some(e.to_string());
                        rows.push(r);
                    }
                },
                Err((d, why)) => {
                    let mut r = empty_row(cfg.experiment.protocol, d, s, 0);
                    r.skipped = Some(why.clone());
                    rows.push(r);
                }
            }
        }
    }
    Ok(Report { rows })
}

/// Runs trials of one cell and keeps their transcripts.
pub fn attack_transcripts(cell: &Cell<'_>, trials: usize) -> Result<Vec<(TrialOutcome, Transcript)>> {
    map_indexed(cell.cfg.experiment.exec, trials, |i| {
        cell.run_trial(i as u64).map(|(o, r)| (o, r.transcript))
    })
    .into_iter()
    .collect()
}
