//! Experiment configuration: `key = value` lines under section headers.
//!
//! ```text
//! [experiment]
//! protocol = "nauth"            # auth | nauth | key | extract
//! trials = 1000
//! seed = 7
//! strategies = ["passive", "swap:0,1@guess=random"]
//! exec = "parallel"             # or "sequential"
//!
//! [params]                      # scalars or lists; lists span a grid
//! n = [4096, 16384]
//! k_exponent = 0.8              # k = n^0.8, or give k directly
//! t = [3, 4]
//! ell_per_t = 4                 # ell = 4t, or give ell directly
//! unit = 1
//!
//! [source]                      # the shared secret w
//! family = "flat"               # flat | uniform | biased | table
//! seed = 1
//!
//! [report]
//! format = "table"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codes::{EditCodebook, DEFAULT_E, DEFAULT_RHO};
use crate::entropy::{DistributionTable, SourceSpec};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::protocol::{AuthParams, ExtractParams, KeyLength, SeededChoice};

use super::strategy::StrategySpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Auth,
    Nauth,
    Key,
    Extract,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Auth => "auth",
            Protocol::Nauth => "nauth",
            Protocol::Key => "key",
            Protocol::Extract => "extract",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Table,
    Records,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub protocol: Protocol,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub strategies: Vec<StrategySpec>,
    #[serde(default)]
    pub exec: Exec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub n: OneOrMany<usize>,
    pub k: Option<OneOrMany<f64>>,
    pub k_exponent: Option<f64>,
    pub t: OneOrMany<usize>,
    pub ell: Option<OneOrMany<usize>>,
    pub ell_per_t: Option<usize>,
    #[serde(default = "one")]
    pub unit: OneOrMany<usize>,
    #[serde(default = "two")]
    pub base: u64,
    #[serde(default)]
    pub extractor: SeededChoice,
    #[serde(default)]
    pub session_seed: u64,
    #[serde(default = "yes")]
    pub enforce_precondition: bool,
    #[serde(default)]
    pub idealized_accounting: bool,
    pub randomness_budget: Option<usize>,
    /// Message block length of the edit code; `ell * rho` when absent.
    pub lambda_m: Option<usize>,
    #[serde(default = "default_e")]
    pub code_e: f64,
    #[serde(default = "default_rho")]
    pub code_rho: f64,
    pub code_cache: Option<PathBuf>,
    pub key_len: Option<usize>,
    pub key_eps: Option<f64>,
}

fn one() -> OneOrMany<usize> {
    OneOrMany::One(1)
}

fn two() -> u64 {
    2
}

fn yes() -> bool {
    true
}

fn default_e() -> f64 {
    DEFAULT_E
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Uniform,
    Flat,
    Biased,
    Table,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub family: Family,
    /// Defaults to the cell's `k`.
    pub k: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub p: Option<f64>,
    /// Fixture file for `family = "table"`.
    pub path: Option<PathBuf>,
}

impl SourceConfig {
    pub fn spec(&self, n: usize, k: f64, base_dir: &Path) -> Result<SourceSpec> {
        let k = self.k.unwrap_or(k);
        match self.family {
            Family::Uniform => Ok(SourceSpec::uniform(n)),
            Family::Flat => SourceSpec::flat(n, k, self.seed),
            Family::Biased => {
                let p = self.p.ok_or_else(|| Error::Config("biased source needs p".into()))?;
                SourceSpec::biased(n, p, Some(self.seed))
            }
            Family::Table => {
                let path = self.path.as_ref().ok_or_else(|| Error::Config("table source needs path".into()))?;
                let table = DistributionTable::load_fixture(&base_dir.join(path))?;
                if table.n != n {
                    return Err(Error::Config(format!("table over {} bits for n = {n}", table.n)));
                }
                SourceSpec::explicit(table)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    #[serde(default = "desk")]
    pub preset: String,
    pub session_seed: Option<u64>,
    pub key_len: Option<usize>,
}

fn desk() -> String {
    "desk".into()
}

impl ExtractSection {
    pub fn params(&self) -> Result<ExtractParams> {
        let mut p = match self.preset.as_str() {
            "desk" => ExtractParams::desk(),
            other => return Err(Error::Config(format!("unknown extract preset `{other}`"))),
        };
        if let Some(s) = self.session_seed {
            p.session_seed = s;
        }
        if let Some(k) = self.key_len {
            p.key_len = k;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: Option<ParamGrid>,
    #[serde(default)]
    pub source: SourceConfig,
    pub source_x: Option<SourceConfig>,
    pub source_y: Option<SourceConfig>,
    pub extract: Option<ExtractSection>,
    #[serde(default)]
    pub report: ReportSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// One point of the parameter grid.
#[derive(Clone, Debug)]
pub enum CellParams {
    Auth {
        params: AuthParams,
        book: Option<Arc<EditCodebook>>,
        key: Option<KeyLength>,
    },
    Extract(ExtractParams),
}

impl CellParams {
    pub fn n(&self) -> usize {
        match self {
            CellParams::Auth { params, .. } => params.n,
            CellParams::Extract(p) => p.n,
        }
    }
}

/// A grid point, or the reason it cannot run.
pub type GridPoint = std::result::Result<CellParams, (Describe, String)>;

/// Enough of a grid point to label a skipped row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Describe {
    pub n: usize,
    pub k: f64,
    pub t: usize,
    pub ell: usize,
    pub unit: usize,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let e = &self.experiment;
        if e.strategies.is_empty() {
            return Err(Error::Config("no strategies listed".into()));
        }
        match (e.protocol, &self.params, &self.extract) {
            (Protocol::Extract, _, None) => Err(Error::Config("protocol extract needs an [extract] section".into())),
            (Protocol::Extract, _, Some(x)) => x.params().map(|_| ()),
            (_, None, _) => Err(Error::Config(format!("protocol {} needs a [params] section", e.protocol.name()))),
            (p, Some(g), _) => {
                if g.k.is_some() == g.k_exponent.is_some() {
                    return Err(Error::Config("give exactly one of k and k_exponent".into()));
                }
                if g.ell.is_some() == g.ell_per_t.is_some() {
                    return Err(Error::Config("give exactly one of ell and ell_per_t".into()));
                }
                if p == Protocol::Key && g.key_len.is_some() == g.key_eps.is_some() {
                    return Err(Error::Config("protocol key needs exactly one of key_len and key_eps".into()));
                }
                Ok(())
            }
        }
    }

    /// All grid points in a fixed order: `n`, then `k`, `t`, `ell`, `unit`.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let proto = self.experiment.protocol;
        if proto == Protocol::Extract {
            let x = self.extract.as_ref().expect("checked");
            return Ok(vec![Ok(CellParams::Extract(x.params()?))]);
        }
        let g = self.params.as_ref().expect("checked");
        let mut books: Vec<(usize, Arc<EditCodebook>)> = Vec::new();
        let mut out = Vec::new();
        for n in g.n.values() {
            let ks = match (&g.k, g.k_exponent) {
                (Some(k), _) => k.values(),
                (None, Some(x)) => vec![(n as f64).powf(x)],
                _ => unreachable!("checked"),
            };
            for k in ks {
                for t in g.t.values() {
                    let ells = match (&g.ell, g.ell_per_t) {
                        (Some(l), _) => l.values(),
                        (None, Some(c)) => vec![c * t],
                        _ => unreachable!("checked"),
                    };
                    for ell in ells {
                        for unit in g.unit.values() {
                            let d = Describe { n, k, t, ell, unit };
                            out.push(self.point(proto, g, d, &mut books));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn point(&self, proto: Protocol, g: &ParamGrid, d: Describe, books: &mut Vec<(usize, Arc<EditCodebook>)>) -> GridPoint {
        let mut build = || -> Result<CellParams> {
            let mut p = AuthParams::new(d.n, d.k, d.t, d.ell, d.unit);
            p.base = g.base;
            p.extractor = g.extractor;
            p.session_seed = g.session_seed;
            p.code_e = g.code_e;
            p.code_rho = g.code_rho;
            p.randomness_budget = g.randomness_budget;
            p.enforce_entropy_precondition = g.enforce_precondition;
            p.idealized_seed_accounting = g.idealized_accounting;
            p.validate()?;
            if proto == Protocol::Auth {
                return Ok(CellParams::Auth {
                    params: p,
                    book: None,
                    key: None,
                });
            }
            let lm = match g.lambda_m {
                Some(v) => v,
                None => {
                    let v = d.ell as f64 * g.code_rho;
                    if (v - v.round()).abs() > 1e-9 || v < 1.0 {
                        return Err(Error::Config(format!("ell * rho = {v} is not a block length")));
                    }
                    v.round() as usize
                }
            };
            let book = match books.iter().find(|b| b.0 == lm) {
                Some(b) => b.1.clone(),
                None => {
                    let b = Arc::new(match &g.code_cache {
                        Some(dir) => EditCodebook::load_or_generate(&self.base_dir.join(dir), lm, g.code_e, g.code_rho)?,
                        None => crate::codes::edit_code_generate(lm, g.code_e, g.code_rho)?,
                    });
                    books.push((lm, b.clone()));
                    b
                }
            };
            let key = match proto {
                Protocol::Key => Some(match (g.key_len, g.key_eps) {
                    (Some(bits), _) => KeyLength::Fixed { bits },
                    (None, Some(eps)) => KeyLength::Accounted { eps },
                    _ => unreachable!("checked"),
                }),
                _ => None,
            };
            Ok(CellParams::Auth {
                params: p,
                book: Some(book),
                key,
            })
        };
        build().map_err(|e| (d.clone(), e.to_string()))
    }

    pub fn source_spec(&self, which: &SourceConfig, n: usize, k: f64) -> Result<SourceSpec> {
        which.spec(n, k, &self.base_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: &str = r#"
[experiment]
protocol = "nauth"
trials = 10
seed = 3
strategies = ["passive", "swap:0,1@guess=random"]

[params]
n = [4096, 16384]
k_exponent = 0.8
t = [3, 4]
ell_per_t = 4
enforce_precondition = false

[source]
family = "flat"
seed = 5
"#;

    #[test]
    fn grid_expands_in_order() {
        let cfg = ExperimentConfig::parse(GRID).unwrap();
        let g = cfg.grid().unwrap();
        assert_eq!(g.len(), 4);
        let dims: Vec<(usize, usize, usize)> = g
            .iter()
            .map(|c| match c {
                Ok(CellParams::Auth { params, .. }) => (params.n, params.t, params.ell),
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(dims, vec![(4096, 3, 12), (4096, 4, 16), (16384, 3, 12), (16384, 4, 16)]);
    }

    #[test]
    fn unknown_names_fail_at_load() {
        assert!(ExperimentConfig::parse(&GRID.replace("passive", "pasive")).is_err());
        assert!(ExperimentConfig::parse(&GRID.replace("nauth", "nath")).is_err());
        assert!(ExperimentConfig::parse(&GRID.replace("ell_per_t", "ell_per")).is_err());
        assert!(ExperimentConfig::parse(&GRID.replace("k_exponent = 0.8", "")).is_err());
    }

    #[test]
    fn infeasible_points_carry_a_reason() {
        let cfg = ExperimentConfig::parse(&GRID.replace("enforce_precondition = false", "")).unwrap();
        let g = cfg.grid().unwrap();
        assert!(g.iter().all(|c| matches!(c, Err((_, why)) if why.contains("below the required"))));
    }
}
