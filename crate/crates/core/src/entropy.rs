//! Weak sources and exact distribution measurements.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Largest `n` for which a distribution is enumerated explicitly.
pub const TABLE_MAX_BITS: usize = 24;
const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SourceFamily {
    /// Uniform on `2^ceil(k)` strings chosen from `seed`.
    FlatOnRandomSubset { seed: u64 },
    BitFixing { fixed: Vec<(usize, bool)> },
    /// Each bit is 1 with probability `p`, optionally XORed with a per-position
    /// orientation mask drawn from `orientation_seed`.
    BiasedIid {
        p: f64,
        orientation_seed: Option<u64>,
    },
    ExplicitTable { table: DistributionTable },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub n: usize,
    pub k: f64,
    #[serde(flatten)]
    pub family: SourceFamily,
}

impl SourceSpec {
    pub fn flat(n: usize, k: f64, seed: u64) -> Result<Self> {
        let s = SourceSpec {
            n,
            k,
            family: SourceFamily::FlatOnRandomSubset { seed },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform(n: usize) -> Self {
        SourceSpec {
            n,
            k: n as f64,
            family: SourceFamily::BitFixing { fixed: Vec::new() },
        }
    }

    pub fn bit_fixing(n: usize, fixed: Vec<(usize, bool)>) -> Result<Self> {
        let s = SourceSpec {
            n,
            k: (n - fixed.len().min(n)) as f64,
            family: SourceFamily::BitFixing { fixed },
        };
        s.validate()?;
        Ok(s)
    }

    /// Fixes `n - ceil(k)` seeded positions to seeded values.
    pub fn bit_fixing_seeded(n: usize, k: f64, seed: u64) -> Result<Self> {
        check_k(n, k)?;
        let free = k.ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos = rand::seq::index::sample(&mut rng, n, n - free).into_vec();
        pos.sort_unstable();
        let fixed = pos.into_iter().map(|i| (i, rng.gen::<bool>())).collect();
        let s = SourceSpec {
            n,
            k,
            family: SourceFamily::BitFixing { fixed },
        };
        s.validate()?;
        Ok(s)
    }

    /// Biased source with `k` set to its exact min-entropy.
    pub fn biased(n: usize, p: f64, orientation_seed: Option<u64>) -> Result<Self> {
        let s = SourceSpec {
            n,
            k: biased_min_entropy(n, p),
            family: SourceFamily::BiasedIid { p, orientation_seed },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(table: DistributionTable) -> Result<Self> {
        let k = min_entropy(&table)?;
        Ok(SourceSpec {
            n: table.n,
            k,
            family: SourceFamily::ExplicitTable { table },
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_k(self.n, self.k)?;
        match &self.family {
            SourceFamily::FlatOnRandomSubset { .. } => Ok(()),
            SourceFamily::BitFixing { fixed } => {
                let want = self.n - self.k.ceil() as usize;
                if fixed.len() != want {
                    return Err(Error::InvalidDistribution(format!(
                        "bit-fixing source with n = {} and k = {} needs {want} fixed positions, got {}",
                        self.n,
                        self.k,
                        fixed.len()
                    )));
                }
                let mut seen = vec![false; self.n];
                for &(i, _) in fixed {
                    if i >= self.n || std::mem::replace(&mut seen[i], true) {
                        return Err(Error::InvalidDistribution(format!(
                            "fixed position {i} is out of range or repeated"
                        )));
                    }
                }
                Ok(())
            }
            SourceFamily::BiasedIid { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::InvalidDistribution(format!("bias {p} outside [0, 1]")));
                }
                if biased_min_entropy(self.n, *p) + 1e-9 < self.k {
                    return Err(Error::InvalidDistribution(format!(
                        "bias {p} gives {} bits of min-entropy, below k = {}",
                        biased_min_entropy(self.n, *p),
                        self.k
                    )));
                }
                Ok(())
            }
            SourceFamily::ExplicitTable { table } => {
                table.validate()?;
                if table.n != self.n {
                    return Err(Error::LengthMismatch(format!(
                        "table over {} bits declared as n = {}",
                        table.n, self.n
                    )));
                }
                if min_entropy(table)? + 1e-9 < self.k {
                    return Err(Error::InvalidDistribution(
                        "explicit table has less min-entropy than declared".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// The min-entropy the family realizes exactly.
    pub fn analytic_min_entropy(&self) -> f64 {
        match &self.family {
            SourceFamily::FlatOnRandomSubset { .. } => self.k.ceil(),
            SourceFamily::BitFixing { fixed } => (self.n - fixed.len()) as f64,
            SourceFamily::BiasedIid { p, .. } => biased_min_entropy(self.n, *p),
            SourceFamily::ExplicitTable { table } => min_entropy(table).unwrap_or(0.0),
        }
    }
}

fn check_k(n: usize, k: f64) -> Result<()> {
    if !(0.0..=n as f64).contains(&k) {
        return Err(Error::InvalidDistribution(format!("k = {k} outside [0, {n}]")));
    }
    Ok(())
}

pub fn biased_min_entropy(n: usize, p: f64) -> f64 {
    n as f64 * -p.max(1.0 - p).log2()
}

/// A source ready to draw from. Construction does the per-spec setup once
/// (support selection, orientation masks); draws are then cheap.
#[derive(Clone, Debug)]
pub struct Source {
    spec: SourceSpec,
    kind: Sampler,
}

#[derive(Clone, Debug)]
enum Sampler {
    /// Sorted support, for `n <= TABLE_MAX_BITS`.
    FlatSmall { support: Vec<u64> },
    /// `free` index bits land at `positions`; the rest is a keyed function of
    /// the index, so distinct indices give distinct strings.
    FlatLarge { positions: Vec<usize>, key: [u8; 32] },
    BitFixing { mask: BitString, values: BitString },
    Biased { p: f64, orientation: BitString },
    Explicit { cdf: Vec<(f64, BitString)> },
}

impl Source {
    pub fn new(spec: &SourceSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let kind = match &spec.family {
            SourceFamily::FlatOnRandomSubset { seed } => {
                let free = spec.k.ceil() as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                if n <= TABLE_MAX_BITS {
                    let mut support: Vec<u64> = rand::seq::index::sample(&mut rng, 1 << n, 1 << free)
                        .into_iter()
                        .map(|v| v as u64)
                        .collect();
                    support.sort_unstable();
                    Sampler::FlatSmall { support }
                } else {
                    let mut positions = rand::seq::index::sample(&mut rng, n, free).into_vec();
                    positions.sort_unstable();
                    let mut key = [0u8; 32];
                    rng.fill_bytes(&mut key);
                    Sampler::FlatLarge { positions, key }
                }
            }
            SourceFamily::BitFixing { fixed } => {
                let mut mask = BitString::zeros(n);
                let mut values = BitString::zeros(n);
                for &(i, b) in fixed {
                    mask.set(i, true);
                    values.set(i, b);
                }
                Sampler::BitFixing { mask, values }
            }
            SourceFamily::BiasedIid { p, orientation_seed } => {
                let orientation = match orientation_seed {
                    Some(s) => BitString::random(n, &mut ChaCha8Rng::seed_from_u64(*s)),
                    None => BitString::zeros(n),
                };
                Sampler::Biased { p: *p, orientation }
            }
            SourceFamily::ExplicitTable { table } => {
                let mut acc = 0.0;
                let cdf = table
                    .masses
                    .iter()
                    .filter(|(_, &m)| m > 0.0)
                    .map(|(s, &m)| {
                        acc += m;
                        (acc, s.clone())
                    })
                    .collect();
                Sampler::Explicit { cdf }
            }
        };
        Ok(Source {
            spec: spec.clone(),
            kind,
        })
    }

    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> BitString {
        let n = self.spec.n;
        match &self.kind {
            Sampler::FlatSmall { support } => {
                BitString::from_u64(support[rng.gen_range(0..support.len())], n)
            }
            Sampler::FlatLarge { positions, key } => {
                let index = BitString::random(positions.len(), rng);
                let mut h = Sha256::new();
                h.update(key);
                h.update(index.words().iter().flat_map(|w| w.to_le_bytes()).collect::<Vec<_>>());
                let mut prf = ChaCha8Rng::from_seed(h.finalize().into());
                let mut out = BitString::random(n, &mut prf);
                for (j, &p) in positions.iter().enumerate() {
                    out.set(p, index.get(j));
                }
                out
            }
            Sampler::BitFixing { mask, values } => {
                let r = BitString::random(n, rng);
                let words = r
                    .words()
                    .iter()
                    .zip(mask.words())
                    .zip(values.words())
                    .map(|((r, m), v)| (r & !m) | v)
                    .collect();
                BitString::from_words(words, n)
            }
            Sampler::Biased { p, orientation } => {
                let raw = BitString::from_bits((0..n).map(|_| rng.gen_bool(*p)));
                raw.xor(orientation).expect("same length")
            }
            Sampler::Explicit { cdf } => {
                let u: f64 = rng.gen::<f64>() * cdf.last().map_or(1.0, |c| c.0);
                let i = cdf.partition_point(|(c, _)| *c <= u).min(cdf.len() - 1);
                cdf[i].1.clone()
            }
        }
    }

    /// Exact distribution, for `n <= TABLE_MAX_BITS`.
    pub fn table(&self) -> Result<DistributionTable> {
        let n = self.spec.n;
        if n > TABLE_MAX_BITS {
            return Err(Error::TooLarge {
                what: "source length for an explicit table",
                got: n,
                limit: TABLE_MAX_BITS,
            });
        }
        let masses: BTreeMap<BitString, f64> = match &self.kind {
            Sampler::FlatSmall { support } => {
                let m = 1.0 / support.len() as f64;
                support.iter().map(|&v| (BitString::from_u64(v, n), m)).collect()
            }
            Sampler::FlatLarge { .. } => unreachable!("large flat sampler only above the table bound"),
            Sampler::BitFixing { mask, values } => {
                let free: Vec<usize> = (0..n).filter(|&i| !mask.get(i)).collect();
                let m = 0.5f64.powi(free.len() as i32);
                (0u64..1 << free.len())
                    .map(|v| {
                        let mut s = values.clone();
                        for (j, &i) in free.iter().enumerate() {
                            s.set(i, (v >> j) & 1 == 1);
                        }
                        (s, m)
                    })
                    .collect()
            }
            Sampler::Biased { p, orientation } => (0u64..1 << n)
                .map(|v| {
                    let s = BitString::from_u64(v, n);
                    let ones = s.xor(orientation).expect("same length").weight();
                    (s, p.powi(ones as i32) * (1.0 - p).powi((n - ones) as i32))
                })
                .filter(|(_, m)| *m > 0.0)
                .collect(),
            Sampler::Explicit { .. } => match &self.spec.family {
                SourceFamily::ExplicitTable { table } => return Ok(table.clone()),
                _ => unreachable!("explicit sampler comes from an explicit table"),
            },
        };
        Ok(DistributionTable { n, masses })
    }
}

/// One draw from `spec`. Builds the sampler each time; use [`Source`] for
/// repeated draws.
pub fn sample<R: RngCore + ?Sized>(spec: &SourceSpec, rng: &mut R) -> Result<BitString> {
    Ok(Source::new(spec)?.sample(rng))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    pub n: usize,
    pub masses: BTreeMap<BitString, f64>,
}

impl DistributionTable {
    pub fn new(n: usize, masses: BTreeMap<BitString, f64>) -> Result<Self> {
        let t = DistributionTable { n, masses };
        t.validate()?;
        Ok(t)
    }

    /// Builds from (string, mass) pairs, merging repeats.
    pub fn from_pairs<I: IntoIterator<Item = (BitString, f64)>>(n: usize, pairs: I) -> Result<Self> {
        let mut masses = BTreeMap::new();
        for (s, m) in pairs {
            *masses.entry(s).or_insert(0.0) += m;
        }
        Self::new(n, masses)
    }

    pub fn point(s: BitString) -> Self {
        DistributionTable {
            n: s.len(),
            masses: BTreeMap::from([(s, 1.0)]),
        }
    }

    pub fn uniform_over(n: usize, support: impl IntoIterator<Item = BitString>) -> Result<Self> {
        let support: Vec<_> = support.into_iter().collect();
        let m = 1.0 / support.len() as f64;
        Self::from_pairs(n, support.into_iter().map(|s| (s, m)))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n > TABLE_MAX_BITS {
            return Err(Error::TooLarge {
                what: "uniform table length",
                got: n,
                limit: TABLE_MAX_BITS,
            });
        }
        Self::uniform_over(n, (0u64..1 << n).map(|v| BitString::from_u64(v, n)))
    }

    /// Empirical distribution of equally weighted samples.
    pub fn empirical<'a, I: IntoIterator<Item = &'a BitString>>(n: usize, samples: I) -> Result<Self> {
        let mut counts: BTreeMap<BitString, u64> = BTreeMap::new();
        let mut total = 0u64;
        for s in samples {
            *counts.entry(s.clone()).or_insert(0) += 1;
            total += 1;
        }
        let masses = counts.into_iter().map(|(s, c)| (s, c as f64 / total as f64)).collect();
        Self::new(n, masses)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n > TABLE_MAX_BITS {
            return Err(Error::TooLarge {
                what: "distribution table length",
                got: self.n,
                limit: TABLE_MAX_BITS,
            });
        }
        let mut sum = 0.0;
        for (s, &m) in &self.masses {
            if s.len() != self.n {
                return Err(Error::LengthMismatch(format!(
                    "table entry {s} is not {} bits",
                    self.n
                )));
            }
            if !(m >= 0.0) {
                return Err(Error::InvalidDistribution(format!("mass {m} for {s}")));
            }
            sum += m;
        }
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("masses sum to {sum}")));
        }
        Ok(())
    }

    pub fn mass(&self, s: &BitString) -> f64 {
        self.masses.get(s).copied().unwrap_or(0.0)
    }

    pub fn support_size(&self) -> usize {
        self.masses.values().filter(|&&m| m > 0.0).count()
    }

    /// Reads the two-column fixture format: `bitstring mass` per line, `#`
    /// comments. Masses may be decimals or `a/b` fractions.
    pub fn parse_fixture(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut n = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(bits), Some(mass), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1)));
            };
            let s: BitString = bits.parse()?;
            if *n.get_or_insert(s.len()) != s.len() {
                return Err(Error::Parse(format!("line {}: inconsistent length", lineno + 1)));
            }
            pairs.push((s, parse_mass(mass).map_err(|e| {
                Error::Parse(format!("line {}: {e}", lineno + 1))
            })?));
        }
        Self::from_pairs(n.unwrap_or(0), pairs)
    }

    pub fn load_fixture(path: &Path) -> Result<Self> {
        Self::parse_fixture(&std::fs::read_to_string(path)?)
    }

    pub fn to_fixture(&self) -> String {
        let mut out = String::new();
        for (s, m) in &self.masses {
            writeln!(out, "{s} {m:e}").expect("string write");
        }
        out
    }

    /// Marginal of bits `range` (e.g. the `x` part of a joint table).
    pub fn marginal(&self, start: usize, end: usize) -> Result<DistributionTable> {
        let pairs = self
            .masses
            .iter()
            .map(|(s, &m)| s.range(start, end).map(|p| (p, m)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(end - start, pairs)
    }
}

fn parse_mass(s: &str) -> std::result::Result<f64, String> {
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.parse().map_err(|_| format!("bad numerator {a:?}"))?;
            let b: f64 = b.parse().map_err(|_| format!("bad denominator {b:?}"))?;
            Ok(a / b)
        }
        None => s.parse().map_err(|_| format!("bad mass {s:?}")),
    }
}

pub fn min_entropy(d: &DistributionTable) -> Result<f64> {
    let max = d.masses.values().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    Ok(-max.log2())
}

pub fn statistical_distance(d1: &DistributionTable, d2: &DistributionTable) -> Result<f64> {
    if d1.n != d2.n {
        return Err(Error::LengthMismatch(format!(
            "distributions over {} and {} bits",
            d1.n, d2.n
        )));
    }
    let mut sum = 0.0;
    for (s, &m) in &d1.masses {
        sum += (m - d2.mass(s)).abs();
    }
    for (s, &m) in &d2.masses {
        if !d1.masses.contains_key(s) {
            sum += m;
        }
    }
    Ok(sum / 2.0)
}

/// Distance from the uniform distribution on all `2^n` strings, without
/// materializing it.
pub fn distance_from_uniform(d: &DistributionTable) -> f64 {
    let u = 0.5f64.powi(d.n as i32);
    let listed: f64 = d.masses.values().map(|&m| (m - u).abs()).sum();
    let missing = (1u64 << d.n) as f64 - d.masses.len() as f64;
    (listed + missing * u) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalAudit {
    pub fraction_passing: f64,
    pub threshold: f64,
}

/// Audits the conditional min-entropy statement for a joint table whose
/// first `x_len` bits are `X` and the rest `Y`. `|Y|` is the size of the
/// support of `Y`.
pub fn conditional_minentropy_audit(
    joint: &DistributionTable,
    x_len: usize,
    eps: f64,
) -> Result<ConditionalAudit> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidDistribution(format!("eps = {eps} outside (0, 1)")));
    }
    if x_len > joint.n {
        return Err(Error::OutOfRange {
            requested: x_len,
            available: joint.n,
        });
    }
    let hx = min_entropy(&joint.marginal(0, x_len)?)?;
    // y -> (P(y), max_x P(x, y))
    let mut by_y: BTreeMap<BitString, (f64, f64)> = BTreeMap::new();
    for (s, &m) in &joint.masses {
        if m <= 0.0 {
            continue;
        }
        let e = by_y.entry(s.range(x_len, joint.n)?).or_insert((0.0, 0.0));
        e.0 += m;
        e.1 = e.1.max(m);
    }
    let threshold = hx - (by_y.len() as f64).log2() - (1.0 / eps).log2();
    let fraction_passing = by_y
        .values()
        .filter(|(py, pmax)| -(pmax / py).log2() >= threshold - 1e-12)
        .map(|(py, _)| py)
        .sum();
    Ok(ConditionalAudit {
        fraction_passing,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn table(n: usize, pairs: &[(&str, f64)]) -> DistributionTable {
        DistributionTable::from_pairs(n, pairs.iter().map(|(s, m)| (b(s), *m))).unwrap()
    }

    #[test]
    fn min_entropy_examples() {
        assert_eq!(min_entropy(&DistributionTable::point(b("0110"))).unwrap(), 0.0);
        assert_eq!(min_entropy(&table(1, &[("0", 0.5), ("1", 0.5)])).unwrap(), 1.0);
        let t = table(2, &[("00", 0.5), ("01", 0.25), ("10", 0.25)]);
        assert_eq!(min_entropy(&t).unwrap(), 1.0);
        assert!(min_entropy(&DistributionTable::default()).is_err());
    }

    #[test]
    fn statistical_distance_examples() {
        let u = DistributionTable::uniform(1).unwrap();
        assert_eq!(statistical_distance(&u, &u).unwrap(), 0.0);
        let p0 = DistributionTable::point(b("0"));
        assert_eq!(statistical_distance(&u, &p0).unwrap(), 0.5);
        let skew = table(1, &[("0", 0.75), ("1", 0.25)]);
        assert_eq!(statistical_distance(&skew, &u).unwrap(), 0.25);
        assert!(statistical_distance(&u, &DistributionTable::uniform(2).unwrap()).is_err());
        assert_eq!(distance_from_uniform(&skew), 0.25);
        assert_eq!(distance_from_uniform(&DistributionTable::point(b("00"))), 0.75);
    }

    #[test]
    fn sample_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = SourceSpec::bit_fixing(6, (0..6).map(|i| (i, false)).collect()).unwrap();
        let src = Source::new(&zero).unwrap();
        for _ in 0..20 {
            assert_eq!(src.sample(&mut rng), BitString::zeros(6));
        }
        let flat = SourceSpec::flat(8, 3.0, 42).unwrap();
        let src = Source::new(&flat).unwrap();
        let support = src.table().unwrap();
        assert_eq!(support.support_size(), 8);
        for _ in 0..200 {
            assert!(support.mass(&src.sample(&mut rng)) > 0.0);
        }
        let full = Source::new(&SourceSpec::flat(8, 8.0, 3).unwrap()).unwrap();
        assert_eq!(full.table().unwrap(), DistributionTable::uniform(8).unwrap());
    }

    #[test]
    fn spec_validation() {
        assert!(SourceSpec::flat(8, 9.0, 0).is_err());
        assert!(SourceSpec::bit_fixing(4, vec![(1, true), (1, false)]).is_err());
        let bad = SourceSpec {
            n: 10,
            k: 9.0,
            family: SourceFamily::BiasedIid {
                p: 0.3,
                orientation_seed: None,
            },
        };
        assert!(bad.validate().is_err());
        assert_eq!(SourceSpec::bit_fixing_seeded(16, 5.5, 9).unwrap().analytic_min_entropy(), 6.0);
    }

    #[test]
    fn large_flat_source_hits_declared_support() {
        let spec = SourceSpec::flat(300, 4.0, 5).unwrap();
        let src = Source::new(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws: std::collections::BTreeSet<_> = (0..2000).map(|_| src.sample(&mut rng)).collect();
        assert_eq!(draws.len(), 16);
    }

    #[test]
    fn fixture_round_trip() {
        let text = "# two-bit table\n00 1/2\n01 0.25\n11 1/4\n";
        let t = DistributionTable::parse_fixture(text).unwrap();
        assert_eq!(t.mass(&b("00")), 0.5);
        assert_eq!(DistributionTable::parse_fixture(&t.to_fixture()).unwrap(), t);
        assert!(DistributionTable::parse_fixture("00 0.5\n1 0.5\n").is_err());
        assert!(DistributionTable::parse_fixture("00 0.5\n01 0.4\n").is_err());
    }

    #[test]
    fn conditional_audit_examples() {
        let x = DistributionTable::uniform(3).unwrap();
        let joint = DistributionTable::from_pairs(
            4,
            x.masses.iter().map(|(s, &m)| (s.concat(&b("1")), m)),
        )
        .unwrap();
        let a = conditional_minentropy_audit(&joint, 3, 0.25).unwrap();
        assert_eq!(a.fraction_passing, 1.0);
        assert_eq!(a.threshold, 1.0);

        // X uniform on 4 bits, Y its first bit.
        let joint = DistributionTable::uniform_over(
            5,
            (0u64..16).map(|v| {
                let x = BitString::from_u64(v, 4);
                let y = x.prefix(1).unwrap();
                x.concat(&y)
            }),
        )
        .unwrap();
        let a = conditional_minentropy_audit(&joint, 4, 0.5).unwrap();
        assert_eq!(a.threshold, 2.0);
        assert_eq!(a.fraction_passing, 1.0);
    }
}
