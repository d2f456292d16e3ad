//! Seeded and two-source extractors, the somewhere condenser and the
//! SR-source combiner.
//!
//! Default instantiations:
//! - seeded: Toeplitz hashing, seed length `n + m - 1`, error
//!   `2^((m - k)/2 - 1)`;
//! - two-source: the top `m` bits of the product in GF(2^n), error
//!   `2^((n + m - k1 - k2)/2 - 1)`;
//! - condenser block: `(a, b) -> (a, b, a*b mod p)`, no proven rate gain;
//! - SR combiner: XOR over rows of the two-source extractor;
//! - random-oracle simulation: a keyed PRF, no information-theoretic
//!   guarantee, reported as simulation-only.
//!
//! GF(2^n) moduli (coefficients below `x^n`):
//!
//! | n  | polynomial                    |
//! |----|-------------------------------|
//! | 4  | x^4 + x + 1                   |
//! | 8  | x^8 + x^4 + x^3 + x + 1       |
//! | 16 | x^16 + x^5 + x^3 + x + 1      |
//! | 32 | x^32 + x^7 + x^3 + x^2 + 1    |
//! | 64 | x^64 + x^4 + x^3 + x + 1      |

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::{BitMatrix, BitString};
use crate::error::{Error, Result};

/// Output length at which Toeplitz streams switch to pre-shifted seed copies.
const SHIFTED_COPIES_FROM: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeededKind {
    ToeplitzHash,
    RandomOracleSim { session_seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeededExtractorSpec {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Error for the declared source entropy.
    pub error_bound: f64,
    #[serde(flatten)]
    pub kind: SeededKind,
}

impl SeededExtractorSpec {
    pub fn toeplitz(n: usize, m: usize, k: f64) -> Result<Self> {
        if m > n || n == 0 {
            return Err(Error::Unsupported(format!(
                "toeplitz output {m} exceeds source length {n}"
            )));
        }
        Ok(SeededExtractorSpec {
            n,
            d: n + m - 1,
            m,
            error_bound: toeplitz_error_bound(m, k),
            kind: SeededKind::ToeplitzHash,
        })
    }

    /// Keyed-PRF stand-in accepting any seed length `d`.
    pub fn random_oracle(n: usize, d: usize, m: usize, session_seed: u64) -> Self {
        SeededExtractorSpec {
            n,
            d,
            m,
            error_bound: f64::NAN,
            kind: SeededKind::RandomOracleSim { session_seed },
        }
    }

    pub fn is_simulation_only(&self) -> bool {
        matches!(self.kind, SeededKind::RandomOracleSim { .. })
    }

    /// A prefix-consistent lazy evaluation of `Ext(w, seed)`.
    pub fn stream(&self, w: &BitString, seed: &BitString) -> Result<Box<dyn PrefixStream>> {
        if w.len() != self.n || seed.len() != self.d {
            return Err(Error::LengthMismatch(format!(
                "extractor expects ({}, {}) bits, got ({}, {})",
                self.n,
                self.d,
                w.len(),
                seed.len()
            )));
        }
        Ok(match self.kind {
            SeededKind::ToeplitzHash => Box::new(ToeplitzStream::new(w, seed, self.m)?),
            SeededKind::RandomOracleSim { session_seed } => {
                Box::new(OracleStream::new(w, seed, self.m, session_seed))
            }
        })
    }

    pub fn extract(&self, w: &BitString, seed: &BitString) -> Result<BitString> {
        self.stream(w, seed)?.prefix(self.m)
    }
}

pub fn toeplitz_error_bound(m: usize, k: f64) -> f64 {
    2f64.powf((m as f64 - k) / 2.0 - 1.0)
}

/// An extractor output computed on demand, prefix by prefix.
pub trait PrefixStream: Send {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first `s` bits; `s > len()` is an out-of-range error.
    fn prefix(&mut self, s: usize) -> Result<BitString>;

    /// True when `p` equals the first `|p|` bits.
    fn matches_prefix(&mut self, p: &BitString) -> Result<bool> {
        Ok(&self.prefix(p.len())? == p)
    }
}

/// Toeplitz hashing: output bit `j` is the inner product of `w` with the
/// seed window starting at `m - 1 - j`, i.e. `T[j][i] = seed[i - j + m - 1]`.
pub struct ToeplitzStream {
    w: Vec<u64>,
    m: usize,
    seed: BitString,
    shifted: Option<Vec<Vec<u64>>>,
    done: BitString,
}

impl ToeplitzStream {
    pub fn new(w: &BitString, seed: &BitString, m: usize) -> Result<Self> {
        let n = w.len();
        if m > n || seed.len() + 1 != n + m || (n == 0 && m == 0 && !seed.is_empty()) {
            return Err(Error::LengthMismatch(format!(
                "toeplitz needs m <= n and seed of n + m - 1 bits; got n = {n}, m = {m}, seed = {}",
                seed.len()
            )));
        }
        Ok(ToeplitzStream {
            w: w.words().to_vec(),
            m,
            seed: seed.clone(),
            shifted: None,
            done: BitString::new(),
        })
    }

    fn bit(&self, j: usize) -> bool {
        let off = self.m - 1 - j;
        let mut acc = 0u64;
        match &self.shifted {
            Some(copies) => {
                let row = &copies[off % 64][off / 64..];
                for (a, b) in self.w.iter().zip(row) {
                    acc ^= a & b;
                }
            }
            None => {
                for (q, a) in self.w.iter().enumerate() {
                    acc ^= a & self.seed.word_at(off + 64 * q);
                }
            }
        }
        acc.count_ones() & 1 == 1
    }
}

impl PrefixStream for ToeplitzStream {
    fn len(&self) -> usize {
        self.m
    }

    fn prefix(&mut self, s: usize) -> Result<BitString> {
        if s > self.m {
            return Err(Error::OutOfRange {
                requested: s,
                available: self.m,
            });
        }
        if s >= SHIFTED_COPIES_FROM && self.shifted.is_none() {
            let words = self.seed.len().div_ceil(64) + 1;
            self.shifted = Some(
                (0..64)
                    .map(|r| (0..words).map(|q| self.seed.word_at(64 * q + r)).collect())
                    .collect(),
            );
        }
        for j in self.done.len()..s {
            let b = self.bit(j);
            self.done.push(b);
        }
        self.done.prefix(s)
    }
}

pub fn toeplitz_extract(w: &BitString, seed: &BitString, m: usize) -> Result<BitString> {
    ToeplitzStream::new(w, seed, m)?.prefix(m)
}

/// ChaCha8 keystream keyed by `SHA-256(session_seed, x, y)`.
pub struct OracleStream {
    rng: ChaCha8Rng,
    m: usize,
    done: BitString,
}

impl OracleStream {
    pub fn new(x: &BitString, y: &BitString, m: usize, session_seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"two-source-oracle");
        h.update(session_seed.to_le_bytes());
        for s in [x, y] {
            h.update((s.len() as u64).to_le_bytes());
            for w in s.words() {
                h.update(w.to_be_bytes());
            }
        }
        OracleStream {
            rng: ChaCha8Rng::from_seed(h.finalize().into()),
            m,
            done: BitString::new(),
        }
    }
}

impl PrefixStream for OracleStream {
    fn len(&self) -> usize {
        self.m
    }

    fn prefix(&mut self, s: usize) -> Result<BitString> {
        if s > self.m {
            return Err(Error::OutOfRange {
                requested: s,
                available: self.m,
            });
        }
        while self.done.len() < s {
            let word = BitString::from_u64(self.rng.next_u64(), 64);
            self.done.extend_from(&word);
        }
        self.done.prefix(s)
    }
}

/// Simulation-only stand-in for a non-constructive two-source extractor.
pub fn random_oracle_two_source(x: &BitString, y: &BitString, m: usize, session_seed: u64) -> BitString {
    OracleStream::new(x, y, m, session_seed)
        .prefix(m)
        .expect("m within its own length")
}

/// Low coefficients of the pinned modulus for GF(2^n).
pub fn gf2n_modulus(n: usize) -> Result<u64> {
    Ok(match n {
        4 => 0x3,
        8 => 0x1B,
        16 => 0x2B,
        32 => 0x8D,
        64 => 0x1B,
        _ => {
            return Err(Error::Unsupported(format!(
                "GF(2^{n}) has no pinned modulus; use 4, 8, 16, 32 or 64"
            )))
        }
    })
}

/// Product in GF(2^n); operands are the low `n` bits of `a` and `b`.
pub fn gf2n_mul(a: u64, b: u64, n: usize) -> Result<u64> {
    let poly = gf2n_modulus(n)?;
    let mut prod = 0u128;
    for i in 0..n {
        if (b >> i) & 1 == 1 {
            prod ^= (a as u128) << i;
        }
    }
    for i in (n..2 * n).rev() {
        if (prod >> i) & 1 == 1 {
            prod ^= 1u128 << i;
            prod ^= (poly as u128) << (i - n);
        }
    }
    Ok(prod as u64)
}

/// The first `m` bits of `x * y` in GF(2^n), with bit 0 of a string as the
/// coefficient of `x^(n-1)`.
pub fn gf2n_product_extract(x: &BitString, y: &BitString, m: usize) -> Result<BitString> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch(format!(
            "field operands of {} and {} bits",
            n,
            y.len()
        )));
    }
    if m > n {
        return Err(Error::OutOfRange {
            requested: m,
            available: n,
        });
    }
    let p = gf2n_mul(x.to_u64(), y.to_u64(), n)?;
    BitString::from_u64(p, n).prefix(m)
}

/// `1/2 * 2^((n + m - k1 - k2)/2)`, capped at 1.
pub fn gf2n_error_bound(n: usize, m: usize, k1: f64, k2: f64) -> f64 {
    (0.5 * 2f64.powf((n as f64 + m as f64 - k1 - k2) / 2.0)).min(1.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TwoSourceKind {
    Gf2nProduct,
    RandomOracleSim { session_seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSourceExtractorSpec {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    #[serde(flatten)]
    pub kind: TwoSourceKind,
}

impl TwoSourceExtractorSpec {
    pub fn gf2n(n: usize, m: usize) -> Result<Self> {
        gf2n_modulus(n)?;
        if m > n {
            return Err(Error::Unsupported(format!("gf2n output {m} exceeds {n}")));
        }
        Ok(TwoSourceExtractorSpec {
            n1: n,
            n2: n,
            m,
            kind: TwoSourceKind::Gf2nProduct,
        })
    }

    pub fn random_oracle(n1: usize, n2: usize, m: usize, session_seed: u64) -> Self {
        TwoSourceExtractorSpec {
            n1,
            n2,
            m,
            kind: TwoSourceKind::RandomOracleSim { session_seed },
        }
    }

    pub fn is_simulation_only(&self) -> bool {
        matches!(self.kind, TwoSourceKind::RandomOracleSim { .. })
    }

    /// `Some(bound)` for the field product, `None` for the simulation.
    pub fn error_bound(&self, k1: f64, k2: f64) -> Option<f64> {
        match self.kind {
            TwoSourceKind::Gf2nProduct => Some(gf2n_error_bound(self.n1, self.m, k1, k2)),
            TwoSourceKind::RandomOracleSim { .. } => None,
        }
    }

    pub fn extract(&self, x: &BitString, y: &BitString) -> Result<BitString> {
        if x.len() != self.n1 || y.len() != self.n2 {
            return Err(Error::LengthMismatch(format!(
                "two-source extractor expects ({}, {}) bits, got ({}, {})",
                self.n1,
                self.n2,
                x.len(),
                y.len()
            )));
        }
        match self.kind {
            TwoSourceKind::Gf2nProduct => gf2n_product_extract(x, y, self.m),
            TwoSourceKind::RandomOracleSim { session_seed } => {
                Ok(random_oracle_two_source(x, y, self.m, session_seed))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondenserSpec {
    pub n: usize,
    pub iterations: u32,
    pub p: u64,
    pub d: usize,
    pub m: usize,
}

impl CondenserSpec {
    pub fn new(n: usize, iterations: u32, p: u64) -> Result<Self> {
        let mut len = n;
        for level in 0..iterations {
            if len % 2 != 0 || len == 0 {
                return Err(Error::LengthMismatch(format!(
                    "row of {len} bits cannot be halved at level {level}"
                )));
            }
            len /= 2;
            if len < 64 && p > 1u64 << len {
                return Err(Error::Unsupported(format!(
                    "modulus {p} does not fit a {len}-bit half at level {level}"
                )));
            }
        }
        if iterations > 0 && p < 2 {
            return Err(Error::Unsupported(format!("modulus {p} below 2")));
        }
        if iterations > 0 && n / 2 > 64 {
            return Err(Error::TooLarge {
                what: "condenser half length",
                got: n / 2,
                limit: 64,
            });
        }
        Ok(CondenserSpec {
            n,
            iterations,
            p,
            d: 3usize.pow(iterations),
            m: len,
        })
    }
}

/// Applies the `(a, b) -> (a, b, a*b mod p)` block `iterations` times.
pub fn somewhere_condense(x: &BitString, spec: &CondenserSpec) -> Result<BitMatrix> {
    if x.len() != spec.n {
        return Err(Error::LengthMismatch(format!(
            "condenser expects {} bits, got {}",
            spec.n,
            x.len()
        )));
    }
    let mut rows = vec![x.clone()];
    for _ in 0..spec.iterations {
        let mut next = Vec::with_capacity(rows.len() * 3);
        for r in &rows {
            let half = r.len() / 2;
            let a = r.prefix(half)?;
            let b = r.range(half, r.len())?;
            let prod = ((a.to_u64() % spec.p) as u128 * (b.to_u64() % spec.p) as u128
                % spec.p as u128) as u64;
            next.push(a);
            next.push(b);
            next.push(BitString::from_u64(prod, half));
        }
        rows = next;
    }
    BitMatrix::new(rows)
}

/// XOR over rows of `ext(x', y_i)`, where `x'` is `x` zero-padded or
/// truncated to the row length.
pub fn srg_extract(x: &BitString, y: &BitMatrix, ext: &TwoSourceExtractorSpec) -> Result<BitString> {
    if y.row_count() == 0 {
        return Err(Error::LengthMismatch("SR-source with no rows".into()));
    }
    if y.row_len() != ext.n2 {
        return Err(Error::LengthMismatch(format!(
            "SR rows of {} bits for an extractor taking {}",
            y.row_len(),
            ext.n2
        )));
    }
    let xs = x.resized(ext.n1);
    let mut acc = BitString::zeros(ext.m);
    for row in y.rows() {
        acc = acc.xor(&ext.extract(&xs, row)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    /// Explicit matrix-vector product, row j built from the Toeplitz rule.
    fn toeplitz_oracle(w: &BitString, seed: &BitString, m: usize) -> BitString {
        let n = w.len();
        BitString::from_bits((0..m).map(|j| {
            (0..n).fold(false, |acc, i| acc ^ (seed.get(i + m - 1 - j) & w.get(i)))
        }))
    }

    #[test]
    fn toeplitz_examples() {
        let w = b("1011");
        assert_eq!(toeplitz_extract(&w, &BitString::zeros(5), 2).unwrap(), b("00"));
        assert_eq!(
            toeplitz_extract(&BitString::zeros(4), &b("11010"), 2).unwrap(),
            b("00")
        );
        // rows: j=0 -> seed[1..5] = 1010, j=1 -> seed[0..4] = 0101
        assert_eq!(toeplitz_extract(&w, &b("01010"), 2).unwrap(), b("01"));
        assert_eq!(toeplitz_oracle(&w, &b("01010"), 2), b("01"));
        assert!(toeplitz_extract(&w, &b("0101"), 2).is_err());
    }

    #[test]
    fn toeplitz_stream_matches_oracle_across_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, m) in &[(70, 3), (130, 129), (300, 280), (64, 64)] {
            let w = BitString::random(n, &mut rng);
            let seed = BitString::random(n + m - 1, &mut rng);
            let want = toeplitz_oracle(&w, &seed, m);
            let mut s = ToeplitzStream::new(&w, &seed, m).unwrap();
            assert_eq!(s.prefix(m / 2).unwrap(), want.prefix(m / 2).unwrap());
            assert_eq!(s.prefix(m).unwrap(), want);
            assert!(s.prefix(m + 1).is_err());
        }
    }

    /// Schoolbook multiplication through log/antilog tables for x^8+x^4+x^3+x+1
    /// with generator 3.
    fn gf256_tables() -> (Vec<u8>, Vec<u8>) {
        let mut exp = vec![0u8; 512];
        let mut log = vec![0u8; 256];
        let mut v: u16 = 1;
        for i in 0..255 {
            exp[i] = v as u8;
            log[v as usize] = i as u8;
            v ^= v << 1;
            if v & 0x100 != 0 {
                v ^= 0x11B;
            }
        }
        for i in 255..512 {
            exp[i] = exp[i - 255];
        }
        (exp, log)
    }

    #[test]
    fn gf2n_examples() {
        let y = b("10110011");
        assert_eq!(gf2n_product_extract(&BitString::zeros(8), &y, 3).unwrap(), b("000"));
        assert_eq!(gf2n_product_extract(&BitString::from_u64(1, 8), &y, 5).unwrap(), b("10110"));
        let (exp, log) = gf256_tables();
        let (a, c) = (0x57u8, 0x83u8);
        let want = exp[log[a as usize] as usize + log[c as usize] as usize];
        assert_eq!(want, 0xC1);
        let got = gf2n_product_extract(&BitString::from_u64(a as u64, 8), &BitString::from_u64(c as u64, 8), 3)
            .unwrap();
        assert_eq!(got, BitString::from_u64(want as u64 >> 5, 3));
        for a in 1..=255u64 {
            for c in [1u64, 2, 0x53, 0xCA, 0xFF] {
                let t = exp[log[a as usize] as usize + log[c as usize] as usize] as u64;
                assert_eq!(gf2n_mul(a, c, 8).unwrap(), t);
            }
        }
        assert!(gf2n_product_extract(&BitString::zeros(12), &BitString::zeros(12), 1).is_err());
    }

    fn poly_mulmod(a: u128, b: u128, f: u128, n: usize) -> u128 {
        let mut r = 0u128;
        let mut a = a;
        for i in 0..n {
            if (b >> i) & 1 == 1 {
                r ^= a;
            }
            a <<= 1;
            if (a >> n) & 1 == 1 {
                a ^= f;
            }
        }
        r
    }

    fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
        let deg = |p: u128| 127 - p.leading_zeros() as i32;
        while b != 0 {
            while a != 0 && deg(a) >= deg(b) {
                a ^= b << (deg(a) - deg(b));
            }
            std::mem::swap(&mut a, &mut b);
        }
        a
    }

    /// Rabin's test specialised to n a power of two.
    #[test]
    fn pinned_moduli_are_irreducible() {
        for n in [4usize, 8, 16, 32, 64] {
            let f = (1u128 << n) | gf2n_modulus(n).unwrap() as u128;
            let mut x = 2u128;
            let mut half = 0;
            for step in 1..=n {
                x = poly_mulmod(x, x, f, n);
                if step == n / 2 {
                    half = x;
                }
            }
            assert_eq!(x, 2, "x^(2^{n}) != x mod f for n = {n}");
            assert_eq!(poly_gcd(f, half ^ 2), 1, "n = {n}");
        }
    }

    #[test]
    fn condenser_examples() {
        let x = b("0000011100001101");
        let id = somewhere_condense(&x, &CondenserSpec::new(16, 0, 2).unwrap()).unwrap();
        assert_eq!(id.rows(), &[x.clone()]);
        let spec = CondenserSpec::new(16, 1, 251).unwrap();
        let out = somewhere_condense(&x, &spec).unwrap();
        assert_eq!(out.row_count(), 3);
        assert_eq!(out.rows()[0].to_u64(), 7);
        assert_eq!(out.rows()[1].to_u64(), 13);
        assert_eq!(out.rows()[2].to_u64(), 91);
        let two = CondenserSpec::new(16, 2, 13).unwrap();
        assert_eq!((two.d, two.m), (9, 4));
        assert!(CondenserSpec::new(16, 2, 251).is_err());
        assert!(CondenserSpec::new(6, 2, 2).is_err());
    }

    #[test]
    fn srg_examples() {
        let ext = TwoSourceExtractorSpec::gf2n(8, 3).unwrap();
        let x = b("11001010");
        let row = b("01110001");
        let single = BitMatrix::new(vec![row.clone()]).unwrap();
        assert_eq!(srg_extract(&x, &single, &ext).unwrap(), ext.extract(&x, &row).unwrap());
        let other = b("10000001");
        let twin = BitMatrix::new(vec![row.clone(), row.clone(), other.clone()]).unwrap();
        assert_eq!(srg_extract(&x, &twin, &ext).unwrap(), ext.extract(&x, &other).unwrap());
    }

    #[test]
    fn oracle_is_deterministic_and_keyed() {
        let x = b("1010");
        let y = b("0110");
        let a = random_oracle_two_source(&x, &y, 100, 1);
        assert_eq!(a, random_oracle_two_source(&x, &y, 100, 1));
        assert_ne!(a, random_oracle_two_source(&x, &y, 100, 2));
        assert_eq!(random_oracle_two_source(&x, &y, 37, 1), a.prefix(37).unwrap());
    }
}
