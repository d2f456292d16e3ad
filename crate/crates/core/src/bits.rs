//! Bit strings, bit matrices and the string metrics the protocols are
//! written in.
//!
//! Bit 0 is the leftmost position. Storage is MSB-first inside `u64` words,
//! so `prefix` keeps the low-index words and the ASCII form reads left to
//! right. Bits past `len` in the last word are always zero, which keeps the
//! derived `Eq` and `Hash` positional.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default length limit for [`min_edit_ops_with_flips`].
pub const FLIP_SEARCH_BOUND: usize = 12;

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = BitString {
            words: vec![u64::MAX; words_for(len)],
            len,
        };
        s.clear_tail();
        s
    }

    /// Builds from raw MSB-first words; bits beyond `len` are cleared.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(words_for(len), 0);
        let mut s = BitString { words, len };
        s.clear_tail();
        s
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = BitString::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    /// The `len`-bit big-endian rendering of `value`: bit 0 is the most
    /// significant of the `len` bits.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        if len == 0 {
            return BitString::new();
        }
        let v = if len == 64 { value } else { value & ((1u64 << len) - 1) };
        BitString {
            words: vec![v << (64 - len)],
            len,
        }
    }

    /// Inverse of [`BitString::from_u64`]; panics above 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "to_u64 supports at most 64 bits");
        if self.len == 0 {
            0
        } else {
            self.words[0] >> (64 - self.len)
        }
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = (0..words_for(len)).map(|_| rng.next_u64()).collect();
        Self::from_words(words, len)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (63 - i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, b: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (63 - i % 64);
        if b {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, b: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, b);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        if self.len % 64 == 0 {
            self.words.truncate(self.len / 64);
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            return;
        }
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// 64 bits starting at `offset`, MSB-first; positions past the end read
    /// as zero.
    #[inline]
    pub fn word_at(&self, offset: usize) -> u64 {
        let q = offset / 64;
        let r = offset % 64;
        let hi = self.words.get(q).copied().unwrap_or(0);
        if r == 0 {
            hi
        } else {
            let lo = self.words.get(q + 1).copied().unwrap_or(0);
            (hi << r) | (lo >> (64 - r))
        }
    }

    /// The first `s` bits.
    pub fn prefix(&self, s: usize) -> Result<BitString> {
        if s > self.len {
            return Err(Error::OutOfRange {
                requested: s,
                available: self.len,
            });
        }
        Ok(BitString::from_words(self.words[..words_for(s)].to_vec(), s))
    }

    /// Bits `start..end`.
    pub fn range(&self, start: usize, end: usize) -> Result<BitString> {
        if start > end || end > self.len {
            return Err(Error::OutOfRange {
                requested: end,
                available: self.len,
            });
        }
        let n = end - start;
        let words = (0..words_for(n)).map(|k| self.word_at(start + 64 * k)).collect();
        Ok(BitString::from_words(words, n))
    }

    /// True when `self` is a prefix of `other`.
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        self.len <= other.len && other.prefix(self.len).map(|p| &p == self).unwrap_or(false)
    }

    /// Number of ones.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len != other.len {
            return Err(Error::LengthMismatch(format!(
                "xor of {} and {} bits",
                self.len, other.len
            )));
        }
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect();
        Ok(BitString {
            words,
            len: self.len,
        })
    }

    /// Zero-extends or truncates to exactly `len` bits.
    pub fn resized(&self, len: usize) -> BitString {
        if len <= self.len {
            self.prefix(len).expect("len checked")
        } else {
            BitString::from_words(self.words.clone(), len)
        }
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (64 - r);
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "b\"{self}\"")
        } else {
            write!(f, "BitString({} bits)", self.len)
        }
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::from_bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Rows of equal length.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: Vec<BitString>,
}

impl BitMatrix {
    pub fn new(rows: Vec<BitString>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(Error::LengthMismatch(format!(
                    "matrix rows of {} and {} bits",
                    first.len(),
                    bad.len()
                )));
            }
        }
        Ok(BitMatrix { rows })
    }

    pub fn rows(&self) -> &[BitString] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row_len(&self) -> usize {
        self.rows.first().map_or(0, BitString::len)
    }

    /// Rows joined end to end.
    pub fn flatten(&self) -> BitString {
        let mut out = BitString::new();
        for r in &self.rows {
            out.extend_from(r);
        }
        out
    }

    /// Splits a flat string into `row_count` equal rows.
    pub fn unflatten(flat: &BitString, row_count: usize) -> Result<Self> {
        if row_count == 0 || flat.len() % row_count != 0 {
            return Err(Error::LengthMismatch(format!(
                "{} bits cannot form {row_count} equal rows",
                flat.len()
            )));
        }
        let w = flat.len() / row_count;
        let rows = (0..row_count)
            .map(|i| flat.range(i * w, (i + 1) * w))
            .collect::<Result<Vec<_>>>()?;
        BitMatrix::new(rows)
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for BitMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rows = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<BitString>>>()?;
        BitMatrix::new(rows)
    }
}

pub fn prefix(r: &BitString, s: usize) -> Result<BitString> {
    r.prefix(s)
}

/// Row-wise prefix of length `s`.
pub fn slice(x: &BitMatrix, s: usize) -> Result<BitMatrix> {
    if s > x.row_len() && x.row_count() > 0 {
        return Err(Error::OutOfRange {
            requested: s,
            available: x.row_len(),
        });
    }
    let rows = x.rows.iter().map(|r| r.prefix(s)).collect::<Result<Vec<_>>>()?;
    BitMatrix::new(rows)
}

pub fn weight(r: &BitString) -> usize {
    r.weight()
}

/// Length of a longest common subsequence.
pub fn lcs_len(a: &BitString, b: &BitString) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for i in 0..a.len() {
        let ai = a.get(i);
        let mut diag = 0;
        for j in 0..b.len() {
            let up = row[j + 1];
            row[j + 1] = if ai == b.get(j) {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// Insert/delete edit distance: `|c| + |c2| - 2 LCS(c, c2)`.
pub fn edit_distance(c: &BitString, c2: &BitString) -> usize {
    c.len() + c2.len() - 2 * lcs_len(c, c2)
}

/// Bit-parallel LCS for strings of at most 64 bits (Hyyrö's recurrence),
/// used by the codebook search where millions of pairs are compared.
pub fn lcs_len_short(a: &BitString, b: &BitString) -> usize {
    assert!(a.len() <= 64, "lcs_len_short takes at most 64 bits");
    let n = a.len();
    if n == 0 || b.is_empty() {
        return 0;
    }
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    // bit i of these masks is position i of `a`
    let mut m1 = 0u64;
    for i in 0..n {
        if a.get(i) {
            m1 |= 1 << i;
        }
    }
    let m0 = !m1 & mask;
    let mut v = mask;
    for bj in b.iter() {
        let u = v & if bj { m1 } else { m0 };
        v = (v.wrapping_add(u) | v.wrapping_sub(u)) & mask;
    }
    (!v & mask).count_ones() as usize
}

pub fn edit_distance_short(c: &BitString, c2: &BitString) -> usize {
    c.len() + c2.len() - 2 * lcs_len_short(c, c2)
}

/// Operation counts of a tampering sequence: `n0` changes 0→1, `n1` changes
/// 1→0, `n2` insertions plus deletions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipOps {
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
}

impl FlipOps {
    /// The count that has to be paid for: insertions, deletions and 0→1.
    pub fn costly(&self) -> usize {
        self.n0 + self.n2
    }

    fn key(&self) -> (usize, usize, usize) {
        (self.costly(), self.n1, self.n2)
    }
}

pub fn min_edit_ops_with_flips(c: &BitString, c2: &BitString) -> Result<FlipOps> {
    min_edit_ops_with_flips_bounded(c, c2, FLIP_SEARCH_BOUND)
}

/// Minimises `n0 + n2` (ties broken by fewer `n1`, then fewer `n2`) over
/// all ways of turning `c` into `c2`. Solved as a weighted alignment;
/// sequences that touch a position twice are dominated by a single
/// alignment step.
pub fn min_edit_ops_with_flips_bounded(
    c: &BitString,
    c2: &BitString,
    max_len: usize,
) -> Result<FlipOps> {
    let longest = c.len().max(c2.len());
    if longest > max_len {
        return Err(Error::TooLarge {
            what: "flip-search input length",
            got: longest,
            limit: max_len,
        });
    }
    let (n, m) = (c.len(), c2.len());
    let zero = FlipOps { n0: 0, n1: 0, n2: 0 };
    let mut dp = vec![vec![zero; m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best: Option<FlipOps> = None;
            let mut consider = |cand: FlipOps| {
                if best.is_none_or(|b| cand.key() < b.key()) {
                    best = Some(cand);
                }
            };
            if i > 0 {
                let mut d = dp[i - 1][j];
                d.n2 += 1;
                consider(d);
            }
            if j > 0 {
                let mut d = dp[i][j - 1];
                d.n2 += 1;
                consider(d);
            }
            if i > 0 && j > 0 {
                let mut d = dp[i - 1][j - 1];
                match (c.get(i - 1), c2.get(j - 1)) {
                    (false, true) => d.n0 += 1,
                    (true, false) => d.n1 += 1,
                    _ => {}
                }
                consider(d);
            }
            dp[i][j] = best.expect("at least one predecessor");
        }
    }
    Ok(dp[n][m])
}

/// One step of an alignment of a source string against a target string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignStep {
    Keep,
    /// Source bit replaced by its complement.
    Flip,
    /// Target bit with no source counterpart.
    Insert(bool),
    /// Source bit with no target counterpart.
    Delete,
}

/// Alignment of `c` against `c2` minimising the same key as
/// [`min_edit_ops_with_flips`]. With `pending_suffix`, `c2` is aligned
/// against the best prefix of `c` and the unused suffix costs nothing.
pub fn flip_alignment(c: &BitString, c2: &BitString, pending_suffix: bool) -> Vec<AlignStep> {
    let (n, m) = (c.len(), c2.len());
    let zero = FlipOps { n0: 0, n1: 0, n2: 0 };
    let mut dp = vec![zero; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    let step = |d: FlipOps, a: bool, b: bool| {
        let mut d = d;
        match (a, b) {
            (false, true) => d.n0 += 1,
            (true, false) => d.n1 += 1,
            _ => {}
        }
        d
    };
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best: Option<FlipOps> = None;
            let mut consider = |cand: FlipOps| {
                if best.is_none_or(|b| cand.key() < b.key()) {
                    best = Some(cand);
                }
            };
            if i > 0 && j > 0 {
                consider(step(dp[at(i - 1, j - 1)], c.get(i - 1), c2.get(j - 1)));
            }
            if i > 0 {
                let mut d = dp[at(i - 1, j)];
                d.n2 += 1;
                consider(d);
            }
            if j > 0 {
                let mut d = dp[at(i, j - 1)];
                d.n2 += 1;
                consider(d);
            }
            dp[at(i, j)] = best.expect("at least one predecessor");
        }
    }
    let mut i = if pending_suffix {
        (0..=n).min_by_key(|&i| dp[at(i, m)].key()).expect("non-empty range")
    } else {
        n
    };
    let mut j = m;
    let mut out = Vec::with_capacity(n.max(m));
    while i > 0 || j > 0 {
        let cur = dp[at(i, j)].key();
        if i > 0 && j > 0 && step(dp[at(i - 1, j - 1)], c.get(i - 1), c2.get(j - 1)).key() == cur {
            out.push(if c.get(i - 1) == c2.get(j - 1) { AlignStep::Keep } else { AlignStep::Flip });
            i -= 1;
            j -= 1;
        } else if i > 0 && {
            let mut d = dp[at(i - 1, j)];
            d.n2 += 1;
            d.key() == cur
        } {
            out.push(AlignStep::Delete);
            i -= 1;
        } else {
            out.push(AlignStep::Insert(c2.get(j - 1)));
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Applies an alignment to `c`, yielding the target it was computed for.
pub fn apply_alignment(c: &BitString, steps: &[AlignStep]) -> BitString {
    let mut out = BitString::new();
    let mut i = 0;
    for s in steps {
        match s {
            AlignStep::Keep => {
                out.push(c.get(i));
                i += 1;
            }
            AlignStep::Flip => {
                out.push(!c.get(i));
                i += 1;
            }
            AlignStep::Insert(b) => out.push(*b),
            AlignStep::Delete => i += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn prefix_examples() {
        assert_eq!(prefix(&b("10110"), 3).unwrap(), b("101"));
        assert_eq!(prefix(&b("10110"), 5).unwrap(), b("10110"));
        assert_eq!(prefix(&b("10110"), 0).unwrap(), BitString::new());
        assert!(matches!(
            prefix(&b("10110"), 6),
            Err(Error::OutOfRange { requested: 6, available: 5 })
        ));
    }

    #[test]
    fn slice_examples() {
        let x: BitMatrix = "101\n110".parse().unwrap();
        let s = slice(&x, 2).unwrap();
        assert_eq!(s.rows(), &[b("10"), b("11")]);
        assert_eq!(slice(&x, 3).unwrap(), x);
        assert!(slice(&x, 4).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight(&b("10110")), 3);
        assert_eq!(weight(&b("0000")), 0);
        assert_eq!(weight(&BitString::new()), 0);
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance(&b("0101"), &b("0101")), 0);
        assert_eq!(edit_distance(&BitString::new(), &b("111")), 3);
        assert_eq!(edit_distance(&b("0101"), &b("0011")), 2);
    }

    #[test]
    fn flip_ops_examples() {
        let c = b("0110");
        assert_eq!(
            min_edit_ops_with_flips(&c, &c).unwrap(),
            FlipOps { n0: 0, n1: 0, n2: 0 }
        );
        assert_eq!(
            min_edit_ops_with_flips(&b("01"), &b("10")).unwrap(),
            FlipOps { n0: 1, n1: 1, n2: 0 }
        );
        let long = BitString::zeros(13);
        assert!(matches!(
            min_edit_ops_with_flips(&long, &b("0")),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn words_and_ranges_cross_word_boundaries() {
        let mut s = BitString::new();
        for i in 0..150 {
            s.push(i % 3 == 0);
        }
        let r = s.range(60, 140).unwrap();
        for i in 0..80 {
            assert_eq!(r.get(i), (i + 60) % 3 == 0);
        }
        assert_eq!(BitString::from_u64(0b1011, 4), b("1011"));
        assert_eq!(b("1011").to_u64(), 11);
        let m = BitMatrix::unflatten(&b("101110"), 2).unwrap();
        assert_eq!(m.to_string(), "101\n110");
        assert_eq!(m.flatten(), b("101110"));
    }

    fn arb_bits(max: usize) -> impl Strategy<Value = BitString> {
        proptest::collection::vec(any::<bool>(), 0..=max).prop_map(BitString::from_bits)
    }

    proptest! {
        #[test]
        fn prefix_of_prefix(r in arb_bits(40), a in 0usize..40, b2 in 0usize..40) {
            let (a, b2) = (a.min(r.len()), b2.min(r.len()));
            let (hi, lo) = (a.max(b2), a.min(b2));
            prop_assert_eq!(r.prefix(hi).unwrap().prefix(lo).unwrap(), r.prefix(lo).unwrap());
        }

        #[test]
        fn edit_distance_is_a_metric(x in arb_bits(16), y in arb_bits(16), z in arb_bits(16)) {
            let dxy = edit_distance(&x, &y);
            prop_assert_eq!(dxy, edit_distance(&y, &x));
            prop_assert_eq!(edit_distance(&x, &x), 0);
            prop_assert_eq!(dxy == 0, x == y);
            prop_assert!(edit_distance(&x, &z) <= dxy + edit_distance(&y, &z));
            prop_assert_eq!(dxy % 2, (x.len() + y.len()) % 2);
        }

        #[test]
        fn bit_parallel_lcs_matches_dp(x in arb_bits(64), y in arb_bits(64)) {
            prop_assert_eq!(lcs_len_short(&x, &y), lcs_len(&x, &y));
        }

        #[test]
        fn ascii_round_trip(x in arb_bits(200)) {
            prop_assert_eq!(x.to_string().parse::<BitString>().unwrap(), x);
        }
    }

    proptest! {
        #[test]
        fn alignment_reproduces_target_at_minimal_cost(a in "[01]{0,10}", b in "[01]{0,10}") {
            let (a, b) = (BitString::from_str(&a).unwrap(), BitString::from_str(&b).unwrap());
            let steps = flip_alignment(&a, &b, false);
            prop_assert_eq!(apply_alignment(&a, &steps), b.clone());
            let ops = min_edit_ops_with_flips(&a, &b).unwrap();
            let mut got = FlipOps { n0: 0, n1: 0, n2: 0 };
            let mut i = 0;
            for s in &steps {
                match s {
                    AlignStep::Keep => i += 1,
                    AlignStep::Flip => {
                        if a.get(i) { got.n1 += 1 } else { got.n0 += 1 }
                        i += 1;
                    }
                    AlignStep::Insert(_) => got.n2 += 1,
                    AlignStep::Delete => { got.n2 += 1; i += 1 }
                }
            }
            prop_assert_eq!(got, ops);
        }
    }

    #[test]
    fn pending_suffix_is_free() {
        let steps = flip_alignment(&b("0110"), &b("01"), true);
        assert_eq!(steps, vec![AlignStep::Keep, AlignStep::Keep]);
        let steps = flip_alignment(&b("0110"), &b("01"), false);
        assert_eq!(steps.iter().filter(|s| **s == AlignStep::Delete).count(), 2);
    }
}
