//! Edit-metric error-detecting codes and the constant-weight bit map.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bits::{edit_distance, edit_distance_short, BitString};
use crate::error::{Error, Result};

/// Largest message length a codebook may have; every generated or loaded
/// book is verified over all pairs.
pub const MAX_LAMBDA_M: usize = 12;

pub const DEFAULT_E: f64 = 0.25;
pub const DEFAULT_RHO: f64 = 0.25;

/// `0 -> 01`, `1 -> 10`.
pub fn constant_weight_encode(m: &BitString) -> BitString {
    BitString::from_bits(m.iter().flat_map(|b| [b, !b]))
}

/// Inverse of [`constant_weight_encode`]; `None` on odd length or a `00` /
/// `11` pair.
pub fn constant_weight_decode(c: &BitString) -> Option<BitString> {
    if c.len() % 2 != 0 {
        return None;
    }
    let mut out = BitString::new();
    for i in (0..c.len()).step_by(2) {
        match (c.get(i), c.get(i + 1)) {
            (false, true) => out.push(false),
            (true, false) => out.push(true),
            _ => return None,
        }
    }
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditCodebook {
    pub lambda_m: usize,
    pub lambda_c: usize,
    pub e: f64,
    pub weight: usize,
    /// Codeword for message value `v` (big-endian) at index `v`.
    codewords: Vec<BitString>,
    #[serde(skip)]
    index: HashMap<BitString, usize>,
}

impl EditCodebook {
    fn from_parts(lambda_m: usize, lambda_c: usize, e: f64, weight: usize, codewords: Vec<BitString>) -> Result<Self> {
        let index = codewords.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        let book = EditCodebook {
            lambda_m,
            lambda_c,
            e,
            weight,
            codewords,
            index,
        };
        book.verify()?;
        Ok(book)
    }

    pub fn codewords(&self) -> &[BitString] {
        &self.codewords
    }

    pub fn min_distance_required(&self) -> usize {
        required_distance(self.e, self.lambda_c)
    }

    /// Exhaustive check of size, lengths, common weight and pairwise
    /// distance.
    pub fn verify(&self) -> Result<()> {
        let want = 1usize << self.lambda_m;
        if self.codewords.len() != want {
            return Err(Error::CodebookInvalid(format!(
                "{} codewords, expected {want}",
                self.codewords.len()
            )));
        }
        for (i, c) in self.codewords.iter().enumerate() {
            if c.len() != self.lambda_c || c.weight() != self.weight {
                return Err(Error::CodebookInvalid(format!(
                    "codeword {i} = {c} is not {} bits of weight {}",
                    self.lambda_c, self.weight
                )));
            }
        }
        let dmin = self.min_distance_required();
        let dist: fn(&BitString, &BitString) -> usize = if self.lambda_c <= 64 {
            edit_distance_short
        } else {
            edit_distance
        };
        for i in 0..self.codewords.len() {
            for j in i + 1..self.codewords.len() {
                let d = dist(&self.codewords[i], &self.codewords[j]);
                if d < dmin {
                    return Err(Error::CodebookInvalid(format!(
                        "codewords {i} and {j} at edit distance {d} < {dmin}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self, m: &BitString) -> Result<BitString> {
        edit_encode(m, self)
    }

    pub fn decode_exact(&self, c: &BitString) -> Option<BitString> {
        edit_decode_exact(c, self)
    }

    /// Cache text: a header line, then `message codeword` per line.
    pub fn to_cache_text(&self) -> String {
        let mut out = format!(
            "lambda_m={} lambda_c={} e={} weight={}\n",
            self.lambda_m, self.lambda_c, self.e, self.weight
        );
        for (v, c) in self.codewords.iter().enumerate() {
            writeln!(out, "{} {c}", BitString::from_u64(v as u64, self.lambda_m)).expect("string write");
        }
        out
    }

    /// Parses and re-verifies cache text.
    pub fn from_cache_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty codebook cache".into()))?;
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for tok in header.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {tok:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| Error::Parse(format!("header lacks {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Parse(format!("header field {k} is not an integer")))
        };
        let lambda_m = num("lambda_m")?;
        let lambda_c = num("lambda_c")?;
        let weight = num("weight")?;
        let e: f64 = get("e")?
            .parse()
            .map_err(|_| Error::Parse("header field e is not a number".into()))?;
        if lambda_m > MAX_LAMBDA_M {
            return Err(Error::TooLarge {
                what: "cached lambda_m",
                got: lambda_m,
                limit: MAX_LAMBDA_M,
            });
        }
        let mut codewords = vec![None; 1 << lambda_m];
        for line in lines {
            let (m, c) = line
                .trim()
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("bad codebook line {line:?}")))?;
            let m: BitString = m.parse()?;
            if m.len() != lambda_m {
                return Err(Error::Parse(format!("message {m} is not {lambda_m} bits")));
            }
            let slot = &mut codewords[m.to_u64() as usize];
            if slot.is_some() {
                return Err(Error::Parse(format!("message {m} listed twice")));
            }
            *slot = Some(c.trim().parse::<BitString>()?);
        }
        let codewords = codewords
            .into_iter()
            .enumerate()
            .map(|(v, c)| c.ok_or_else(|| Error::CodebookInvalid(format!("message {v} missing"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(lambda_m, lambda_c, e, weight, codewords)
    }

    pub fn cache_path(dir: &Path, lambda_m: usize, e: f64, rho: f64) -> PathBuf {
        dir.join(format!("edit_m{lambda_m}_e{e}_rho{rho}.book"))
    }

    /// Loads a cached book for the parameters, or generates and caches one.
    /// A cached book that fails verification is regenerated.
    pub fn load_or_generate(dir: &Path, lambda_m: usize, e: f64, rho: f64) -> Result<Self> {
        let path = Self::cache_path(dir, lambda_m, e, rho);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(book) = Self::from_cache_text(&text) {
                if book.lambda_m == lambda_m && book.e == e && book.lambda_c == code_length(lambda_m, rho)? {
                    return Ok(book);
                }
            }
        }
        let book = edit_code_generate(lambda_m, e, rho)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, book.to_cache_text())?;
        Ok(book)
    }
}

fn required_distance(e: f64, lambda_c: usize) -> usize {
    (e * lambda_c as f64 - 1e-9).ceil().max(0.0) as usize
}

fn code_length(lambda_m: usize, rho: f64) -> Result<usize> {
    let lc = lambda_m as f64 / rho;
    if !(rho > 0.0) || (lc - lc.round()).abs() > 1e-9 || lc.round() < 1.0 {
        return Err(Error::Unsupported(format!(
            "lambda_m / rho = {lambda_m} / {rho} is not a positive integer"
        )));
    }
    Ok(lc.round() as usize)
}

fn binomials(n: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; n + 1]; n + 1];
    for i in 0..=n {
        t[i][0] = 1;
        for j in 1..=i {
            t[i][j] = t[i - 1][j - 1].saturating_add(t[i - 1][j]);
        }
    }
    t
}

/// The `rank`-th string of length `len` and weight `w` in lexicographic
/// order.
fn unrank(mut rank: u64, len: usize, mut w: usize, binom: &[Vec<u64>]) -> BitString {
    let mut out = BitString::zeros(len);
    for i in 0..len {
        if w == 0 {
            break;
        }
        let with_zero = binom[len - i - 1][w];
        if rank >= with_zero {
            out.set(i, true);
            rank -= with_zero;
            w -= 1;
        }
    }
    out
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Greedy search over weight-`lambda_c/2` strings. Candidates are visited in
/// the order `rank = a*i + b mod N` for a fixed `a` coprime to `N`, which
/// spreads the early candidates over the whole space.
pub fn edit_code_generate(lambda_m: usize, e: f64, rho: f64) -> Result<EditCodebook> {
    if lambda_m > MAX_LAMBDA_M {
        return Err(Error::TooLarge {
            what: "lambda_m",
            got: lambda_m,
            limit: MAX_LAMBDA_M,
        });
    }
    let lambda_c = code_length(lambda_m, rho)?;
    if lambda_c > 64 {
        return Err(Error::TooLarge {
            what: "lambda_c",
            got: lambda_c,
            limit: 64,
        });
    }
    let weight = lambda_c / 2;
    let needed = 1usize << lambda_m;
    let dmin = required_distance(e, lambda_c);
    let binom = binomials(lambda_c);
    let total = binom[lambda_c][weight];
    let mut a = ((total as f64) * 0.618_033_988_749_894_9) as u64 % total.max(1);
    while gcd(a.max(1), total) != 1 {
        a += 1;
    }
    let a = a.max(1);
    let b = total / 3;
    let mut admitted: Vec<BitString> = Vec::with_capacity(needed);
    for i in 0..total {
        let rank = ((a as u128 * i as u128 + b as u128) % total as u128) as u64;
        let cand = unrank(rank, lambda_c, weight, &binom);
        if admitted.iter().all(|c| edit_distance_short(c, &cand) >= dmin) {
            admitted.push(cand);
            if admitted.len() == needed {
                return EditCodebook::from_parts(lambda_m, lambda_c, e, weight, admitted);
            }
        }
    }
    Err(Error::InsufficientCodewords {
        found: admitted.len(),
        needed,
    })
}

pub fn edit_encode(m: &BitString, book: &EditCodebook) -> Result<BitString> {
    if m.len() != book.lambda_m {
        return Err(Error::LengthMismatch(format!(
            "message of {} bits for a code on {} bits",
            m.len(),
            book.lambda_m
        )));
    }
    Ok(book.codewords[m.to_u64() as usize].clone())
}

/// The preimage of an exact codeword match.
pub fn edit_decode_exact(c: &BitString, book: &EditCodebook) -> Option<BitString> {
    let index = if book.index.is_empty() {
        book.codewords.iter().position(|x| x == c)
    } else {
        book.index.get(c).copied()
    };
    index.map(|v| BitString::from_u64(v as u64, book.lambda_m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn constant_weight_examples() {
        assert_eq!(constant_weight_encode(&b("101")), b("100110"));
        assert_eq!(constant_weight_encode(&BitString::new()), BitString::new());
        let z = constant_weight_encode(&b("0000"));
        assert_eq!((z.clone(), z.weight()), (b("01010101"), 4));
        assert_eq!(constant_weight_decode(&b("100110")), Some(b("101")));
        assert_eq!(constant_weight_decode(&b("1100")), None);
        assert_eq!(constant_weight_decode(&b("011")), None);
    }

    #[test]
    fn unrank_enumerates_every_weight_class_member_once() {
        let binom = binomials(8);
        let all: std::collections::BTreeSet<_> = (0..binom[8][3]).map(|r| unrank(r, 8, 3, &binom)).collect();
        assert_eq!(all.len(), 56);
        assert!(all.iter().all(|s| s.weight() == 3));
        assert_eq!(unrank(0, 4, 2, &binom), b("0011"));
        assert_eq!(unrank(5, 4, 2, &binom), b("1100"));
    }

    #[test]
    fn generate_small_books() {
        let one = edit_code_generate(1, 0.5, 0.25).unwrap();
        assert_eq!((one.lambda_c, one.codewords().len()), (4, 2));
        assert!(edit_distance(&one.codewords()[0], &one.codewords()[1]) >= 2);
        assert!(matches!(
            edit_code_generate(2, 1.0, 0.5),
            Err(Error::InsufficientCodewords { needed: 4, .. })
        ));
        assert!(edit_code_generate(3, 0.25, 0.4).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            edit_code_generate(5, 0.25, 0.25).unwrap(),
            edit_code_generate(5, 0.25, 0.25).unwrap()
        );
    }

    #[test]
    fn encode_decode_and_rejections() {
        let book = edit_code_generate(4, 0.25, 0.25).unwrap();
        for v in 0..16 {
            let m = BitString::from_u64(v, 4);
            let c = edit_encode(&m, &book).unwrap();
            assert_eq!(edit_decode_exact(&c, &book), Some(m));
            for i in 0..c.len() {
                let del = BitString::from_bits(c.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x));
                assert_eq!(edit_decode_exact(&del, &book), None);
            }
        }
        let mut heavy = book.codewords()[0].clone();
        let zero = (0..heavy.len()).find(|&i| !heavy.get(i)).unwrap();
        heavy.set(zero, true);
        assert_eq!(edit_decode_exact(&heavy, &book), None);
        assert!(edit_encode(&b("101"), &book).is_err());
    }

    #[test]
    fn cache_round_trip_and_tamper_detection() {
        let book = edit_code_generate(3, 0.25, 0.25).unwrap();
        let text = book.to_cache_text();
        assert!(text.starts_with("lambda_m=3 lambda_c=12 e=0.25 weight=6\n"));
        assert_eq!(EditCodebook::from_cache_text(&text).unwrap(), book);
        let first = book.codewords()[0].to_string();
        let second = book.codewords()[1].to_string();
        let forged = text.replacen(&second, &first, 1);
        assert!(EditCodebook::from_cache_text(&forged).is_err());

        let dir = tempfile::tempdir().unwrap();
        let a = EditCodebook::load_or_generate(dir.path(), 3, 0.25, 0.25).unwrap();
        assert!(EditCodebook::cache_path(dir.path(), 3, 0.25, 0.25).exists());
        assert_eq!(EditCodebook::load_or_generate(dir.path(), 3, 0.25, 0.25).unwrap(), a);
    }
}
