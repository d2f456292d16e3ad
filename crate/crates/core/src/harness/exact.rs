//! Exact distances by full enumeration of small instances.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::entropy::DistributionTable;
use crate::error::{Error, Result};
use crate::extractors::{gf2n_product_extract, toeplitz_extract};
use crate::par::{chunked_fold, map_indexed, Exec};
use crate::protocol::{r3_of, slices, ExtractParams};

/// Largest joint space enumerated.
pub const EXACT_LIMIT: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ExactJob {
    /// `(Ext(W, S), S)` against `(U_m, S)` for the Toeplitz extractor.
    Toeplitz { w: DistributionTable, m: usize },
    /// `(Ext(X, Y), Y)` against `(U_m, Y)` for the field product.
    Gf2n {
        x: DistributionTable,
        y: DistributionTable,
        m: usize,
    },
    /// Both keys of an honest extraction run against uniform, given `w` and
    /// everything sent in the clear besides tags.
    Extract {
        w: DistributionTable,
        x: DistributionTable,
        y: DistributionTable,
        params: ExtractParams,
    },
}

fn check_size(points: u128) -> Result<()> {
    if points > EXACT_LIMIT as u128 {
        return Err(Error::TooLarge {
            what: "joint enumeration",
            got: usize::try_from(points).unwrap_or(usize::MAX),
            limit: EXACT_LIMIT,
        });
    }
    Ok(())
}

fn support(d: &DistributionTable) -> Vec<(BitString, f64)> {
    d.masses.iter().filter(|(_, &m)| m > 0.0).map(|(s, &m)| (s.clone(), m)).collect()
}

/// Distance of a sub-distribution of total mass `total` over `2^bits`
/// outcomes from uniform, after normalizing.
fn sd_uniform(counts: &HashMap<u64, f64>, total: f64, bits: usize) -> f64 {
    let u = 0.5f64.powi(bits as i32);
    let listed: f64 = counts.values().map(|&c| (c / total - u).abs()).sum();
    let missing = (1u64 << bits) as f64 - counts.len() as f64;
    (listed + missing * u) / 2.0
}

pub fn exact_extraction_distance(job: &ExactJob, exec: Exec) -> Result<f64> {
    match job {
        ExactJob::Toeplitz { w, m } => toeplitz_distance(w, *m, exec),
        ExactJob::Gf2n { x, y, m } => gf2n_distance(x, y, *m, exec),
        ExactJob::Extract { w, x, y, params } => extract_distance(w, x, y, params, exec),
    }
}

pub fn toeplitz_distance(w: &DistributionTable, m: usize, exec: Exec) -> Result<f64> {
    let n = w.n;
    if m == 0 || m > n || m > 32 {
        return Err(Error::Unsupported(format!("toeplitz output {m} for {n}-bit input")));
    }
    let d = n + m - 1;
    if d > 40 {
        return Err(Error::TooLarge {
            what: "toeplitz seed length",
            got: d,
            limit: 40,
        });
    }
    let pts = support(w);
    check_size((pts.len() as u128) << d)?;
    let seeds = 1usize << d;
    let sum = chunked_fold(
        exec,
        seeds,
        1024,
        |range| {
            let mut acc = 0.0;
            let mut counts: HashMap<u64, f64> = HashMap::new();
            for s in range {
                let seed = BitString::from_u64(s as u64, d);
                // linear in w: the image of each unit vector
                let cols: Vec<u64> = (0..n)
                    .map(|i| {
                        let mut e = BitString::zeros(n);
                        e.set(i, true);
                        toeplitz_extract(&e, &seed, m).expect("valid lengths").to_u64()
                    })
                    .collect();
                counts.clear();
                for (x, p) in &pts {
                    let out = x.iter().zip(&cols).filter(|(b, _)| *b).fold(0, |a, (_, c)| a ^ c);
                    *counts.entry(out).or_insert(0.0) += p;
                }
                acc += sd_uniform(&counts, 1.0, m);
            }
            acc
        },
        0.0,
        |a, b| a + b,
    );
    Ok(sum / seeds as f64)
}

pub fn gf2n_distance(x: &DistributionTable, y: &DistributionTable, m: usize, exec: Exec) -> Result<f64> {
    if x.n != y.n || m > x.n {
        return Err(Error::LengthMismatch(format!(
            "field sources of {} and {} bits, output {m}",
            x.n, y.n
        )));
    }
    let xs = support(x);
    let ys = support(y);
    check_size(xs.len() as u128 * ys.len() as u128)?;
    let per_y = map_indexed(exec, ys.len(), |j| -> Result<f64> {
        let (yv, py) = &ys[j];
        let mut counts: HashMap<u64, f64> = HashMap::new();
        for (xv, px) in &xs {
            *counts.entry(gf2n_product_extract(xv, yv, m)?.to_u64()).or_insert(0.0) += px;
        }
        Ok(py * sd_uniform(&counts, 1.0, m))
    });
    per_y.into_iter().sum()
}

struct Side {
    s1: BitString,
    s2: crate::bits::BitMatrix,
    s3: BitString,
}

pub fn extract_distance(
    w: &DistributionTable,
    x: &DistributionTable,
    y: &DistributionTable,
    p: &ExtractParams,
    exec: Exec,
) -> Result<f64> {
    p.validate()?;
    if x.n != p.n || y.n != p.n || w.n != p.w_len {
        return Err(Error::LengthMismatch(format!(
            "tables over {}/{}/{} bits for n = {}, w_len = {}",
            x.n, y.n, w.n, p.n, p.w_len
        )));
    }
    let out_bits = 2 * p.key_len;
    if out_bits > 32 {
        return Err(Error::Unsupported(format!("{out_bits} key bits to tabulate")));
    }
    let (ws, xs, ys) = (support(w), support(x), support(y));
    check_size(ws.len() as u128 * xs.len() as u128 * ys.len() as u128)?;
    let key = p.key_extractor();
    let per_w = map_indexed(exec, ws.len(), |i| -> Result<f64> {
        let (wv, pw) = &ws[i];
        let side = |src: &BitString| -> Result<Side> {
            let s = slices(src, wv, p)?;
            Ok(Side {
                s1: s.s1.flatten(),
                s2: s.s2,
                s3: s.s3.flatten(),
            })
        };
        let ax = xs.iter().map(|(v, _)| side(v)).collect::<Result<Vec<_>>>()?;
        let by = ys.iter().map(|(v, _)| side(v)).collect::<Result<Vec<_>>>()?;
        let mut r3s: HashMap<(BitString, BitString), BitString> = HashMap::new();
        let mut keys: HashMap<(BitString, BitString), u64> = HashMap::new();
        // (x1, y1, x2, r3) -> (sx || sy) -> mass
        let mut buckets: HashMap<BitString, (f64, HashMap<u64, f64>)> = HashMap::new();
        for (a, (_, px)) in ax.iter().zip(&xs) {
            let x2 = a.s2.flatten();
            for (b, (_, py)) in by.iter().zip(&ys) {
                let y2 = b.s2.flatten();
                let r3 = match r3s.get(&(x2.clone(), y2.clone())) {
                    Some(r) => r.clone(),
                    None => {
                        let r = r3_of(&b.s2, &a.s2, p)?;
                        r3s.insert((x2.clone(), y2), r.clone());
                        r
                    }
                };
                let mut k = |s3: &BitString| -> Result<u64> {
                    let id = (s3.clone(), r3.clone());
                    if let Some(&v) = keys.get(&id) {
                        return Ok(v);
                    }
                    let v = key.extract(s3, &r3)?.to_u64();
                    keys.insert(id, v);
                    Ok(v)
                };
                let sx = k(&a.s3)?;
                let sy = k(&b.s3)?;
                let view = a.s1.concat(&b.s1).concat(&x2).concat(&r3);
                let e = buckets.entry(view).or_default();
                let mass = px * py;
                e.0 += mass;
                *e.1.entry((sx << p.key_len) | sy).or_insert(0.0) += mass;
            }
        }
        Ok(pw * buckets.values().map(|(tot, c)| tot * sd_uniform(c, *tot, out_bits)).sum::<f64>())
    });
    per_w.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn point_mass_is_fully_biased() {
        let w = DistributionTable::point(b("101100"));
        for m in 1..=3 {
            let d = toeplitz_distance(&w, m, Exec::Sequential).unwrap();
            assert!((d - (1.0 - 0.5f64.powi(m as i32))).abs() < 1e-12, "m = {m}: {d}");
        }
    }

    #[test]
    fn uniform_source_meets_the_hash_bound() {
        let w = DistributionTable::uniform(8).unwrap();
        for m in 1..=4 {
            let d = toeplitz_distance(&w, m, Exec::Parallel).unwrap();
            let bound = 2f64.powf((m as f64 - 8.0) / 2.0 - 1.0);
            assert!(d <= bound, "m = {m}: {d} > {bound}");
        }
    }

    #[test]
    fn unit_seed_by_hand() {
        // y = 1 leaves x unchanged; x is uniform on {0001, 0010}
        let x = DistributionTable::from_pairs(4, [(b("0001"), 0.5), (b("0010"), 0.5)]).unwrap();
        let y = DistributionTable::point(b("0001"));
        let d = gf2n_distance(&x, &y, 1, Exec::Sequential).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let d = gf2n_distance(&x, &y, 4, Exec::Sequential).unwrap();
        assert!((d - 0.875).abs() < 1e-12);
    }

    #[test]
    fn oversized_jobs_are_refused() {
        let w = DistributionTable::uniform(14).unwrap();
        assert!(matches!(
            toeplitz_distance(&w, 4, Exec::Sequential),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn modes_agree_across_executors() {
        let x = DistributionTable::uniform(4).unwrap();
        let y = DistributionTable::uniform_over(4, ["0001", "0011", "0110", "1111"].map(b)).unwrap();
        let a = gf2n_distance(&x, &y, 2, Exec::Sequential).unwrap();
        let c = gf2n_distance(&x, &y, 2, Exec::Parallel).unwrap();
        assert_eq!(a, c);
    }
}
