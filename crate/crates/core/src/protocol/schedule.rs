use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefix lengths for the challenge rounds: `C1[i] = base^(3i-2) * unit`,
/// `C2[i] = base^(3i-1) * unit`, `C3[i] = base^(3i) * unit`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeSchedule {
    pub base: u64,
    pub unit: usize,
    pub rounds: usize,
    c1: Vec<usize>,
    c2: Vec<usize>,
    c3: Vec<usize>,
}

impl ChallengeSchedule {
    /// Round `i` runs from 1 to `rounds`.
    pub fn c1(&self, i: usize) -> usize {
        self.c1[i - 1]
    }

    pub fn c2(&self, i: usize) -> usize {
        self.c2[i - 1]
    }

    pub fn c3(&self, i: usize) -> usize {
        self.c3[i - 1]
    }

    /// Data-bit prefix length for bit `b` in round `i`.
    pub fn data_len(&self, i: usize, b: bool) -> usize {
        if b {
            self.c2(i)
        } else {
            self.c1(i)
        }
    }

    /// Longest prefix any round asks for.
    pub fn max_len(&self) -> usize {
        self.c3.last().copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.rounds).map(|i| (self.c1[i], self.c2[i], self.c3[i]))
    }
}

pub fn schedule_build(base: u64, unit: usize, rounds: usize, ext_output_len: usize) -> Result<ChallengeSchedule> {
    if base < 2 || unit == 0 {
        return Err(Error::Config(format!(
            "schedule needs base >= 2 and unit >= 1, got base {base}, unit {unit}"
        )));
    }
    let entry = |e: usize, name: &str, i: usize| -> Result<usize> {
        let v = u32::try_from(e)
            .ok()
            .and_then(|e| base.checked_pow(e))
            .and_then(|p| p.checked_mul(unit as u64))
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| Error::Config(format!("{name}[{i}] overflows")))?;
        if v > ext_output_len {
            return Err(Error::Config(format!(
                "{name}[{i}] = {v} exceeds the extractor output length {ext_output_len}"
            )));
        }
        Ok(v)
    };
    let mut c1 = Vec::with_capacity(rounds);
    let mut c2 = Vec::with_capacity(rounds);
    let mut c3 = Vec::with_capacity(rounds);
    for i in 1..=rounds {
        c1.push(entry(3 * i - 2, "C1", i)?);
        c2.push(entry(3 * i - 1, "C2", i)?);
        c3.push(entry(3 * i, "C3", i)?);
    }
    Ok(ChallengeSchedule {
        base,
        unit,
        rounds,
        c1,
        c2,
        c3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = schedule_build(2, 4, 4, 1 << 20).unwrap();
        assert_eq!(s.c1, vec![8, 64, 512, 4096]);
        assert_eq!(s.c2, vec![16, 128, 1024, 8192]);
        assert_eq!(s.c3, vec![32, 256, 2048, 16384]);
        let s = schedule_build(12, 8, 1, 1 << 20).unwrap();
        assert_eq!((s.c1(1), s.c2(1), s.c3(1)), (96, 1152, 13824));
        let s = schedule_build(2, 4, 0, 0).unwrap();
        assert_eq!((s.rounds, s.max_len()), (0, 0));
    }

    #[test]
    fn schedule_rejects_overflow_and_names_the_entry() {
        let e = schedule_build(2, 4, 4, 16000).unwrap_err();
        assert!(e.to_string().contains("C3[4]"), "{e}");
        assert!(schedule_build(1, 4, 2, 100).is_err());
        assert!(schedule_build(1 << 40, 1, 3, usize::MAX).is_err());
    }

    #[test]
    fn interleaved_order_grows_by_base() {
        let s = schedule_build(3, 2, 3, usize::MAX).unwrap();
        let flat: Vec<usize> = s.entries().flat_map(|(a, b, c)| [a, b, c]).collect();
        for w in flat.windows(2) {
            assert!(w[1] >= 3 * w[0]);
        }
    }
}
