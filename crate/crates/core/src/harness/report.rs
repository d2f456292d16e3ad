//! Report rows and their two renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::Format;
use super::stats::Rate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub protocol: String,
    pub n: usize,
    pub k: f64,
    pub t: usize,
    pub ell: usize,
    pub unit: usize,
    pub strategy: String,
    pub trials: u64,
    /// Both parties accepted, with equal outputs where outputs must agree.
    pub correct: Rate,
    pub eve_wins: Rate,
    /// Largest per-trial counts; equal across trials in honest cells.
    pub fresh_bits_a: usize,
    pub fresh_bits_b: usize,
    pub w_bits_revealed: usize,
    pub revealed_bound: Option<u64>,
    pub rounds: usize,
    pub key_distance: Option<f64>,
    pub key_distance_kind: Option<String>,
    /// Trials where the transcript counts disagree with the party ledgers.
    pub ledger_mismatches: u64,
    pub flags: Vec<String>,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

const HEADER: [&str; 17] = [
    "protocol",
    "n",
    "k",
    "t",
    "ell",
    "unit",
    "strategy",
    "trials",
    "correct",
    "eve_win",
    "eve_win_95",
    "fresh_a",
    "fresh_b",
    "w_revealed",
    "bound",
    "rounds",
    "key_dist",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("-".into(), T::to_string)
}

fn cells(r: &ReportRow) -> Vec<String> {
    vec![
        r.protocol.clone(),
        r.n.to_string(),
        format!("{:.2}", r.k),
        r.t.to_string(),
        r.ell.to_string(),
        r.unit.to_string(),
        r.strategy.clone(),
        r.trials.to_string(),
        format!("{:.4}", r.correct.rate),
        format!("{:.6}", r.eve_wins.rate),
        format!("[{:.6},{:.6}]", r.eve_wins.lo, r.eve_wins.hi),
        r.fresh_bits_a.to_string(),
        r.fresh_bits_b.to_string(),
        r.w_bits_revealed.to_string(),
        opt(&r.revealed_bound),
        r.rounds.to_string(),
        match (r.key_distance, &r.key_distance_kind) {
            (Some(d), Some(k)) => format!("{d:.6}({k})"),
            (Some(d), None) => format!("{d:.6}"),
            _ => "-".into(),
        },
    ]
}

pub fn report_emit(report: &Report, format: Format) -> String {
    match format {
        Format::Records => report
            .rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
            .collect(),
        Format::Table => {
            let body: Vec<Vec<String>> = report.rows.iter().map(cells).collect();
            let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
            for row in &body {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let mut out = String::new();
            let line = |out: &mut String, row: Vec<&str>, tail: &str| {
                let mut s = String::new();
                for (c, w) in row.iter().zip(&widths) {
                    let _ = write!(s, "{c:<w$}  ");
                }
                s.push_str(tail);
                out.push_str(s.trim_end());
                out.push('\n');
            };
            line(&mut out, HEADER.to_vec(), "notes");
            for (r, row) in report.rows.iter().zip(&body) {
                let mut notes = r.flags.join(",");
                if r.ledger_mismatches > 0 {
                    notes = format!("{notes} ledger-mismatches={}", r.ledger_mismatches);
                }
                if let Some(s) = &r.skipped {
                    notes = format!("skipped: {s}");
                }
                line(&mut out, row.iter().map(String::as_str).collect(), notes.trim());
            }
            out
        }
    }
}

/// Reads the records rendering back.
pub fn report_parse(text: &str) -> Result<Report> {
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("record {}: {e}", i + 1))))
        .collect::<Result<Vec<ReportRow>>>()?;
    Ok(Report { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(seed: u64, hits: u64, trials: u64, k: f64, dist: Option<f64>) -> ReportRow {
        ReportRow {
            protocol: "nauth".into(),
            n: 4096,
            k,
            t: 4,
            ell: 16,
            unit: 1,
            strategy: format!("swap:0,{}@guess=random", seed % 7),
            trials,
            correct: Rate::new(trials - hits, trials),
            eve_wins: Rate::new(hits, trials),
            fresh_bits_a: 4 * 8191,
            fresh_bits_b: 4 * 8191,
            w_bits_revealed: 12 * (seed as usize % 100),
            revealed_bound: Some(131072),
            rounds: 34,
            key_distance: dist,
            key_distance_kind: dist.map(|_| "sampled".into()),
            ledger_mismatches: 0,
            flags: if seed % 2 == 0 { vec!["stand-in-extractor".into()] } else { vec![] },
            skipped: None,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let t = report_emit(&Report::default(), Format::Table);
        assert_eq!(t.lines().count(), 1);
        assert!(t.starts_with("protocol"));
        assert_eq!(report_emit(&Report::default(), Format::Records), "");
    }

    #[test]
    fn one_cell_has_every_ledger_field() {
        let r = Report {
            rows: vec![row(1, 3, 1000, 776.0, None)],
        };
        let t = report_emit(&r, Format::Table);
        assert_eq!(t.lines().count(), 2);
        for v in ["32764", "131072", "34", "0.003000"] {
            assert!(t.contains(v), "{v} missing from\n{t}");
        }
        let rec = report_emit(&r, Format::Records);
        for key in ["fresh_bits_a", "fresh_bits_b", "w_bits_revealed", "revealed_bound", "rounds", "flags"] {
            assert!(rec.contains(key));
        }
    }

    proptest! {
        #[test]
        fn records_round_trip(
            seeds in proptest::collection::vec((any::<u64>(), 0u64..1000, 1u64..100_000, 0.0f64..1e5, proptest::option::of(0.0f64..1.0)), 0..6)
        ) {
            let rows = seeds
                .into_iter()
                .map(|(s, h, n, k, d)| row(s, h.min(n), n, k, d))
                .collect();
            let r = Report { rows };
            let text = report_emit(&r, Format::Records);
            prop_assert_eq!(report_parse(&text).unwrap(), r.clone());
            prop_assert_eq!(report_emit(&report_parse(&text).unwrap(), Format::Records), text);
        }
    }
}
