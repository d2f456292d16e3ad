use privamp::adversary::{SessionHeader, Transcript};
use privamp::harness::{accounting, monte_carlo, report_emit, report_parse, ExperimentConfig, Format};
use privamp::protocol::{schedule_build, AuthParams, Plan};

fn config(protocol: &str, strategies: &str, extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        r#"
[experiment]
protocol = "{protocol}"
trials = 40
seed = 11
strategies = [{strategies}]

[params]
n = 4096
k = 4096.0
t = 4
ell = 16
enforce_precondition = false
{extra}

[source]
family = "flat"
seed = 3
"#
    ))
    .unwrap()
}

#[test]
fn passive_cells_are_always_correct() {
    for proto in ["auth", "nauth"] {
        let r = monte_carlo(&config(proto, r#""passive""#, "")).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.skipped, None);
        assert_eq!(row.correct.rate, 1.0, "{proto}");
        assert_eq!(row.eve_wins.hits, 0);
        assert_eq!(row.ledger_mismatches, 0);
    }
}

#[test]
fn oracle_eve_wins_every_weight_consistent_swap() {
    let r = monte_carlo(&config("auth", r#""swap:0,1@guess=oracle(1)""#, "")).unwrap();
    let row = &r.rows[0];
    assert_eq!(row.skipped, None);
    // the swap changes the message only when the two bits differ
    assert!(row.eve_wins.hits > 0);
    let r = monte_carlo(&config("nauth", r#""forge:0110@guess=oracle(1)""#, "")).unwrap();
    let row = &r.rows[0];
    assert_eq!(row.skipped, None);
    assert!(row.flags.contains(&"calibration-oracle".to_string()));
    assert!(row.eve_wins.rate + row.correct.rate >= 0.999, "{row:?}");
}

#[test]
fn idealized_seed_accounting_counts_three_t_per_exchange() {
    let r = monte_carlo(&config("auth", r#""passive""#, "idealized_accounting = true")).unwrap();
    let row = &r.rows[0];
    // 16 / 4 exchanges of 12 bits
    assert_eq!((row.fresh_bits_a, row.fresh_bits_b), (48, 48));
    assert!(row.flags.contains(&"idealized-accounting".to_string()));
    assert!(row.w_bits_revealed as u64 <= 2 * 4096 * 16);
    assert_eq!(row.revealed_bound, Some(2 * 4096 * 16));
}

#[test]
fn fresh_bits_follow_the_phase_count() {
    for t in 2..=4usize {
        let n = 1usize << (3 * t);
        let cfg = ExperimentConfig::parse(&format!(
            "[experiment]\nprotocol = \"auth\"\ntrials = 5\nstrategies = [\"passive\"]\n\n\
             [params]\nn = {n}\nk = {n}.0\nt = {t}\nell_per_t = 4\nenforce_precondition = false\n"
        ))
        .unwrap();
        let row = &monte_carlo(&cfg).unwrap().rows[0];
        let d = AuthParams::new(n, n as f64, t, 4 * t, 1).seed_len().unwrap();
        assert_eq!(row.fresh_bits_a, 4 * d);
        assert_eq!(row.fresh_bits_b, 4 * d);
    }
}

#[test]
fn identical_configs_give_identical_reports() {
    let strategies = r#""passive", "bitflip:2", "swap:0,3@guess=random", "insert:1:1""#;
    let a = monte_carlo(&config("nauth", strategies, "")).unwrap();
    let b = monte_carlo(&config("nauth", strategies, "")).unwrap();
    assert_eq!(report_emit(&a, Format::Table), report_emit(&b, Format::Table));
    let rec = report_emit(&a, Format::Records);
    assert_eq!(rec, report_emit(&b, Format::Records));
    assert_eq!(report_parse(&rec).unwrap(), a);
    assert!(a.rows.iter().all(|r| r.ledger_mismatches == 0 && r.skipped.is_none()));
}

#[test]
fn empty_transcript_counts_nothing() {
    let tr = Transcript {
        header: SessionHeader {
            trial: 0,
            strategy: "none".into(),
            strategy_seed: 0,
            plan: Plan {
                plaintext: None,
                stages: Vec::new(),
                seed_len: 0,
                rows: 1,
                schedule: schedule_build(2, 1, 1, 64).unwrap(),
            },
        },
        events: Vec::new(),
        capped: false,
        stalled: false,
    };
    let a = accounting(&tr, None);
    assert_eq!((a.fresh_a, a.fresh_b, a.w_bits_revealed, a.rounds), (0, 0, 0, 0));
}

#[test]
fn infeasible_cells_are_skipped_with_a_reason() {
    let r = monte_carlo(&config("nauth", r#""passive""#, "lambda_m = 5")).unwrap();
    let row = &r.rows[0];
    assert!(row.skipped.is_some(), "{row:?}");
}
