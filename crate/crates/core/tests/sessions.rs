use std::sync::Arc;

use privamp::adversary::{
    annotate_phases, lemma_audit, run_session, strategy_drop_all, strategy_passive, GuessSource, OpKind,
    ScriptedEve, Transcript,
};
use privamp::codes::edit_code_generate;
use privamp::extractors::SeededExtractorSpec;
use privamp::protocol::{
    auth_session, extract_honest, extract_session, key_agreement_session, nauth_session, sauth_init,
    sauth_step, AuthParams, ExtractParams, FrameKind, KeyLength, Outcome, Seeds, Tag,
};
use privamp::rng::derive_rng;
use privamp::BitString;

fn b(s: &str) -> BitString {
    s.parse().unwrap()
}

fn small_params() -> AuthParams {
    // t = 2, unit 1: C3[2] = 64
    let mut p = AuthParams::new(64, 64.0, 2, 8, 1);
    p.enforce_entropy_precondition = false;
    p
}

fn seeds(trial: u64) -> Seeds {
    Seeds::fresh(derive_rng(7, "alice", trial), derive_rng(7, "bob", trial), None)
}

fn secret(n: usize, trial: u64) -> BitString {
    BitString::random(n, &mut derive_rng(7, "w", trial))
}

/// The true tag prefix, for calibration.
fn oracle(p: &AuthParams, w: &BitString) -> GuessSource {
    let ext = p.seeded_spec().unwrap();
    let w = w.clone();
    GuessSource::Oracle {
        p: 1.0,
        tags: Arc::new(move |seed: &BitString, len: usize| {
            let mut t = Tag::new(&ext, &w, seed, 1).unwrap();
            t.prefix(len).unwrap()
        }),
    }
}

#[test]
fn sauth_first_frame_is_the_seed() {
    let p = small_params();
    let w = secret(64, 0);
    let s1 = BitString::random(p.seed_len().unwrap(), &mut derive_rng(1, "s", 0));
    let s2 = BitString::random(p.seed_len().unwrap(), &mut derive_rng(1, "s", 1));
    let (_, f1) = sauth_init(&w, &b("01"), &p, s1.clone()).unwrap();
    let (mut st, f2) = sauth_init(&w, &b("01"), &p, s2).unwrap();
    assert_eq!(f1.kind, FrameKind::Seed);
    assert_eq!(f1.payload, s1);
    assert_ne!(f1, f2);
    assert!(sauth_step(&mut st, &f1).is_empty());
    let mut q = p.clone();
    q.randomness_budget = Some(0);
    assert!(sauth_init(&w, &b("01"), &q, s1).is_err());
}

#[test]
fn auth_honest_and_dropped() {
    let p = small_params();
    let w = secret(64, 1);
    let m = b("01101001");
    let mut s = auth_session(&p, &w, &m, seeds(1)).unwrap();
    let r = run_session(&mut s, &mut strategy_passive(), 1, 0).unwrap();
    assert_eq!(r.outcome_b, Outcome::Accepted(m.clone()));
    assert!(r.agreed && !r.eve_wins);
    let d = p.seed_len().unwrap();
    assert_eq!(s.alice.ledger().fresh_bits, 4 * d);
    assert_eq!(s.bob.ledger().fresh_bits, 4 * d);
    let ann = annotate_phases(&r.transcript, true);
    assert_eq!(ann.phases.len(), 4);
    assert_eq!(ann.bad_phases(), 0);
    assert_eq!(ann.challenge_phases(), 0);

    let mut s = auth_session(&p, &w, &m, seeds(1)).unwrap();
    let r = run_session(&mut s, &mut strategy_drop_all(), 1, 0).unwrap();
    assert!(r.outcome_a.is_rejected() && r.outcome_b.is_rejected());
    assert!(!r.eve_wins && !r.agreed);
}

#[test]
fn scripted_eve_without_edits_is_honest() {
    let p = small_params();
    let w = secret(64, 2);
    let m = b("10011010");
    let mut s1 = auth_session(&p, &w, &m, seeds(2)).unwrap();
    let honest = run_session(&mut s1, &mut strategy_passive(), 2, 0).unwrap();
    let mut s2 = auth_session(&p, &w, &m, seeds(2)).unwrap();
    let scripted = run_session(&mut s2, &mut ScriptedEve::new("none", vec![]), 2, 0).unwrap();
    assert_eq!(scripted.outcome_b, Outcome::Accepted(m));
    let frames = |r: &privamp::adversary::SessionResult| {
        r.transcript.events.iter().map(|e| (e.action, e.party, e.frame.clone())).collect::<Vec<_>>()
    };
    assert_eq!(frames(&honest), frames(&scripted));
}

#[test]
fn single_zero_to_one_flip_is_rejected() {
    let p = small_params();
    for trial in 0..20 {
        let w = secret(64, trial);
        let m = b("00110011");
        let mut s = auth_session(&p, &w, &m, seeds(trial)).unwrap();
        let r = run_session(&mut s, &mut ScriptedEve::bitflip(0), trial, trial).unwrap();
        assert!(r.outcome_b.is_rejected());
        let ann = annotate_phases(&r.transcript, true);
        assert_eq!(ann.bad_phases(), 1);
        assert!(lemma_audit(&ann).holds());
    }
}

#[test]
fn oracle_eve_wins_the_swap() {
    let p = small_params();
    let w = secret(64, 3);
    let m = b("01000000");
    // weight must stay 1: flip the 0 at 0 and the 1 at 1
    let mut eve = ScriptedEve::weight_preserving_swap(0, 1).with_guess(oracle(&p, &w));
    let mut s = auth_session(&p, &w, &m, seeds(3)).unwrap();
    let r = run_session(&mut s, &mut eve, 3, 0).unwrap();
    assert_eq!(r.outcome_b, Outcome::Accepted(b("10000000")));
    assert!(r.eve_wins);
    let ann = annotate_phases(&r.transcript, true);
    let ops: Vec<OpKind> = ann.phases.iter().flat_map(|ph| ph.ops.iter().map(|o| o.kind)).collect();
    assert_eq!(ops, vec![OpKind::ZeroToOne, OpKind::OneToZero]);
    assert!(ann.phases[0].challenge);
}

#[test]
fn insertion_marks_one_bad_challenge_phase() {
    let p = small_params();
    for trial in 0..10 {
        let w = secret(64, trial);
        let m = b("01100110");
        let mut s = auth_session(&p, &w, &m, seeds(trial)).unwrap();
        let r = run_session(&mut s, &mut ScriptedEve::insert(true, 1), trial, trial).unwrap();
        assert!(!r.eve_wins);
        let ann = annotate_phases(&r.transcript, true);
        let bad: Vec<_> = ann.phases.iter().filter(|p| p.bad).collect();
        assert_eq!(bad.len(), 1, "{ann:?}");
        assert!(bad[0].challenge);
    }
}

#[test]
fn strategies_reject_and_pass_the_audit() {
    let p = small_params();
    let m = b("01101001");
    let strategies: Vec<ScriptedEve> = vec![
        ScriptedEve::bitflip(3),
        ScriptedEve::insert(false, 0),
        ScriptedEve::insert(true, 5),
        ScriptedEve::delete(0),
        ScriptedEve::delete(6),
        ScriptedEve::weight_preserving_swap(0, 1),
        ScriptedEve::replay(1),
        ScriptedEve::guess_challenges(b("11110000"), GuessSource::Random),
        ScriptedEve::guess_challenges(b("10010110"), GuessSource::Zeros),
    ];
    for eve in strategies {
        for trial in 0..10 {
            let w = secret(64, trial);
            let mut s = auth_session(&p, &w, &m, seeds(trial)).unwrap();
            let mut e = eve.clone();
            let r = run_session(&mut s, &mut e, trial, trial).unwrap();
            assert!(!r.transcript.capped);
            let ann = annotate_phases(&r.transcript, true);
            assert!(lemma_audit(&ann).holds(), "{}: {ann:?}", eve_name(&eve));
        }
    }
}

fn eve_name(e: &ScriptedEve) -> String {
    use privamp::adversary::EveStrategy;
    e.name()
}

#[test]
fn out_of_range_edit_is_an_error() {
    let p = small_params();
    let w = secret(64, 0);
    let mut s = auth_session(&p, &w, &b("01101001"), seeds(0)).unwrap();
    assert!(run_session(&mut s, &mut ScriptedEve::bitflip(8), 0, 0).is_err());
}

fn nauth_params(book_lc: usize) -> AuthParams {
    let mut p = AuthParams::new(64, 64.0, 2, book_lc, 1);
    p.enforce_entropy_precondition = false;
    p
}

#[test]
fn nauth_honest_and_plaintext_swap() {
    let book = Arc::new(edit_code_generate(3, 0.25, 0.25).unwrap());
    let p = nauth_params(book.lambda_c);
    let w = secret(64, 4);
    let m = b("101");
    let mut s = nauth_session(&p, book.clone(), &w, &m, seeds(4)).unwrap();
    let r = run_session(&mut s, &mut strategy_passive(), 4, 0).unwrap();
    assert_eq!(r.outcome_b, Outcome::Accepted(m.clone()));
    assert!(r.agreed);

    let mut s = nauth_session(&p, book.clone(), &w, &m, seeds(4)).unwrap();
    let r = run_session(&mut s, &mut ScriptedEve::plaintext_swap(b("001")), 4, 0).unwrap();
    assert!(r.outcome_b.is_rejected());
    assert!(!r.eve_wins);

    // the forged encoding is delivered with the true tags: accepted
    let mut eve = ScriptedEve::consistent_forgery(b("001"), book.clone(), p.t).with_guess(oracle(&p, &w));
    let mut s = nauth_session(&p, book, &w, &m, seeds(4)).unwrap();
    let r = run_session(&mut s, &mut eve, 4, 0).unwrap();
    assert_eq!(r.outcome_b, Outcome::Accepted(b("001")));
    assert!(r.eve_wins);
    let ann = annotate_phases(&r.transcript, true);
    assert!(ann.bad_phases() >= 1);
    assert!(lemma_audit(&ann).holds());
}

#[test]
fn key_agreement_honest_keys_match() {
    let book = Arc::new(edit_code_generate(4, 0.25, 0.25).unwrap());
    let p = nauth_params(16);
    let w = secret(64, 5);
    let mut s = key_agreement_session(&p, book, &w, KeyLength::Fixed { bits: 8 }, seeds(5)).unwrap();
    let r = run_session(&mut s, &mut strategy_passive(), 5, 0).unwrap();
    assert!(r.agreed, "{r:?}");
    assert_eq!(r.outcome_a.value().unwrap().len(), 8);
    assert!(s.flags.contains(&"key-length-fixed".to_string()));
    assert_eq!(s.extra_fresh[0], 64 + 8 - 1);
}

#[test]
fn key_agreement_aborted_gives_no_key() {
    let book = Arc::new(edit_code_generate(4, 0.25, 0.25).unwrap());
    let p = nauth_params(16);
    let w = secret(64, 6);
    let mut s = key_agreement_session(&p, book, &w, KeyLength::Fixed { bits: 8 }, seeds(6)).unwrap();
    let r = run_session(&mut s, &mut strategy_drop_all(), 6, 0).unwrap();
    assert!(r.outcome_a.is_rejected() && r.outcome_b.is_rejected());
}

#[test]
fn extract_honest_matches_direct_computation() {
    let p = ExtractParams::desk();
    for trial in 0..5 {
        let x = secret(16, 100 + trial);
        let y = secret(16, 200 + trial);
        let w = secret(16, 300 + trial);
        let mut s = extract_session(&x, &y, &w, &p).unwrap();
        let r = run_session(&mut s, &mut strategy_passive(), trial, 0).unwrap();
        assert!(r.agreed && !r.eve_wins);
        let tr = extract_honest(&x, &y, &w, &p).unwrap();
        assert_eq!(r.outcome_a, Outcome::Accepted(tr.sx));
        assert_eq!(r.outcome_b, Outcome::Accepted(tr.sy));
        let ann = annotate_phases(&r.transcript, true);
        assert_eq!(ann.bad_phases(), 0);
    }
}

#[test]
fn extract_tampering_is_audited() {
    let p = ExtractParams::desk();
    let eves = vec![
        ScriptedEve::bitflip(0),
        ScriptedEve::bitflip(1),
        ScriptedEve::insert(true, 2),
        ScriptedEve::delete(1),
        ScriptedEve::bitflip(0).on_stage(1),
        ScriptedEve::weight_preserving_swap(0, 1).on_stage(1),
    ];
    for eve in eves {
        for trial in 0..10 {
            let x = secret(16, 100 + trial);
            let y = secret(16, 200 + trial);
            let w = secret(16, 300 + trial);
            let mut s = extract_session(&x, &y, &w, &p).unwrap();
            let mut e = eve.clone();
            let r = run_session(&mut s, &mut e, trial, trial).unwrap();
            let ann = annotate_phases(&r.transcript, true);
            let audit = lemma_audit(&ann);
            assert!(audit.holds());
            if r.eve_wins {
                assert!(ann.challenge_phases() >= 1);
            }
        }
    }
}

#[test]
fn transcript_round_trips_as_json_lines() {
    let p = small_params();
    let w = secret(64, 8);
    let mut s = auth_session(&p, &w, &b("01101001"), seeds(8)).unwrap();
    let r = run_session(&mut s, &mut ScriptedEve::bitflip(2), 8, 3).unwrap();
    let mut buf = Vec::new();
    r.transcript.write_jsonl(&mut buf).unwrap();
    let back = Transcript::read_jsonl(&buf[..]).unwrap();
    assert_eq!(back.len(), 1);
    assert!(back[0].1);
    assert_eq!(back[0].0, r.transcript);
    let cut = buf.iter().rposition(|&c| c == b'\n').unwrap();
    let cut = buf[..cut].iter().rposition(|&c| c == b'\n').unwrap() + 1;
    let partial = Transcript::read_jsonl(&buf[..cut]).unwrap();
    assert!(!partial[0].1);
    assert!(!annotate_phases(&partial[0].0, false).warnings.is_empty());
}

#[test]
fn seeded_spec_reveals_toeplitz() {
    let p = small_params();
    let spec: SeededExtractorSpec = p.seeded_spec().unwrap();
    assert_eq!(spec.d, 64 + 64 - 1);
}
