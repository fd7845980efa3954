use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::PhiSpan;

#[test]
fn perfect_prediction() {
    let gold = [false, true, true, false];
    let r = token_metrics(&gold, &gold).unwrap();
    assert_eq!((r.precision(), r.recall(), r.f1()), (Some(1.0), Some(1.0), Some(1.0)));
}

#[test]
fn hand_counted_example() {
    // gold PHI at 1 and 3; prediction hits 1 and false-alarms at 0
    let gold = [false, true, false, true, false];
    let pred = [true, true, false, false, false];
    let r = token_metrics(&pred, &gold).unwrap();
    assert_eq!(
        r.counts,
        Counts {
            tp: 1,
            fp: 1,
            fn_: 1,
            tn: 2
        }
    );
    assert_eq!((r.precision(), r.recall(), r.f1()), (Some(0.5), Some(0.5), Some(0.5)));
}

#[test]
fn vacuous_case_is_undefined() {
    let r = token_metrics(&[false; 6], &[false; 6]).unwrap();
    assert_eq!(r.counts.tn, 6);
    assert_eq!((r.precision(), r.recall(), r.f1()), (None, None, None));
    assert!(to_kv(&r).contains("precision=undefined recall=undefined f1=undefined"));
    assert!(matches!(token_metrics(&[true], &[true, false]), Err(EvalError::Alignment { .. })));
}

#[test]
fn zero_precision_and_recall_give_zero_f1() {
    let r = token_metrics(&[true, false], &[false, true]).unwrap();
    assert_eq!(r.f1(), Some(0.0));
}

#[test]
fn micro_average_is_concatenation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n1 = rng.random_range(0..20);
        let n2 = rng.random_range(0..20);
        let g: Vec<bool> = (0..n1 + n2).map(|_| rng.random_bool(0.3)).collect();
        let p: Vec<bool> = (0..n1 + n2).map(|_| rng.random_bool(0.3)).collect();
        let mut a = token_metrics(&p[..n1], &g[..n1]).unwrap();
        a.merge(&token_metrics(&p[n1..], &g[n1..]).unwrap());
        let whole = token_metrics(&p, &g).unwrap();
        assert_eq!(a.counts, whole.counts);
        assert_eq!(a.n_tokens, whole.n_tokens);
    }
}

#[test]
fn recall_never_drops_when_predictions_grow() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gold: Vec<bool> = (0..200).map(|_| rng.random_bool(0.2)).collect();
    let mut pred = vec![false; 200];
    let mut last = token_metrics(&pred, &gold).unwrap().recall().unwrap();
    for _ in 0..300 {
        pred[rng.random_range(0..200)] = true;
        let r = token_metrics(&pred, &gold).unwrap().recall().unwrap();
        assert!(r >= last);
        last = r;
    }
}

fn doc(text: &str, spans: Vec<PhiSpan>) -> LabeledDocument {
    LabeledDocument {
        id: "d".into(),
        text: text.into(),
        phi_spans: spans,
    }
}

#[test]
fn predicted_spans_align_by_overlap_and_categories() {
    let text = "Seen by Dr Smith on 2067-05-03 in clinic";
    let s = text.find("Smith").unwrap();
    let d = text.find("2067").unwrap();
    let gold = doc(
        text,
        vec![
            PhiSpan::new(s, s + 5, PhiCategory::Name),
            PhiSpan::new(d, d + 10, PhiCategory::Date),
        ],
    );
    let c = text.find("clinic").unwrap();
    let pred = vec![
        RedactionSpan {
            start: s,
            end: s + 5,
            category: Some(PhiCategory::Name),
        },
        RedactionSpan {
            start: c,
            end: c + 6,
            category: Some(PhiCategory::Location),
        },
    ];
    let e = evaluate_predictions(&[gold], &[pred]).unwrap();
    // date is 5 tokens: 2067 - 05 - 03
    assert_eq!((e.report.counts.tp, e.report.counts.fp, e.report.counts.fn_), (1, 1, 5));
    let name = e.report.per_category[&PhiCategory::Name];
    assert_eq!((name.tp, name.fn_), (1, 0));
    assert_eq!(e.report.per_category[&PhiCategory::Date].fn_, 5);
    assert_eq!(e.report.per_category[&PhiCategory::Location].fp, 1);
    for k in e.report.per_category.values() {
        assert_eq!(k.total() as usize, e.report.n_tokens);
    }
    assert!(e.warnings.is_empty());
}

#[test]
fn partial_span_overlap_warns() {
    let e = evaluate_predictions(&[doc("Johnson said", vec![PhiSpan::new(0, 4, PhiCategory::Name)])], &[vec![]]).unwrap();
    assert_eq!(e.report.counts.fn_, 1);
    assert_eq!(e.warnings.len(), 1);
    assert!(matches!(evaluate_predictions(&[], &[vec![]]), Err(EvalError::DocumentCount { .. })));
}

/// Independent counter: decides each token's gold and predicted status by
/// scanning every span, with no shared helpers.
fn naive_counts(d: &LabeledDocument, pred: &[RedactionSpan]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for t in tokenize(&d.text) {
        let g = d.phi_spans.iter().any(|s| s.start.max(t.start) < s.end.min(t.end));
        let p = pred.iter().any(|s| s.start.max(t.start) < s.end.min(t.end));
        match (p, g) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (false, false) => c.3 += 1,
        }
    }
    c
}

#[test]
fn corpus_counts_match_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let words = ["pt", "Smith", "seen", "2067", "-", "05", "Boston", ".", "MRN", "44812"];
    for _ in 0..200 {
        let n = rng.random_range(0..15);
        let text: Vec<&str> = (0..n).map(|_| words[rng.random_range(0..words.len())]).collect();
        let text = text.join(" ");
        let toks = tokenize(&text);
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for t in &toks {
            if rng.random_bool(0.3) {
                gold.push(PhiSpan::new(t.start, t.end, PhiCategory::Id));
            }
            if rng.random_bool(0.3) {
                pred.push(RedactionSpan {
                    start: t.start,
                    end: t.end,
                    category: None,
                });
            }
        }
        let d = doc(&text, gold);
        let e = evaluate_predictions(std::slice::from_ref(&d), std::slice::from_ref(&pred)).unwrap();
        let c = e.report.counts;
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), naive_counts(&d, &pred));
    }
}

#[test]
fn kv_dump_round_trips_counts() {
    let mut r = token_metrics(&[true, true, false, false], &[true, false, true, false]).unwrap();
    r.per_category.insert(
        PhiCategory::Age,
        Counts {
            tp: 1,
            fp: 0,
            fn_: 1,
            tn: 2,
        },
    );
    let back = parse_kv(&to_kv(&r)).unwrap();
    assert_eq!(back, r);
    assert!(parse_kv("scope=NAME tp=1 fp=0 fn=0 tn=0").is_err());
    assert!(parse_kv("scope=overall tp=x").is_err());
}

#[test]
fn comparison_table() {
    let ours = token_metrics(&[true, false], &[true, false]).unwrap();
    let table = compare_report(&ours, "ours (constrained)", &[ReferenceRow::published()]);
    assert!(table.contains("Proposed Method [reference (not reproduced)]"));
    assert!(table.contains("98.12") && table.contains("98.91") && table.contains("98.51"));
    assert!(table.contains("100.00"));
    let only = compare_report(&ours, "ours", &[]);
    assert_eq!(only.lines().count(), 2);
    let refs = [
        ReferenceRow {
            label: "B".into(),
            precision: 1.0,
            recall: 2.0,
            f1: 3.0,
        },
        ReferenceRow {
            label: "A".into(),
            precision: 4.0,
            recall: 5.0,
            f1: 6.0,
        },
    ];
    let t = compare_report(&ours, "ours", &refs);
    let lines: Vec<&str> = t.lines().collect();
    assert!(lines[2].starts_with("B ") && lines[3].starts_with("A "));
    assert!(render_report(&ours).contains("overall"));
}
