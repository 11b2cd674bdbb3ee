use std::collections::{BTreeMap, BTreeSet};

use fairaudit::compas::{CountsFixture, BLACK, WHITE};
use fairaudit::dataset::{Label, OutcomeRecord, OutcomeTable};
use fairaudit::fairness::{
    audit_pair, evaluate_criterion, four_fifths_test, incompatibility_advisories, independence_gap, separation_gaps,
    sufficiency_gaps, ComparisonMode, Criterion, FairnessConfig, FourFifths, Verdict,
};
use fairaudit::metrics::ConfusionMatrix;
use proptest::prelude::*;

use Label::{Negative as N, Positive as P};

fn rates(pairs: &[(&str, f64)]) -> BTreeMap<String, Option<f64>> {
    pairs.iter().map(|(g, r)| (g.to_string(), Some(*r))).collect()
}

fn cm(tp: u32, fp: u32, fn_: u32, tn: u32) -> ConfusionMatrix {
    ConfusionMatrix::new(tp.into(), fp.into(), fn_.into(), tn.into()).unwrap()
}

#[test]
fn four_fifths_examples() {
    let t = 0.8;
    assert_eq!(
        four_fifths_test(&rates(&[("a", 0.50), ("b", 0.39)]), t).unwrap(),
        FourFifths::AdverseImpactEvidence
    );
    assert_eq!(
        four_fifths_test(&rates(&[("a", 0.50), ("b", 0.50)]), t).unwrap(),
        FourFifths::NoEvidence
    );
    assert_eq!(
        four_fifths_test(&rates(&[(BLACK, 0.5882), (WHITE, 0.3480)]), t).unwrap(),
        FourFifths::AdverseImpactEvidence
    );
    assert_eq!(
        four_fifths_test(&rates(&[("a", 0.5)]), t).unwrap(),
        FourFifths::NotEvaluable
    );
    assert!(four_fifths_test(&rates(&[("a", 0.5), ("b", 1.5)]), t).is_err());
}

#[test]
fn tie_at_epsilon_is_satisfied() {
    let a = cm(1, 1, 0, 2);
    let gap = independence_gap(&a, &a);
    let cfg = FairnessConfig::new(0.0, 0.8, ComparisonMode::AbsoluteDifference).unwrap();
    assert_eq!(evaluate_criterion(&[gap], &cfg), Verdict::Satisfied);
}

#[test]
fn compas_table_carries_the_independence_sufficiency_advisory() {
    let table = CountsFixture::bundled().to_table().unwrap();
    let pair = table.restrict_to(&[BLACK, WHITE]).unwrap();
    let assessment = incompatibility_advisories(&pair);
    assert!(assessment.suppressed.is_none());
    assert!(assessment
        .advisories
        .iter()
        .any(|a| a.criteria == [Criterion::Independence, Criterion::Sufficiency]));
}

#[test]
fn identical_group_distributions_give_no_advisories() {
    let mut records = Vec::new();
    for g in ["a", "b"] {
        for (y, p, k) in [(P, P, 3), (P, N, 1), (N, P, 2), (N, N, 4)] {
            records.extend((0..k).map(|_| OutcomeRecord::new(y, p, g)));
        }
    }
    let assessment = incompatibility_advisories(&OutcomeTable::new(records).unwrap());
    assert!(assessment.suppressed.is_none());
    assert!(assessment.advisories.is_empty(), "{:?}", assessment.advisories);
}

#[test]
fn degenerate_tables_suppress_advisories() {
    let one_group = OutcomeTable::new(vec![OutcomeRecord::new(P, P, "a"), OutcomeRecord::new(N, P, "a")]).unwrap();
    assert!(incompatibility_advisories(&one_group).suppressed.is_some());
    let one_class = OutcomeTable::new(vec![OutcomeRecord::new(P, P, "a"), OutcomeRecord::new(P, N, "b")]).unwrap();
    assert!(incompatibility_advisories(&one_class).suppressed.is_some());
}

/// Group `a`: 10 records, 6 positive. Group `b`: 10 records, 3 positive.
/// Every one of the 2^20 prediction vectors is checked with integer
/// arithmetic: independence and sufficiency never both hold exactly, and
/// the library never reports both as satisfied at epsilon 0.
#[test]
fn exhaustive_independence_sufficiency_check() {
    let truth: Vec<(usize, bool)> = (0..20).map(|i| if i < 10 { (0, i < 6) } else { (1, i < 13) }).collect();
    let sizes = [10u64, 10];
    let base_gap = 6.0 / 10.0 - 3.0 / 10.0;
    assert!((base_gap - 0.3f64).abs() < 1e-12);

    let table = OutcomeTable::new(
        truth
            .iter()
            .map(|&(g, y)| OutcomeRecord::new(if y { P } else { N }, N, if g == 0 { "a" } else { "b" }))
            .collect(),
    )
    .unwrap();
    let advised = incompatibility_advisories(&table)
        .advisories
        .iter()
        .any(|a| a.criteria == [Criterion::Independence, Criterion::Sufficiency]);
    assert!(advised);

    let cfg = FairnessConfig::new(0.0, 0.8, ComparisonMode::AbsoluteDifference).unwrap();
    let mut both_exact = 0u64;
    let mut both_reported = 0u64;
    for mask in 0u32..(1 << 20) {
        // [group][yhat][y] counts.
        let mut c = [[[0u64; 2]; 2]; 2];
        for (i, &(g, y)) in truth.iter().enumerate() {
            let p = (mask >> i) & 1;
            c[g][p as usize][y as usize] += 1;
        }
        let selected = |g: usize| c[g][1][0] + c[g][1][1];
        let independent = selected(0) * sizes[1] == selected(1) * sizes[0];
        let sufficient = (0..2).all(|p| {
            let (na, nb) = (c[0][p][0] + c[0][p][1], c[1][p][0] + c[1][p][1]);
            na == 0 || nb == 0 || c[0][p][1] * nb == c[1][p][1] * na
        });
        if independent && sufficient {
            both_exact += 1;
        }

        let matrix = |g: usize| {
            ConfusionMatrix::new(
                c[g][1][1] as f64,
                c[g][1][0] as f64,
                c[g][0][1] as f64,
                c[g][0][0] as f64,
            )
            .unwrap()
        };
        let (a, b) = (matrix(0), matrix(1));
        let ind = evaluate_criterion(&[independence_gap(&a, &b)], &cfg);
        let suf = evaluate_criterion(&sufficiency_gaps(&a, &b).components(), &cfg);
        if ind == Verdict::Satisfied && suf == Verdict::Satisfied {
            both_reported += 1;
        }
    }
    assert_eq!(both_exact, 0);
    assert_eq!(both_reported, 0);
}

#[test]
fn report_is_deterministic() {
    let table = CountsFixture::bundled().to_table().unwrap();
    let cfg = FairnessConfig::default();
    let a = serde_json::to_string(&audit_pair(&table, BLACK, WHITE, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&audit_pair(&table, BLACK, WHITE, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_group_is_an_error() {
    let table = CountsFixture::bundled().to_table().unwrap();
    assert!(audit_pair(&table, BLACK, "martian", &FairnessConfig::default()).is_err());
    assert!(audit_pair(&table, BLACK, BLACK, &FairnessConfig::default()).is_err());
}

fn small() -> impl Strategy<Value = ConfusionMatrix> {
    (0..=10u32, 0..=10u32, 0..=10u32, 0..=10u32).prop_map(|(a, b, c, d)| cm(a, b, c, d))
}

fn hand_ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

proptest! {
    #[test]
    fn gaps_match_hand_computed_conditionals(a in small(), b in small()) {
        let diff = |x: Option<f64>, y: Option<f64>| Some(x? - y?);
        let sep = separation_gaps(&a, &b);
        let suf = sufficiency_gaps(&a, &b);
        let checks = [
            (sep.positive, diff(hand_ratio(a.tp, a.tp + a.fn_), hand_ratio(b.tp, b.tp + b.fn_))),
            (sep.negative, diff(hand_ratio(a.fp, a.fp + a.tn), hand_ratio(b.fp, b.fp + b.tn))),
            (suf.positive, diff(hand_ratio(a.tp, a.tp + a.fp), hand_ratio(b.tp, b.tp + b.fp))),
            (suf.negative, diff(hand_ratio(a.fn_, a.fn_ + a.tn), hand_ratio(b.fn_, b.fn_ + b.tn))),
        ];
        for (got, want) in checks {
            match (got, want) {
                (Some(g), Some(w)) => {
                    prop_assert!((g.signed - w).abs() <= 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&g.signed));
                }
                (None, None) => {}
                _ => prop_assert!(false, "definedness differs: {got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn four_fifths_verdict_is_scale_free(
        r in prop::collection::vec(0.0f64..=1.0, 2..6),
        alpha in 0.001f64..=1.0,
        threshold in 0.05f64..=1.0,
    ) {
        let base: BTreeMap<String, Option<f64>> =
            r.iter().enumerate().map(|(i, x)| (format!("g{i}"), Some(*x))).collect();
        let scaled: BTreeMap<String, Option<f64>> =
            r.iter().enumerate().map(|(i, x)| (format!("g{i}"), Some(x * alpha))).collect();
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Skip draws within rounding distance of the decision boundary.
        prop_assume!((lo - threshold * hi).abs() > 1e-9);
        prop_assert_eq!(four_fifths_test(&base, threshold).unwrap(), four_fifths_test(&scaled, threshold).unwrap());
    }

    #[test]
    fn advisories_ignore_record_order(
        records in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 2..40),
    ) {
        let l = |b: bool| if b { P } else { N };
        let recs: Vec<OutcomeRecord> = records
            .iter()
            .map(|&(y, p, g)| OutcomeRecord::new(l(y), l(p), if g { "a" } else { "b" }))
            .collect();
        let mut rev = recs.clone();
        rev.reverse();
        let a = incompatibility_advisories(&OutcomeTable::new(recs).unwrap());
        let b = incompatibility_advisories(&OutcomeTable::new(rev).unwrap());
        let crit = |x: &fairaudit::fairness::IncompatibilityAssessment| {
            x.advisories.iter().map(|a| a.criteria).collect::<BTreeSet<_>>()
        };
        prop_assert_eq!(crit(&a), crit(&b));
    }
}
