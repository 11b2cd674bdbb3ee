//! Acceptance suite. Runs every acceptance criterion at its stated tolerance
//! and prints one PASS/FAIL line per criterion. Exits non-zero on any failure.
//!
//! Oracles here are written independently of the library: metrics and gaps
//! are recomputed from raw counts, flip distances are found by line search,
//! and the sampler is checked against the known probabilities.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fairaudit::compas::{check_pipeline, replicate, CountsFixture, Section, BLACK, WHITE};
use fairaudit::dataset::{CompasRecipe, Label, OutcomeRecord, OutcomeTable};
use fairaudit::fairness::{
    audit_pair, evaluate_criterion, independence_gap, separation_gaps, sufficiency_gaps, ComparisonMode,
    FairnessConfig, Gap, Verdict,
};
use fairaudit::gaming::{
    counterfactual_move, flip_distance, simulate, Agent, Budget, GamingConfig, LinearClassifier, MoveOutcome,
};
use fairaudit::metrics::{accuracy_metrics, ConfusionMatrix};
use fairaudit::stereotype::{
    bias_score, debias_project, gender_direction, sample_tokens, AttributePair, DecodeMode, EmbeddingTable,
    TokenDistribution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

// Independent recomputation of the published figures from the raw counts.
fn oracle_rates(tp: f64, fn_: f64, fp: f64, tn: f64) -> BTreeMap<&'static str, f64> {
    let n = tp + fn_ + fp + tn;
    BTreeMap::from([
        ("predictive_accuracy", (tp + tn) / n),
        ("balanced_accuracy", (tp / (tp + fn_) + tn / (tn + fp)) / 2.0),
        ("sensitivity", tp / (tp + fn_)),
        ("specificity", tn / (tn + fp)),
        ("precision", tp / (tp + fp)),
        ("npv", tn / (tn + fn_)),
        ("fp_rate", fp / (fp + tn)),
        ("fn_rate", fn_ / (fn_ + tp)),
        ("selection", (tp + fp) / n),
        ("false_omission", fn_ / (fn_ + tn)),
    ])
}

fn criterion_replication() -> Outcome {
    let start = Instant::now();
    let fixture = CountsFixture::bundled();
    let rep = replicate(&fixture).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    // Counts as published (TP, FN, FP, TN).
    let published = [
        ("all", [2035.0, 1216.0, 1282.0, 2681.0]),
        (BLACK, [1369.0, 532.0, 805.0, 990.0]),
        (WHITE, [505.0, 461.0, 349.0, 1139.0]),
    ];
    for (panel, [tp, fn_, fp, tn]) in published {
        let cm = fixture.panel(panel).ok_or(format!("fixture lacks panel {panel}"))?;
        check((cm.tp, cm.fn_, cm.fp, cm.tn) == (tp, fn_, fp, tn), || {
            format!("fixture counts for {panel} differ: {cm:?}")
        })?;
    }

    let tol = 5e-4;
    let b = oracle_rates(1369.0, 532.0, 805.0, 990.0);
    let w = oracle_rates(505.0, 461.0, 349.0, 1139.0);
    let a = oracle_rates(2035.0, 1216.0, 1282.0, 2681.0);
    for (got, want, what) in [
        (b["sensitivity"], 0.7201, "black sensitivity"),
        (w["specificity"], 0.7655, "white specificity"),
        (a["predictive_accuracy"], 0.6537, "overall predictive accuracy"),
        (b["selection"] - w["selection"], 0.2402, "independence gap"),
        (b["sensitivity"] - w["sensitivity"], 0.1974, "sensitivity gap"),
        (b["fp_rate"] - w["fp_rate"], 0.2139, "false-positive-rate gap"),
        (b["precision"] - w["precision"], 0.0384, "precision gap"),
        (b["false_omission"] - w["false_omission"], 0.0614, "false-omission gap"),
    ] {
        check((got - want).abs() <= tol, || {
            format!("oracle {what} = {got:.6}, published {want}")
        })?;
    }

    // Library panels against the oracle, every metric.
    for (panel, oracle) in [("all", &a), (BLACK, &b), (WHITE, &w)] {
        let p = rep.report.panel(panel).ok_or(format!("report lacks panel {panel}"))?;
        for (name, value) in p.metrics.entries() {
            let v = value.ok_or(format!("{panel} {name} undefined"))?;
            let o = oracle[name];
            check((v - o).abs() <= 1e-12, || {
                format!("{panel} {name}: library {v}, oracle {o}")
            })?;
        }
    }
    let r = &rep.report;
    let gaps = [
        (r.independence_gap, b["selection"] - w["selection"]),
        (r.separation_gaps.positive, b["sensitivity"] - w["sensitivity"]),
        (r.separation_gaps.negative, b["fp_rate"] - w["fp_rate"]),
        (r.sufficiency_gaps.positive, b["precision"] - w["precision"]),
        (r.sufficiency_gaps.negative, b["false_omission"] - w["false_omission"]),
    ];
    for (g, o) in gaps {
        let g = g.ok_or("undefined gap")?;
        check((g.signed - o).abs() <= 1e-12, || {
            format!("gap {} vs oracle {o}", g.signed)
        })?;
    }
    let v = r.verdicts;
    check(
        (v.independence, v.separation, v.sufficiency) == (Verdict::Violated, Verdict::Violated, Verdict::Satisfied),
        || format!("verdicts {v:?}"),
    )?;

    // The library's own cell-by-cell comparison against the published values.
    for section in [Section::Accuracy, Section::Rate, Section::Gap, Section::Verdict] {
        let (ok, total) = rep.passed(section);
        check(ok == total, || format!("{section:?}: {ok}/{total} cells matched"))?;
    }
    within(elapsed, Duration::from_secs(1))?;
    let (m, mt) = rep.passed(Section::Accuracy);
    let (g, gt) = rep.passed(Section::Gap);
    Ok(format!(
        "{m}/{mt} metrics, {g}/{gt} gaps, verdicts No/No/Yes, {elapsed:.2?}"
    ))
}

fn criterion_pipeline() -> Outcome {
    let csv = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/compas-scores-two-years.csv");
    if !csv.exists() {
        return Err(format!("{} not found", csv.display()));
    }
    let fixture = CountsFixture::bundled();
    let fidelity = check_pipeline(&csv, &CompasRecipe::default(), &fixture).map_err(|e| e.to_string())?;
    if !fidelity.exact() {
        let diffs: Vec<String> = fidelity
            .diffs
            .iter()
            .map(|d| format!("{} {}: expected {} got {}", d.panel, d.cell, d.expected, d.observed))
            .collect();
        return Err(diffs.join("; "));
    }
    Ok(format!(
        "{} of {} rows kept, all counts identical",
        fidelity.ingest.kept_rows, fidelity.ingest.data_rows
    ))
}

fn criterion_gaming() -> Outcome {
    let start = Instant::now();
    let config = GamingConfig::with_seed(42);
    check(config.n_agents == 1000 && config.max_rounds == 100, || {
        format!(
            "unexpected defaults: n={}, rounds={}",
            config.n_agents, config.max_rounds
        )
    })?;
    check(config.budget == Budget::Unbounded, || {
        "default budget is bounded".into()
    })?;
    let run = simulate(&config).map_err(|e| e.to_string())?;
    let again = simulate(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let trace = &run.trace;

    let first = trace.first();
    check(first.training_accuracy >= 0.95, || {
        format!("round-0 training accuracy {}", first.training_accuracy)
    })?;
    let round1 = trace.rows.get(1).ok_or("no game was played")?;
    check(round1.acceptance_rate == 1.0, || {
        format!("round-1 post-game acceptance {}", round1.acceptance_rate)
    })?;
    let d0 = first.dominance.ok_or("round-0 dominance undefined")?;
    let dn = trace.last().dominance.ok_or("final dominance undefined")?;
    check(dn >= 0.95 && dn >= d0, || format!("final dominance {dn}, initial {d0}"))?;
    check(trace.to_csv() == again.trace.to_csv(), || {
        "trace differs between runs".into()
    })?;
    check(run.snapshots.len() == again.snapshots.len(), || {
        "snapshots differ".into()
    })?;
    for (s, t) in run.snapshots.iter().zip(&again.snapshots) {
        check(s.agents == t.agents && s.classifier == t.classifier, || {
            format!("snapshot {} differs", s.label)
        })?;
    }
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "acc0 {:.3}, accept1 {}, dominance {d0:.3} -> {dn:.3} after {} rounds ({:?}), {elapsed:.2?} for two runs",
        first.training_accuracy,
        round1.acceptance_rate,
        trace.rounds_played(),
        trace.termination
    ))
}

fn criterion_cfe() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut flipped = 0;
    let mut max_err: f64 = 0.0;
    let grid = 2000;
    for i in 0..1000 {
        let clf = LinearClassifier {
            w_immutable: rng.random_range(-3.0..3.0),
            w_mutable: {
                let m: f64 = rng.random_range(0.05..3.0);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            },
            bias: rng.random_range(-2.0..2.0),
        };
        let agent = Agent {
            x_immutable: rng.random_range(-3.0..3.0),
            x_mutable: rng.random_range(-3.0..3.0),
            true_class: Label::Negative,
            gamed: false,
        };
        let margin = if i % 2 == 0 { 0.0 } else { 1e-6 };
        let score = clf.w_immutable * agent.x_immutable + clf.w_mutable * agent.x_mutable + clf.bias;
        let outcome = counterfactual_move(&agent, &clf, Budget::Unbounded, margin);
        if score >= 0.0 {
            check(outcome == MoveOutcome::AlreadyPositive, || {
                format!("pair {i}: accepted agent moved")
            })?;
            continue;
        }
        let MoveOutcome::Flipped {
            x_mutable,
            displacement,
        } = outcome
        else {
            return Err(format!("pair {i}: expected a flip, got {outcome:?}"));
        };
        flipped += 1;
        let analytic = (score.abs() + margin) / clf.w_mutable.abs();
        check(
            (flip_distance(score, clf.w_mutable, margin) - analytic).abs() <= 1e-12,
            || format!("pair {i}: flip_distance disagrees with the closed form"),
        )?;
        let err = (displacement - analytic).abs();
        max_err = max_err.max(err);
        check(err <= 1e-9, || {
            format!("pair {i}: displacement {displacement}, analytic {analytic}")
        })?;
        check(clf.score(agent.x_immutable, x_mutable) >= 0.0, || {
            format!("pair {i}: move does not flip")
        })?;

        // Dense search along both directions of the mutable axis: nothing
        // short of the analytic distance (less 1e-9) reaches the target
        // score `margin`.
        let reach = analytic - 1e-9;
        for k in 0..grid {
            let t = reach * k as f64 / grid as f64;
            for dir in [1.0, -1.0] {
                let s = clf.w_immutable * agent.x_immutable + clf.w_mutable * (agent.x_mutable + dir * t) + clf.bias;
                check(s < margin, || {
                    format!("pair {i}: displacement {t} (dir {dir}) already flips")
                })?;
            }
        }
        let s = clf.w_immutable * agent.x_immutable
            + clf.w_mutable * (agent.x_mutable + clf.w_mutable.signum() * reach)
            + clf.bias;
        check(s < margin, || format!("pair {i}: flips before the analytic distance"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    check(flipped >= 300, || format!("only {flipped} pairs needed a move"))?;
    Ok(format!(
        "1000 pairs, {flipped} flips, max |displacement - analytic| {max_err:.1e}, {elapsed:.2?}"
    ))
}

fn random_matrix(rng: &mut ChaCha8Rng) -> ConfusionMatrix {
    let cell = |rng: &mut ChaCha8Rng| {
        if rng.random_range(0..8) == 0 {
            0.0
        } else if rng.random::<bool>() {
            rng.random_range(1..200) as f64
        } else {
            rng.random_range(0.01..500.0)
        }
    };
    let (tp, fp, fn_, tn) = (cell(rng), cell(rng), cell(rng), cell(rng));
    ConfusionMatrix::new(tp, fp, fn_, tn).expect("non-negative cells")
}

fn same_option(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

fn criterion_metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = 2000;
    let mut floors = 0;
    for i in 0..cases {
        let a = random_matrix(&mut rng);
        let b = random_matrix(&mut rng);
        let ma = accuracy_metrics(&a).map_err(|e| e.to_string())?;

        // Scale invariance.
        let alpha = rng.random_range(0.001..1000.0);
        let ms = accuracy_metrics(&a.scaled(alpha)).map_err(|e| e.to_string())?;
        for ((name, x), (_, y)) in ma.entries().into_iter().zip(ms.entries()) {
            check(same_option(x, y, 1e-12), || {
                format!("case {i}: {name} not scale invariant")
            })?;
        }

        // Complement identities.
        for (x, y, what) in [
            (ma.fp_rate, ma.specificity, "fp_rate + specificity"),
            (ma.fn_rate, ma.sensitivity, "fn_rate + sensitivity"),
        ] {
            match (x, y) {
                (Some(x), Some(y)) => check(x + y == 1.0, || format!("case {i}: {what} = {}", x + y))?,
                (None, None) => {}
                _ => return Err(format!("case {i}: {what} defined on one side only")),
            }
        }

        // Constant predictors on two-class data sit exactly at 0.5.
        let (p, n) = (a.actual_positive(), a.actual_negative());
        if p > 0.0 && n > 0.0 {
            for cm in [
                ConfusionMatrix::new(p, n, 0.0, 0.0),
                ConfusionMatrix::new(0.0, 0.0, p, n),
            ] {
                let m = accuracy_metrics(&cm.map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                check(m.balanced_accuracy == Some(0.5), || {
                    format!(
                        "case {i}: constant predictor balanced accuracy {:?}",
                        m.balanced_accuracy
                    )
                })?;
            }
            floors += 1;
        }

        // Antisymmetry and the zero law.
        let forward = all_gaps(&a, &b);
        let backward = all_gaps(&b, &a);
        for (f, r) in forward.iter().zip(&backward) {
            match (f, r) {
                (Some(f), Some(r)) => check(f.signed == -r.signed && f.absolute == r.absolute, || {
                    format!("case {i}: gap {} vs reversed {}", f.signed, r.signed)
                })?,
                (None, None) => {}
                _ => return Err(format!("case {i}: gap defined in one direction only")),
            }
        }
        for g in all_gaps(&a, &a).into_iter().flatten() {
            check(g.signed == 0.0, || format!("case {i}: self gap {}", g.signed))?;
        }
        for eps in [0.0, 0.05, 0.5] {
            let cfg = FairnessConfig::new(eps, 0.8, ComparisonMode::AbsoluteDifference).unwrap();
            let self_gaps = all_gaps(&a, &a);
            let v = evaluate_criterion(&self_gaps, &cfg);
            let expected = if self_gaps.iter().all(Option::is_some) {
                Verdict::Satisfied
            } else {
                Verdict::NotEvaluable
            };
            check(v == expected, || {
                format!("case {i}: self comparison at eps {eps} is {v:?}")
            })?;
        }

        // Monotonicity in epsilon, for each criterion and both comparison modes.
        let mut e1: f64 = rng.random_range(0.0..1.0);
        let mut e2: f64 = rng.random_range(0.0..1.0);
        if e1 > e2 {
            std::mem::swap(&mut e1, &mut e2);
        }
        for mode in [ComparisonMode::AbsoluteDifference, ComparisonMode::Ratio] {
            let lo = FairnessConfig::new(e1, 0.8, mode).unwrap();
            let hi = FairnessConfig::new(e2, 0.8, mode).unwrap();
            for gaps in [&forward[..1], &forward[1..3], &forward[3..]] {
                let (vl, vh) = (evaluate_criterion(gaps, &lo), evaluate_criterion(gaps, &hi));
                let ok = match vl {
                    Verdict::Satisfied => vh == Verdict::Satisfied,
                    Verdict::NotEvaluable => vh == Verdict::NotEvaluable,
                    Verdict::Violated => true,
                };
                check(ok && !(vh == Verdict::Violated && vl != Verdict::Violated), || {
                    format!("case {i}: {vl:?} at {e1} but {vh:?} at {e2}")
                })?;
            }
        }
    }
    check(floors >= 1000, || {
        format!("only {floors} two-class matrices for the floor check")
    })?;

    let tables = brute_force_recount()?;
    Ok(format!(
        "{cases} random matrix pairs ({floors} floor checks), {tables} brute-force tables"
    ))
}

fn all_gaps(a: &ConfusionMatrix, b: &ConfusionMatrix) -> [Option<Gap>; 5] {
    let s = separation_gaps(a, b);
    let f = sufficiency_gaps(a, b);
    [independence_gap(a, b), s.positive, s.negative, f.positive, f.negative]
}

fn frac(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Counts straight from the records and compares with the audited panels.
fn brute_force_recount() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = FairnessConfig::default();
    let mut tables = 0;
    while tables < 200 {
        let n = rng.random_range(2..=20);
        let records: Vec<OutcomeRecord> = (0..n)
            .map(|_| {
                let y = if rng.random::<bool>() {
                    Label::Positive
                } else {
                    Label::Negative
                };
                let yh = if rng.random::<bool>() {
                    Label::Positive
                } else {
                    Label::Negative
                };
                let g = if rng.random::<bool>() { "a" } else { "b" };
                OutcomeRecord::new(y, yh, g)
            })
            .collect();
        if !(records.iter().any(|r| r.group == "a") && records.iter().any(|r| r.group == "b")) {
            continue;
        }
        let groups: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let table = OutcomeTable::with_domain(records.clone(), groups).map_err(|e| e.to_string())?;
        let report = audit_pair(&table, "a", "b", &cfg).map_err(|e| e.to_string())?;

        let mut rates: BTreeMap<&str, [Option<f64>; 5]> = BTreeMap::new();
        for g in ["a", "b"] {
            let rs: Vec<&OutcomeRecord> = records.iter().filter(|r| r.group == g).collect();
            let count = |y: Option<Label>, yh: Option<Label>| {
                rs.iter()
                    .filter(|r| y.is_none_or(|y| r.truth == y) && yh.is_none_or(|yh| r.prediction == yh))
                    .count()
            };
            let (pos, neg) = (Some(Label::Positive), Some(Label::Negative));
            let tp = count(pos, pos);
            let fp = count(neg, pos);
            let fn_ = count(pos, neg);
            let tn = count(neg, neg);
            let panel = report.panel(g).ok_or("missing panel")?;
            let c = &panel.confusion;
            check(
                (c.tp, c.fp, c.fn_, c.tn) == (tp as f64, fp as f64, fn_ as f64, tn as f64),
                || format!("table {tables}: group {g} counts differ"),
            )?;
            let m = &panel.metrics;
            let expect = [
                (m.predictive_accuracy, frac(tp + tn, rs.len())),
                (m.sensitivity, frac(tp, tp + fn_)),
                (m.specificity, frac(tn, tn + fp)),
                (m.precision, frac(tp, tp + fp)),
                (m.npv, frac(tn, tn + fn_)),
            ];
            for (got, want) in expect {
                check(same_option(got, want, 1e-12), || {
                    format!("table {tables}: group {g} metric differs")
                })?;
            }
            rates.insert(
                g,
                [
                    frac(tp + fp, rs.len()),
                    frac(tp, tp + fn_),
                    frac(fp, fp + tn),
                    frac(tp, tp + fp),
                    frac(fn_, fn_ + tn),
                ],
            );
        }
        let lib = [
            report.independence_gap,
            report.separation_gaps.positive,
            report.separation_gaps.negative,
            report.sufficiency_gaps.positive,
            report.sufficiency_gaps.negative,
        ];
        for (k, gap) in lib.iter().enumerate() {
            let want = match (rates["a"][k], rates["b"][k]) {
                (Some(x), Some(y)) => Some(x - y),
                _ => None,
            };
            check(same_option(gap.map(|g| g.signed), want, 1e-12), || {
                format!("table {tables}: gap {k} is {gap:?}, recount {want:?}")
            })?;
        }
        tables += 1;
    }
    Ok(tables)
}

fn random_table(rng: &mut ChaCha8Rng, words: &[String], dim: usize) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(dim).unwrap();
    for w in words {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        t.insert(w.clone(), v).unwrap();
    }
    t
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn criterion_stereotype() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let attributes = ["he", "she", "man", "woman", "king", "queen"];
    let mut words: Vec<String> = attributes.iter().map(|s| s.to_string()).collect();
    words.extend((0..200).map(|i| format!("w{i}")));
    let pairs = [
        AttributePair::new("he", "she"),
        AttributePair::new("man", "woman"),
        AttributePair::new("king", "queen"),
    ];
    let exclude: BTreeSet<String> = attributes.iter().map(|s| s.to_string()).collect();

    let mut worst_proj: f64 = 0.0;
    let mut worst_idem: f64 = 0.0;
    for trial in 0..20 {
        let dim = [3, 16, 50, 300][trial % 4];
        let table = random_table(&mut rng, &words, dim);
        for w in &words[6..] {
            for p in &pairs {
                let s = bias_score(w, p, &table).map_err(|e| e.to_string())?;
                let r = bias_score(w, &p.swapped(), &table).map_err(|e| e.to_string())?;
                check(s == -r, || format!("{w}: score {s}, swapped {r}"))?;
            }
        }
        let d = gender_direction(&pairs, &table).map_err(|e| e.to_string())?;
        let once = debias_project(&table, &d, &exclude).map_err(|e| e.to_string())?;
        let twice = debias_project(&once, &d, &exclude).map_err(|e| e.to_string())?;
        for (w, v) in once.iter() {
            if exclude.contains(w) {
                check(v == table.get(w).unwrap(), || format!("excluded word {w} changed"))?;
                continue;
            }
            let p = dot(v, &d).abs();
            worst_proj = worst_proj.max(p);
            check(p <= 1e-6, || format!("{w}: |w.d| = {p:e} after projection"))?;
            let diff = v
                .iter()
                .zip(twice.get(w).unwrap())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst_idem = worst_idem.max(diff);
            check(diff <= 1e-12, || format!("{w}: second projection moved it by {diff:e}"))?;
        }
    }

    let dist = TokenDistribution::new(vec![
        ("doctor".into(), 0.4),
        ("nurse".into(), 0.3),
        ("teacher".into(), 0.2),
        ("engineer".into(), 0.1),
    ])
    .map_err(|e| e.to_string())?;
    let n = 100_000;
    let mut good = 0;
    for seed in 0..100 {
        let counts = sample_tokens(&dist, DecodeMode::Proportional, n, seed).map_err(|e| e.to_string())?;
        check(counts.values().sum::<u64>() == n, || {
            format!("seed {seed}: counts do not sum to n")
        })?;
        let ok = dist.tokens().iter().all(|(t, p)| {
            let share = counts.get(t).copied().unwrap_or(0) as f64 / n as f64;
            (share - p).abs() <= 0.01
        });
        if ok {
            good += 1;
        }
    }
    check(good >= 95, || format!("only {good}/100 seeds within 0.01"))?;
    for seed in [0, 1, 99] {
        let counts = sample_tokens(&dist, DecodeMode::Argmax, 1000, seed).map_err(|e| e.to_string())?;
        check(counts.len() == 1 && counts.get("doctor") == Some(&1000), || {
            format!("argmax emitted {counts:?}")
        })?;
    }
    Ok(format!(
        "antisymmetry exact, max |w.d| {worst_proj:.1e}, idempotence {worst_idem:.1e}, sampler {good}/100 seeds, argmax top-only"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("1 COMPAS replication from fixture", criterion_replication),
        ("2 CSV pipeline fidelity", criterion_pipeline),
        ("3 gaming simulation properties", criterion_gaming),
        ("4 counterfactual minimality", criterion_cfe),
        ("5 metric property suite", criterion_metric_properties),
        ("6 stereotype properties", criterion_stereotype),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
