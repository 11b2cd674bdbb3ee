//! Group-fairness criteria over a pair of confusion matrices.
//!
//! * independence: equal selection rates, P(Ŷ=+ | A)
//! * separation: equal sensitivity and equal false-positive rate
//! * sufficiency: equal precision and equal P(Y=+ | Ŷ=-, A)
//!
//! Each criterion yields signed gaps (first group minus second) that are
//! judged against a slack `epsilon`. The four-fifths ratio test is kept
//! separate: it compares selection-rate ratios, never differences.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{partition_by_group, Label, OutcomeTable};
use crate::error::{Error, Result};
use crate::metrics::{accuracy_metrics, confusion_matrix, AccuracyMetrics, ConfusionMatrix};

/// Tolerance on joint frequencies when testing empirical independence.
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMode {
    AbsoluteDifference,
    /// Relative shortfall `1 - min/max` of the two compared probabilities.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    pub epsilon: f64,
    pub four_fifths_threshold: f64,
    pub comparison_mode: ComparisonMode,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        FairnessConfig {
            epsilon: 0.1,
            four_fifths_threshold: 0.8,
            comparison_mode: ComparisonMode::AbsoluteDifference,
        }
    }
}

impl FairnessConfig {
    pub fn new(epsilon: f64, four_fifths_threshold: f64, comparison_mode: ComparisonMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::config("epsilon", format!("{epsilon} not in [0, 1]")));
        }
        if !(four_fifths_threshold > 0.0 && four_fifths_threshold <= 1.0) {
            return Err(Error::config(
                "four_fifths_threshold",
                format!("{four_fifths_threshold} not in (0, 1]"),
            ));
        }
        Ok(FairnessConfig {
            epsilon,
            four_fifths_threshold,
            comparison_mode,
        })
    }
}

/// A difference between the same conditional probability in two groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub first: f64,
    pub second: f64,
    pub signed: f64,
    pub absolute: f64,
}

impl Gap {
    fn between(first: Option<f64>, second: Option<f64>) -> Option<Gap> {
        let (first, second) = (first?, second?);
        let signed = first - second;
        Some(Gap {
            first,
            second,
            signed,
            absolute: signed.abs(),
        })
    }

    /// The quantity compared against epsilon under `mode`.
    pub fn magnitude(&self, mode: ComparisonMode) -> f64 {
        match mode {
            ComparisonMode::AbsoluteDifference => self.absolute,
            ComparisonMode::Ratio => {
                let (lo, hi) = if self.first <= self.second {
                    (self.first, self.second)
                } else {
                    (self.second, self.first)
                };
                if hi > 0.0 {
                    1.0 - lo / hi
                } else {
                    0.0
                }
            }
        }
    }
}

/// Gaps conditioned on the two values of a binary variable: `positive` is
/// the `+` branch, `negative` the `-` branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPair {
    pub positive: Option<Gap>,
    pub negative: Option<Gap>,
}

impl GapPair {
    pub fn components(&self) -> [Option<Gap>; 2] {
        [self.positive, self.negative]
    }
}

/// P(Ŷ=+ | A=a) − P(Ŷ=+ | A=b). `None` when either matrix is empty.
pub fn independence_gap(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Option<Gap> {
    Gap::between(a.selection_rate(), b.selection_rate())
}

/// (sensitivity gap, false-positive-rate gap).
pub fn separation_gaps(a: &ConfusionMatrix, b: &ConfusionMatrix) -> GapPair {
    let tpr = |m: &ConfusionMatrix| crate::metrics::ratio(m.tp, m.actual_positive());
    let fpr = |m: &ConfusionMatrix| crate::metrics::ratio(m.fp, m.actual_negative());
    GapPair {
        positive: Gap::between(tpr(a), tpr(b)),
        negative: Gap::between(fpr(a), fpr(b)),
    }
}

/// (precision gap, gap in P(Y=+ | Ŷ=-) = 1 − NPV).
pub fn sufficiency_gaps(a: &ConfusionMatrix, b: &ConfusionMatrix) -> GapPair {
    let ppv = |m: &ConfusionMatrix| crate::metrics::ratio(m.tp, m.predicted_positive());
    let fomr = |m: &ConfusionMatrix| crate::metrics::ratio(m.fn_, m.predicted_negative());
    GapPair {
        positive: Gap::between(ppv(a), ppv(b)),
        negative: Gap::between(fomr(a), fomr(b)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    NotEvaluable,
}

impl Verdict {
    pub fn yes_no(self) -> &'static str {
        match self {
            Verdict::Satisfied => "Yes",
            Verdict::Violated => "No",
            Verdict::NotEvaluable => "n/a",
        }
    }
}

/// Violated if any evaluable component exceeds epsilon; otherwise
/// not-evaluable if any component is missing; otherwise satisfied.
/// A magnitude exactly equal to epsilon counts as satisfied.
pub fn evaluate_criterion(gaps: &[Option<Gap>], config: &FairnessConfig) -> Verdict {
    let mut missing = gaps.is_empty();
    for g in gaps {
        match g {
            Some(g) if g.magnitude(config.comparison_mode) > config.epsilon => return Verdict::Violated,
            Some(_) => {}
            None => missing = true,
        }
    }
    if missing {
        Verdict::NotEvaluable
    } else {
        Verdict::Satisfied
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourFifths {
    AdverseImpactEvidence,
    NoEvidence,
    NotEvaluable,
}

/// Lowest selection rate divided by the highest, over groups with a
/// defined rate.
pub fn impact_ratio(rates: &BTreeMap<String, Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = rates.values().flatten().copied().collect();
    if defined.len() < 2 {
        return None;
    }
    let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi > 0.0).then(|| lo / hi)
}

/// Adverse-impact evidence iff some group's selection rate is below
/// `threshold` times the highest group's rate.
pub fn four_fifths_test(rates: &BTreeMap<String, Option<f64>>, threshold: f64) -> Result<FourFifths> {
    let mut defined = Vec::new();
    for (group, rate) in rates {
        if let Some(r) = rate {
            if !(0.0..=1.0).contains(r) {
                return Err(Error::Domain(format!("selection rate {r} for `{group}` not in [0, 1]")));
            }
            defined.push(*r);
        }
    }
    if defined.len() < 2 {
        return Ok(FourFifths::NotEvaluable);
    }
    let lo = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(if lo < threshold * hi {
        FourFifths::AdverseImpactEvidence
    } else {
        FourFifths::NoEvidence
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Independence,
    Separation,
    Sufficiency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advisory {
    pub criteria: [Criterion; 2],
    pub precondition: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompatibilityAssessment {
    /// Largest |P(A=a, Y=y) − P(A=a)P(Y=y)| over all cells.
    pub group_label_dependence: Option<f64>,
    /// Largest |P(Ŷ=p, Y=y) − P(Ŷ=p)P(Y=y)| over all cells.
    pub prediction_label_dependence: Option<f64>,
    pub advisories: Vec<Advisory>,
    pub suppressed: Option<String>,
}

fn max_dependence<K: Ord + Clone>(table: &OutcomeTable, key: impl Fn(&crate::dataset::OutcomeRecord) -> K) -> f64 {
    let total = table.total_weight();
    let mut joint: BTreeMap<(K, Label), f64> = BTreeMap::new();
    let mut marg_k: BTreeMap<K, f64> = BTreeMap::new();
    let mut marg_y: BTreeMap<Label, f64> = BTreeMap::new();
    for r in table.records() {
        let k = key(r);
        *joint.entry((k.clone(), r.truth)).or_default() += r.weight;
        *marg_k.entry(k).or_default() += r.weight;
        *marg_y.entry(r.truth).or_default() += r.weight;
    }
    let mut worst: f64 = 0.0;
    for (k, pk) in &marg_k {
        for (y, py) in &marg_y {
            let pj = joint.get(&(k.clone(), *y)).copied().unwrap_or(0.0) / total;
            worst = worst.max((pj - (pk / total) * (py / total)).abs());
        }
    }
    worst
}

/// Reports which pairs of criteria cannot hold exactly at the same time
/// given the empirical dependence structure of the table.
pub fn incompatibility_advisories(table: &OutcomeTable) -> IncompatibilityAssessment {
    let groups: BTreeSet<&str> = table.records().iter().map(|r| r.group.as_str()).collect();
    let classes: BTreeSet<Label> = table.records().iter().map(|r| r.truth).collect();
    let suppressed = if groups.len() < 2 {
        Some("table has a single group".to_owned())
    } else if classes.len() < 2 {
        Some("table has a single truth class".to_owned())
    } else {
        None
    };
    if suppressed.is_some() {
        return IncompatibilityAssessment {
            group_label_dependence: None,
            prediction_label_dependence: None,
            advisories: Vec::new(),
            suppressed,
        };
    }

    let a_y = max_dependence(table, |r| r.group.clone());
    let yhat_y = max_dependence(table, |r| r.prediction);
    let a_dep = a_y > INDEPENDENCE_TOLERANCE;
    let yhat_dep = yhat_y > INDEPENDENCE_TOLERANCE;

    let mut cells: BTreeSet<(&str, Label, Label)> = BTreeSet::new();
    for r in table.records() {
        cells.insert((r.group.as_str(), r.truth, r.prediction));
    }
    let full_support = cells.len() == groups.len() * 4;

    let mut advisories = Vec::new();
    if a_dep {
        advisories.push(Advisory {
            criteria: [Criterion::Independence, Criterion::Sufficiency],
            precondition: "group membership is not independent of the true label".into(),
            message: "independence and sufficiency cannot both hold exactly".into(),
        });
    }
    if a_dep && yhat_dep {
        advisories.push(Advisory {
            criteria: [Criterion::Independence, Criterion::Separation],
            precondition: "binary label; group membership and prediction are each not independent of the true label"
                .into(),
            message: "independence and separation cannot both hold exactly".into(),
        });
    }
    if a_dep && full_support {
        advisories.push(Advisory {
            criteria: [Criterion::Separation, Criterion::Sufficiency],
            precondition: "group membership is not independent of the true label and every (group, label, prediction) cell is populated".into(),
            message: "separation and sufficiency cannot both hold exactly".into(),
        });
    }
    IncompatibilityAssessment {
        group_label_dependence: Some(a_y),
        prediction_label_dependence: Some(yhat_y),
        advisories,
        suppressed: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPanel {
    pub group: String,
    pub records: usize,
    pub total_weight: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: AccuracyMetrics,
    pub selection_rate: Option<f64>,
}

impl GroupPanel {
    pub fn from_table(group: &str, table: &OutcomeTable) -> Result<Self> {
        let confusion = confusion_matrix(table)?;
        Ok(GroupPanel {
            group: group.to_owned(),
            records: table.len(),
            total_weight: confusion.total(),
            metrics: accuracy_metrics(&confusion)?,
            selection_rate: confusion.selection_rate(),
            confusion,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub independence: Verdict,
    pub separation: Verdict,
    pub sufficiency: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub group_pair: (String, String),
    pub config: FairnessConfig,
    pub dataset_fingerprint: String,
    /// Whole table first, then the two compared groups.
    pub panels: Vec<GroupPanel>,
    pub independence_gap: Option<Gap>,
    pub separation_gaps: GapPair,
    pub sufficiency_gaps: GapPair,
    pub verdicts: Verdicts,
    pub selection_rates: BTreeMap<String, Option<f64>>,
    pub impact_ratio: Option<f64>,
    pub four_fifths: FourFifths,
    pub incompatibility: IncompatibilityAssessment,
}

impl FairnessReport {
    pub fn panel(&self, group: &str) -> Option<&GroupPanel> {
        self.panels.iter().find(|p| p.group == group)
    }
}

/// Label of the un-partitioned panel.
pub const ALL_GROUPS: &str = "all";

/// Audits group `a` against group `b`. Records of other groups contribute to
/// the whole-table panel only.
pub fn audit_pair(table: &OutcomeTable, a: &str, b: &str, config: &FairnessConfig) -> Result<FairnessReport> {
    if a == b {
        return Err(Error::config("groups", "the two compared groups must differ"));
    }
    let parts = partition_by_group(table);
    let part = |g: &str| {
        parts
            .get(g)
            .ok_or_else(|| Error::EmptyDataset(format!("no records for group `{g}`")))
    };
    let (ta, tb) = (part(a)?, part(b)?);
    let all = GroupPanel::from_table(ALL_GROUPS, table)?;
    let pa = GroupPanel::from_table(a, ta)?;
    let pb = GroupPanel::from_table(b, tb)?;

    let independence = independence_gap(&pa.confusion, &pb.confusion);
    let separation = separation_gaps(&pa.confusion, &pb.confusion);
    let sufficiency = sufficiency_gaps(&pa.confusion, &pb.confusion);
    let verdicts = Verdicts {
        independence: evaluate_criterion(&[independence], config),
        separation: evaluate_criterion(&separation.components(), config),
        sufficiency: evaluate_criterion(&sufficiency.components(), config),
    };
    let selection_rates: BTreeMap<String, Option<f64>> =
        [(a.to_owned(), pa.selection_rate), (b.to_owned(), pb.selection_rate)]
            .into_iter()
            .collect();
    let four_fifths = four_fifths_test(&selection_rates, config.four_fifths_threshold)?;
    let pair_table = table.restrict_to(&[a, b])?;

    Ok(FairnessReport {
        group_pair: (a.to_owned(), b.to_owned()),
        config: *config,
        dataset_fingerprint: table.fingerprint(),
        panels: vec![all, pa, pb],
        independence_gap: independence,
        separation_gaps: separation,
        sufficiency_gaps: sufficiency,
        verdicts,
        impact_ratio: impact_ratio(&selection_rates),
        selection_rates,
        four_fifths,
        incompatibility: incompatibility_advisories(&pair_table),
    })
}

/// One report per unordered pair of groups, in lexicographic order.
pub fn audit_all_pairs(table: &OutcomeTable, config: &FairnessConfig) -> Result<Vec<FairnessReport>> {
    let groups: Vec<&String> = table.groups().iter().collect();
    let mut reports = Vec::new();
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            reports.push(audit_pair(table, a, b, config)?);
        }
    }
    Ok(reports)
}
