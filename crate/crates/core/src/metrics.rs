//! Confusion matrices and the accuracy-metric battery derived from them.
//!
//! A rate whose denominator is zero is `None` rather than a made-up number;
//! it serializes as JSON `null`.

use serde::{Deserialize, Serialize};

use crate::dataset::{OutcomeRecord, OutcomeTable};
use crate::error::{Error, Result};

/// Weighted confusion counts for one group. Counts are real-valued so that
/// row weights are supported; unweighted data gives integral counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: f64,
}

impl ConfusionMatrix {
    pub fn new(tp: f64, fp: f64, fn_: f64, tn: f64) -> Result<Self> {
        for (name, v) in [("tp", tp), ("fp", fp), ("fn", fn_), ("tn", tn)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!("{name} = {v} must be a finite count >= 0")));
            }
        }
        Ok(ConfusionMatrix { tp, fp, fn_, tn })
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a OutcomeRecord>) -> Self {
        let mut cm = ConfusionMatrix {
            tp: 0.0,
            fp: 0.0,
            fn_: 0.0,
            tn: 0.0,
        };
        for r in records {
            let cell = match (r.truth.is_positive(), r.prediction.is_positive()) {
                (true, true) => &mut cm.tp,
                (false, true) => &mut cm.fp,
                (true, false) => &mut cm.fn_,
                (false, false) => &mut cm.tn,
            };
            *cell += r.weight;
        }
        cm
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn actual_positive(&self) -> f64 {
        self.tp + self.fn_
    }

    pub fn actual_negative(&self) -> f64 {
        self.fp + self.tn
    }

    pub fn predicted_positive(&self) -> f64 {
        self.tp + self.fp
    }

    pub fn predicted_negative(&self) -> f64 {
        self.fn_ + self.tn
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        ConfusionMatrix {
            tp: self.tp * alpha,
            fp: self.fp * alpha,
            fn_: self.fn_ * alpha,
            tn: self.tn * alpha,
        }
    }

    /// P(prediction = positive). `None` for an empty matrix.
    pub fn selection_rate(&self) -> Option<f64> {
        ratio(self.predicted_positive(), self.total())
    }

    /// P(truth = positive).
    pub fn base_rate(&self) -> Option<f64> {
        ratio(self.actual_positive(), self.total())
    }
}

pub(crate) fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn confusion_matrix(table: &OutcomeTable) -> Result<ConfusionMatrix> {
    if table.is_empty() {
        return Err(Error::EmptyDataset("confusion matrix of an empty table".into()));
    }
    Ok(ConfusionMatrix::from_records(table.records()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMetrics {
    pub predictive_accuracy: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub npv: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
}

impl AccuracyMetrics {
    /// `(key, value)` pairs in display order.
    pub fn entries(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("predictive_accuracy", self.predictive_accuracy),
            ("balanced_accuracy", self.balanced_accuracy),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
            ("precision", self.precision),
            ("npv", self.npv),
            ("fp_rate", self.fp_rate),
            ("fn_rate", self.fn_rate),
        ]
    }
}

pub fn accuracy_metrics(cm: &ConfusionMatrix) -> Result<AccuracyMetrics> {
    let total = cm.total();
    if total <= 0.0 {
        return Err(Error::EmptyDataset("confusion matrix has zero total".into()));
    }
    let sensitivity = ratio(cm.tp, cm.actual_positive());
    let specificity = ratio(cm.tn, cm.actual_negative());
    let balanced_accuracy = match (sensitivity, specificity) {
        (Some(se), Some(sp)) => Some((se + sp) / 2.0),
        _ => None,
    };
    Ok(AccuracyMetrics {
        predictive_accuracy: ratio(cm.tp + cm.tn, total),
        balanced_accuracy,
        sensitivity,
        specificity,
        precision: ratio(cm.tp, cm.predicted_positive()),
        npv: ratio(cm.tn, cm.predicted_negative()),
        fp_rate: specificity.map(|s| 1.0 - s),
        fn_rate: sensitivity.map(|s| 1.0 - s),
    })
}
