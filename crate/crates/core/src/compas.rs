//! The bundled COMPAS confusion-count fixture, the published reference
//! figures it must reproduce, and the check of the CSV preparation pipeline
//! against it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    load_outcomes_with_report, partition_by_group, CompasRecipe, IngestReport, Label, OutcomeRecord, OutcomeTable,
};
use crate::error::{Error, Result};
use crate::fairness::{audit_pair, FairnessConfig, FairnessReport, Verdict, ALL_GROUPS};
use crate::metrics::{confusion_matrix, ConfusionMatrix};

pub const BUNDLED_FIXTURE: &str = include_str!("../data/compas_counts.txt");

/// Comparison tolerance against figures printed to four decimals.
pub const PUBLISHED_TOLERANCE: f64 = 5e-4;

pub const BLACK: &str = "black";
pub const WHITE: &str = "white";
/// Residual group synthesized so that the whole-table panel matches.
pub const OTHER: &str = "other";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsFixture {
    pub panels: Vec<(String, ConfusionMatrix)>,
    pub checksum: String,
}

impl CountsFixture {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_FIXTURE).expect("bundled fixture is valid")
    }

    /// Lines are `panel tp fn fp tn`; `#` starts a comment. The final
    /// `sha256 <hex>` line must match the digest of every preceding byte.
    pub fn parse(text: &str) -> Result<Self> {
        let marker = text
            .rfind("sha256 ")
            .filter(|&i| i == 0 || text.as_bytes()[i - 1] == b'\n')
            .ok_or_else(|| Error::Integrity("fixture has no sha256 line".into()))?;
        let (body, tail) = text.split_at(marker);
        let declared = tail["sha256 ".len()..].trim();
        let actual = hex::encode(Sha256::digest(body.as_bytes()));
        if declared != actual {
            return Err(Error::Integrity(format!(
                "fixture checksum mismatch: declared {declared}, computed {actual}"
            )));
        }

        let mut panels = Vec::new();
        for (i, line) in body.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |m: &str| Error::Format {
                path: "<fixture>".into(),
                line: i + 1,
                message: m.to_owned(),
            };
            if fields.len() != 5 {
                return Err(bad("expected `panel tp fn fp tn`"));
            }
            let n = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad count `{s}`")));
            let (tp, fn_, fp, tn) = (n(fields[1])?, n(fields[2])?, n(fields[3])?, n(fields[4])?);
            panels.push((fields[0].to_owned(), ConfusionMatrix::new(tp, fp, fn_, tn)?));
        }
        Ok(CountsFixture {
            panels,
            checksum: actual,
        })
    }

    pub fn panel(&self, name: &str) -> Option<&ConfusionMatrix> {
        self.panels.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// A weighted outcome table realizing the fixture: one record per
    /// non-empty confusion cell of each group, weighted by its count. When an
    /// `all` panel is present, the residual is assigned to [`OTHER`].
    pub fn to_table(&self) -> Result<OutcomeTable> {
        let mut records = Vec::new();
        let mut push = |group: &str, m: &ConfusionMatrix| {
            let cells = [
                (Label::Positive, Label::Positive, m.tp),
                (Label::Negative, Label::Positive, m.fp),
                (Label::Positive, Label::Negative, m.fn_),
                (Label::Negative, Label::Negative, m.tn),
            ];
            for (truth, pred, w) in cells {
                if w > 0.0 {
                    records.push(OutcomeRecord::new(truth, pred, group).with_weight(w));
                }
            }
        };
        let groups: Vec<_> = self.panels.iter().filter(|(n, _)| n != ALL_GROUPS).collect();
        for (name, m) in &groups {
            push(name, m);
        }
        if let Some(all) = self.panel(ALL_GROUPS) {
            let mut rest = *all;
            for (_, m) in &groups {
                rest.tp -= m.tp;
                rest.fp -= m.fp;
                rest.fn_ -= m.fn_;
                rest.tn -= m.tn;
            }
            let rest = ConfusionMatrix::new(rest.tp, rest.fp, rest.fn_, rest.tn)
                .map_err(|e| Error::Integrity(format!("group panels exceed the whole-table panel: {e}")))?;
            push(OTHER, &rest);
        }
        OutcomeTable::new(records)
    }
}

/// Published accuracy figures, `(panel, metric, value)`.
pub const PUBLISHED_ACCURACY: [(&str, &str, f64); 24] = [
    ("all", "predictive_accuracy", 0.6537),
    ("all", "balanced_accuracy", 0.6512),
    ("all", "sensitivity", 0.6260),
    ("all", "specificity", 0.6765),
    ("all", "precision", 0.6135),
    ("all", "npv", 0.6880),
    ("all", "fp_rate", 0.3235),
    ("all", "fn_rate", 0.3740),
    ("black", "predictive_accuracy", 0.6383),
    ("black", "balanced_accuracy", 0.6358),
    ("black", "sensitivity", 0.7201),
    ("black", "specificity", 0.5515),
    ("black", "precision", 0.6297),
    ("black", "npv", 0.6505),
    ("black", "fp_rate", 0.4485),
    ("black", "fn_rate", 0.2799),
    ("white", "predictive_accuracy", 0.6699),
    ("white", "balanced_accuracy", 0.6441),
    ("white", "sensitivity", 0.5228),
    ("white", "specificity", 0.7655),
    ("white", "precision", 0.5913),
    ("white", "npv", 0.7119),
    ("white", "fp_rate", 0.2345),
    ("white", "fn_rate", 0.4772),
];

/// Published black-minus-white gaps.
pub const PUBLISHED_GAPS: [(&str, f64); 5] = [
    ("independence", 0.2402),
    ("separation_positive", 0.1974),
    ("separation_negative", 0.2139),
    ("sufficiency_positive", 0.0384),
    ("sufficiency_negative", 0.0614),
];

/// Published conditional probabilities entering the gaps.
pub const PUBLISHED_RATES: [(&str, &str, f64); 4] = [
    ("black", "selection_rate", 0.5882),
    ("white", "selection_rate", 0.3480),
    ("black", "false_omission_rate", 0.3495),
    ("white", "false_omission_rate", 0.2881),
];

/// Published verdicts at epsilon = 0.1.
pub const PUBLISHED_VERDICTS: [(&str, Verdict); 3] = [
    ("independence", Verdict::Violated),
    ("separation", Verdict::Violated),
    ("sufficiency", Verdict::Satisfied),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Accuracy,
    Rate,
    Gap,
    Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub section: Section,
    pub panel: String,
    pub metric: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub report: FairnessReport,
    pub checks: Vec<CellCheck>,
}

impl Replication {
    pub fn passed(&self, section: Section) -> (usize, usize) {
        let cells: Vec<_> = self.checks.iter().filter(|c| c.section == section).collect();
        (cells.iter().filter(|c| c.pass).count(), cells.len())
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn numeric_check(section: Section, panel: &str, metric: &str, expected: f64, observed: Option<f64>) -> CellCheck {
    let pass = observed.is_some_and(|o| (o - expected).abs() <= PUBLISHED_TOLERANCE);
    CellCheck {
        section,
        panel: panel.to_owned(),
        metric: metric.to_owned(),
        expected: format!("{expected:.4}"),
        observed: observed.map_or_else(|| "undefined".to_owned(), |o| format!("{o:.6}")),
        pass,
    }
}

/// Recomputes every published figure from `fixture` at epsilon = 0.1 and
/// compares it with the printed value.
pub fn replicate(fixture: &CountsFixture) -> Result<Replication> {
    let table = fixture.to_table()?;
    let config = FairnessConfig::default();
    let report = audit_pair(&table, BLACK, WHITE, &config)?;
    let mut checks = Vec::new();

    for (panel, metric, expected) in PUBLISHED_ACCURACY {
        let observed = report
            .panel(panel)
            .and_then(|p| p.metrics.entries().into_iter().find(|(k, _)| *k == metric))
            .and_then(|(_, v)| v);
        checks.push(numeric_check(Section::Accuracy, panel, metric, expected, observed));
    }
    for (panel, metric, expected) in PUBLISHED_RATES {
        let observed = report.panel(panel).and_then(|p| match metric {
            "selection_rate" => p.selection_rate,
            _ => p.metrics.npv.map(|v| 1.0 - v),
        });
        checks.push(numeric_check(Section::Rate, panel, metric, expected, observed));
    }
    let pair = format!("{BLACK}-{WHITE}");
    for (metric, expected) in PUBLISHED_GAPS {
        let gap = match metric {
            "independence" => report.independence_gap,
            "separation_positive" => report.separation_gaps.positive,
            "separation_negative" => report.separation_gaps.negative,
            "sufficiency_positive" => report.sufficiency_gaps.positive,
            _ => report.sufficiency_gaps.negative,
        };
        checks.push(numeric_check(
            Section::Gap,
            &pair,
            metric,
            expected,
            gap.map(|g| g.signed),
        ));
    }
    for (criterion, expected) in PUBLISHED_VERDICTS {
        let observed = match criterion {
            "independence" => report.verdicts.independence,
            "separation" => report.verdicts.separation,
            _ => report.verdicts.sufficiency,
        };
        checks.push(CellCheck {
            section: Section::Verdict,
            panel: pair.clone(),
            metric: criterion.to_owned(),
            expected: expected.yes_no().to_owned(),
            observed: observed.yes_no().to_owned(),
            pass: observed == expected,
        });
    }
    Ok(Replication { report, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDiff {
    pub panel: String,
    pub cell: String,
    pub expected: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFidelity {
    pub recipe: CompasRecipe,
    pub ingest: IngestReport,
    pub diffs: Vec<CountDiff>,
}

impl PipelineFidelity {
    pub fn exact(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Cell-by-cell differences between a table's confusion counts and the
/// fixture panels.
pub fn diff_counts(table: &OutcomeTable, fixture: &CountsFixture) -> Result<Vec<CountDiff>> {
    let parts = partition_by_group(table);
    let mut diffs = Vec::new();
    for (panel, expected) in &fixture.panels {
        let observed = if panel == ALL_GROUPS {
            confusion_matrix(table)?
        } else {
            match parts.get(panel) {
                Some(t) => confusion_matrix(t)?,
                None => ConfusionMatrix::new(0.0, 0.0, 0.0, 0.0)?,
            }
        };
        for (cell, e, o) in [
            ("tp", expected.tp, observed.tp),
            ("fn", expected.fn_, observed.fn_),
            ("fp", expected.fp, observed.fp),
            ("tn", expected.tn, observed.tn),
        ] {
            if e != o {
                diffs.push(CountDiff {
                    panel: panel.clone(),
                    cell: cell.to_owned(),
                    expected: e,
                    observed: o,
                });
            }
        }
    }
    Ok(diffs)
}

/// Runs the recipe over the raw two-year CSV and diffs the result against
/// the fixture.
pub fn check_pipeline(
    csv: impl AsRef<Path>,
    recipe: &CompasRecipe,
    fixture: &CountsFixture,
) -> Result<PipelineFidelity> {
    let (table, ingest) = load_outcomes_with_report(csv, &recipe.schema())?;
    Ok(PipelineFidelity {
        recipe: recipe.clone(),
        ingest,
        diffs: diff_counts(&table, fixture)?,
    })
}
