//! Ingestion of classifier outcomes: one row per decision, carrying the
//! ground-truth label, the binary prediction and the protected-group value.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    /// Accepts the usual spellings of a binary outcome, case-insensitively.
    pub fn parse(token: &str) -> Option<Label> {
        match token.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "y" | "positive" | "pos" | "+" | "high" => Some(Label::Positive),
            "0" | "false" | "no" | "n" | "negative" | "neg" | "-" | "low" => Some(Label::Negative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub truth: Label,
    pub prediction: Label,
    pub group: String,
    pub weight: f64,
}

impl OutcomeRecord {
    pub fn new(truth: Label, prediction: Label, group: impl Into<String>) -> Self {
        OutcomeRecord {
            truth,
            prediction,
            group: group.into(),
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Where the binary prediction comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PredictionSource {
    /// A column already holding a binary label.
    Label { column: String },
    /// An integer risk score in 1..=10, positive iff `score >= cutoff`.
    RawScore { column: String, cutoff: i64 },
}

impl PredictionSource {
    fn column(&self) -> &str {
        match self {
            PredictionSource::Label { column } | PredictionSource::RawScore { column, .. } => column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RowFilter {
    /// Keep rows whose integer value lies in `[min, max]`. Blank cells are rejected.
    IntRange { column: String, min: i64, max: i64 },
    /// Drop rows whose value is one of `values`.
    Exclude { column: String, values: BTreeSet<String> },
}

impl RowFilter {
    fn column(&self) -> &str {
        match self {
            RowFilter::IntRange { column, .. } | RowFilter::Exclude { column, .. } => column,
        }
    }

    fn describe(&self) -> String {
        match self {
            RowFilter::IntRange { column, min, max } => format!("{column} in [{min}, {max}]"),
            RowFilter::Exclude { column, values } => {
                let v: Vec<&str> = values.iter().map(String::as_str).collect();
                format!("{column} not in {{{}}}", v.join(", "))
            }
        }
    }

    fn keeps(&self, cell: &str) -> bool {
        match self {
            RowFilter::IntRange { min, max, .. } => match cell.trim().parse::<i64>() {
                Ok(v) => (*min..=*max).contains(&v),
                Err(_) => false,
            },
            RowFilter::Exclude { values, .. } => !values.contains(cell.trim()),
        }
    }
}

/// Column mapping used at ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub delimiter: char,
    pub truth: String,
    pub prediction: PredictionSource,
    pub group: String,
    #[serde(default)]
    pub weight: Option<String>,
    /// Raw group value -> reported group name.
    #[serde(default)]
    pub group_aliases: BTreeMap<String, String>,
    #[serde(default)]
    pub filters: Vec<RowFilter>,
}

impl Schema {
    pub fn new(truth: &str, prediction: PredictionSource, group: &str) -> Self {
        Schema {
            delimiter: ',',
            truth: truth.to_owned(),
            prediction,
            group: group.to_owned(),
            weight: None,
            group_aliases: BTreeMap::new(),
            filters: Vec::new(),
        }
    }
}

/// Preparation of the ProPublica two-year COMPAS extract.
///
/// The default recipe keeps every row and thresholds `decile_score` at 5,
/// which reproduces the published per-race confusion counts exactly.
/// [`CompasRecipe::propublica`] applies ProPublica's own screening-window
/// and score-text filters instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompasRecipe {
    pub score_cutoff: i64,
    pub screening_window_days: Option<(i64, i64)>,
    pub excluded_score_texts: BTreeSet<String>,
    pub recidivism_horizon: String,
    pub score_column: String,
    pub race_column: String,
    pub screening_column: String,
    pub score_text_column: String,
    pub race_aliases: BTreeMap<String, String>,
}

impl Default for CompasRecipe {
    fn default() -> Self {
        let race_aliases = [("African-American", "black"), ("Caucasian", "white")]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect();
        CompasRecipe {
            score_cutoff: 5,
            screening_window_days: None,
            excluded_score_texts: BTreeSet::new(),
            recidivism_horizon: "two_year_recid".to_owned(),
            score_column: "decile_score".to_owned(),
            race_column: "race".to_owned(),
            screening_column: "days_b_screening_arrest".to_owned(),
            score_text_column: "score_text".to_owned(),
            race_aliases,
        }
    }
}

impl CompasRecipe {
    pub fn propublica() -> Self {
        CompasRecipe {
            screening_window_days: Some((-30, 30)),
            excluded_score_texts: ["N/A".to_owned()].into_iter().collect(),
            ..CompasRecipe::default()
        }
    }

    pub fn schema(&self) -> Schema {
        let mut filters = Vec::new();
        if let Some((min, max)) = self.screening_window_days {
            filters.push(RowFilter::IntRange {
                column: self.screening_column.clone(),
                min,
                max,
            });
        }
        if !self.excluded_score_texts.is_empty() {
            filters.push(RowFilter::Exclude {
                column: self.score_text_column.clone(),
                values: self.excluded_score_texts.clone(),
            });
        }
        Schema {
            delimiter: ',',
            truth: self.recidivism_horizon.clone(),
            prediction: PredictionSource::RawScore {
                column: self.score_column.clone(),
                cutoff: self.score_cutoff,
            },
            group: self.race_column.clone(),
            weight: None,
            group_aliases: self.race_aliases.clone(),
            filters,
        }
    }
}

/// Positive iff `raw >= cutoff`; `raw` must be a valid decile in 1..=10.
pub fn binarize_score(raw: i64, cutoff: i64) -> Result<Label> {
    if !(1..=10).contains(&raw) {
        return Err(Error::Domain(format!("score {raw} outside 1..=10")));
    }
    Ok(if raw >= cutoff {
        Label::Positive
    } else {
        Label::Negative
    })
}

/// Immutable collection of outcome records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    records: Vec<OutcomeRecord>,
    groups: BTreeSet<String>,
    schema: Option<Schema>,
}

impl OutcomeTable {
    /// Builds a table whose group domain is the set of observed groups.
    pub fn new(records: Vec<OutcomeRecord>) -> Result<Self> {
        let groups = records.iter().map(|r| r.group.clone()).collect();
        Self::with_domain(records, groups)
    }

    pub fn with_domain(records: Vec<OutcomeRecord>, groups: BTreeSet<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset("no outcome records".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if !(r.weight.is_finite() && r.weight > 0.0) {
                return Err(Error::Domain(format!(
                    "record {i}: weight {} must be positive and finite",
                    r.weight
                )));
            }
            if !groups.contains(&r.group) {
                return Err(Error::Domain(format!(
                    "record {i}: group `{}` not in declared domain",
                    r.group
                )));
            }
        }
        Ok(OutcomeTable {
            records,
            groups,
            schema: None,
        })
    }

    pub fn records(&self) -> &[OutcomeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn groups(&self) -> &BTreeSet<String> {
        &self.groups
    }

    pub fn schema(&self) -> Option<&Schema> {
        self.schema.as_ref()
    }

    pub fn total_weight(&self) -> f64 {
        self.records.iter().map(|r| r.weight).sum()
    }

    /// Records belonging to any of `groups`, in original order.
    pub fn restrict_to(&self, groups: &[&str]) -> Result<OutcomeTable> {
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| groups.contains(&r.group.as_str()))
            .cloned()
            .collect();
        if records.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "no records for groups {}",
                groups.join(", ")
            )));
        }
        let mut t = OutcomeTable::new(records)?;
        t.schema = self.schema.clone();
        Ok(t)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("outcome table serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Splits a table by group value. Partitions are disjoint and their union is
/// the input.
pub fn partition_by_group(table: &OutcomeTable) -> BTreeMap<String, OutcomeTable> {
    let mut parts: BTreeMap<String, Vec<OutcomeRecord>> = BTreeMap::new();
    for r in table.records() {
        parts.entry(r.group.clone()).or_default().push(r.clone());
    }
    parts
        .into_iter()
        .map(|(g, records)| {
            let mut t = OutcomeTable::new(records).expect("non-empty partition of a valid table");
            t.schema = table.schema.clone();
            (g, t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub data_rows: usize,
    pub kept_rows: usize,
    /// Filter description -> number of rows it rejected (first failing filter wins).
    pub rejected: BTreeMap<String, usize>,
}

pub fn load_outcomes(path: impl AsRef<Path>, schema: &Schema) -> Result<OutcomeTable> {
    load_outcomes_with_report(path, schema).map(|(t, _)| t)
}

pub fn load_outcomes_with_report(path: impl AsRef<Path>, schema: &Schema) -> Result<(OutcomeTable, IngestReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_outcomes(file, schema)
}

fn column_index(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            column: name.to_owned(),
        })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<input>", io),
        other => Error::Row {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Parses delimiter-separated text with a header row.
pub fn read_outcomes<R: Read>(reader: R, schema: &Schema) -> Result<(OutcomeTable, IngestReport)> {
    if !schema.delimiter.is_ascii() {
        return Err(Error::config("delimiter", "must be a single ASCII character"));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();

    let truth_ix = column_index(&header, &schema.truth)?;
    let pred_ix = column_index(&header, schema.prediction.column())?;
    let group_ix = column_index(&header, &schema.group)?;
    let weight_ix = schema.weight.as_deref().map(|w| column_index(&header, w)).transpose()?;
    let filters = schema
        .filters
        .iter()
        .map(|f| Ok((column_index(&header, f.column())?, f)))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut report = IngestReport {
        data_rows: 0,
        kept_rows: 0,
        rejected: BTreeMap::new(),
    };
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        report.data_rows += 1;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = |ix: usize| row.get(ix).unwrap_or("");

        if let Some((_, f)) = filters.iter().find(|(ix, f)| !f.keeps(cell(*ix))) {
            *report.rejected.entry(f.describe()).or_default() += 1;
            continue;
        }

        let row_err = |message: String| Error::Row { line, message };
        let truth = Label::parse(cell(truth_ix)).ok_or_else(|| {
            row_err(format!(
                "column `{}`: cannot parse `{}` as a binary label",
                schema.truth,
                cell(truth_ix)
            ))
        })?;
        let prediction = match &schema.prediction {
            PredictionSource::Label { column } => Label::parse(cell(pred_ix)).ok_or_else(|| {
                row_err(format!(
                    "column `{column}`: cannot parse `{}` as a binary label",
                    cell(pred_ix)
                ))
            })?,
            PredictionSource::RawScore { column, cutoff } => {
                let raw: i64 = cell(pred_ix).trim().parse().map_err(|_| {
                    row_err(format!(
                        "column `{column}`: cannot parse `{}` as an integer score",
                        cell(pred_ix)
                    ))
                })?;
                binarize_score(raw, *cutoff).map_err(|e| row_err(e.to_string()))?
            }
        };
        let raw_group = cell(group_ix).trim();
        if raw_group.is_empty() {
            return Err(row_err(format!("column `{}`: empty group value", schema.group)));
        }
        let group = schema
            .group_aliases
            .get(raw_group)
            .cloned()
            .unwrap_or_else(|| raw_group.to_owned());
        let weight = match weight_ix {
            Some(ix) => {
                let w: f64 = cell(ix)
                    .trim()
                    .parse()
                    .map_err(|_| row_err(format!("cannot parse weight `{}`", cell(ix))))?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(row_err(format!("weight {w} must be positive")));
                }
                w
            }
            None => 1.0,
        };
        records.push(OutcomeRecord {
            truth,
            prediction,
            group,
            weight,
        });
    }
    report.kept_rows = records.len();
    if records.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} data rows, none retained",
            report.data_rows
        )));
    }
    let mut table = OutcomeTable::new(records)?;
    table.schema = Some(schema.clone());
    Ok((table, report))
}
