//! Report plumbing: run provenance headers, all-or-nothing output writing,
//! the three-panel text rendering of an audit, and SVG scatter plots for the
//! gaming simulation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::fairness::{FairnessReport, FourFifths, Gap};
use crate::gaming::Snapshot;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance header embedded in every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRun {
    pub command: String,
    /// Command line that regenerates the outputs (output directory elided).
    pub rerun: String,
    pub config: serde_json::Value,
    pub input_fingerprints: BTreeMap<String, String>,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

impl AuditRun {
    pub fn new(command: &str, rerun: String, config: serde_json::Value) -> Self {
        AuditRun {
            command: command.to_owned(),
            rerun,
            config,
            input_fingerprints: BTreeMap::new(),
            tool_version: TOOL_VERSION.to_owned(),
            outputs: Vec::new(),
        }
    }

    pub fn fingerprint_file(&mut self, label: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.input_fingerprints.insert(label.to_owned(), sha256_hex(&bytes));
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files are staged in temporaries inside their target directory and only
/// renamed into place by [`OutputSet::commit`]. Dropping an uncommitted set
/// leaves the target directory untouched.
#[derive(Debug, Default)]
pub struct OutputSet {
    staged: Vec<(PathBuf, NamedTempFile)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(&mut self, path: impl Into<PathBuf>, contents: &[u8]) -> Result<()> {
        use std::io::Write;
        let path = path.into();
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(contents).map_err(|e| Error::io(&path, e))?;
        tmp.flush().map_err(|e| Error::io(&path, e))?;
        self.staged.push((path, tmp));
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.staged.iter().map(|(p, _)| p.as_path())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (path, tmp) in self.staged {
            tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "   n/a".to_owned(), |x| format!("{x:.4}"))
}

fn fmt_gap(g: Option<Gap>) -> String {
    match g {
        Some(g) => format!("{:.4} - {:.4} = {:.4}", g.first, g.second, g.signed),
        None => "not evaluable".to_owned(),
    }
}

/// Renders confusion matrices, accuracy metrics and fairness determinations
/// side by side for the whole table and the two compared groups.
pub fn render_audit_table(report: &FairnessReport) -> String {
    let mut s = String::new();
    let (a, b) = (&report.group_pair.0, &report.group_pair.1);
    let eps = report.config.epsilon;

    let _ = writeln!(s, "Confusion matrices");
    let _ = writeln!(s);
    let mut head = String::new();
    let mut sub = String::new();
    let mut pos = String::new();
    let mut neg = String::new();
    for p in &report.panels {
        let _ = write!(head, "{:<30}", format!("{} (n = {})", p.group, p.total_weight));
        let _ = write!(sub, "{:<14}{:>8}{:>8}  ", "", "High", "Low");
        let _ = write!(pos, "{:<14}{:>8}{:>8}  ", "Positive", p.confusion.tp, p.confusion.fn_);
        let _ = write!(neg, "{:<14}{:>8}{:>8}  ", "Negative", p.confusion.fp, p.confusion.tn);
    }
    for line in [head, sub, pos, neg] {
        let _ = writeln!(s, "{}", line.trim_end());
    }

    let _ = writeln!(s);
    let _ = writeln!(s, "Accuracy metrics");
    let _ = writeln!(s);
    let _ = write!(s, "{:<22}", "");
    for p in &report.panels {
        let _ = write!(s, "{:>12}", p.group);
    }
    let _ = writeln!(s);
    let rows = report.panels[0].metrics.entries().map(|(k, _)| k);
    for (i, key) in rows.iter().enumerate() {
        let _ = write!(s, "{key:<22}");
        for p in &report.panels {
            let _ = write!(s, "{:>12}", fmt_rate(p.metrics.entries()[i].1));
        }
        let _ = writeln!(s);
    }

    let _ = writeln!(s);
    let _ = writeln!(s, "Fairness determinations ({a} vs {b}, epsilon = {eps})");
    let _ = writeln!(s);
    let v = &report.verdicts;
    let _ = writeln!(s, "(i) Independence: {}", v.independence.yes_no());
    let _ = writeln!(
        s,
        "    P(pred=+|{a}) - P(pred=+|{b}) = {}",
        fmt_gap(report.independence_gap)
    );
    let _ = writeln!(s, "(ii) Separation: {}", v.separation.yes_no());
    let _ = writeln!(s, "    sensitivity: {}", fmt_gap(report.separation_gaps.positive));
    let _ = writeln!(s, "    fp rate:     {}", fmt_gap(report.separation_gaps.negative));
    let _ = writeln!(s, "(iii) Sufficiency: {}", v.sufficiency.yes_no());
    let _ = writeln!(s, "    precision:   {}", fmt_gap(report.sufficiency_gaps.positive));
    let _ = writeln!(s, "    1 - npv:     {}", fmt_gap(report.sufficiency_gaps.negative));

    let _ = writeln!(s);
    let ff = match report.four_fifths {
        FourFifths::AdverseImpactEvidence => "adverse-impact evidence",
        FourFifths::NoEvidence => "no evidence",
        FourFifths::NotEvaluable => "not evaluable",
    };
    let _ = writeln!(
        s,
        "Four-fifths test (threshold {}): {ff}, impact ratio {}",
        report.config.four_fifths_threshold,
        fmt_rate(report.impact_ratio)
    );
    let inc = &report.incompatibility;
    if let Some(reason) = &inc.suppressed {
        let _ = writeln!(s, "Incompatibility advisories suppressed: {reason}");
    } else {
        for adv in &inc.advisories {
            let _ = writeln!(s, "Advisory: {} ({})", adv.message, adv.precondition);
        }
    }
    s
}

/// Scatter of agents (immutable on x, mutable on y) with the decision
/// boundary drawn across the plot.
pub fn render_snapshot_svg(snap: &Snapshot) -> String {
    const W: f64 = 480.0;
    const H: f64 = 480.0;
    const PAD: f64 = 40.0;
    let xs = snap.agents.iter().map(|a| a.x_immutable);
    let ys = snap.agents.iter().map(|a| a.x_mutable);
    let (xmin, xmax) = bounds(xs);
    let (ymin, ymax) = bounds(ys);
    let sx = |x: f64| PAD + (x - xmin) / (xmax - xmin) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ymin) / (ymax - ymin) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{} (round {})</text>"#,
        snap.label, snap.round
    );
    for a in &snap.agents {
        let colour = if a.true_class.is_positive() {
            "#1f77b4"
        } else {
            "#d62728"
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{colour}" fill-opacity="0.6"/>"#,
            sx(a.x_immutable),
            sy(a.x_mutable)
        );
    }
    let c = &snap.classifier;
    if let Some(((x0, y0), (x1, y1))) = boundary_segment(c.w_immutable, c.w_mutable, c.bias, (xmin, xmax), (ymin, ymax))
    {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#,
            sx(x0),
            sy(y0),
            sx(x1),
            sy(y1)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">x_immutable</text>"#,
        W / 2.0 - 30.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 12 {})">x_mutable</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || hi - lo < 1e-9 {
        return (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Intersection of the line `wi·x + wm·y + b = 0` with the plot box.
pub fn boundary_segment(
    wi: f64,
    wm: f64,
    b: f64,
    (xmin, xmax): (f64, f64),
    (ymin, ymax): (f64, f64),
) -> Option<((f64, f64), (f64, f64))> {
    let mut pts = Vec::new();
    if wm != 0.0 {
        for x in [xmin, xmax] {
            let y = -(wi * x + b) / wm;
            if (ymin..=ymax).contains(&y) {
                pts.push((x, y));
            }
        }
    }
    if wi != 0.0 {
        for y in [ymin, ymax] {
            let x = -(wm * y + b) / wi;
            if (xmin..=xmax).contains(&x) {
                pts.push((x, y));
            }
        }
    }
    pts.dedup();
    (pts.len() >= 2).then(|| (pts[0], pts[1]))
}
