//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string, or an error message the page shows
//! as-is.

use std::collections::BTreeSet;

use fairaudit::compas::{CountsFixture, BLACK, WHITE};
use fairaudit::fairness::{audit_pair, ComparisonMode, FairnessConfig};
use fairaudit::gaming::{simulate, Budget, GamingConfig};
use fairaudit::stereotype::{sample_tokens, DecodeMode, TokenDistribution};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Audits the bundled COMPAS counts, black against white.
#[wasm_bindgen]
pub fn compas_audit(epsilon: f64, four_fifths: f64, ratio_mode: bool) -> Result<String, String> {
    let mode = if ratio_mode {
        ComparisonMode::Ratio
    } else {
        ComparisonMode::AbsoluteDifference
    };
    let config = FairnessConfig::new(epsilon, four_fifths, mode).map_err(err)?;
    let table = CountsFixture::bundled().to_table().map_err(err)?;
    let report = audit_pair(&table, BLACK, WHITE, &config).map_err(err)?;
    serde_json::to_string(&report).map_err(err)
}

/// Runs the gaming simulation. A negative `budget` means unbounded.
#[wasm_bindgen]
pub fn gaming_run(seed: u32, n_agents: u32, budget: f64, max_rounds: u32) -> Result<String, String> {
    let config = GamingConfig {
        n_agents: n_agents as usize,
        budget: if budget < 0.0 {
            Budget::Unbounded
        } else {
            Budget::Limited(budget)
        },
        max_rounds: max_rounds as usize,
        ..GamingConfig::with_seed(seed.into())
    };
    let run = simulate(&config).map_err(err)?;
    let snapshots: Vec<_> = run
        .snapshots
        .iter()
        .map(|s| {
            json!({
                "label": s.label,
                "round": s.round,
                "classifier": s.classifier,
                "points": s.agents.iter().map(|a| {
                    (a.x_immutable, a.x_mutable, a.true_class.is_positive(), a.gamed)
                }).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::to_string(&json!({
        "trace": run.trace,
        "snapshots": snapshots,
    }))
    .map_err(err)
}

/// `tokens` is `name=probability,...`; `mode` is `argmax` or `proportional`.
#[wasm_bindgen]
pub fn decode_tokens(tokens: &str, mode: &str, n: u32, seed: u32) -> Result<String, String> {
    let mut seen = BTreeSet::new();
    let mut parsed = Vec::new();
    for item in tokens.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, p) = item
            .split_once('=')
            .ok_or_else(|| format!("`{item}` is not name=probability"))?;
        let p: f64 = p.trim().parse().map_err(|_| format!("bad probability in `{item}`"))?;
        let name = name.trim().to_owned();
        if !seen.insert(name.clone()) {
            return Err(format!("token `{name}` listed twice"));
        }
        parsed.push((name, p));
    }
    let mode = match mode {
        "argmax" => DecodeMode::Argmax,
        "proportional" => DecodeMode::Proportional,
        other => return Err(format!("unknown mode `{other}`")),
    };
    let dist = TokenDistribution::new(parsed).map_err(err)?;
    let counts = sample_tokens(&dist, mode, n.into(), seed.into()).map_err(err)?;
    let rows: Vec<_> = dist
        .tokens()
        .iter()
        .map(|(t, p)| {
            let c = counts.get(t).copied().unwrap_or(0);
            json!({ "token": t, "probability": p, "count": c, "share": c as f64 / n as f64 })
        })
        .collect();
    serde_json::to_string(&rows).map_err(err)
}
