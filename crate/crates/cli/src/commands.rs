use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use fairaudit::compas::{self, CountsFixture, Section};
use fairaudit::dataset::{load_outcomes_with_report, CompasRecipe, PredictionSource, Schema};
use fairaudit::fairness::{audit_all_pairs, audit_pair, ComparisonMode, FairnessConfig};
use fairaudit::gaming::{self, GamingConfig};
use fairaudit::report::{render_audit_table, render_snapshot_svg, AuditRun, OutputSet};
use fairaudit::stereotype::{
    bias_report, debias_project, gender_direction, load_embeddings, parse_wordlist, sample_tokens, AttributePair,
    DecodeMode, TokenDistribution,
};
use fairaudit::{config::KeyValues, Error};
use serde_json::json;

use crate::{AuditArgs, Decode, DecodeArgs, Failure, GamingArgs, Mode, Recipe, ReproArgs, StereotypeArgs};

type CmdResult = Result<(), Failure>;

/// The invocation with `--out` and its value removed.
fn rerun_line() -> String {
    let mut parts = vec!["fairaudit".to_owned()];
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--out" {
            args.next();
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        parts.push(a);
    }
    parts.push("--out <DIR>".to_owned());
    parts.join(" ")
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn recipe(r: Recipe) -> CompasRecipe {
    match r {
        Recipe::Compas => CompasRecipe::default(),
        Recipe::CompasPropublica => CompasRecipe::propublica(),
    }
}

fn audit_schema(args: &AuditArgs) -> Result<Schema, Error> {
    if let Some(r) = args.recipe {
        return Ok(recipe(r).schema());
    }
    let need = |v: &Option<String>, key: &str| {
        v.clone()
            .ok_or_else(|| Error::config(key, "required unless --recipe is given"))
    };
    let prediction = match (&args.prediction, &args.score) {
        (Some(column), None) => PredictionSource::Label { column: column.clone() },
        (None, Some(column)) => PredictionSource::RawScore {
            column: column.clone(),
            cutoff: args.cutoff,
        },
        _ => {
            return Err(Error::config(
                "prediction",
                "give exactly one of --prediction or --score",
            ))
        }
    };
    let mut schema = Schema::new(&need(&args.truth, "truth")?, prediction, &need(&args.group, "group")?);
    schema.delimiter = args.delimiter;
    schema.weight = args.weight.clone();
    Ok(schema)
}

pub fn audit(args: &AuditArgs) -> CmdResult {
    let mode = match args.mode {
        Mode::Absolute => ComparisonMode::AbsoluteDifference,
        Mode::Ratio => ComparisonMode::Ratio,
    };
    let config = FairnessConfig::new(args.epsilon, args.four_fifths, mode)?;

    let (table, ingest, schema, input) = match (&args.input, &args.counts) {
        (Some(path), None) => {
            let schema = audit_schema(args)?;
            let (table, ingest) = load_outcomes_with_report(path, &schema)?;
            (table, Some(ingest), Some(schema), path)
        }
        (None, Some(path)) => {
            let fixture = CountsFixture::parse(&read_text(path)?)?;
            (fixture.to_table()?, None, None, path)
        }
        _ => return Err(Error::config("input", "give exactly one of --input or --counts").into()),
    };

    let reports = match &args.groups {
        Some(g) if g.len() == 2 => vec![audit_pair(&table, &g[0], &g[1], &config)?],
        Some(_) => return Err(Error::config("groups", "expected exactly two groups `A,B`").into()),
        None => audit_all_pairs(&table, &config)?,
    };

    let mut run = AuditRun::new(
        "audit",
        rerun_line(),
        json!({ "fairness": config, "schema": schema, "groups": args.groups }),
    );
    run.fingerprint_file("input", input)?;
    run.outputs = vec!["report.json".into(), "report.txt".into()];

    let body = to_json(&json!({ "run": run, "ingest": ingest, "reports": reports }))?;
    let mut text = format!(
        "# {}\n# input sha256 {}\n\n",
        run.rerun, run.input_fingerprints["input"]
    );
    for r in &reports {
        text.push_str(&render_audit_table(r));
        text.push('\n');
    }

    let mut out = OutputSet::new();
    out.stage(args.out.join("report.json"), body.as_bytes())?;
    out.stage(args.out.join("report.txt"), text.as_bytes())?;
    out.commit()?;
    print!("{text}");
    Ok(())
}

pub fn compas_repro(args: &ReproArgs) -> CmdResult {
    let fixture = match &args.fixture {
        Some(p) => CountsFixture::parse(&read_text(p)?)?,
        None => CountsFixture::bundled(),
    };
    let replication = compas::replicate(&fixture)?;
    let pipeline = args
        .csv
        .as_ref()
        .map(|p| compas::check_pipeline(p, &recipe(args.recipe), &fixture))
        .transpose()?;

    let (acc_ok, acc_n) = replication.passed(Section::Accuracy);
    let (rate_ok, rate_n) = replication.passed(Section::Rate);
    let (gap_ok, gap_n) = replication.passed(Section::Gap);
    let (ver_ok, ver_n) = replication.passed(Section::Verdict);

    if args.json {
        let doc = json!({
            "fixture_sha256": fixture.checksum,
            "tolerance": compas::PUBLISHED_TOLERANCE,
            "cells": replication.checks,
            "pipeline": pipeline,
            "pass": replication.all_pass() && pipeline.as_ref().is_none_or(|p| p.exact()),
        });
        print!("{}", to_json(&doc)?);
    } else {
        print!("{}", render_audit_table(&replication.report));
        println!();
        for c in replication.checks.iter().filter(|c| !c.pass) {
            println!(
                "MISMATCH {} {}: expected {}, got {}",
                c.panel, c.metric, c.expected, c.observed
            );
        }
        println!("{acc_ok}/{acc_n} metrics matched");
        println!("{rate_ok}/{rate_n} rates matched");
        println!("{gap_ok}/{gap_n} gaps matched");
        println!("{ver_ok}/{ver_n} verdicts matched");
        if let Some(p) = &pipeline {
            println!(
                "pipeline: {} data rows, {} kept, {} count differences",
                p.ingest.data_rows,
                p.ingest.kept_rows,
                p.diffs.len()
            );
            for d in &p.diffs {
                println!(
                    "  diff {} {}: fixture {} csv {}",
                    d.panel, d.cell, d.expected, d.observed
                );
            }
        }
    }

    if !replication.all_pass() {
        let failed = replication.checks.iter().filter(|c| !c.pass).count();
        return Err(Failure::Mismatch(format!("{failed} published figures not reproduced")));
    }
    if let Some(p) = pipeline.filter(|p| !p.exact()) {
        return Err(Failure::Mismatch(format!(
            "{} confusion counts differ between the CSV pipeline and the fixture",
            p.diffs.len()
        )));
    }
    Ok(())
}

pub fn gaming(args: &GamingArgs) -> CmdResult {
    let mut kv = KeyValues::parse(&read_text(&args.config)?)?;
    if let Some(seed) = args.seed {
        kv.set("seed", seed);
    }
    let config = GamingConfig::from_key_values(kv)?;
    let run_data = gaming::simulate(&config)?;
    let trace = &run_data.trace;

    let mut run = AuditRun::new(
        "gaming",
        rerun_line(),
        serde_json::to_value(config).map_err(Error::from)?,
    );
    run.fingerprint_file("config", &args.config)?;
    run.outputs = vec!["trace.csv".into(), "run.json".into()];
    let mut plots = Vec::new();
    if args.plot {
        for (i, snap) in run_data.snapshots.iter().enumerate() {
            let name = format!("panel-{}-{}.svg", i + 1, snap.label.replace(' ', "-"));
            run.outputs.push(name.clone());
            plots.push((name, render_snapshot_svg(snap)));
        }
    }
    let summary = json!({
        "run": run,
        "termination": trace.termination,
        "rounds_played": trace.rounds_played(),
        "initial": trace.first(),
        "final": trace.last(),
    });

    let mut out = OutputSet::new();
    out.stage(args.out.join("trace.csv"), trace.to_csv().as_bytes())?;
    out.stage(args.out.join("run.json"), to_json(&summary)?.as_bytes())?;
    for (name, svg) in &plots {
        out.stage(args.out.join(name), svg.as_bytes())?;
    }
    out.commit()?;

    let (first, last) = (trace.first(), trace.last());
    println!(
        "round 0: training accuracy {:.4}, dominance {:.4}",
        first.training_accuracy,
        first.dominance.unwrap_or(f64::NAN)
    );
    if let Some(r1) = trace.rows.get(1) {
        println!("round 1: post-game acceptance rate {:.4}", r1.acceptance_rate);
    }
    println!(
        "stopped after {} rounds ({:?}): dominance {:.4}",
        trace.rounds_played(),
        trace.termination,
        last.dominance.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn parse_direction_pairs(specs: &[String]) -> Result<Vec<AttributePair>, Error> {
    specs
        .iter()
        .map(|s| {
            s.split_once(':')
                .filter(|(l, r)| !l.is_empty() && !r.is_empty())
                .map(|(l, r)| AttributePair::new(l, r))
                .ok_or_else(|| Error::config("direction-pairs", format!("`{s}` is not `left:right`")))
        })
        .collect()
}

pub fn stereotype(args: &StereotypeArgs) -> CmdResult {
    let pair = match args.pair.as_slice() {
        [l, r] => AttributePair::new(l, r),
        _ => return Err(Error::config("pair", "expected `left,right`").into()),
    };
    let (table, stats) = load_embeddings(&args.embeddings)?;
    let words = parse_wordlist(&read_text(&args.words)?);
    let before = bias_report(&words, &pair, &table)?;

    let mut direction_pairs = parse_direction_pairs(&args.direction_pairs)?;
    if direction_pairs.is_empty() {
        direction_pairs.push(pair.clone());
    }

    let mut run = AuditRun::new(
        "stereotype",
        rerun_line(),
        json!({ "pair": pair, "debias": args.debias, "direction_pairs": direction_pairs }),
    );
    run.fingerprint_file("embeddings", &args.embeddings)?;
    run.fingerprint_file("words", &args.words)?;
    run.outputs = vec!["scores.csv".into(), "report.json".into()];

    let mut out = OutputSet::new();
    let mut summary = format!(
        "{} words scored, {} missing; mean {:.6}, max |score| {} = {:.6}\n",
        before.scores.len(),
        before.missing.len(),
        before.mean,
        before.max_abs.word,
        before.max_abs.score
    );
    let after = if args.debias {
        let direction = gender_direction(&direction_pairs, &table)?;
        let exclude: BTreeSet<String> = direction_pairs
            .iter()
            .chain(std::iter::once(&pair))
            .flat_map(|p| [p.left.clone(), p.right.clone()])
            .collect();
        let debiased = debias_project(&table, &direction, &exclude)?;
        let report = bias_report(&words, &pair, &debiased)?;
        run.outputs.push("scores_debiased.csv".into());
        run.outputs.push("report_debiased.json".into());
        summary.push_str(&format!(
            "after debiasing: mean {:.6}, max |score| {} = {:.6}\n",
            report.mean, report.max_abs.word, report.max_abs.score
        ));
        Some((report, direction))
    } else {
        None
    };

    out.stage(args.out.join("scores.csv"), before.to_csv().as_bytes())?;
    out.stage(
        args.out.join("report.json"),
        to_json(&json!({ "run": run, "load": stats, "report": before }))?.as_bytes(),
    )?;
    if let Some((report, direction)) = &after {
        out.stage(args.out.join("scores_debiased.csv"), report.to_csv().as_bytes())?;
        out.stage(
            args.out.join("report_debiased.json"),
            to_json(&json!({ "run": run, "direction": direction, "report": report }))?.as_bytes(),
        )?;
    }
    out.commit()?;
    print!("{summary}");
    Ok(())
}

pub fn decode(args: &DecodeArgs) -> CmdResult {
    let tokens = args
        .tokens
        .iter()
        .map(|s| {
            let (t, p) = s
                .split_once('=')
                .ok_or_else(|| Error::config("tokens", format!("`{s}` is not `token=probability`")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| Error::config("tokens", format!("bad probability in `{s}`")))?;
            Ok((t.to_owned(), p))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let dist = TokenDistribution::new(tokens)?;
    let (mode, seed) = match args.mode {
        Decode::Argmax => (DecodeMode::Argmax, args.seed.unwrap_or(0)),
        Decode::Proportional => (
            DecodeMode::Proportional,
            args.seed
                .ok_or_else(|| Error::config("seed", "proportional decoding needs --seed"))?,
        ),
    };
    let freq = sample_tokens(&dist, mode, args.n, seed)?;
    println!("token,count,share");
    for (t, c) in &freq {
        println!("{t},{c},{}", *c as f64 / args.n as f64);
    }
    Ok(())
}
