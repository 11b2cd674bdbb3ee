//! Strategic gaming of a disclosed linear classifier.
//!
//! Agents have one immutable and one mutable feature. Once the classifier is
//! disclosed, every agent predicted negative moves its mutable feature by the
//! smallest amount that flips the decision (a counterfactual explanation
//! acted upon). The model is then retrained on the moved features with the
//! original labels, and the cycle repeats. The mutable feature loses its
//! predictive value round after round, until the boundary is carried by the
//! immutable feature alone.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::KeyValues;
use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub x_immutable: f64,
    pub x_mutable: f64,
    pub true_class: Label,
    pub gamed: bool,
}

/// Predicts positive iff `w · x + bias >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub w_immutable: f64,
    pub w_mutable: f64,
    pub bias: f64,
}

impl LinearClassifier {
    pub fn score(&self, x_immutable: f64, x_mutable: f64) -> f64 {
        self.w_immutable * x_immutable + self.w_mutable * x_mutable + self.bias
    }

    pub fn predict(&self, x_immutable: f64, x_mutable: f64) -> Label {
        if self.score(x_immutable, x_mutable) >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn predict_agent(&self, a: &Agent) -> Label {
        self.predict(a.x_immutable, a.x_mutable)
    }

    fn max_abs_diff(&self, other: &LinearClassifier) -> f64 {
        (self.w_immutable - other.w_immutable)
            .abs()
            .max((self.w_mutable - other.w_mutable).abs())
            .max((self.bias - other.bias).abs())
    }
}

/// |w_immutable| / (|w_immutable| + |w_mutable|); `None` if both are zero.
pub fn immutable_dominance(c: &LinearClassifier) -> Option<f64> {
    let (i, m) = (c.w_immutable.abs(), c.w_mutable.abs());
    (i + m > 0.0).then(|| i / (i + m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Unbounded,
    Limited(f64),
}

impl Budget {
    fn parse(s: &str) -> Option<Budget> {
        if s.eq_ignore_ascii_case("unbounded") || s.eq_ignore_ascii_case("inf") {
            return Some(Budget::Unbounded);
        }
        s.parse::<f64>()
            .ok()
            .filter(|b| b.is_finite() && *b >= 0.0)
            .map(Budget::Limited)
    }
}

impl std::fmt::Display for Budget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Budget::Unbounded => f.write_str("unbounded"),
            Budget::Limited(b) => write!(f, "{b}"),
        }
    }
}

/// How the synthetic population is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataRule {
    /// Classes alternate; each class is an isotropic Gaussian centred at
    /// `±(immutable_shift, mutable_shift)` with standard deviation `spread`.
    Blobs {
        immutable_shift: f64,
        mutable_shift: f64,
        spread: f64,
    },
    /// Both features standard normal; class is the sign of
    /// `x_mutable + noise · N(0, 1)`.
    MutableSign { noise: f64 },
}

impl Default for DataRule {
    fn default() -> Self {
        DataRule::Blobs {
            immutable_shift: 1.0,
            mutable_shift: 1.5,
            spread: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            learning_rate: 0.1,
            iterations: 2000,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamingConfig {
    pub n_agents: usize,
    pub seed: u64,
    pub data_rule: DataRule,
    pub budget: Budget,
    /// Overshoot past the boundary, in score units.
    pub margin: f64,
    pub max_rounds: usize,
    pub weight_tolerance: f64,
    pub dominance_threshold: f64,
    pub training: TrainingParams,
}

impl GamingConfig {
    pub fn with_seed(seed: u64) -> Self {
        GamingConfig {
            n_agents: 1000,
            seed,
            data_rule: DataRule::default(),
            budget: Budget::Unbounded,
            margin: 1e-6,
            max_rounds: 100,
            weight_tolerance: 1e-4,
            dominance_threshold: 0.95,
            training: TrainingParams::default(),
        }
    }

    /// Reads a `key = value` config. `seed` is mandatory; every other key
    /// defaults to [`GamingConfig::with_seed`].
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let seed = kv
            .take::<u64>("seed")?
            .ok_or_else(|| Error::config("seed", "required; pass it in the config or with --seed"))?;
        let d = GamingConfig::with_seed(seed);
        let rule_name = kv.take_str("data_rule").unwrap_or_else(|| "blobs".into());
        let data_rule = match rule_name.as_str() {
            "blobs" => {
                let DataRule::Blobs {
                    immutable_shift,
                    mutable_shift,
                    spread,
                } = DataRule::default()
                else {
                    unreachable!()
                };
                DataRule::Blobs {
                    immutable_shift: kv.take_or("immutable_shift", immutable_shift)?,
                    mutable_shift: kv.take_or("mutable_shift", mutable_shift)?,
                    spread: kv.take_or("spread", spread)?,
                }
            }
            "mutable_sign" => DataRule::MutableSign {
                noise: kv.take_or("noise", 0.1)?,
            },
            other => return Err(Error::config("data_rule", format!("unknown rule `{other}`"))),
        };
        let budget = match kv.take_str("budget") {
            None => d.budget,
            Some(s) => Budget::parse(&s).ok_or_else(|| {
                Error::config(
                    "budget",
                    format!("`{s}` is neither `unbounded` nor a finite value >= 0"),
                )
            })?,
        };
        let cfg = GamingConfig {
            n_agents: kv.take_or("n_agents", d.n_agents)?,
            seed,
            data_rule,
            budget,
            margin: kv.take_or("margin", d.margin)?,
            max_rounds: kv.take_or("max_rounds", d.max_rounds)?,
            weight_tolerance: kv.take_or("weight_tolerance", d.weight_tolerance)?,
            dominance_threshold: kv.take_or("dominance_threshold", d.dominance_threshold)?,
            training: TrainingParams {
                learning_rate: kv.take_or("learning_rate", d.training.learning_rate)?,
                iterations: kv.take_or("iterations", d.training.iterations)?,
                l2: kv.take_or("l2", d.training.l2)?,
            },
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(KeyValues::parse(text)?)
    }

    /// Canonical `key = value` rendering; parses back to the same config.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_agents", self.n_agents.to_string());
        kv("seed", self.seed.to_string());
        match self.data_rule {
            DataRule::Blobs {
                immutable_shift,
                mutable_shift,
                spread,
            } => {
                kv("data_rule", "blobs".into());
                kv("immutable_shift", immutable_shift.to_string());
                kv("mutable_shift", mutable_shift.to_string());
                kv("spread", spread.to_string());
            }
            DataRule::MutableSign { noise } => {
                kv("data_rule", "mutable_sign".into());
                kv("noise", noise.to_string());
            }
        }
        kv("budget", self.budget.to_string());
        kv("margin", self.margin.to_string());
        kv("max_rounds", self.max_rounds.to_string());
        kv("weight_tolerance", self.weight_tolerance.to_string());
        kv("dominance_threshold", self.dominance_threshold.to_string());
        kv("learning_rate", self.training.learning_rate.to_string());
        kv("iterations", self.training.iterations.to_string());
        kv("l2", self.training.l2.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must be finite and >= 0")))
            }
        };
        if self.n_agents < 2 {
            return Err(Error::config("n_agents", "need at least 2 agents"));
        }
        if self.max_rounds == 0 {
            return Err(Error::config("max_rounds", "must be positive"));
        }
        if self.training.iterations == 0 {
            return Err(Error::config("iterations", "must be positive"));
        }
        if !(self.training.learning_rate.is_finite() && self.training.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be finite and > 0"));
        }
        finite_nonneg("margin", self.margin)?;
        finite_nonneg("weight_tolerance", self.weight_tolerance)?;
        finite_nonneg("l2", self.training.l2)?;
        if !(0.0..=1.0).contains(&self.dominance_threshold) {
            return Err(Error::config("dominance_threshold", "must lie in [0, 1]"));
        }
        match self.data_rule {
            DataRule::Blobs {
                immutable_shift,
                mutable_shift,
                spread,
            } => {
                finite_nonneg("spread", spread)?;
                if !(immutable_shift.is_finite() && mutable_shift.is_finite()) {
                    return Err(Error::config("immutable_shift", "class shifts must be finite"));
                }
            }
            DataRule::MutableSign { noise } => finite_nonneg("noise", noise)?,
        }
        Ok(())
    }
}

pub fn generate_population(config: &GamingConfig) -> Result<Vec<Agent>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut agents = Vec::with_capacity(config.n_agents);
    for i in 0..config.n_agents {
        let agent = match config.data_rule {
            DataRule::Blobs {
                immutable_shift,
                mutable_shift,
                spread,
            } => {
                let (class, sign) = if i % 2 == 0 {
                    (Label::Positive, 1.0)
                } else {
                    (Label::Negative, -1.0)
                };
                Agent {
                    x_immutable: sign * immutable_shift + spread * std_normal.sample(&mut rng),
                    x_mutable: sign * mutable_shift + spread * std_normal.sample(&mut rng),
                    true_class: class,
                    gamed: false,
                }
            }
            DataRule::MutableSign { noise } => {
                let x_immutable: f64 = std_normal.sample(&mut rng);
                let x_mutable: f64 = std_normal.sample(&mut rng);
                let latent = x_mutable + noise * std_normal.sample(&mut rng);
                // Breaks exact zeros without touching the sign elsewhere.
                let latent = if latent == 0.0 {
                    rng.random::<f64>() - 0.5
                } else {
                    latent
                };
                Agent {
                    x_immutable,
                    x_mutable,
                    true_class: if latent > 0.0 { Label::Positive } else { Label::Negative },
                    gamed: false,
                }
            }
        };
        agents.push(agent);
    }
    let positives = agents.iter().filter(|a| a.true_class.is_positive()).count();
    if positives == 0 || positives == agents.len() {
        return Err(Error::Generation(format!(
            "data rule produced a single class over {} agents",
            agents.len()
        )));
    }
    Ok(agents)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression by deterministic full-batch gradient descent on the
/// mean log-loss, starting from zero weights.
pub fn train_classifier(agents: &[Agent], params: &TrainingParams) -> Result<LinearClassifier> {
    let positives = agents.iter().filter(|a| a.true_class.is_positive()).count();
    if positives == 0 || positives == agents.len() {
        return Err(Error::Training("both classes must be present".into()));
    }
    let n = agents.len() as f64;
    let mut w = [0.0f64; 3];
    for _ in 0..params.iterations {
        let mut g = [0.0f64; 3];
        for a in agents {
            let z = w[0] * a.x_immutable + w[1] * a.x_mutable + w[2];
            let y = if a.true_class.is_positive() { 1.0 } else { 0.0 };
            let r = sigmoid(z) - y;
            g[0] += r * a.x_immutable;
            g[1] += r * a.x_mutable;
            g[2] += r;
        }
        w[0] -= params.learning_rate * (g[0] / n + params.l2 * w[0]);
        w[1] -= params.learning_rate * (g[1] / n + params.l2 * w[1]);
        w[2] -= params.learning_rate * (g[2] / n);
    }
    let clf = LinearClassifier {
        w_immutable: w[0],
        w_mutable: w[1],
        bias: w[2],
    };
    if clf.w_immutable == 0.0 && clf.w_mutable == 0.0 {
        return Err(Error::Training("training left both weights at zero".into()));
    }
    Ok(clf)
}

pub fn accuracy(clf: &LinearClassifier, agents: &[Agent]) -> f64 {
    let hits = agents.iter().filter(|a| clf.predict_agent(a) == a.true_class).count();
    hits as f64 / agents.len() as f64
}

pub fn acceptance_rate(clf: &LinearClassifier, agents: &[Agent]) -> f64 {
    let accepted = agents.iter().filter(|a| clf.predict_agent(a).is_positive()).count();
    accepted as f64 / agents.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MoveOutcome {
    /// Already accepted; nothing to do.
    AlreadyPositive,
    /// The mutable weight is zero, so no mutable move can change the score.
    Powerless,
    /// Minimal flip applied.
    Flipped { x_mutable: f64, displacement: f64 },
    /// The budget was smaller than the flip distance; moved by the full
    /// budget without flipping.
    CapBound { x_mutable: f64, displacement: f64 },
}

impl MoveOutcome {
    pub fn flagged(&self) -> bool {
        matches!(self, MoveOutcome::Powerless | MoveOutcome::CapBound { .. })
    }
}

/// Analytic flip distance along the mutable axis: `(|score| + margin) / |w_mutable|`.
pub fn flip_distance(score: f64, w_mutable: f64, margin: f64) -> f64 {
    (score.abs() + margin) / w_mutable.abs()
}

/// The smallest mutable-feature change (plus `margin` in score units) that
/// makes `clf` accept `agent`, capped at `budget`.
pub fn counterfactual_move(agent: &Agent, clf: &LinearClassifier, budget: Budget, margin: f64) -> MoveOutcome {
    let score = clf.score(agent.x_immutable, agent.x_mutable);
    if score >= 0.0 {
        return MoveOutcome::AlreadyPositive;
    }
    if clf.w_mutable == 0.0 {
        return MoveOutcome::Powerless;
    }
    let direction = clf.w_mutable.signum();
    let distance = flip_distance(score, clf.w_mutable, margin);
    if let Budget::Limited(cap) = budget {
        if distance > cap {
            return MoveOutcome::CapBound {
                x_mutable: agent.x_mutable + direction * cap,
                displacement: cap,
            };
        }
    }
    let mut x = agent.x_mutable + direction * distance;
    // Rounding can leave the score a hair below zero; step to the next
    // representable value until the boundary is crossed.
    while clf.score(agent.x_immutable, x) < 0.0 {
        x = if direction > 0.0 { x.next_up() } else { x.next_down() };
    }
    MoveOutcome::Flipped {
        x_mutable: x,
        displacement: (x - agent.x_mutable).abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Classifier trained at the end of this round.
    pub classifier: LinearClassifier,
    pub dominance: Option<f64>,
    /// Accuracy of this round's classifier on the features it was trained on.
    pub training_accuracy: f64,
    /// Share accepted by the disclosed classifier after agents moved. For
    /// round 0 (no disclosure yet) this is the initial classifier's rate.
    pub acceptance_rate: f64,
    /// Accuracy of the disclosed classifier after agents moved.
    pub accuracy: f64,
    pub moved: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    WeightConverged,
    DominanceReached,
    MaxRounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamingTrace {
    pub rows: Vec<RoundRecord>,
    pub termination: Termination,
}

pub const TRACE_CSV_HEADER: &str =
    "round,w_immutable,w_mutable,bias,dominance,training_accuracy,acceptance_rate,accuracy,moved,flagged";

impl GamingTrace {
    pub fn first(&self) -> &RoundRecord {
        &self.rows[0]
    }

    pub fn last(&self) -> &RoundRecord {
        self.rows.last().expect("trace has round 0")
    }

    /// Number of gaming rounds played (round 0 is the undisclosed baseline).
    pub fn rounds_played(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let dominance = r.dominance.map_or_else(String::new, |d| d.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.round,
                r.classifier.w_immutable,
                r.classifier.w_mutable,
                r.classifier.bias,
                dominance,
                r.training_accuracy,
                r.acceptance_rate,
                r.accuracy,
                r.moved,
                r.flagged
            );
        }
        out
    }
}

/// Agent positions together with the classifier they face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub label: String,
    pub round: usize,
    pub classifier: LinearClassifier,
    pub agents: Vec<Agent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamingRun {
    pub trace: GamingTrace,
    /// Initial population, population after the first game, and final state.
    pub snapshots: Vec<Snapshot>,
}

/// Applies one game against `clf`; returns (moved, flagged).
pub fn play_round(agents: &mut [Agent], clf: &LinearClassifier, budget: Budget, margin: f64) -> (usize, usize) {
    let (mut moved, mut flagged) = (0, 0);
    for a in agents.iter_mut() {
        let outcome = counterfactual_move(a, clf, budget, margin);
        if outcome.flagged() {
            flagged += 1;
        }
        match outcome {
            MoveOutcome::Flipped {
                x_mutable,
                displacement,
            }
            | MoveOutcome::CapBound {
                x_mutable,
                displacement,
            } if displacement > 0.0 => {
                a.x_mutable = x_mutable;
                a.gamed = true;
                moved += 1;
            }
            _ => {}
        }
    }
    (moved, flagged)
}

pub fn run_gaming_rounds(config: &GamingConfig) -> Result<GamingTrace> {
    simulate(config).map(|r| r.trace)
}

/// Train, disclose, game, retrain; repeated until the weights settle, the
/// immutable feature dominates, or `max_rounds` games have been played.
pub fn simulate(config: &GamingConfig) -> Result<GamingRun> {
    let mut agents = generate_population(config)?;
    let mut clf = train_classifier(&agents, &config.training)?;
    let train_acc = accuracy(&clf, &agents);
    let mut rows = vec![RoundRecord {
        round: 0,
        classifier: clf,
        dominance: immutable_dominance(&clf),
        training_accuracy: train_acc,
        acceptance_rate: acceptance_rate(&clf, &agents),
        accuracy: train_acc,
        moved: 0,
        flagged: 0,
    }];
    let mut snapshots = vec![Snapshot {
        label: "initial".into(),
        round: 0,
        classifier: clf,
        agents: agents.clone(),
    }];

    let mut termination = Termination::MaxRounds;
    for round in 1..=config.max_rounds {
        let disclosed = clf;
        let (moved, flagged) = play_round(&mut agents, &disclosed, config.budget, config.margin);
        let accepted = acceptance_rate(&disclosed, &agents);
        let post_acc = accuracy(&disclosed, &agents);
        if round == 1 {
            snapshots.push(Snapshot {
                label: "after first game".into(),
                round,
                classifier: disclosed,
                agents: agents.clone(),
            });
        }
        clf = train_classifier(&agents, &config.training)?;
        let dominance = immutable_dominance(&clf);
        rows.push(RoundRecord {
            round,
            classifier: clf,
            dominance,
            training_accuracy: accuracy(&clf, &agents),
            acceptance_rate: accepted,
            accuracy: post_acc,
            moved,
            flagged,
        });
        if clf.max_abs_diff(&disclosed) < config.weight_tolerance {
            termination = Termination::WeightConverged;
            break;
        }
        if dominance.is_some_and(|d| d >= config.dominance_threshold) {
            termination = Termination::DominanceReached;
            break;
        }
    }
    snapshots.push(Snapshot {
        label: "final".into(),
        round: rows.len() - 1,
        classifier: clf,
        agents,
    });
    Ok(GamingRun {
        trace: GamingTrace { rows, termination },
        snapshots,
    })
}
