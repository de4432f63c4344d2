//! End-to-end policy trials and Monte-Carlo sweeps.
//!
//! A trial at coverage `s` gives every question `r = round(s·n)` labels. The
//! random policy spends them all at once; the two-stage policies spend
//! `stage1 = clamp(floor(stage1_fraction·r), 1, r)` at random, estimate
//! reliabilities with EM, and allocate the remaining `m·(r − stage1)` labels
//! either in one shot or in dynamic rounds.
//!
//! Every trial owns its seed, derived from `(master_seed, policy, point,
//! trial)` by [`derive_seed`], so results do not depend on execution order.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::allocator::{
    dynamic_allocate, one_shot_allocate, random_assignment, PolicyOptions, ResponseOracle,
};
use crate::error::{Error, Result};
use crate::estimator::{run_em, EmOptions};
use crate::model::{
    error_rate, sample_instance, sample_response, AnswerMatrix, GroundTruth, InstanceConfig, Label,
};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    Random,
    OneShot,
    Dynamic,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Random, Policy::OneShot, Policy::Dynamic];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::OneShot => "one_shot",
            Policy::Dynamic => "dynamic",
        }
    }

    pub fn id(self) -> u64 {
        match self {
            Policy::Random => 0,
            Policy::OneShot => 1,
            Policy::Dynamic => 2,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Policy::Random),
            "one_shot" | "one-shot" | "oneshot" => Ok(Policy::OneShot),
            "dynamic" => Ok(Policy::Dynamic),
            other => Err(Error::InvalidConfig(format!("unknown policy {other:?}"))),
        }
    }
}

/// Where a trial sits in a sweep: a coverage fraction or a question count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepPoint {
    Coverage(f64),
    Questions(usize),
}

impl SweepPoint {
    pub fn as_f64(self) -> f64 {
        match self {
            SweepPoint::Coverage(s) => s,
            SweepPoint::Questions(m) => m as f64,
        }
    }
}

impl fmt::Display for SweepPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepPoint::Coverage(s) => write!(f, "{s}"),
            SweepPoint::Questions(m) => write!(f, "{m}"),
        }
    }
}

/// Everything a single trial needs besides its policy, coverage and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialConfig<T> {
    pub instance: InstanceConfig,
    pub em: EmOptions<T>,
    pub policy: PolicyOptions<T>,
}

impl<T: Real> Default for TrialConfig<T> {
    fn default() -> Self {
        TrialConfig {
            instance: InstanceConfig::default(),
            em: EmOptions::default(),
            policy: PolicyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub policy: Policy,
    pub sweep_point: SweepPoint,
    pub trial: usize,
    pub final_error: f64,
    /// Error after each dynamic round; empty for other policies.
    pub per_round_errors: Vec<f64>,
    pub labels_used: usize,
}

/// Labels per question at coverage `s`.
pub fn labels_per_question(coverage: f64, n_users: usize) -> usize {
    (coverage * n_users as f64).round() as usize
}

/// First-stage labels per question for the two-stage policies.
pub fn stage1_labels(r: usize, fraction: f64) -> usize {
    ((fraction * r as f64).floor() as usize).clamp(1, r.max(1))
}

/// Answers queries by sampling from a ground-truth instance.
pub struct SimulatedCrowd<'a, T> {
    truth: &'a GroundTruth<T>,
    rng: ChaCha8Rng,
}

impl<'a, T: Real> SimulatedCrowd<'a, T> {
    pub fn new(truth: &'a GroundTruth<T>, seed: u64) -> Self {
        SimulatedCrowd {
            truth,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl<T: Real> ResponseOracle for SimulatedCrowd<'_, T> {
    fn respond(&mut self, user: usize, question: usize) -> Label {
        sample_response(self.truth, user, question, &mut self.rng)
    }
}

/// Runs one policy on a freshly sampled instance.
pub fn run_policy_trial<T: Real>(
    cfg: &TrialConfig<T>,
    policy: Policy,
    coverage: f64,
    seed: u64,
) -> Result<TrialResult> {
    cfg.instance.validate()?;
    cfg.em.validate()?;
    cfg.policy.validate()?;
    let n = cfg.instance.n_users;
    let m = cfg.instance.m_questions;
    let r = labels_per_question(coverage, n);
    if r == 0 || r > n {
        return Err(Error::InvalidConfig(format!(
            "coverage {coverage} gives {r} labels per question for {n} users"
        )));
    }

    let truth: GroundTruth<T> =
        sample_instance(&cfg.instance, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0])))?;
    let mut assign_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let mut crowd = SimulatedCrowd::new(&truth, derive_seed(seed, &[2]));
    let k = truth.k_topics;

    let first = match policy {
        Policy::Random => r,
        Policy::OneShot | Policy::Dynamic => stage1_labels(r, cfg.policy.stage1_fraction),
    };
    let mut answers = AnswerMatrix::new(n, m);
    let step = random_assignment::<T, _>(n, m, first, &answers.assignment(), &mut assign_rng)?;
    for &(u, j) in &step.pairs {
        answers.apply_label(u, j, crowd.respond(u, j))?;
    }
    let remaining = m * (r - first);

    let mut per_round_errors = Vec::new();
    let labels = match policy {
        Policy::Random => run_em(&answers, &truth.topics, k, &cfg.em)?.labels,
        Policy::OneShot => {
            let stage1 = run_em(&answers, &truth.topics, k, &cfg.em)?;
            if remaining == 0 {
                stage1.labels
            } else {
                let steps = one_shot_allocate(
                    remaining,
                    &stage1.reliabilities,
                    &answers,
                    cfg.em.label_prior,
                    &cfg.policy,
                )?;
                for step in &steps {
                    for &(u, j) in &step.pairs {
                        answers.apply_label(u, j, crowd.respond(u, j))?;
                    }
                }
                run_em(&answers, &truth.topics, k, &cfg.em)?.labels
            }
        }
        Policy::Dynamic => {
            let out = dynamic_allocate(
                remaining,
                &mut answers,
                &truth.topics,
                k,
                &cfg.em,
                &cfg.policy,
                &mut crowd,
            )?;
            for round in &out.trace {
                per_round_errors.push(error_rate(&round.labels, &truth)?);
            }
            out.final_estimate.labels
        }
    };

    Ok(TrialResult {
        policy,
        sweep_point: SweepPoint::Coverage(coverage),
        trial: 0,
        final_error: error_rate(&labels, &truth)?,
        per_round_errors,
        labels_used: answers.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepPoints {
    /// Coverage fractions at fixed `n` and `m`.
    Budgets(Vec<f64>),
    /// Question counts at a fixed coverage.
    Questions { m_values: Vec<usize>, coverage: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig<T> {
    pub trial: TrialConfig<T>,
    pub points: SweepPoints,
    pub policies: Vec<Policy>,
    pub trials: usize,
    pub master_seed: u64,
}

impl<T: Real> SweepConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.trial.instance.validate()?;
        self.trial.em.validate()?;
        self.trial.policy.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidConfig("at least one policy is required".into()));
        }
        let n = self.trial.instance.n_users;
        let check_coverage = |s: f64| {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::InvalidConfig(format!("coverage {s} outside (0, 1]")));
            }
            if labels_per_question(s, n) == 0 {
                return Err(Error::InvalidConfig(format!(
                    "coverage {s} rounds to zero labels per question with {n} users"
                )));
            }
            Ok(())
        };
        match &self.points {
            SweepPoints::Budgets(b) => {
                if b.is_empty() {
                    return Err(Error::InvalidConfig("budgets list is empty".into()));
                }
                b.iter().try_for_each(|&s| check_coverage(s))
            }
            SweepPoints::Questions { m_values, coverage } => {
                if m_values.is_empty() {
                    return Err(Error::InvalidConfig("m_values list is empty".into()));
                }
                if m_values.contains(&0) {
                    return Err(Error::InvalidConfig("m_values entries must be >= 1".into()));
                }
                check_coverage(*coverage)
            }
        }
    }

    pub fn point_list(&self) -> Vec<SweepPoint> {
        match &self.points {
            SweepPoints::Budgets(b) => b.iter().map(|&s| SweepPoint::Coverage(s)).collect(),
            SweepPoints::Questions { m_values, .. } => {
                m_values.iter().map(|&m| SweepPoint::Questions(m)).collect()
            }
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` with SplitMix64, one round per part.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Seed of one sweep trial.
pub fn trial_seed(master: u64, policy: Policy, point_index: usize, trial: usize) -> u64 {
    derive_seed(master, &[policy.id(), point_index as u64, trial as u64])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub ci95: f64,
}

/// Mean, sample standard deviation (n − 1 divisor), standard error and
/// 95% half-width `1.96·se`.
pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("cannot aggregate an empty sample".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_dev = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let std_error = std_dev / n.sqrt();
    Ok(Aggregate {
        mean,
        std_dev,
        std_error,
        ci95: 1.96 * std_error,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub policy: Policy,
    pub sweep_point: SweepPoint,
    pub mean_error: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub ci95: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, policy: Policy, point_index: usize) -> Option<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.policy == policy)
            .nth(point_index)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    /// Sorted by (policy order in the config, point, trial).
    pub trials: Vec<TrialResult>,
    pub table: ResultTable,
}

/// Runs every (policy, point, trial) combination in parallel on the current
/// rayon pool and aggregates per (policy, point).
pub fn sweep<T: Real>(cfg: &SweepConfig<T>) -> Result<SweepOutput> {
    cfg.validate()?;
    let points = cfg.point_list();
    let mut jobs = Vec::with_capacity(cfg.policies.len() * points.len() * cfg.trials);
    for (pi, &policy) in cfg.policies.iter().enumerate() {
        for (xi, &point) in points.iter().enumerate() {
            for t in 0..cfg.trials {
                jobs.push((pi, policy, xi, point, t));
            }
        }
    }

    let mut results: Vec<((usize, usize, usize), TrialResult)> = jobs
        .into_par_iter()
        .map(|(pi, policy, xi, point, t)| {
            let (trial_cfg, coverage) = match (point, &cfg.points) {
                (SweepPoint::Coverage(s), _) => (cfg.trial.clone(), s),
                (SweepPoint::Questions(m), SweepPoints::Questions { coverage, .. }) => {
                    let mut c = cfg.trial.clone();
                    c.instance.m_questions = m;
                    (c, *coverage)
                }
                (SweepPoint::Questions(_), SweepPoints::Budgets(_)) => unreachable!(),
            };
            let seed = trial_seed(cfg.master_seed, policy, xi, t);
            run_policy_trial(&trial_cfg, policy, coverage, seed)
                .map(|mut r| {
                    r.sweep_point = point;
                    r.trial = t;
                    ((pi, xi, t), r)
                })
                .map_err(|e| Error::Trial {
                    policy: policy.as_str(),
                    point: point.to_string(),
                    trial: t,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    results.sort_by_key(|(key, _)| *key);

    let mut rows = Vec::with_capacity(cfg.policies.len() * points.len());
    for chunk in results.chunks(cfg.trials) {
        let errors: Vec<f64> = chunk.iter().map(|(_, r)| r.final_error).collect();
        let agg = aggregate(&errors)?;
        let first = &chunk[0].1;
        rows.push(ResultRow {
            policy: first.policy,
            sweep_point: first.sweep_point,
            mean_error: agg.mean,
            std_dev: agg.std_dev,
            std_error: agg.std_error,
            ci95: agg.ci95,
            trials: chunk.len(),
        });
    }
    Ok(SweepOutput {
        trials: results.into_iter().map(|(_, r)| r).collect(),
        table: ResultTable { rows },
    })
}
