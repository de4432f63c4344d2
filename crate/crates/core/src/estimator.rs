//! Truth inference: majority vote and one-coin Dawid-Skene EM with per-topic
//! reliabilities.
//!
//! The M-step is the posterior mode under a Beta(alpha_s + 1, beta_s + 1)
//! prior, so the quantity EM climbs is [`map_objective`], the observed-data
//! log-likelihood plus the smoothing log-prior. With zero smoothing the two
//! coincide.

use crate::error::{Error, Result};
use crate::model::{AnswerMatrix, Label, LabelEstimate};
use crate::scalar::{log_add_exp, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct EmOptions<T> {
    pub max_iterations: usize,
    /// Stop once the largest posterior change drops below this.
    pub tolerance: T,
    /// Laplace pseudo-counts `(alpha_s, beta_s)` for correct / incorrect.
    pub smoothing: (T, T),
    /// Prior probability that a true answer is +1.
    pub label_prior: T,
}

impl<T: Real> Default for EmOptions<T> {
    fn default() -> Self {
        EmOptions {
            max_iterations: 100,
            tolerance: T::lit(1e-6),
            smoothing: (T::one(), T::one()),
            label_prior: T::half(),
        }
    }
}

impl<T: Real> EmOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("EM max_iterations must be >= 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= T::zero() {
            return Err(Error::InvalidConfig("EM tolerance must be positive".into()));
        }
        let (a, b) = self.smoothing;
        if !(a >= T::zero() && b >= T::zero()) {
            return Err(Error::InvalidConfig("smoothing pseudo-counts must be >= 0".into()));
        }
        if !(self.label_prior >= T::zero() && self.label_prior <= T::one()) {
            return Err(Error::InvalidConfig("label_prior must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-topic reliability estimates and their user × question expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityEstimate<T> {
    /// `n × k`.
    pub per_topic: Vec<Vec<T>>,
    /// Row-major `n × m`, `expanded[i * m + j] = per_topic[i][topics[j]]`.
    pub expanded: Vec<T>,
    m_questions: usize,
}

impl<T: Real> ReliabilityEstimate<T> {
    pub fn n_users(&self) -> usize {
        self.per_topic.len()
    }

    pub fn m_questions(&self) -> usize {
        self.m_questions
    }

    #[inline]
    pub fn get(&self, user: usize, question: usize) -> T {
        self.expanded[user * self.m_questions + question]
    }

    /// Column of F̃ for one question.
    pub fn column(&self, question: usize) -> Vec<T> {
        (0..self.n_users()).map(|i| self.get(i, question)).collect()
    }
}

/// Builds F̃ from per-topic estimates.
pub fn expand_reliabilities<T: Real>(
    per_topic: &[Vec<T>],
    topics: &[usize],
) -> Result<ReliabilityEstimate<T>> {
    let k = per_topic.first().map_or(0, Vec::len);
    if let Some(row) = per_topic.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch(format!(
            "ragged reliability matrix: row of {} entries, expected {k}",
            row.len()
        )));
    }
    if let Some(&t) = topics.iter().find(|&&t| t >= k) {
        return Err(Error::IndexOutOfRange {
            what: "topic",
            index: t,
            limit: k,
        });
    }
    let m = topics.len();
    let mut expanded = Vec::with_capacity(per_topic.len() * m);
    for row in per_topic {
        expanded.extend(topics.iter().map(|&t| row[t]));
    }
    Ok(ReliabilityEstimate {
        per_topic: per_topic.to_vec(),
        expanded,
        m_questions: m,
    })
}

/// Fraction of +1 votes per question; unanswered questions get 0.5.
pub fn majority_vote<T: Real>(answers: &AnswerMatrix) -> LabelEstimate<T> {
    let posteriors = (0..answers.m_questions())
        .map(|j| {
            let col = answers.column(j);
            if col.is_empty() {
                T::half()
            } else {
                let pos = col.iter().filter(|(_, l)| l.is_pos()).count();
                T::lit(pos as f64) / T::lit(col.len() as f64)
            }
        })
        .collect();
    LabelEstimate::from_posteriors(posteriors)
}

/// Log joint `(ln p(+1, y), ln p(-1, y))` for one column of responses.
pub(crate) fn column_log_joint<T: Real>(
    responses: impl IntoIterator<Item = (T, Label)>,
    prior: T,
) -> (T, T) {
    let mut pos = prior.ln();
    let mut neg = (T::one() - prior).ln();
    for (f, y) in responses {
        let (agree, disagree) = (f.ln(), (T::one() - f).ln());
        match y {
            Label::Pos => {
                pos = pos + agree;
                neg = neg + disagree;
            }
            Label::Neg => {
                pos = pos + disagree;
                neg = neg + agree;
            }
        }
    }
    (pos, neg)
}

#[inline]
fn posterior_from_log_joint<T: Real>((pos, neg): (T, T)) -> T {
    let norm = log_add_exp(pos, neg);
    if !norm.is_finite() {
        return T::half();
    }
    (pos - norm).exp()
}

/// Posterior `P(a_j = +1 | column j, F̃)` for every question.
pub fn e_step<T: Real>(
    answers: &AnswerMatrix,
    reliabilities: &ReliabilityEstimate<T>,
    prior: T,
) -> Vec<T> {
    (0..answers.m_questions())
        .map(|j| {
            let col = answers.column(j).iter().map(|&(i, y)| (reliabilities.get(i, j), y));
            posterior_from_log_joint(column_log_joint(col, prior))
        })
        .collect()
}

fn e_step_per_topic<T: Real>(
    answers: &AnswerMatrix,
    per_topic: &[Vec<T>],
    topics: &[usize],
    prior: T,
) -> Vec<T> {
    (0..answers.m_questions())
        .map(|j| {
            let t = topics[j];
            let col = answers.column(j).iter().map(|&(i, y)| (per_topic[i][t], y));
            posterior_from_log_joint(column_log_joint(col, prior))
        })
        .collect()
}

/// Smoothed per-topic reliability estimates given label posteriors.
pub fn m_step<T: Real>(
    answers: &AnswerMatrix,
    posteriors: &[T],
    topics: &[usize],
    k_topics: usize,
    smoothing: (T, T),
) -> Vec<Vec<T>> {
    m_step_with_counts(answers, posteriors, topics, k_topics, smoothing).0
}

fn m_step_with_counts<T: Real>(
    answers: &AnswerMatrix,
    posteriors: &[T],
    topics: &[usize],
    k_topics: usize,
    (alpha, beta): (T, T),
) -> (Vec<Vec<T>>, Vec<Vec<usize>>) {
    let n = answers.n_users();
    let mut p_hat = vec![vec![T::zero(); k_topics]; n];
    let mut counts = vec![vec![0usize; k_topics]; n];
    for i in 0..n {
        let mut weight = vec![T::zero(); k_topics];
        for &(j, y) in answers.row(i) {
            let t = topics[j];
            let q = posteriors[j];
            weight[t] = weight[t] + if y.is_pos() { q } else { T::one() - q };
            counts[i][t] += 1;
        }
        for t in 0..k_topics {
            let denom = alpha + beta + T::lit(counts[i][t] as f64);
            p_hat[i][t] = if denom > T::zero() {
                (alpha + weight[t]) / denom
            } else {
                T::half()
            };
        }
    }
    (p_hat, counts)
}

/// Observed-data log-likelihood `Σ_j ln p(y_j)` under per-topic reliabilities.
pub fn log_likelihood<T: Real>(
    answers: &AnswerMatrix,
    per_topic: &[Vec<T>],
    topics: &[usize],
    prior: T,
) -> T {
    (0..answers.m_questions())
        .map(|j| {
            let t = topics[j];
            let col = answers.column(j).iter().map(|&(i, y)| (per_topic[i][t], y));
            let (pos, neg) = column_log_joint(col, prior);
            log_add_exp(pos, neg)
        })
        .sum()
}

/// Log-likelihood plus the log-density of the smoothing prior; the quantity
/// each EM iteration does not decrease.
pub fn map_objective<T: Real>(
    answers: &AnswerMatrix,
    per_topic: &[Vec<T>],
    topics: &[usize],
    opts: &EmOptions<T>,
) -> T {
    let (alpha, beta) = opts.smoothing;
    let xlogy = |x: T, y: T| if x == T::zero() { T::zero() } else { x * y.ln() };
    let penalty: T = per_topic
        .iter()
        .flatten()
        .map(|&p| xlogy(alpha, p) + xlogy(beta, T::one() - p))
        .sum();
    log_likelihood(answers, per_topic, topics, opts.label_prior) + penalty
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmOutcome<T> {
    pub labels: LabelEstimate<T>,
    pub reliabilities: ReliabilityEstimate<T>,
    pub iterations: usize,
    pub converged: bool,
    /// [`map_objective`] after each M-step, before any label-switch repair.
    pub objective_trace: Vec<T>,
}

/// Runs EM from a majority-vote start.
///
/// After convergence each topic is checked for label switching: if the mean
/// reliability over users who answered in that topic is below 0.5, the
/// topic's labels are flipped and its reliabilities reflected.
pub fn run_em<T: Real>(
    answers: &AnswerMatrix,
    topics: &[usize],
    k_topics: usize,
    opts: &EmOptions<T>,
) -> Result<EmOutcome<T>> {
    opts.validate()?;
    if answers.is_empty() {
        return Err(Error::EmptyAnswers);
    }
    if topics.len() != answers.m_questions() {
        return Err(Error::DimensionMismatch(format!(
            "{} topics for {} questions",
            topics.len(),
            answers.m_questions()
        )));
    }
    if let Some(&t) = topics.iter().find(|&&t| t >= k_topics) {
        return Err(Error::IndexOutOfRange {
            what: "topic",
            index: t,
            limit: k_topics,
        });
    }

    let mut q: Vec<T> = majority_vote(answers).posteriors;
    let mut p_hat = Vec::new();
    let mut counts = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        (p_hat, counts) = m_step_with_counts(answers, &q, topics, k_topics, opts.smoothing);
        trace.push(map_objective(answers, &p_hat, topics, opts));
        let next = e_step_per_topic(answers, &p_hat, topics, opts.label_prior);
        let delta = q
            .iter()
            .zip(&next)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        q = next;
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }

    for t in 0..k_topics {
        let (sum, cells) = p_hat
            .iter()
            .zip(&counts)
            .filter(|(_, c)| c[t] > 0)
            .fold((T::zero(), 0usize), |(s, c), (p, _)| (s + p[t], c + 1));
        if cells > 0 && sum / T::lit(cells as f64) < T::half() {
            for row in p_hat.iter_mut() {
                row[t] = T::one() - row[t];
            }
            for (qj, _) in q.iter_mut().zip(topics).filter(|(_, &tj)| tj == t) {
                *qj = T::one() - *qj;
            }
        }
    }

    Ok(EmOutcome {
        labels: LabelEstimate::from_posteriors(q),
        reliabilities: expand_reliabilities(&p_hat, topics)?,
        iterations,
        converged,
        objective_trace: trace,
    })
}
