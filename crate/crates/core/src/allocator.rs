//! Partial mutual information scoring and the budget allocation policies.
//!
//! For a question with latent label `X` and observed responses `y`, the
//! partial mutual information is
//!
//! ```text
//! pMI(y) = Σ_x p(x, y) ln( p(x, y) / (p(x) p(y)) ) = p(y) · KL( p(x | y) ‖ p(x) )
//! ```
//!
//! and the gain of querying user `v` sums pMI over the two answers `v` could
//! give, minus the current value:
//!
//! ```text
//! Δ(v) = Σ_{y_v} pMI(y, y_v) − pMI(y) = p(y) · I(X; Y_v | Y = y)
//!      = p(y) · ( h(q f + (1 − q)(1 − f)) − h(f) )
//! ```
//!
//! with `q = p(X = +1 | y)`, `f` the candidate's reliability on the question
//! and `h` the binary entropy. All quantities are in nats.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{column_log_joint, run_em, EmOptions, EmOutcome, ReliabilityEstimate};
use crate::model::{AnswerMatrix, AssignmentMatrix, Label, LabelEstimate};
use crate::scalar::{binary_entropy, log_add_exp, log_sigmoid, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GainMode {
    #[default]
    Absolute,
    /// Gain divided by `max(pMI(y), relative_floor)`.
    Relative,
}

impl GainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GainMode::Absolute => "absolute",
            GainMode::Relative => "relative",
        }
    }
}

impl std::str::FromStr for GainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(GainMode::Absolute),
            "relative" => Ok(GainMode::Relative),
            other => Err(Error::InvalidConfig(format!("unknown gain mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOptions<T> {
    pub gain_mode: GainMode,
    pub relative_floor: T,
    /// Per-round cap on new labels for one user in dynamic rounds.
    pub max_labels_per_user_per_round: Option<usize>,
    /// Share of each question's labels spent on the random first stage.
    pub stage1_fraction: f64,
}

impl<T: Real> Default for PolicyOptions<T> {
    fn default() -> Self {
        PolicyOptions {
            gain_mode: GainMode::Absolute,
            relative_floor: T::lit(1e-9),
            max_labels_per_user_per_round: None,
            stage1_fraction: 0.5,
        }
    }
}

impl<T: Real> PolicyOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.relative_floor.is_nan() || self.relative_floor <= T::zero() {
            return Err(Error::InvalidConfig("relative_floor must be positive".into()));
        }
        if !(self.stage1_fraction > 0.0 && self.stage1_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stage1_fraction must lie in (0, 1), got {}",
                self.stage1_fraction
            )));
        }
        if self.max_labels_per_user_per_round == Some(0) {
            return Err(Error::InvalidConfig("per-user round cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Responses observed so far on one question, with the reliability of each
/// respondent on it.
#[derive(Clone, Debug, PartialEq)]
pub struct QuestionEvidence<T> {
    pub question: usize,
    pub respondents: Vec<(usize, Label)>,
    /// Parallel to `respondents`.
    pub reliabilities: Vec<T>,
    /// Prior probability of +1.
    pub prior: T,
}

impl<T: Real> QuestionEvidence<T> {
    pub fn new(
        question: usize,
        respondents: Vec<(usize, Label)>,
        reliabilities: Vec<T>,
        prior: T,
    ) -> Result<Self> {
        if respondents.len() != reliabilities.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} respondents with {} reliabilities",
                respondents.len(),
                reliabilities.len()
            )));
        }
        let mut users: Vec<usize> = respondents.iter().map(|&(u, _)| u).collect();
        users.sort_unstable();
        if let Some(w) = users.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateAssignment {
                user: w[0],
                question,
            });
        }
        Ok(QuestionEvidence {
            question,
            respondents,
            reliabilities,
            prior,
        })
    }

    /// Evidence for `question` drawn from the answer matrix and F̃.
    pub fn from_answers(
        answers: &AnswerMatrix,
        reliabilities: &ReliabilityEstimate<T>,
        question: usize,
        prior: T,
    ) -> Self {
        let respondents = answers.column(question).to_vec();
        let rel = respondents
            .iter()
            .map(|&(u, _)| reliabilities.get(u, question))
            .collect();
        QuestionEvidence {
            question,
            respondents,
            reliabilities: rel,
            prior,
        }
    }

    /// Copy with one more response appended.
    pub fn with_response(&self, user: usize, response: Label, reliability: T) -> Result<Self> {
        if self.has_respondent(user) {
            return Err(Error::DuplicateAssignment {
                user,
                question: self.question,
            });
        }
        let mut next = self.clone();
        next.respondents.push((user, response));
        next.reliabilities.push(reliability);
        Ok(next)
    }

    pub fn has_respondent(&self, user: usize) -> bool {
        self.respondents.iter().any(|&(u, _)| u == user)
    }

    fn log_joint(&self) -> (T, T) {
        column_log_joint(
            self.reliabilities
                .iter()
                .zip(&self.respondents)
                .map(|(&f, &(_, y))| (f, y)),
            self.prior,
        )
    }

    /// Log-odds contributed by the responses alone; exactly 0 when every
    /// respondent has reliability 0.5.
    fn evidence_log_odds(&self) -> T {
        self.reliabilities
            .iter()
            .zip(&self.respondents)
            .map(|(&f, &(_, y))| {
                let l = f.ln() - (T::one() - f).ln();
                if y.is_pos() {
                    l
                } else {
                    -l
                }
            })
            .sum()
    }
}

/// `(p(+1, y), p(-1, y))`.
pub fn joint_probability<T: Real>(ev: &QuestionEvidence<T>) -> (T, T) {
    let (pos, neg) = ev.log_joint();
    (pos.exp(), neg.exp())
}

/// Partial mutual information of the evidence, in nats.
pub fn pmi<T: Real>(ev: &QuestionEvidence<T>) -> T {
    GainContext::new(ev).pmi
}

/// Everything about a question that candidate scoring needs, computed once.
#[derive(Clone, Copy, Debug)]
struct GainContext<T> {
    p_y: T,
    posterior: T,
    pmi: T,
}

impl<T: Real> GainContext<T> {
    fn new(ev: &QuestionEvidence<T>) -> Self {
        let prior = ev.prior;
        let (log_pos, log_neg) = ev.log_joint();
        let log_py = log_add_exp(log_pos, log_neg);
        if !log_py.is_finite() {
            return GainContext {
                p_y: T::zero(),
                posterior: prior,
                pmi: T::zero(),
            };
        }
        // Posterior and prior both go through log_sigmoid of a log-odds, so
        // uninformative evidence gives a log ratio of exactly 0.
        let prior_odds = prior.ln() - (T::one() - prior).ln();
        let post_odds = prior_odds + ev.evidence_log_odds();
        let log_post_pos = log_sigmoid(post_odds);
        let log_post_neg = log_sigmoid(-post_odds);
        let log_prior_pos = log_sigmoid(prior_odds);
        let log_prior_neg = log_sigmoid(-prior_odds);
        let term = |log_joint: T, log_post: T, log_prior: T| {
            if log_joint == T::neg_infinity() || log_prior == T::neg_infinity() {
                T::zero()
            } else {
                log_joint.exp() * (log_post - log_prior)
            }
        };
        let pmi = term(log_pos, log_post_pos, log_prior_pos) + term(log_neg, log_post_neg, log_prior_neg);
        GainContext {
            p_y: log_py.exp(),
            posterior: log_post_pos.exp(),
            pmi: pmi.max(T::zero()),
        }
    }

    fn absolute(&self, f: T) -> T {
        let q = self.posterior;
        // P(Y_v = +1 | y); reduces to exactly 0.5 when f = 0.5
        let mix = (T::one() - f) + q * (f + f - T::one());
        let info = binary_entropy(mix) - binary_entropy(f);
        self.p_y * info.max(T::zero())
    }

    fn score(&self, f: T, mode: GainMode, floor: T) -> T {
        let abs = self.absolute(f);
        match mode {
            GainMode::Absolute => abs,
            GainMode::Relative => abs / self.pmi.max(floor),
        }
    }
}

/// Expected improvement in pMI from querying `candidate`, whose reliability
/// on this question is `reliability`.
pub fn expected_gain<T: Real>(
    ev: &QuestionEvidence<T>,
    candidate: usize,
    reliability: T,
    opts: &PolicyOptions<T>,
) -> Result<T> {
    if ev.has_respondent(candidate) {
        return Err(Error::DuplicateAssignment {
            user: candidate,
            question: ev.question,
        });
    }
    let ctx = GainContext::new(ev);
    Ok(ctx.score(reliability, opts.gain_mode, opts.relative_floor))
}

/// Unassigned users for a question, each with its score, in user order.
fn candidate_scores<T: Real>(
    ctx: &GainContext<T>,
    question: usize,
    reliabilities: &ReliabilityEstimate<T>,
    assigned: &AssignmentMatrix,
    opts: &PolicyOptions<T>,
) -> Vec<(usize, T)> {
    let taken = assigned.column(question);
    let mut next_taken = taken.iter().peekable();
    let mut out = Vec::with_capacity(reliabilities.n_users().saturating_sub(taken.len()));
    for u in 0..reliabilities.n_users() {
        if next_taken.peek() == Some(&&u) {
            next_taken.next();
            continue;
        }
        let s = ctx.score(reliabilities.get(u, question), opts.gain_mode, opts.relative_floor);
        out.push((u, s));
    }
    out
}

fn argmax_candidate<T: Real>(cands: &[(usize, T)]) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for &(u, s) in cands {
        // strict comparison keeps the lowest index on ties
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((u, s));
        }
    }
    best
}

/// Highest-gain user not yet assigned to the evidence's question.
pub fn best_user_for_question<T: Real>(
    ev: &QuestionEvidence<T>,
    reliabilities: &ReliabilityEstimate<T>,
    assigned: &AssignmentMatrix,
    opts: &PolicyOptions<T>,
) -> Result<(usize, T)> {
    let ctx = GainContext::new(ev);
    let cands = candidate_scores(&ctx, ev.question, reliabilities, assigned, opts);
    argmax_candidate(&cands).ok_or(Error::NoEligibleUser {
        question: ev.question,
    })
}

/// A batch of (user, question) queries with the score that selected each.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationStep<T> {
    pub round: usize,
    pub pairs: Vec<(usize, usize)>,
    pub scores: Vec<T>,
}

impl<T> AllocationStep<T> {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn sort_by_score_desc<T: Real>(items: &mut [(usize, T)]) {
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
}

/// Non-adaptive allocation of `budget` new labels, scored once against the
/// current evidence.
///
/// With `budget < m` the `budget` questions with the highest best-user score
/// get one label each. Otherwise every question receives its next
/// `budget / m` best users (one step per pass), and the remaining
/// `budget % m` labels go to the questions whose next candidate scores
/// highest.
pub fn one_shot_allocate<T: Real>(
    budget: usize,
    reliabilities: &ReliabilityEstimate<T>,
    answers: &AnswerMatrix,
    prior: T,
    opts: &PolicyOptions<T>,
) -> Result<Vec<AllocationStep<T>>> {
    opts.validate()?;
    check_dims(reliabilities, answers)?;
    let available = answers.unassigned_count();
    if budget > available {
        return Err(Error::BudgetExceeded {
            requested: budget,
            available,
        });
    }
    if budget == 0 {
        return Ok(Vec::new());
    }
    let m = answers.m_questions();
    let passes = budget / m;
    let remainder = budget % m;
    let depth = passes + usize::from(remainder > 0);
    let assigned = answers.assignment();

    let ranked: Vec<Vec<(usize, T)>> = (0..m)
        .map(|j| {
            let ev = QuestionEvidence::from_answers(answers, reliabilities, j, prior);
            let ctx = GainContext::new(&ev);
            let mut cands = candidate_scores(&ctx, j, reliabilities, &assigned, opts);
            sort_by_score_desc(&mut cands);
            cands.truncate(depth);
            cands
        })
        .collect();

    let mut steps = Vec::with_capacity(depth);
    for pass in 0..passes {
        let mut step = AllocationStep {
            round: pass,
            pairs: Vec::with_capacity(m),
            scores: Vec::with_capacity(m),
        };
        for (j, cands) in ranked.iter().enumerate() {
            let &(u, s) = cands.get(pass).ok_or(Error::NoEligibleUser { question: j })?;
            step.pairs.push((u, j));
            step.scores.push(s);
        }
        steps.push(step);
    }
    if remainder > 0 {
        let mut next: Vec<(usize, T)> = ranked
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.get(passes).map(|&(_, s)| (j, s)))
            .collect();
        sort_by_score_desc(&mut next);
        if next.len() < remainder {
            return Err(Error::BudgetExceeded {
                requested: budget,
                available: passes * m + next.len(),
            });
        }
        let mut step = AllocationStep {
            round: passes,
            pairs: Vec::with_capacity(remainder),
            scores: Vec::with_capacity(remainder),
        };
        for &(j, s) in &next[..remainder] {
            step.pairs.push((ranked[j][passes].0, j));
            step.scores.push(s);
        }
        steps.push(step);
    }
    Ok(steps)
}

/// Source of responses for newly queried pairs.
pub trait ResponseOracle {
    fn respond(&mut self, user: usize, question: usize) -> Label;
}

impl<F: FnMut(usize, usize) -> Label> ResponseOracle for F {
    fn respond(&mut self, user: usize, question: usize) -> Label {
        self(user, question)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord<T> {
    pub step: AllocationStep<T>,
    /// Estimate after this round's labels were added.
    pub labels: LabelEstimate<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicOutcome<T> {
    pub trace: Vec<RoundRecord<T>>,
    /// EM on the final answer matrix.
    pub final_estimate: EmOutcome<T>,
}

/// Round-based allocation: every full round re-runs EM, picks the best
/// unassigned user for each question and queries all of them. A budget that
/// is not a multiple of `m` ends with a partial round on the top-scoring
/// questions.
#[allow(clippy::too_many_arguments)]
pub fn dynamic_allocate<T: Real, O: ResponseOracle + ?Sized>(
    budget: usize,
    answers: &mut AnswerMatrix,
    topics: &[usize],
    k_topics: usize,
    em_opts: &EmOptions<T>,
    opts: &PolicyOptions<T>,
    oracle: &mut O,
) -> Result<DynamicOutcome<T>> {
    opts.validate()?;
    let available = answers.unassigned_count();
    if budget > available {
        return Err(Error::BudgetExceeded {
            requested: budget,
            available,
        });
    }
    let m = answers.m_questions();
    let full_rounds = budget / m;
    let remainder = budget % m;
    let rounds = full_rounds + usize::from(remainder > 0);

    let mut estimate = run_em(answers, topics, k_topics, em_opts)?;
    let mut trace = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let quota = if round < full_rounds { m } else { remainder };
        let step = allocate_round(round, quota, answers, &estimate.reliabilities, em_opts.label_prior, opts)?;
        for &(u, j) in &step.pairs {
            let y = oracle.respond(u, j);
            answers.apply_label(u, j, y)?;
        }
        estimate = run_em(answers, topics, k_topics, em_opts)?;
        trace.push(RoundRecord {
            step,
            labels: estimate.labels.clone(),
        });
    }
    Ok(DynamicOutcome {
        trace,
        final_estimate: estimate,
    })
}

/// Plans one dynamic round against fixed reliabilities: one label for each
/// of the `quota` questions whose best candidate scores highest (all
/// questions when `quota == m`).
pub fn allocate_round<T: Real>(
    round: usize,
    quota: usize,
    answers: &AnswerMatrix,
    reliabilities: &ReliabilityEstimate<T>,
    prior: T,
    opts: &PolicyOptions<T>,
) -> Result<AllocationStep<T>> {
    check_dims(reliabilities, answers)?;
    let m = answers.m_questions();
    let assigned = answers.assignment();
    let mut per_question: Vec<Vec<(usize, T)>> = (0..m)
        .map(|j| {
            let ev = QuestionEvidence::from_answers(answers, reliabilities, j, prior);
            let ctx = GainContext::new(&ev);
            candidate_scores(&ctx, j, reliabilities, &assigned, opts)
        })
        .collect();

    let mut best: Vec<(usize, T)> = Vec::with_capacity(m);
    for (j, cands) in per_question.iter().enumerate() {
        match argmax_candidate(cands) {
            Some((_, s)) => best.push((j, s)),
            None if quota == m => return Err(Error::NoEligibleUser { question: j }),
            None => {}
        }
    }
    sort_by_score_desc(&mut best);
    if best.len() < quota {
        return Err(Error::BudgetExceeded {
            requested: quota,
            available: best.len(),
        });
    }

    let mut step = AllocationStep {
        round,
        pairs: Vec::with_capacity(quota),
        scores: Vec::with_capacity(quota),
    };
    match opts.max_labels_per_user_per_round {
        None => {
            for &(j, _) in best.iter().take(quota) {
                let (u, s) = argmax_candidate(&per_question[j]).expect("nonempty");
                step.pairs.push((u, j));
                step.scores.push(s);
            }
        }
        Some(cap) => {
            // Questions claim users in order of their best score; a user at
            // the cap is skipped.
            let mut load = vec![0usize; answers.n_users()];
            for &(j, _) in &best {
                if step.pairs.len() == quota {
                    break;
                }
                let cands = &mut per_question[j];
                sort_by_score_desc(cands);
                match cands.iter().find(|(u, _)| load[*u] < cap) {
                    Some(&(u, s)) => {
                        load[u] += 1;
                        step.pairs.push((u, j));
                        step.scores.push(s);
                    }
                    None if quota == m => return Err(Error::NoEligibleUser { question: j }),
                    None => {}
                }
            }
            if step.pairs.len() < quota {
                return Err(Error::BudgetExceeded {
                    requested: quota,
                    available: step.pairs.len(),
                });
            }
        }
    }
    Ok(step)
}

/// `labels_per_question` fresh users per question, drawn uniformly without
/// replacement from those not already assigned to it.
pub fn random_assignment<T: Real, R: Rng + ?Sized>(
    n_users: usize,
    m_questions: usize,
    labels_per_question: usize,
    existing: &AssignmentMatrix,
    rng: &mut R,
) -> Result<AllocationStep<T>> {
    if existing.n_users() != n_users || existing.m_questions() != m_questions {
        return Err(Error::DimensionMismatch(format!(
            "existing assignment is {}x{}, expected {n_users}x{m_questions}",
            existing.n_users(),
            existing.m_questions()
        )));
    }
    let mut pairs = Vec::with_capacity(labels_per_question * m_questions);
    for j in 0..m_questions {
        let taken = existing.column(j);
        let free = n_users - taken.len();
        if labels_per_question > free {
            return Err(Error::BudgetExceeded {
                requested: labels_per_question,
                available: free,
            });
        }
        let eligible: Vec<usize> = if taken.is_empty() {
            Vec::new()
        } else {
            (0..n_users).filter(|u| taken.binary_search(u).is_err()).collect()
        };
        for idx in index::sample(rng, free, labels_per_question) {
            let u = if taken.is_empty() { idx } else { eligible[idx] };
            pairs.push((u, j));
        }
    }
    let scores = vec![T::zero(); pairs.len()];
    Ok(AllocationStep {
        round: 0,
        pairs,
        scores,
    })
}

fn check_dims<T: Real>(reliabilities: &ReliabilityEstimate<T>, answers: &AnswerMatrix) -> Result<()> {
    if reliabilities.n_users() != answers.n_users() || reliabilities.m_questions() != answers.m_questions() {
        return Err(Error::DimensionMismatch(format!(
            "reliabilities are {}x{}, answers are {}x{}",
            reliabilities.n_users(),
            reliabilities.m_questions(),
            answers.n_users(),
            answers.m_questions()
        )));
    }
    Ok(())
}
