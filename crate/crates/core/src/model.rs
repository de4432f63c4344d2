//! Dawid-Skene domain types and the generative sampler for instances and
//! responses.
//!
//! Each of `n` users answers binary questions with a per-topic probability of
//! being correct. Questions carry a known topic index, so a user's reliability
//! on question `j` is `reliabilities[user][topics[j]]`. With one topic this is
//! the classical one-coin model.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A binary response or true answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn value(self) -> i8 {
        match self {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }

    pub fn from_value(v: i64) -> Option<Label> {
        match v {
            -1 => Some(Label::Neg),
            1 => Some(Label::Pos),
            _ => None,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }
}

/// Parameters of a simulated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceConfig {
    pub n_users: usize,
    pub m_questions: usize,
    pub k_topics: usize,
    /// Beta(alpha, beta) prior on every user-topic reliability.
    pub reliability_prior: (f64, f64),
    /// Probability that a true answer is +1.
    pub answer_prior: f64,
    pub seed: u64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            n_users: 1000,
            m_questions: 100,
            k_topics: 2,
            reliability_prior: (4.0, 2.0),
            answer_prior: 0.5,
            seed: 0,
        }
    }
}

impl InstanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.m_questions == 0 || self.k_topics == 0 {
            return Err(Error::InvalidConfig(
                "n_users, m_questions and k_topics must all be at least 1".into(),
            ));
        }
        let (a, b) = self.reliability_prior;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "reliability prior shapes must be positive and finite, got ({a}, {b})"
            )));
        }
        if !(0.0..=1.0).contains(&self.answer_prior) {
            return Err(Error::InvalidConfig(format!(
                "answer_prior must lie in [0, 1], got {}",
                self.answer_prior
            )));
        }
        Ok(())
    }
}

/// Hidden state of a simulated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth<T> {
    pub answers: Vec<Label>,
    pub topics: Vec<usize>,
    pub k_topics: usize,
    /// Row-major `n × k` matrix of per-topic reliabilities.
    pub reliabilities: Vec<Vec<T>>,
}

impl<T: Real> GroundTruth<T> {
    pub fn n_users(&self) -> usize {
        self.reliabilities.len()
    }

    pub fn m_questions(&self) -> usize {
        self.answers.len()
    }

    /// Reliability of `user` on `question`, looked up through its topic.
    pub fn reliability(&self, user: usize, question: usize) -> T {
        self.reliabilities[user][self.topics[question]]
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.len() != self.answers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} topics for {} answers",
                self.topics.len(),
                self.answers.len()
            )));
        }
        if let Some(&t) = self.topics.iter().find(|&&t| t >= self.k_topics) {
            return Err(Error::IndexOutOfRange {
                what: "topic",
                index: t,
                limit: self.k_topics,
            });
        }
        for row in &self.reliabilities {
            if row.len() != self.k_topics {
                return Err(Error::DimensionMismatch(format!(
                    "reliability row has {} entries, expected {}",
                    row.len(),
                    self.k_topics
                )));
            }
            if row.iter().any(|&r| !(r >= T::zero() && r <= T::one())) {
                return Err(Error::InvalidConfig("reliability outside [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Draws true answers, topics and reliabilities.
pub fn sample_instance<T: Real, R: Rng + ?Sized>(
    cfg: &InstanceConfig,
    rng: &mut R,
) -> Result<GroundTruth<T>> {
    cfg.validate()?;
    let (alpha, beta) = cfg.reliability_prior;
    let prior = Beta::new(alpha, beta)
        .map_err(|e| Error::InvalidConfig(format!("reliability prior: {e}")))?;

    let answers: Vec<Label> = (0..cfg.m_questions)
        .map(|_| {
            if rng.random_bool(cfg.answer_prior) {
                Label::Pos
            } else {
                Label::Neg
            }
        })
        .collect();
    let topics: Vec<usize> = (0..cfg.m_questions)
        .map(|_| rng.random_range(0..cfg.k_topics))
        .collect();
    let reliabilities = (0..cfg.n_users)
        .map(|_| {
            (0..cfg.k_topics)
                .map(|_| {
                    let r: f64 = prior.sample(rng);
                    // Extreme shapes can push the sampler to NaN at the boundary.
                    let r = if r.is_nan() { alpha / (alpha + beta) } else { r };
                    T::lit(r.clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect();

    Ok(GroundTruth {
        answers,
        topics,
        k_topics: cfg.k_topics,
        reliabilities,
    })
}

/// Sparse binary `n × m` matrix of (user, question) assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentMatrix {
    n_users: usize,
    m_questions: usize,
    /// Sorted user indices per question.
    columns: Vec<Vec<usize>>,
}

impl AssignmentMatrix {
    pub fn new(n_users: usize, m_questions: usize) -> Self {
        AssignmentMatrix {
            n_users,
            m_questions,
            columns: vec![Vec::new(); m_questions],
        }
    }

    pub fn from_pairs(
        n_users: usize,
        m_questions: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = AssignmentMatrix::new(n_users, m_questions);
        for (u, q) in pairs {
            g.insert(u, q)?;
        }
        Ok(g)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn m_questions(&self) -> usize {
        self.m_questions
    }

    pub fn insert(&mut self, user: usize, question: usize) -> Result<()> {
        check_index("user", user, self.n_users)?;
        check_index("question", question, self.m_questions)?;
        let col = &mut self.columns[question];
        match col.binary_search(&user) {
            Ok(_) => Err(Error::DuplicateAssignment { user, question }),
            Err(pos) => {
                col.insert(pos, user);
                Ok(())
            }
        }
    }

    pub fn contains(&self, user: usize, question: usize) -> bool {
        self.columns
            .get(question)
            .is_some_and(|c| c.binary_search(&user).is_ok())
    }

    pub fn column(&self, question: usize) -> &[usize] {
        &self.columns[question]
    }

    pub fn len(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().all(Vec::is_empty)
    }

    /// Pairs in question-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(q, col)| col.iter().map(move |&u| (u, q)))
    }
}

/// Sparse `n × m` matrix over {-1, 0, +1}; an entry is nonzero exactly when
/// the pair is assigned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnswerMatrix {
    n_users: usize,
    m_questions: usize,
    columns: Vec<Vec<(usize, Label)>>,
    rows: Vec<Vec<(usize, Label)>>,
    nnz: usize,
}

impl AnswerMatrix {
    pub fn new(n_users: usize, m_questions: usize) -> Self {
        AnswerMatrix {
            n_users,
            m_questions,
            columns: vec![Vec::new(); m_questions],
            rows: vec![Vec::new(); n_users],
            nnz: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn m_questions(&self) -> usize {
        self.m_questions
    }

    /// Number of recorded responses.
    pub fn len(&self) -> usize {
        self.nnz
    }

    pub fn is_empty(&self) -> bool {
        self.nnz == 0
    }

    /// Records `response` for the pair, marking it assigned.
    pub fn apply_label(&mut self, user: usize, question: usize, response: Label) -> Result<()> {
        check_index("user", user, self.n_users)?;
        check_index("question", question, self.m_questions)?;
        if self.is_assigned(user, question) {
            return Err(Error::DuplicateAssignment { user, question });
        }
        self.columns[question].push((user, response));
        self.rows[user].push((question, response));
        self.nnz += 1;
        Ok(())
    }

    pub fn is_assigned(&self, user: usize, question: usize) -> bool {
        if user >= self.n_users || question >= self.m_questions {
            return false;
        }
        let col = &self.columns[question];
        let row = &self.rows[user];
        if col.len() <= row.len() {
            col.iter().any(|&(u, _)| u == user)
        } else {
            row.iter().any(|&(q, _)| q == question)
        }
    }

    /// Entry value in {-1, 0, +1}.
    pub fn get(&self, user: usize, question: usize) -> i8 {
        if question >= self.m_questions {
            return 0;
        }
        self.columns[question]
            .iter()
            .find(|&&(u, _)| u == user)
            .map_or(0, |&(_, l)| l.value())
    }

    /// Responses to `question` in insertion order.
    pub fn column(&self, question: usize) -> &[(usize, Label)] {
        &self.columns[question]
    }

    /// Responses given by `user` in insertion order.
    pub fn row(&self, user: usize) -> &[(usize, Label)] {
        &self.rows[user]
    }

    /// Triples `(user, question, response)` in question-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, Label)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(q, col)| col.iter().map(move |&(u, l)| (u, q, l)))
    }

    pub fn assignment(&self) -> AssignmentMatrix {
        let mut columns: Vec<Vec<usize>> = self
            .columns
            .iter()
            .map(|c| c.iter().map(|&(u, _)| u).collect())
            .collect();
        for c in &mut columns {
            c.sort_unstable();
        }
        AssignmentMatrix {
            n_users: self.n_users,
            m_questions: self.m_questions,
            columns,
        }
    }

    /// Pairs that are still free.
    pub fn unassigned_count(&self) -> usize {
        self.n_users * self.m_questions - self.nnz
    }
}

/// Draws a response for every assigned pair of `assignment`.
pub fn sample_responses<T: Real, R: Rng + ?Sized>(
    assignment: &AssignmentMatrix,
    truth: &GroundTruth<T>,
    rng: &mut R,
) -> Result<AnswerMatrix> {
    if assignment.n_users() != truth.n_users() || assignment.m_questions() != truth.m_questions() {
        return Err(Error::DimensionMismatch(format!(
            "assignment is {}x{}, instance is {}x{}",
            assignment.n_users(),
            assignment.m_questions(),
            truth.n_users(),
            truth.m_questions()
        )));
    }
    let mut answers = AnswerMatrix::new(truth.n_users(), truth.m_questions());
    for (u, q) in assignment.pairs() {
        let response = sample_response(truth, u, q, rng);
        answers.apply_label(u, q, response)?;
    }
    Ok(answers)
}

/// One draw of user `user`'s answer to `question`.
pub fn sample_response<T: Real, R: Rng + ?Sized>(
    truth: &GroundTruth<T>,
    user: usize,
    question: usize,
    rng: &mut R,
) -> Label {
    let p = truth.reliability(user, question).to_f64_lossy().clamp(0.0, 1.0);
    let a = truth.answers[question];
    if rng.random_bool(p) {
        a
    } else {
        a.flip()
    }
}

/// Per-question posterior probability of +1 and derived hard labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelEstimate<T> {
    pub posteriors: Vec<T>,
    pub hard_labels: Vec<Label>,
}

impl<T: Real> LabelEstimate<T> {
    /// Hard labels follow `q >= 0.5 → +1`.
    pub fn from_posteriors(posteriors: Vec<T>) -> Self {
        let hard_labels = posteriors.iter().map(|&q| hard_label(q)).collect();
        LabelEstimate {
            posteriors,
            hard_labels,
        }
    }

    pub fn len(&self) -> usize {
        self.posteriors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posteriors.is_empty()
    }
}

pub fn hard_label<T: Real>(q: T) -> Label {
    if q >= T::half() {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// Fraction of questions whose hard label disagrees with the truth.
pub fn error_rate<T: Real, U: Real>(labels: &LabelEstimate<T>, truth: &GroundTruth<U>) -> Result<f64> {
    label_error_rate(&labels.hard_labels, &truth.answers)
}

pub fn label_error_rate(estimated: &[Label], truth: &[Label]) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated labels for {} questions",
            estimated.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = estimated.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index >= limit {
        Err(Error::IndexOutOfRange { what, index, limit })
    } else {
        Ok(())
    }
}
