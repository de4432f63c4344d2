//! Plain-text instance, answer and label files.
//!
//! Instance file:
//!
//! ```text
//! n m k seed
//! j topic answer          (m lines)
//! i k reliability         (n·k lines)
//! ```
//!
//! Answer file: one `user question response` line per response, response in
//! {-1, +1}. Label file: one `question hard_label posterior` line per
//! question. Blank lines are ignored when reading.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{AnswerMatrix, GroundTruth, Label, LabelEstimate};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile<T> {
    pub truth: GroundTruth<T>,
    pub seed: u64,
}

pub fn write_instance<T: Real>(truth: &GroundTruth<T>, seed: u64) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {}",
        truth.n_users(),
        truth.m_questions(),
        truth.k_topics,
        seed
    );
    for (j, (&t, &a)) in truth.topics.iter().zip(&truth.answers).enumerate() {
        let _ = writeln!(out, "{j} {t} {}", a.value());
    }
    for (i, row) in truth.reliabilities.iter().enumerate() {
        for (k, r) in row.iter().enumerate() {
            let _ = writeln!(out, "{i} {k} {r}");
        }
    }
    out
}

pub fn read_instance<T: Real + FromStr>(text: &str) -> Result<InstanceFile<T>> {
    let mut lines = numbered_lines(text);
    let (ln, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let h: [u64; 4] = fields(ln, header)?;
    let (n, m, k, seed) = (h[0] as usize, h[1] as usize, h[2] as usize, h[3]);
    if n == 0 || m == 0 || k == 0 {
        return Err(parse_err(ln, "n, m and k must be positive"));
    }

    let mut answers = vec![None; m];
    let mut topics = vec![0; m];
    for _ in 0..m {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "truncated question block"))?;
        let [j, t, a]: [i64; 3] = fields(ln, line)?;
        let j = index_in(ln, j, m, "question")?;
        let t = index_in(ln, t, k, "topic")?;
        let a = Label::from_value(a).ok_or_else(|| parse_err(ln, "answer must be -1 or +1"))?;
        if answers[j].replace(a).is_some() {
            return Err(parse_err(ln, &format!("question {j} listed twice")));
        }
        topics[j] = t;
    }

    let mut reliabilities = vec![vec![None; k]; n];
    for _ in 0..n * k {
        let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "truncated reliability block"))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(ln, "expected `user topic reliability`"));
        }
        let i = index_in(ln, parse_num::<i64>(ln, parts[0])?, n, "user")?;
        let t = index_in(ln, parse_num::<i64>(ln, parts[1])?, k, "topic")?;
        let r: T = parse_num(ln, parts[2])?;
        if !(r >= T::zero() && r <= T::one()) {
            return Err(parse_err(ln, "reliability outside [0, 1]"));
        }
        if reliabilities[i][t].replace(r).is_some() {
            return Err(parse_err(ln, &format!("user {i} topic {t} listed twice")));
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content"));
    }

    Ok(InstanceFile {
        truth: GroundTruth {
            answers: answers.into_iter().map(|a| a.expect("every question read")).collect(),
            topics,
            k_topics: k,
            reliabilities: reliabilities
                .into_iter()
                .map(|row| row.into_iter().map(|r| r.expect("every cell read")).collect())
                .collect(),
        },
        seed,
    })
}

pub fn write_answers(answers: &AnswerMatrix) -> String {
    let mut out = String::new();
    for (u, q, y) in answers.triples() {
        let _ = writeln!(out, "{u} {q} {}", y.value());
    }
    out
}

/// Reads responses into an `n × m` matrix.
pub fn read_answers(text: &str, n_users: usize, m_questions: usize) -> Result<AnswerMatrix> {
    let mut a = AnswerMatrix::new(n_users, m_questions);
    for (ln, line) in numbered_lines(text) {
        let [u, q, y]: [i64; 3] = fields(ln, line)?;
        let u = index_in(ln, u, n_users, "user")?;
        let q = index_in(ln, q, m_questions, "question")?;
        let y = Label::from_value(y).ok_or_else(|| parse_err(ln, "response must be -1 or +1"))?;
        a.apply_label(u, q, y).map_err(|e| parse_err(ln, &e.to_string()))?;
    }
    Ok(a)
}

pub fn write_labels<T: Real>(labels: &LabelEstimate<T>) -> String {
    let mut out = String::new();
    for (j, (l, q)) in labels.hard_labels.iter().zip(&labels.posteriors).enumerate() {
        let _ = writeln!(out, "{j} {} {q}", l.value());
    }
    out
}

fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn fields<V: FromStr, const N: usize>(ln: usize, line: &str) -> Result<[V; N]> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != N {
        return Err(parse_err(ln, &format!("expected {N} fields, found {}", parts.len())));
    }
    let vals = parts
        .into_iter()
        .map(|p| parse_num(ln, p))
        .collect::<Result<Vec<V>>>()?;
    Ok(vals.try_into().unwrap_or_else(|_| unreachable!()))
}

fn parse_num<V: FromStr>(ln: usize, s: &str) -> Result<V> {
    s.parse().map_err(|_| parse_err(ln, &format!("malformed number {s:?}")))
}

fn index_in(ln: usize, v: i64, limit: usize, what: &str) -> Result<usize> {
    if v < 0 || v as usize >= limit {
        Err(parse_err(ln, &format!("{what} index {v} out of range 0..{limit}")))
    } else {
        Ok(v as usize)
    }
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}
