//! Brute-force oracles. Everything here works from plain products and
//! exhaustive enumeration so it stays independent of the log-space and
//! closed-form paths in the library.
#![allow(dead_code)]

use crowdalloc::{AnswerMatrix, Label};
use rand::Rng;

/// `(p(+1, y), p(-1, y))` by direct multiplication.
pub fn joint(rels: &[f64], resp: &[Label], prior: f64) -> (f64, f64) {
    let mut pos = prior;
    let mut neg = 1.0 - prior;
    for (&f, &y) in rels.iter().zip(resp) {
        if y == Label::Pos {
            pos *= f;
            neg *= 1.0 - f;
        } else {
            pos *= 1.0 - f;
            neg *= f;
        }
    }
    (pos, neg)
}

/// Partial mutual information straight from its definition.
pub fn pmi(rels: &[f64], resp: &[Label], prior: f64) -> f64 {
    let (pos, neg) = joint(rels, resp, prior);
    let py = pos + neg;
    let term = |pxy: f64, px: f64| {
        if pxy == 0.0 {
            0.0
        } else {
            pxy * (pxy / (px * py)).ln()
        }
    };
    term(pos, prior) + term(neg, 1.0 - prior)
}

/// All `2^k` response vectors of length `k`.
pub fn all_responses(k: usize) -> Vec<Vec<Label>> {
    (0..1usize << k)
        .map(|mask| {
            (0..k)
                .map(|b| if mask >> b & 1 == 1 { Label::Pos } else { Label::Neg })
                .collect()
        })
        .collect()
}

/// Mutual information `I(X; Y)` by enumerating every `(x, y)`.
pub fn mutual_information(rels: &[f64], prior: f64) -> f64 {
    let mut total = 0.0;
    for y in all_responses(rels.len()) {
        let (pos, neg) = joint(rels, &y, prior);
        let py = pos + neg;
        for (pxy, px) in [(pos, prior), (neg, 1.0 - prior)] {
            if pxy > 0.0 {
                total += pxy * (pxy / (px * py)).ln();
            }
        }
    }
    total
}

/// Gain of adding a respondent with reliability `f`, by summing pMI over both
/// of its responses.
pub fn gain(rels: &[f64], resp: &[Label], f: f64, prior: f64) -> f64 {
    let mut ext_rels = rels.to_vec();
    ext_rels.push(f);
    let mut total = 0.0;
    for y in [Label::Pos, Label::Neg] {
        let mut ext = resp.to_vec();
        ext.push(y);
        total += pmi(&ext_rels, &ext, prior);
    }
    total - pmi(rels, resp, prior)
}

/// Bayes posterior of +1 by evaluating both label values.
pub fn posterior(rels: &[f64], resp: &[Label], prior: f64) -> f64 {
    let (pos, neg) = joint(rels, resp, prior);
    pos / (pos + neg)
}

/// Observed-data log-likelihood for a single-topic instance with one
/// reliability per user.
pub fn log_likelihood(a: &AnswerMatrix, per_user: &[f64], prior: f64) -> f64 {
    (0..a.m_questions())
        .map(|j| {
            let col = a.column(j);
            let rels: Vec<f64> = col.iter().map(|&(u, _)| per_user[u]).collect();
            let resp: Vec<Label> = col.iter().map(|&(_, y)| y).collect();
            let (pos, neg) = joint(&rels, &resp, prior);
            (pos + neg).ln()
        })
        .sum()
}

/// Complete-data likelihood of a label vector with each user's reliability
/// set to its maximum-likelihood value (agreement fraction).
pub fn profiled_likelihood(a: &AnswerMatrix, labels: &[Label]) -> f64 {
    let mut lik = 1.0;
    for u in 0..a.n_users() {
        let row = a.row(u);
        if row.is_empty() {
            continue;
        }
        let agree = row.iter().filter(|&&(q, y)| y == labels[q]).count();
        let n = row.len();
        let p = agree as f64 / n as f64;
        lik *= p.powi(agree as i32) * (1.0 - p).powi((n - agree) as i32);
    }
    lik
}

/// Every label vector attaining the maximal profiled likelihood.
pub fn profiled_maximizers(a: &AnswerMatrix) -> Vec<Vec<Label>> {
    let cands = all_responses(a.m_questions());
    let scores: Vec<f64> = cands.iter().map(|l| profiled_likelihood(a, l)).collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    cands
        .into_iter()
        .zip(scores)
        .filter(|(_, s)| (best - s).abs() <= 1e-12 * best.abs().max(1e-300))
        .map(|(l, _)| l)
        .collect()
}

/// Mean agreement of responders with `labels`, averaged over users with at
/// least one response.
pub fn mean_agreement(a: &AnswerMatrix, labels: &[Label]) -> f64 {
    let rates: Vec<f64> = (0..a.n_users())
        .filter(|&u| !a.row(u).is_empty())
        .map(|u| {
            let row = a.row(u);
            row.iter().filter(|&&(q, y)| y == labels[q]).count() as f64 / row.len() as f64
        })
        .collect();
    rates.iter().sum::<f64>() / rates.len() as f64
}

/// Random open-interval reliability, occasionally exactly 0.5.
pub fn random_reliability<R: Rng>(rng: &mut R) -> f64 {
    if rng.random_bool(0.1) {
        0.5
    } else {
        rng.random_range(0.02..0.98)
    }
}

pub fn random_label<R: Rng>(rng: &mut R) -> Label {
    if rng.random_bool(0.5) {
        Label::Pos
    } else {
        Label::Neg
    }
}

/// Dense `n × m` answer matrix from the one-coin model.
pub fn dense_instance<R: Rng>(n: usize, m: usize, rng: &mut R) -> (AnswerMatrix, Vec<Label>, Vec<f64>) {
    let truth: Vec<Label> = (0..m).map(|_| random_label(rng)).collect();
    let rels: Vec<f64> = (0..n).map(|_| rng.random_range(0.55..0.95)).collect();
    let mut a = AnswerMatrix::new(n, m);
    for (u, &p) in rels.iter().enumerate() {
        for (q, &t) in truth.iter().enumerate() {
            let y = if rng.random_bool(p) { t } else { t.flip() };
            a.apply_label(u, q, y).unwrap();
        }
    }
    (a, truth, rels)
}
