//! End-to-end acceptance checks. Runs as a plain binary so each criterion
//! prints one PASS/FAIL line whatever the outcome; exits non-zero if any fail.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::time::Instant;

use crowdalloc::harness::labels_per_question;
use crowdalloc::*;
use crowdalloc_cli::run_cli;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 2016;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn combined_ci(a: &ResultRow, b: &ResultRow) -> f64 {
    a.ci95 + b.ci95
}

fn budget_ordering() -> Verdict {
    let budgets: Vec<f64> = (0..10).map(|i| 0.005 + 0.015 * i as f64 / 9.0).collect();
    let cfg = SweepConfig::<f64> {
        trial: TrialConfig {
            instance: InstanceConfig {
                n_users: 1000,
                m_questions: 100,
                k_topics: 2,
                reliability_prior: (4.0, 2.0),
                answer_prior: 0.5,
                seed: MASTER_SEED,
            },
            // pseudo-counts matching the Beta(4, 2) reliability prior
            em: EmOptions {
                smoothing: (3.0, 1.0),
                ..EmOptions::default()
            },
            policy: PolicyOptions::default(),
        },
        points: SweepPoints::Budgets(budgets.clone()),
        policies: vec![Policy::Random, Policy::Dynamic],
        trials: 25,
        master_seed: MASTER_SEED,
    };
    let out = sweep(&cfg).expect("budget sweep");
    let row = |p, i| out.table.get(p, i).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for i in [0, 1] {
        let (r, d) = (row(Policy::Random, i), row(Policy::Dynamic, i));
        let gap = r.mean_error - d.mean_error;
        let need = combined_ci(r, d);
        pass &= gap > need;
        parts.push(format!(
            "s={:.4}: random {:.4} dynamic {:.4} gap {:.4} vs {:.4}",
            budgets[i], r.mean_error, d.mean_error, gap, need
        ));
    }
    let (r, d) = (row(Policy::Random, 9), row(Policy::Dynamic, 9));
    let diff = (r.mean_error - d.mean_error).abs();
    pass &= diff <= 0.05;
    parts.push(format!(
        "s=0.02: random {:.4} dynamic {:.4} |diff| {:.4} <= 0.05",
        r.mean_error, d.mean_error, diff
    ));
    verdict(pass, parts.join("; "))
}

fn question_ordering() -> Verdict {
    let m_values = vec![25, 50, 100, 200, 400];
    let cfg = SweepConfig::<f64> {
        trial: TrialConfig {
            instance: InstanceConfig {
                n_users: 200,
                m_questions: 100,
                k_topics: 2,
                reliability_prior: (4.0, 2.0),
                answer_prior: 0.5,
                seed: MASTER_SEED,
            },
            em: EmOptions {
                smoothing: (3.0, 1.0),
                ..EmOptions::default()
            },
            policy: PolicyOptions::default(),
        },
        points: SweepPoints::Questions {
            m_values: m_values.clone(),
            coverage: 0.02,
        },
        policies: Policy::ALL.to_vec(),
        trials: 10,
        master_seed: MASTER_SEED,
    };
    let out = sweep(&cfg).expect("question sweep");
    let row = |p, i| out.table.get(p, i).unwrap();

    let mut competitive = true;
    let mut parts = Vec::new();
    for (i, m) in m_values.iter().enumerate() {
        let (r, d, o) = (row(Policy::Random, i), row(Policy::Dynamic, i), row(Policy::OneShot, i));
        competitive &= d.mean_error <= r.mean_error + r.std_dev;
        parts.push(format!(
            "m={m}: random {:.4}±{:.4} one_shot {:.4}±{:.4} dynamic {:.4}±{:.4}",
            r.mean_error, r.std_dev, o.mean_error, o.std_dev, d.mean_error, d.std_dev
        ));
    }
    let mut one_shot_worse = false;
    for i in [0, m_values.len() - 1] {
        let (d, o) = (row(Policy::Dynamic, i), row(Policy::OneShot, i));
        let sd = (d.std_dev.powi(2) + o.std_dev.powi(2)).sqrt();
        one_shot_worse |= o.mean_error - d.mean_error > sd;
    }
    parts.push(format!(
        "dynamic within 1 sd of random: {competitive}; one-shot worse at an extreme: {one_shot_worse}"
    ));
    verdict(competitive && one_shot_worse, parts.join("; "))
}

fn evidence(rels: &[f64], resp: &[Label], prior: f64) -> QuestionEvidence<f64> {
    QuestionEvidence::new(0, resp.iter().copied().enumerate().collect(), rels.to_vec(), prior).unwrap()
}

fn pmi_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst = 0.0f64;
    let mut nonneg = true;
    let mut zero_ok = true;
    for case in 0..200 {
        let k = case % 4;
        let uninformative = case % 10 == 9;
        let rels: Vec<f64> = (0..k)
            .map(|_| if uninformative { 0.5 } else { support::random_reliability(&mut rng) })
            .collect();
        let prior = if case % 2 == 0 { 0.5 } else { rng.random_range(0.05..0.95) };
        let all_half = rels.iter().all(|&f| f == 0.5);
        let mut total = 0.0;
        for y in support::all_responses(k) {
            let v = pmi(&evidence(&rels, &y, prior));
            nonneg &= v >= 0.0;
            if all_half {
                zero_ok &= v == 0.0;
            }
            total += v;
        }
        worst = worst.max((total - support::mutual_information(&rels, prior)).abs());
    }
    verdict(
        worst <= 1e-9 && nonneg && zero_ok,
        format!("max |Σ pmi − I| {worst:.2e}; pmi ≥ 0: {nonneg}; zero when uninformative: {zero_ok}"),
    )
}

fn gain_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 1);
    let opts = PolicyOptions::<f64>::default();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(0..=4);
        let rels: Vec<f64> = (0..k).map(|_| support::random_reliability(&mut rng)).collect();
        let resp: Vec<Label> = (0..k).map(|_| support::random_label(&mut rng)).collect();
        let prior = rng.random_range(0.05..0.95);
        let f = support::random_reliability(&mut rng);
        let got = expected_gain(&evidence(&rels, &resp, prior), 99, f, &opts).unwrap();
        worst = worst.max((got - support::gain(&rels, &resp, f, prior)).abs());
    }
    let empty = evidence(&[], &[], 0.5);
    let at_half = expected_gain(&empty, 0, 0.5, &opts).unwrap();
    let perfect = expected_gain(&empty, 0, 1.0, &opts).unwrap();
    let at_08 = expected_gain(&empty, 0, 0.8, &opts).unwrap();
    let pass = worst <= 1e-12
        && at_half == 0.0
        && (perfect - 2f64.ln()).abs() <= 1e-9
        && (at_08 - 0.192745).abs() <= 1e-6;
    verdict(
        pass,
        format!("max |gain − brute| {worst:.2e}; gain(0.5) {at_half}; gain(1) {perfect:.12}; gain(0.8) {at_08:.7}"),
    )
}

/// Every answer matrix over {−1, 0, +1} of the given shape.
fn all_matrices(n: usize, m: usize) -> impl Iterator<Item = AnswerMatrix> {
    let cells = n * m;
    (0..3usize.pow(cells as u32)).map(move |mut code| {
        let mut a = AnswerMatrix::new(n, m);
        for c in 0..cells {
            match code % 3 {
                1 => a.apply_label(c / m, c % m, Label::Pos).unwrap(),
                2 => a.apply_label(c / m, c % m, Label::Neg).unwrap(),
                _ => {}
            }
            code /= 3;
        }
        a
    })
}

fn em_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED + 2);

    let mut e_worst = 0.0f64;
    let mut matrices = 0usize;
    for n in 1..=3 {
        for m in 1..=3 {
            let topics: Vec<usize> = (0..m).map(|j| j % 2).collect();
            let per_topic: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.random_range(0.01..0.99)).collect())
                .collect();
            let f = expand_reliabilities(&per_topic, &topics).unwrap();
            let prior = rng.random_range(0.2..0.8);
            for a in all_matrices(n, m) {
                matrices += 1;
                let q = e_step(&a, &f, prior);
                for j in 0..m {
                    let col = a.column(j);
                    let rels: Vec<f64> = col.iter().map(|&(u, _)| per_topic[u][topics[j]]).collect();
                    let resp: Vec<Label> = col.iter().map(|&(_, y)| y).collect();
                    e_worst = e_worst.max((q[j] - support::posterior(&rels, &resp, prior)).abs());
                }
            }
        }
    }

    // Observed-data likelihood of the t-th M-step estimate, via the oracle,
    // for t = 1, 2, ... . Negligible smoothing makes EM a plain ML climb.
    let mut ll_ok = true;
    for _ in 0..40 {
        let n = rng.random_range(3..8);
        let m = rng.random_range(3..10);
        let (dense, _, _) = support::dense_instance(n, m, &mut rng);
        let mut a = AnswerMatrix::new(n, m);
        for (u, j, y) in dense.triples() {
            if rng.random_bool(0.7) {
                a.apply_label(u, j, y).unwrap();
            }
        }
        if a.is_empty() {
            continue;
        }
        let mut prev = f64::NEG_INFINITY;
        for t in 1..=25 {
            let opts = EmOptions {
                max_iterations: t,
                tolerance: 1e-300,
                smoothing: (1e-9, 1e-9),
                label_prior: 0.5,
            };
            let out = run_em(&a, &vec![0; m], 1, &opts).unwrap();
            let per_user: Vec<f64> = out.reliabilities.per_topic.iter().map(|r| r[0]).collect();
            let ll = support::log_likelihood(&a, &per_user, 0.5);
            ll_ok &= ll >= prev - 1e-9;
            prev = ll;
        }
    }

    let mut hits = 0;
    for seed in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(MASTER_SEED.wrapping_mul(1000) + seed);
        let (a, _, _) = support::dense_instance(3, 3, &mut r);
        let out = run_em(&a, &[0; 3], 1, &EmOptions::<f64>::default()).unwrap();
        let maxima: Vec<_> = support::profiled_maximizers(&a)
            .into_iter()
            .filter(|l| support::mean_agreement(&a, l) >= 0.5)
            .collect();
        if maxima.contains(&out.labels.hard_labels) {
            hits += 1;
        }
    }

    verdict(
        e_worst <= 1e-9 && ll_ok && hits >= 95,
        format!(
            "e-step max err {e_worst:.2e} over {matrices} matrices; likelihood monotone: {ll_ok}; 3x3 maximizer match {hits}/100"
        ),
    )
}

fn degenerate_instances() -> Verdict {
    let base = |prior: (f64, f64)| TrialConfig::<f64> {
        instance: InstanceConfig {
            n_users: 100,
            m_questions: 50,
            k_topics: 2,
            reliability_prior: prior,
            answer_prior: 0.5,
            seed: MASTER_SEED,
        },
        em: EmOptions::default(),
        policy: PolicyOptions::default(),
    };

    // Beta(1e9, 1e-9) puts all its mass at 1.
    let perfect = base((1e9, 1e-9));
    let mut worst = 0.0f64;
    for r in [1usize, 2, 3, 5, 10] {
        let coverage = r as f64 / 100.0;
        assert_eq!(labels_per_question(coverage, 100), r);
        for policy in Policy::ALL {
            for t in 0..5 {
                let seed = harness::trial_seed(MASTER_SEED, policy, r, t);
                let res = run_policy_trial(&perfect, policy, coverage, seed).unwrap();
                worst = worst.max(res.final_error);
            }
        }
    }

    let coin = base((1e9, 1e9));
    let mut means = Vec::new();
    for policy in Policy::ALL {
        let errs: Vec<f64> = (0..25)
            .map(|t| {
                let seed = harness::trial_seed(MASTER_SEED, policy, 0, t);
                run_policy_trial(&coin, policy, 0.05, seed).unwrap().final_error
            })
            .collect();
        means.push(aggregate(&errs).unwrap().mean);
    }
    let pass = worst == 0.0 && means.iter().all(|m| (0.4..=0.6).contains(m));
    verdict(
        pass,
        format!(
            "perfect workers worst error {worst}; coin-flip means random {:.3} one_shot {:.3} dynamic {:.3}",
            means[0], means[1], means[2]
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("det.cfg");
    std::fs::write(
        &cfg,
        "n = 200\nm = 40\nk = 2\nbudgets = 0.01, 0.02, 0.03\ntrials = 4\nseed = 2016\n",
    )
    .unwrap();
    let mut runs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let code = run_cli([
            "crowdalloc",
            "sweep-budget",
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        runs.push((
            std::fs::read(out.join("raw.csv")).unwrap(),
            std::fs::read(out.join("aggregate.csv")).unwrap(),
        ));
    }
    let raw_same = runs[0].0 == runs[1].0;
    let agg_same = runs[0].1 == runs[1].1;
    verdict(
        raw_same && agg_same,
        format!("raw.csv identical: {raw_same}; aggregate.csv identical: {agg_same}"),
    )
}

fn main() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check); 7] = [
        ("1 budget sweep: dynamic beats random at small budgets", budget_ordering),
        ("2 question sweep: dynamic competitive, one-shot worse", question_ordering),
        ("3 pmi identity", pmi_identity),
        ("4 gain oracle", gain_oracle),
        ("5 EM correctness", em_correctness),
        ("6 degenerate instances", degenerate_instances),
        ("7 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{tag}] criterion {name} ({:.1}s): {}",
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
