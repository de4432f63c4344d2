//! `key = value` sweep configuration files.
//!
//! Recognised keys: `n`, `m`, `k`, `budgets`, `m_values`, `policies`,
//! `trials`, `seed`, `prior_alpha`, `prior_beta`, `em_max_iter`, `em_tol`,
//! `smoothing`, `gain_mode`, `stage1_fraction`, `user_round_cap`. Lists are
//! comma separated. `#` starts a comment.
//!
//! A question sweep sets `m_values`; `budgets` then holds at most one value,
//! the fixed coverage (default 0.02), and `m` defaults to 100.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use crowdalloc::{
    EmOptions, GainMode, InstanceConfig, Policy, PolicyOptions, SweepConfig, SweepPoints,
    TrialConfig,
};

pub const KEYS: [&str; 16] = [
    "n",
    "m",
    "k",
    "budgets",
    "m_values",
    "policies",
    "trials",
    "seed",
    "prior_alpha",
    "prior_beta",
    "em_max_iter",
    "em_tol",
    "smoothing",
    "gain_mode",
    "stage1_fraction",
    "user_round_cap",
];

pub const DEFAULT_QUESTION_COVERAGE: f64 = 0.02;
pub const DEFAULT_QUESTION_SWEEP_M: usize = 100;

pub type Settings = BTreeMap<String, String>;

/// Parses `key = value` lines, rejecting unknown and repeated keys.
pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        check_key(k).with_context(|| format!("line {}", i + 1))?;
        if out.insert(k.to_string(), v.to_string()).is_some() {
            bail!("line {}: key `{k}` repeated", i + 1);
        }
    }
    Ok(out)
}

/// Applies `KEY=VALUE` overrides on top of `settings`.
pub fn apply_overrides(settings: &mut Settings, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{o}` is not KEY=VALUE"))?;
        let k = k.trim();
        check_key(k)?;
        settings.insert(k.to_string(), v.trim().to_string());
    }
    Ok(())
}

fn check_key(k: &str) -> Result<()> {
    if KEYS.contains(&k) {
        Ok(())
    } else {
        bail!("unknown key `{k}`")
    }
}

/// Reads a config file and builds a validated sweep configuration.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<SweepConfig<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut settings = parse_settings(&text)?;
    apply_overrides(&mut settings, overrides)?;
    build_sweep(&settings)
}

fn get<V: FromStr>(s: &Settings, key: &str) -> Result<Option<V>>
where
    V::Err: std::fmt::Display,
{
    s.get(key)
        .map(|v| {
            v.parse::<V>()
                .map_err(|e| anyhow!("malformed value for `{key}` ({v:?}): {e}"))
        })
        .transpose()
}

fn get_or<V: FromStr>(s: &Settings, key: &str, default: V) -> Result<V>
where
    V::Err: std::fmt::Display,
{
    Ok(get(s, key)?.unwrap_or(default))
}

fn list<V: FromStr>(s: &Settings, key: &str) -> Result<Option<Vec<V>>>
where
    V::Err: std::fmt::Display,
{
    s.get(key)
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| {
                    x.parse::<V>()
                        .map_err(|e| anyhow!("malformed entry {x:?} in `{key}`: {e}"))
                })
                .collect()
        })
        .transpose()
}

/// EM options from the `em_*` and `smoothing` keys, defaults elsewhere.
pub fn build_em(s: &Settings) -> Result<EmOptions<f64>> {
    let mut em = EmOptions::<f64>::default();
    em.max_iterations = get_or(s, "em_max_iter", em.max_iterations)?;
    em.tolerance = get_or(s, "em_tol", em.tolerance)?;
    if let Some(v) = list::<f64>(s, "smoothing")? {
        match v.as_slice() {
            [a, b] => em.smoothing = (*a, *b),
            _ => bail!("`smoothing` takes two values, got {}", v.len()),
        }
    }
    em.validate()?;
    Ok(em)
}

pub fn build_policy(s: &Settings) -> Result<PolicyOptions<f64>> {
    let mut p = PolicyOptions::<f64>::default();
    if let Some(g) = s.get("gain_mode") {
        p.gain_mode = g.parse::<GainMode>()?;
    }
    p.stage1_fraction = get_or(s, "stage1_fraction", p.stage1_fraction)?;
    p.max_labels_per_user_per_round = match s.get("user_round_cap").map(String::as_str) {
        None | Some("none") | Some("") => None,
        Some(v) => Some(
            v.parse()
                .map_err(|e| anyhow!("malformed value for `user_round_cap` ({v:?}): {e}"))?,
        ),
    };
    p.validate()?;
    Ok(p)
}

pub fn build_sweep(s: &Settings) -> Result<SweepConfig<f64>> {
    let n: usize = get(s, "n")?.ok_or_else(|| anyhow!("missing required key `n`"))?;
    let budgets: Option<Vec<f64>> = list(s, "budgets")?;
    let m_values: Option<Vec<usize>> = list(s, "m_values")?;

    let (points, m) = match m_values {
        Some(m_values) => {
            let coverage = match budgets.as_deref() {
                None => DEFAULT_QUESTION_COVERAGE,
                Some([c]) => *c,
                Some(_) => bail!("a question sweep takes at most one `budgets` value (the coverage)"),
            };
            let m = get_or(s, "m", DEFAULT_QUESTION_SWEEP_M)?;
            (SweepPoints::Questions { m_values, coverage }, m)
        }
        None => {
            let budgets = budgets.ok_or_else(|| anyhow!("missing required key `budgets` (or `m_values`)"))?;
            let m = get(s, "m")?.ok_or_else(|| anyhow!("missing required key `m`"))?;
            (SweepPoints::Budgets(budgets), m)
        }
    };

    let policies = match list::<String>(s, "policies")? {
        None => Policy::ALL.to_vec(),
        Some(p) => p
            .iter()
            .map(|x| x.parse::<Policy>())
            .collect::<Result<Vec<_>, _>>()?,
    };
    let seed = get_or(s, "seed", 0u64)?;
    let instance = InstanceConfig {
        n_users: n,
        m_questions: m,
        k_topics: get_or(s, "k", 2)?,
        reliability_prior: (get_or(s, "prior_alpha", 4.0)?, get_or(s, "prior_beta", 2.0)?),
        answer_prior: 0.5,
        seed,
    };
    let cfg = SweepConfig {
        trial: TrialConfig {
            instance,
            em: build_em(s)?,
            policy: build_policy(s)?,
        },
        points,
        policies,
        trials: get_or(s, "trials", 25)?,
        master_seed: seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn join<V: ToString>(v: &[V]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Canonical text form; `parse_settings` + `build_sweep` read it back to an
/// equal configuration.
pub fn write_config(c: &SweepConfig<f64>) -> String {
    let i = &c.trial.instance;
    let em = &c.trial.em;
    let p = &c.trial.policy;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("n", i.n_users.to_string());
    kv("m", i.m_questions.to_string());
    kv("k", i.k_topics.to_string());
    match &c.points {
        SweepPoints::Budgets(b) => kv("budgets", join(b)),
        SweepPoints::Questions { m_values, coverage } => {
            kv("budgets", coverage.to_string());
            kv("m_values", join(m_values));
        }
    }
    kv("policies", join(&c.policies));
    kv("trials", c.trials.to_string());
    kv("seed", c.master_seed.to_string());
    kv("prior_alpha", i.reliability_prior.0.to_string());
    kv("prior_beta", i.reliability_prior.1.to_string());
    kv("em_max_iter", em.max_iterations.to_string());
    kv("em_tol", em.tolerance.to_string());
    kv("smoothing", format!("{},{}", em.smoothing.0, em.smoothing.1));
    kv("gain_mode", p.gain_mode.as_str().to_string());
    kv("stage1_fraction", p.stage1_fraction.to_string());
    kv(
        "user_round_cap",
        p.max_labels_per_user_per_round
            .map_or_else(|| "none".to_string(), |c| c.to_string()),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(text: &str, overrides: &[&str]) -> Result<SweepConfig<f64>> {
        let mut s = parse_settings(text)?;
        let o: Vec<String> = overrides.iter().map(|x| x.to_string()).collect();
        apply_overrides(&mut s, &o)?;
        build_sweep(&s)
    }

    #[test]
    fn minimal_file_fills_defaults() {
        let c = build("n = 1000\nm = 100\nbudgets = 0.005, 0.01\n", &[]).unwrap();
        assert_eq!(c.trials, 25);
        assert_eq!(c.master_seed, 0);
        assert_eq!(c.policies, Policy::ALL.to_vec());
        assert_eq!(c.trial.instance.k_topics, 2);
        assert_eq!(c.trial.instance.reliability_prior, (4.0, 2.0));
        assert_eq!(c.trial.em, EmOptions::default());
        assert_eq!(c.trial.policy, PolicyOptions::default());
        assert_eq!(c.points, SweepPoints::Budgets(vec![0.005, 0.01]));
    }

    #[test]
    fn validation_and_key_errors() {
        let base = "n = 100\nm = 10\nbudgets = 0.1\n";
        assert!(build(&format!("{base}trials = 0\n"), &[]).is_err());
        assert!(build(&format!("{base}colour = red\n"), &[]).is_err());
        assert!(build("m = 10\nbudgets = 0.1\n", &[]).is_err());
        assert!(build("n = 100\nbudgets = 0.1\n", &[]).is_err());
        assert!(build(&format!("{base}trials = many\n"), &[]).is_err());
        assert!(build(&format!("{base}n = 5\n"), &[]).is_err());
        assert!(build(base, &["bogus=1"]).is_err());
        assert!(build(base, &["trials"]).is_err());
        assert!(build(&format!("{base}smoothing = 1\n"), &[]).is_err());
        assert!(build("n = 100\nm_values = 10,20\nbudgets = 0.1,0.2\n", &[]).is_err());
    }

    #[test]
    fn override_wins() {
        let c = build(
            "n = 100\nm = 10\nbudgets = 0.1\ngain_mode = absolute\n",
            &["gain_mode=relative", "trials = 3"],
        )
        .unwrap();
        assert_eq!(c.trial.policy.gain_mode, GainMode::Relative);
        assert_eq!(c.trials, 3);
    }

    #[test]
    fn question_sweep_defaults() {
        let c = build("n = 200\nm_values = 25, 50\n", &[]).unwrap();
        assert_eq!(
            c.points,
            SweepPoints::Questions {
                m_values: vec![25, 50],
                coverage: 0.02
            }
        );
        assert_eq!(c.trial.instance.m_questions, DEFAULT_QUESTION_SWEEP_M);
    }

    #[test]
    fn comments_and_caps() {
        let c = build(
            "# header\nn = 100 # users\nm = 10\nbudgets = 0.1\nuser_round_cap = 4\n\n",
            &[],
        )
        .unwrap();
        assert_eq!(c.trial.policy.max_labels_per_user_per_round, Some(4));
        let c = build("n = 100\nm = 10\nbudgets = 0.1\nuser_round_cap = none\n", &[]).unwrap();
        assert_eq!(c.trial.policy.max_labels_per_user_per_round, None);
    }

    #[test]
    fn written_config_reads_back() {
        let c = build(
            "n = 50\nm = 7\nk = 3\nbudgets = 0.1,0.3\npolicies = dynamic,random\nsmoothing = 3,1\nem_tol = 1e-8\n",
            &[],
        )
        .unwrap();
        let back = build_sweep(&parse_settings(&write_config(&c)).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
