//! Command-line front end for `crowdalloc`.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors.

pub mod config;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crowdalloc::formats::{read_answers, read_instance, write_answers, write_instance, write_labels};
use crowdalloc::harness::{labels_per_question, SimulatedCrowd};
use crowdalloc::{
    error_rate, random_assignment, run_em, sample_instance, sweep, AnswerMatrix, GroundTruth,
    ResponseOracle, SweepConfig, SweepPoints,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Parser)]
#[command(name = "crowdalloc", version, about = "Budgeted crowdsourcing simulation, estimation and allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an instance and random responses at the first budget.
    Simulate(Common),
    /// Run EM on an instance's answer file and write labels.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        answers: PathBuf,
    },
    /// Error versus coverage fraction.
    SweepBudget {
        #[command(flatten)]
        common: Common,
        /// Worker threads; 0 picks automatically.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Error versus number of questions.
    SweepQuestions {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Draw an aggregate CSV as an SVG line chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "mean error by policy")]
        title: String,
    },
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(c) => simulate(&c),
        Command::Estimate {
            common,
            instance,
            answers,
        } => estimate(&common, &instance, &answers),
        Command::SweepBudget { common, threads } => run_sweep(&common, threads, SweepKind::Budget),
        Command::SweepQuestions { common, threads } => {
            run_sweep(&common, threads, SweepKind::Questions)
        }
        Command::Plot { input, out, title } => plot(&input, &out, &title),
    }
}

fn load_config(c: &Common) -> Result<SweepConfig<f64>> {
    let path = c.config.as_ref().context("--config is required for this command")?;
    config::parse_config(path, &c.overrides)
}

fn out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    let inst = &cfg.trial.instance;
    let coverage = match &cfg.points {
        SweepPoints::Budgets(b) => b[0],
        SweepPoints::Questions { coverage, .. } => *coverage,
    };
    let truth: GroundTruth<f64> =
        sample_instance(inst, &mut ChaCha8Rng::seed_from_u64(inst.seed))?;
    let r = labels_per_question(coverage, inst.n_users);
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed.wrapping_add(1));
    let mut answers = AnswerMatrix::new(inst.n_users, inst.m_questions);
    let step = random_assignment::<f64, _>(
        inst.n_users,
        inst.m_questions,
        r,
        &answers.assignment(),
        &mut rng,
    )?;
    let mut crowd = SimulatedCrowd::new(&truth, inst.seed.wrapping_add(2));
    for &(u, j) in &step.pairs {
        answers.apply_label(u, j, crowd.respond(u, j))?;
    }
    out_dir(&c.out)?;
    std::fs::write(c.out.join("instance.txt"), write_instance(&truth, inst.seed))?;
    std::fs::write(c.out.join("answers.txt"), write_answers(&answers))?;
    println!(
        "wrote {} and {} ({} responses)",
        c.out.join("instance.txt").display(),
        c.out.join("answers.txt").display(),
        answers.len()
    );
    Ok(())
}

fn estimate(c: &Common, instance: &Path, answers: &Path) -> Result<()> {
    let mut settings = match &c.config {
        Some(p) => config::parse_settings(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => config::Settings::new(),
    };
    config::apply_overrides(&mut settings, &c.overrides)?;
    let em = config::build_em(&settings)?;

    let inst_text = std::fs::read_to_string(instance)
        .with_context(|| format!("reading {}", instance.display()))?;
    let inst = read_instance::<f64>(&inst_text)
        .with_context(|| format!("parsing {}", instance.display()))?;
    let truth = inst.truth;
    let ans_text = std::fs::read_to_string(answers)
        .with_context(|| format!("reading {}", answers.display()))?;
    let a = read_answers(&ans_text, truth.n_users(), truth.m_questions())
        .with_context(|| format!("parsing {}", answers.display()))?;

    let out = run_em(&a, &truth.topics, truth.k_topics, &em)?;
    out_dir(&c.out)?;
    let path = c.out.join("labels.txt");
    std::fs::write(&path, write_labels(&out.labels))?;
    println!(
        "{} iterations (converged: {}), error rate {:.4}; wrote {}",
        out.iterations,
        out.converged,
        error_rate(&out.labels, &truth)?,
        path.display()
    );
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SweepKind {
    Budget,
    Questions,
}

fn run_sweep(c: &Common, threads: usize, kind: SweepKind) -> Result<()> {
    let cfg = load_config(c)?;
    let note = match (kind, &cfg.points) {
        (SweepKind::Budget, SweepPoints::Budgets(_)) => None,
        (SweepKind::Questions, SweepPoints::Questions { .. }) => Some(
            "each sweep point samples a fresh instance with m set to the point value",
        ),
        (SweepKind::Budget, _) => bail!("sweep-budget needs `budgets` and no `m_values`"),
        (SweepKind::Questions, _) => bail!("sweep-questions needs `m_values`"),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    let out = pool.install(|| sweep(&cfg))?;

    out_dir(&c.out)?;
    let name = if kind == SweepKind::Budget { "budget" } else { "questions" };
    let meta = report::metadata(name, &cfg, note);
    report::write_with_sidecar(&c.out, "raw.csv", &report::raw_csv(&out.trials), &meta)?;
    let agg = report::write_with_sidecar(
        &c.out,
        "aggregate.csv",
        &report::aggregate_csv(&out.table),
        &meta,
    )?;
    for r in &out.table.rows {
        println!(
            "{:<9} {:>8} mean {:.4} ± {:.4}",
            r.policy.as_str(),
            r.sweep_point.to_string(),
            r.mean_error,
            r.ci95
        );
    }
    println!("wrote {}", agg.display());
    Ok(())
}

fn plot(input: &Path, out: &Path, title: &str) -> Result<()> {
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let rows = report::read_aggregate_csv(&text)?;
    out_dir(out)?;
    let path = out.join("plot.svg");
    std::fs::write(&path, svg::render(&rows, title))?;
    println!("wrote {}", path.display());
    Ok(())
}
