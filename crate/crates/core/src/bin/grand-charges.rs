//! Command-line front end: `simulate`, `drift-study`, `identities`.
//!
//! Failures exit with status 1 and print one JSON line
//! `{"error": <kind>, "message": <text>}` on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grand_charges::experiments::{self, drift_study, identities, preset, ExperimentConfig};
use grand_charges::integrators::Method;
use grand_charges::{Error, Result};

#[derive(Parser)]
#[command(name = "grand-charges", version, about = "Graph diffusion charges and their integrators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the integration method (fe, be, im, im-left).
    #[arg(long, global = true)]
    method: Option<String>,
    /// Seed for randomized probes and checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment (fig1-fe, fig1-im, fig2-fe, fig2-im).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one experiment and write CSV, SVG and a JSON summary.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Output directory (default: the config's, else `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// One-step charge drift against h and epsilon, with slope fits.
    DriftStudy {
        #[command(flatten)]
        source: Source,
        /// Comma-separated step sizes; fractions like 1/50 are accepted.
        #[arg(long, default_value = "1/50,1/100,1/200,1/400")]
        h: String,
        #[arg(long, default_value = "0.2,0.1,0.05")]
        eps: String,
        /// Step size used for the epsilon sweep.
        #[arg(long, default_value = "1/100")]
        h_eps: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random checks of the matrix identities behind conservation.
    Identities {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse `{s}` as a number"));
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            Ok(a / b)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_number).collect()
}

fn load(source: &Source) -> Result<ExperimentConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => ExperimentConfig::load(path),
        (None, Some(name)) => preset(name),
        (None, None) => Err(Error::InvalidArgument("need --config or --preset".into())),
    }
}

fn apply_method(cfg: &mut ExperimentConfig, method: &Option<String>) -> Result<()> {
    if let Some(m) = method {
        let m: Method = m.parse()?;
        cfg.method = m.name().into();
    }
    Ok(())
}

fn simulate(cli: &Cli, source: &Source, out: &Option<PathBuf>, o: &Overrides) -> Result<()> {
    let mut cfg = load(source)?;
    apply_method(&mut cfg, &cli.method)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t1) = o.t1 {
        cfg.t1 = t1;
    }
    if let Some(steps) = o.steps {
        cfg.steps = steps;
    }
    if let Some(a) = &o.activation {
        cfg.attention.activation = a.clone();
    }
    if let Some(eps) = o.eps {
        cfg.epsilon = eps;
    }
    let art = experiments::run(&cfg, out.as_deref())?;
    println!("{}", art.summary);
    println!("trace: {}", art.csv_path.display());
    for p in &art.svg_paths {
        println!("plot: {}", p.display());
    }
    println!("summary: {}", art.summary_path.display());
    Ok(())
}

fn drift(cli: &Cli, source: &Source, h: &str, eps: &str, h_eps: &str, out: &Option<PathBuf>) -> Result<()> {
    let mut cfg = load(source)?;
    apply_method(&mut cfg, &cli.method)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let study = drift_study(&cfg, &parse_list(h)?, &parse_list(eps)?, parse_number(h_eps)?, seed)?;
    println!("{}", study.report());
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}-drift.csv", cfg.display_name()));
    study.write_csv(&path)?;
    println!("table: {}", Path::new(&path).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let line = serde_json::json!({"error": "usage", "message": e.to_string().trim()});
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Simulate { source, out, overrides } => simulate(&cli, source, out, overrides),
        Command::DriftStudy { source, h, eps, h_eps, out } => drift(&cli, source, h, eps, h_eps, out),
        Command::Identities { trials } => identities(*trials, cli.seed.unwrap_or(0)).map(|r| {
            println!("trials: {} (seed {})", r.trials, r.seed);
            println!("E^T K + K E                       max residual {:.3e}", r.canonical);
            println!("B^T K + K B - K/eps               max residual {:.3e}", r.rescaled);
            println!("E^T K E - (1/eps) diag(C,C) K     max residual {:.3e}", r.congruence);
            println!("E^T K E - (1/eps) [[0,C],[C,0]] K max residual {:.3e}", r.congruence_offdiagonal);
            println!("max commutator of sampled pairs   {:.3e}", r.commutator);
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
