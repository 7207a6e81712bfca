//! Config → trajectory → CSV, SVG and a JSON summary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use super::svg::{self, Panel};
use super::trace::{self, charge_column};
use crate::charges::{commutes, COMMUTE_TOL};
use crate::error::{Error, Result};
use crate::integrators::{integrate_partial, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeSummary {
    pub column: String,
    pub generator: String,
    pub commutes: bool,
    pub commutator_residual: f64,
    pub initial: f64,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub method: String,
    pub steps: usize,
    pub steps_completed: usize,
    pub h: f64,
    pub epsilon: f64,
    pub charges: Vec<ChargeSummary>,
    pub hamiltonian_initial: f64,
    pub hamiltonian_final: f64,
    pub max_fixed_point_iterations: usize,
    pub max_linear_residual: f64,
    pub wall_time_ms: f64,
    pub frozen_denominators: Option<Vec<f64>>,
    /// Machine-readable kind and message of the failure, if the run stopped early.
    pub failure: Option<(String, String)>,
}

impl RunSummary {
    pub fn drift(&self, column: &str) -> Option<f64> {
        self.charges.iter().find(|c| c.column == column).map(|c| c.drift)
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: method {}, {}/{} steps, h = {:.6}, eps = {}, {:.1} ms",
            self.name, self.method, self.steps_completed, self.steps, self.h, self.epsilon, self.wall_time_ms
        )?;
        for c in &self.charges {
            writeln!(
                f,
                "  {:<4} {:<4} commutes={:<5} drift={:.3e}",
                c.column, c.generator, c.commutes, c.drift
            )?;
        }
        write!(f, "  H: {:.6e} -> {:.6e}", self.hamiltonian_initial, self.hamiltonian_final)?;
        if let Some(d) = &self.frozen_denominators {
            write!(f, "\n  frozen softmax denominators: {d:?}")?;
        }
        if let Some((kind, msg)) = &self.failure {
            write!(f, "\n  stopped early: {kind}: {msg}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub svg_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
}

/// Integrates the experiment, keeping the computed prefix on failure.
pub fn simulate(exp: &Experiment) -> Result<(Trajectory, Option<Error>)> {
    integrate_partial(&exp.initial, &exp.grid, &exp.solver, &exp.model)
}

fn summarize(exp: &Experiment, tr: &Trajectory, rows: &[Vec<f64>], wall_ms: f64, failure: Option<&Error>) -> RunSummary {
    let w = exp.model.params().w_sym();
    let charges = exp
        .charges
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let col = 2 + k;
            let q0 = rows[0][col];
            let drift = rows.iter().fold(0.0f64, |m, row| m.max((row[col] - q0).abs()));
            let (ok, res) = commutes(w, r, COMMUTE_TOL);
            ChargeSummary {
                column: charge_column(r),
                generator: r.label(),
                commutes: ok,
                commutator_residual: res,
                initial: q0,
                drift,
            }
        })
        .collect();
    let hcol = 2 + exp.charges.len();
    RunSummary {
        name: exp.name.clone(),
        method: exp.solver.method.name().into(),
        steps: exp.grid.steps(),
        steps_completed: tr.states.len() - 1,
        h: exp.grid.h(),
        epsilon: exp.initial.epsilon(),
        charges,
        hamiltonian_initial: rows[0][hcol],
        hamiltonian_final: rows[rows.len() - 1][hcol],
        max_fixed_point_iterations: tr.diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0),
        max_linear_residual: tr.diagnostics.iter().fold(0.0, |m, d| m.max(d.linear_residual)),
        wall_time_ms: wall_ms,
        frozen_denominators: exp.denominators.clone(),
        failure: failure.map(|e| (e.kind().to_string(), e.to_string())),
    }
}

fn write_plots(dir: &Path, stem: &str, exp: &Experiment, rows: &[Vec<f64>], summary: &RunSummary) -> Result<Vec<PathBuf>> {
    let t: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let series = |col: usize| -> Vec<(f64, f64)> { t.iter().zip(rows).map(|(&t, r)| (t, r[col])).collect() };
    let charge_panels: Vec<Panel> = summary
        .charges
        .iter()
        .enumerate()
        .map(|(k, c)| Panel {
            title: format!("{} ({}{})", c.column, c.generator, if c.commutes { ", commutes with W" } else { "" }),
            points: series(2 + k),
            note: format!("drift {:.3e}", c.drift),
        })
        .collect();
    let hcol = 2 + exp.charges.len();
    let h_panels = vec![
        Panel {
            title: "H".into(),
            points: series(hcol),
            note: format!("final {:.3e}", summary.hamiltonian_final),
        },
        Panel {
            title: "dH/dt".into(),
            points: series(hcol + 1),
            note: String::new(),
        },
    ];
    let title = format!("{} — {}", exp.name, exp.solver.method);
    let mut paths = Vec::new();
    for (suffix, panels) in [("charges", charge_panels), ("hamiltonian", h_panels)] {
        let path = dir.join(format!("{stem}-{suffix}.svg"));
        std::fs::write(&path, svg::render(&title, &panels))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Runs `cfg` and writes `<stem>.csv`, `<stem>-charges.svg`,
/// `<stem>-hamiltonian.svg` and `<stem>-summary.json` into `out_dir`
/// (or the config's output dir, or `out`).
///
/// If integration fails part-way, the files are still written for the
/// computed prefix and the integration error is returned.
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunArtifacts> {
    let exp = cfg.build()?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let stem = cfg.output.prefix.clone().unwrap_or_else(|| exp.name.clone());
    std::fs::create_dir_all(&dir)?;

    let start = Instant::now();
    let (tr, failure) = simulate(&exp)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let rows = trace::rows(&tr.states, &exp.charges, &exp.model)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    trace::write(&csv_path, &trace::header(&exp.charges, exp.model.n(), exp.model.d()), &rows)?;
    let summary = summarize(&exp, &tr, &rows, wall_ms, failure.as_ref());
    let svg_paths = write_plots(&dir, &stem, &exp, &rows, &summary)?;
    let summary_path = dir.join(format!("{stem}-summary.json"));
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;

    match failure {
        Some(err) => Err(err),
        None => Ok(RunArtifacts {
            csv_path,
            svg_paths,
            summary_path,
            summary,
        }),
    }
}
