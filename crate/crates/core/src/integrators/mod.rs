//! Time stepping for `ẏ = E(y) y` in the canonical chart.
//!
//! Exponential factors of `E` are taken at the stage time of each scheme:
//! `t_k` for forward Euler, `t_{k+1}` for backward Euler, `t_{k+1/2}` for the
//! midpoint family.

pub mod blockwise;
pub mod lu;

use std::fmt;
use std::str::FromStr;

pub use blockwise::{solve_blockwise, solve_dense, solve_dense_reference, BlockwiseSolver, LinearSolve};
pub use lu::{LuFactor, CONDITION_LIMIT};

use crate::dynamics::{Model, SystemMatrixE};
use crate::error::{Error, Result};
use crate::graph_model::{Chart, FeatureMatrix, PhaseVector};

/// Absolute floor of the fixed-point convergence test.
pub const ABSOLUTE_FLOOR: f64 = 1e-14;

/// Uniform grid `t_k = t0 + k h`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    t0: f64,
    t1: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::NonFinite("grid bounds"));
        }
        if t1 <= t0 {
            return Err(Error::InvalidArgument(format!("grid needs t1 > t0, got [{t0}, {t1}]")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        Ok(Self { t0, t1, steps })
    }

    /// The degenerate grid `{t0}` with no steps.
    pub fn single_point(t0: f64) -> Self {
        Self { t0, t1: t0, steps: 0 }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            (self.t1 - self.t0) / self.steps as f64
        }
    }

    /// `t_k`, with `t_N = t1` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.h()
        }
    }
}

/// Where the midpoint family freezes the nonlinearity of `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Xi {
    /// `E(y_k)`, a single linear solve per step.
    Left,
    /// `E((y_k + y_{k+1})/2)` by fixed-point iteration.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ForwardEuler,
    BackwardEuler,
    Midpoint(Xi),
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ForwardEuler,
        Method::BackwardEuler,
        Method::Midpoint(Xi::Midpoint),
        Method::Midpoint(Xi::Left),
    ];

    /// Short name used by configs and the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Method::ForwardEuler => "fe",
            Method::BackwardEuler => "be",
            Method::Midpoint(Xi::Midpoint) => "im",
            Method::Midpoint(Xi::Left) => "im-left",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}` (fe, be, im, im-left)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Relative infinity-norm tolerance on the fixed-point update.
    pub fp_tol: f64,
    pub fp_max_iters: usize,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            fp_tol: 1e-12,
            fp_max_iters: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fp_tol > 0.0 && self.fp_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("fp_tol must be positive, got {}", self.fp_tol)));
        }
        if self.fp_max_iters == 0 {
            return Err(Error::InvalidArgument("fp_max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// Linear solves performed (0 for forward Euler).
    pub iterations: usize,
    /// Last fixed-point update, infinity norm.
    pub update: f64,
    /// `‖A y − b‖∞` of the last linear solve.
    pub linear_residual: f64,
    /// Condition estimate of the last factorization.
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: PhaseVector,
    /// Flat state at which `E` was frozen for the accepted update.
    pub frozen_at: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn converged(update: f64, reference: &[f64], tol: f64) -> bool {
    update <= tol * inf_norm(reference) || update <= ABSOLUTE_FLOOR
}

fn positions_of(s: &PhaseVector, flat: &[f64]) -> Result<FeatureMatrix> {
    FeatureMatrix::new(s.n(), s.d(), flat[..s.n() * s.d()].to_vec())
}

fn finish(s: &PhaseVector, flat: &[f64], h: f64) -> Result<PhaseVector> {
    PhaseVector::from_flat(Chart::Canonical, s.n(), s.d(), flat, s.t() + h, s.epsilon())
}

/// `‖(I − τE) y − b‖∞`.
fn residual(e: &SystemMatrixE, tau: f64, y: &[f64], b: &[f64]) -> f64 {
    let ey = e.apply(y);
    y.iter()
        .zip(&ey)
        .zip(b)
        .fold(0.0, |m, ((yv, ev), bv)| m.max((yv - tau * ev - bv).abs()))
}

fn prepare(s: &PhaseVector, h: f64, model: &Model) -> Result<()> {
    s.expect_chart(Chart::Canonical)?;
    model.check_state(s)?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be finite and non-negative, got {h}")));
    }
    Ok(())
}

/// `y_{k+1} = y_k + h E(y_k) y_k`.
pub fn step_forward_euler(s: &PhaseVector, h: f64, model: &Model) -> Result<StepOutcome> {
    prepare(s, h, model)?;
    let y = s.to_flat();
    let e = model.system_e(s.positions(), s.t(), s.epsilon())?;
    let next: Vec<f64> = y.iter().zip(e.apply(&y)).map(|(a, b)| a + h * b).collect();
    Ok(StepOutcome {
        state: finish(s, &next, h)?,
        frozen_at: y,
        diagnostics: StepDiagnostics::default(),
    })
}

/// `(I − h E(y_{k+1})) y_{k+1} = y_k`, by fixed-point iteration starting
/// from `y_k`, each iterate a linear solve at the previous one.
pub fn step_backward_euler(s: &PhaseVector, h: f64, model: &Model, cfg: &SolverConfig) -> Result<StepOutcome> {
    prepare(s, h, model)?;
    cfg.validate()?;
    let yk = s.to_flat();
    let t1 = s.t() + h;
    let mut current = yk.clone();
    let mut diag = StepDiagnostics::default();
    for it in 1..=cfg.fp_max_iters {
        let e = model.system_e(&positions_of(s, &current)?, t1, s.epsilon())?;
        let solver = BlockwiseSolver::new(&e, h)?;
        let next = solver.solve(&yk);
        let update = next
            .iter()
            .zip(&current)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        diag = StepDiagnostics {
            iterations: it,
            update,
            linear_residual: residual(&e, h, &next, &yk),
            condition: solver.condition(),
        };
        if !update.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        let frozen = std::mem::replace(&mut current, next);
        if converged(update, &current, cfg.fp_tol) {
            return Ok(StepOutcome {
                state: finish(s, &current, h)?,
                frozen_at: frozen,
                diagnostics: diag,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.fp_max_iters,
        update: diag.update,
    })
}

/// Midpoint family: `(I − (h/2)E(z)) y_{k+1} = (I + (h/2)E(z)) y_k` with
/// `E`'s exponentials at `t_k + h/2`. For [`Xi::Midpoint`], `z` is iterated
/// to `(y_k + y_{k+1})/2`; for [`Xi::Left`], `z = y_k`.
pub fn step_midpoint(s: &PhaseVector, h: f64, model: &Model, xi: Xi, cfg: &SolverConfig) -> Result<StepOutcome> {
    prepare(s, h, model)?;
    cfg.validate()?;
    let yk = s.to_flat();
    let tau = 0.5 * h;
    let tm = s.t() + tau;
    let mut z = yk.clone();
    let mut diag = StepDiagnostics::default();
    let max_iters = match xi {
        Xi::Left => 1,
        Xi::Midpoint => cfg.fp_max_iters,
    };
    for it in 1..=max_iters {
        let e = model.system_e(&positions_of(s, &z)?, tm, s.epsilon())?;
        let solver = BlockwiseSolver::new(&e, tau)?;
        let rhs = solver.apply_plus(&yk);
        let next = solver.solve(&rhs);
        let z_next: Vec<f64> = next.iter().zip(&yk).map(|(a, b)| 0.5 * (a + b)).collect();
        let update = z_next
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        diag = StepDiagnostics {
            iterations: it,
            update,
            linear_residual: residual(&e, tau, &next, &rhs),
            condition: solver.condition(),
        };
        if !update.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        if xi == Xi::Left || converged(update, &z_next, cfg.fp_tol) {
            return Ok(StepOutcome {
                state: finish(s, &next, h)?,
                frozen_at: z,
                diagnostics: diag,
            });
        }
        z = z_next;
    }
    Err(Error::NoConvergence {
        iterations: cfg.fp_max_iters,
        update: diag.update,
    })
}

/// Backward Euler over `h/2` followed by forward Euler over `h/2`, both
/// with `E` frozen at the flat state `z` and exponentials at `t + h/2`.
/// For a converged midpoint step this reproduces the step itself.
pub fn be_fe_composition(s: &PhaseVector, h: f64, model: &Model, z: &[f64]) -> Result<Vec<f64>> {
    prepare(s, h, model)?;
    let tau = 0.5 * h;
    let e = model.system_e(&positions_of(s, z)?, s.t() + tau, s.epsilon())?;
    let half = BlockwiseSolver::new(&e, tau)?.solve(&s.to_flat());
    Ok(half.iter().zip(e.apply(&half)).map(|(a, b)| a + tau * b).collect())
}

pub fn step(s: &PhaseVector, h: f64, model: &Model, cfg: &SolverConfig) -> Result<StepOutcome> {
    match cfg.method {
        Method::ForwardEuler => step_forward_euler(s, h, model),
        Method::BackwardEuler => step_backward_euler(s, h, model, cfg),
        Method::Midpoint(xi) => step_midpoint(s, h, model, xi, cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<PhaseVector>,
    /// One entry per step; `diagnostics[k]` belongs to `t_k → t_{k+1}`.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t()).collect()
    }

    pub fn last(&self) -> &PhaseVector {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Runs `grid.steps()` steps from `s0`. Failures are wrapped in
/// `AtStep { step: k }` for the step `t_k → t_{k+1}`.
pub fn integrate(s0: &PhaseVector, grid: &GridSpec, cfg: &SolverConfig, model: &Model) -> Result<Trajectory> {
    match integrate_partial(s0, grid, cfg, model)? {
        (tr, None) => Ok(tr),
        (_, Some(err)) => Err(err),
    }
}

/// Like [`integrate`], but a failing step still returns the states computed
/// before it. The outer error covers invalid inputs only.
pub fn integrate_partial(
    s0: &PhaseVector,
    grid: &GridSpec,
    cfg: &SolverConfig,
    model: &Model,
) -> Result<(Trajectory, Option<Error>)> {
    s0.expect_chart(Chart::Canonical)?;
    model.check_state(s0)?;
    cfg.validate()?;
    if (s0.t() - grid.t0()).abs() > 1e-12 * (1.0 + grid.t0().abs()) {
        return Err(Error::InvalidArgument(format!(
            "initial state is at t = {}, grid starts at {}",
            s0.t(),
            grid.t0()
        )));
    }
    if !s0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let h = grid.h();
    let mut tr = Trajectory {
        states: Vec::with_capacity(grid.steps() + 1),
        diagnostics: Vec::with_capacity(grid.steps()),
    };
    tr.states.push(s0.clone());
    for k in 0..grid.steps() {
        let out = match step(&tr.states[k], h, model, cfg) {
            Ok(out) if out.state.is_finite() => out,
            Ok(_) => return Ok((tr, Some(Error::NonFinite("state").at_step(k)))),
            Err(e) => return Ok((tr, Some(e.at_step(k)))),
        };
        let s = out.state;
        // pin the time to the grid so rounding does not accumulate
        let pinned = PhaseVector::new(
            Chart::Canonical,
            s.positions().clone(),
            s.momenta().clone(),
            grid.time(k + 1),
            s.epsilon(),
        )?;
        tr.states.push(pinned);
        tr.diagnostics.push(out.diagnostics);
    }
    Ok((tr, None))
}
