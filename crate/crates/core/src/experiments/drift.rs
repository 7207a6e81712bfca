//! One-step charge drift of the non-conserving schemes as a function of
//! `h` and `ε`, with log–log slope fits.
//!
//! The probe starts from the config's positions at `t0`. When the config
//! momenta are all zero the first step of every scheme leaves the charges
//! untouched, so seeded standard-normal momenta are drawn instead.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::trace::charge_column;
use crate::charges::{charge_y, commutes, SkewGenerator, COMMUTE_TOL};
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::graph_model::{FeatureMatrix, PhaseVector};
use crate::integrators::{step, Method, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    H,
    Eps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftPoint {
    pub sweep: Sweep,
    pub h: f64,
    pub epsilon: f64,
    /// Max over the commuting charges of `|Q(y_1) − Q(y_0)|`.
    pub drift: f64,
    pub per_charge: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftStudy {
    pub method: String,
    /// Columns of the charges whose generator commutes with `𝕎`.
    pub charges: Vec<String>,
    pub points: Vec<DriftPoint>,
    /// `None` for conserving methods or when a drift is not positive.
    pub slope_h: Option<f64>,
    pub slope_eps: Option<f64>,
    pub probe_seed: Option<u64>,
}

/// Least-squares slope of `log y` against `log x`; `None` unless every
/// value is positive and there are at least two distinct abscissae.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must be rejected
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Config momenta, or seeded `N(0, 1)` momenta if those are all zero.
/// Returns the seed when it was used.
pub fn probe_momenta(x: &FeatureMatrix, p: &FeatureMatrix, seed: u64) -> (FeatureMatrix, Option<u64>) {
    if p.as_slice().iter().any(|&v| v != 0.0) {
        return (p.clone(), None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..x.n() * x.d()).map(|_| StandardNormal.sample(&mut rng)).collect();
    (FeatureMatrix::new(x.n(), x.d(), data).expect("finite normal draws"), Some(seed))
}

fn one_step(model: &Model, s: &PhaseVector, h: f64, solver: &SolverConfig, charges: &[SkewGenerator]) -> Result<Vec<f64>> {
    let next = step(s, h, model, solver)?.state;
    charges
        .iter()
        .map(|r| Ok((charge_y(&next, r)? - charge_y(s, r)?).abs()))
        .collect()
}

/// `h`-sweep at the config's `ε`, then `ε`-sweep at `h_eps`.
pub fn drift_study(cfg: &ExperimentConfig, hs: &[f64], epss: &[f64], h_eps: f64, seed: u64) -> Result<DriftStudy> {
    if hs.iter().chain(epss).chain([&h_eps]).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("step sizes and epsilons must be positive".into()));
    }
    let exp = cfg.build()?;
    let w = exp.model.params().w_sym();
    let charges: Vec<SkewGenerator> = exp
        .charges
        .iter()
        .copied()
        .filter(|r| commutes(w, r, COMMUTE_TOL).0)
        .collect();
    let x = exp.initial.positions().clone();
    let (p, probe_seed) = probe_momenta(&x, exp.initial.momenta(), seed);
    let t0 = exp.initial.t();

    let jobs: Vec<(Sweep, f64, f64)> = hs
        .iter()
        .map(|&h| (Sweep::H, h, exp.initial.epsilon()))
        .chain(epss.iter().map(|&e| (Sweep::Eps, h_eps, e)))
        .collect();
    let results: Vec<Result<DriftPoint>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(sweep, h, eps)| {
                let (model, solver, charges, x, p) = (&exp.model, &exp.solver, &charges, &x, &p);
                scope.spawn(move || {
                    let s = PhaseVector::canonical(x.clone(), p.clone(), t0, eps)?;
                    let per_charge = one_step(model, &s, h, solver, charges)?;
                    Ok(DriftPoint {
                        sweep,
                        h,
                        epsilon: eps,
                        drift: per_charge.iter().fold(0.0, |m: f64, v| m.max(*v)),
                        per_charge,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("drift worker panicked")).collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;

    let conserving = matches!(exp.solver.method, Method::Midpoint(_));
    let slope = |sweep: Sweep, x: fn(&DriftPoint) -> f64| -> Option<f64> {
        if conserving {
            return None;
        }
        let sel: Vec<&DriftPoint> = points.iter().filter(|p| p.sweep == sweep).collect();
        fit_slope(
            &sel.iter().map(|p| x(p)).collect::<Vec<_>>(),
            &sel.iter().map(|p| p.drift).collect::<Vec<_>>(),
        )
    };
    Ok(DriftStudy {
        method: exp.solver.method.name().into(),
        charges: charges.iter().map(charge_column).collect(),
        slope_h: slope(Sweep::H, |p| p.h),
        slope_eps: slope(Sweep::Eps, |p| p.epsilon),
        points,
        probe_seed,
    })
}

impl DriftStudy {
    /// `sweep, h, epsilon, drift, <charge columns…>`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["sweep".to_string(), "h".into(), "epsilon".into(), "drift".into()];
        header.extend(self.charges.iter().map(|c| format!("d{c}")));
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![
                match p.sweep {
                    Sweep::H => "h".to_string(),
                    Sweep::Eps => "eps".to_string(),
                },
                format!("{:.16e}", p.h),
                format!("{:.16e}", p.epsilon),
                format!("{:.16e}", p.drift),
            ];
            rec.extend(p.per_charge.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn report(&self) -> String {
        let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let mut out = format!(
            "method {} over charges [{}]\n",
            self.method,
            self.charges.join(", ")
        );
        for p in &self.points {
            out += &format!(
                "  {:<3} h = {:.6}  eps = {:.4}  drift = {:.6e}\n",
                match p.sweep {
                    Sweep::H => "h",
                    Sweep::Eps => "eps",
                },
                p.h,
                p.epsilon,
                p.drift
            );
        }
        out += &format!("slope in h: {}\nslope in eps: {}", fmt(self.slope_h), fmt(self.slope_eps));
        out
    }
}
