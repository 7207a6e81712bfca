//! H and its analytic rate along a fine midpoint trajectory, against
//! centered differences.

use grand_charges::dynamics::hamiltonian;
use grand_charges::experiments::preset;
use grand_charges::graph_model::{chart_convert, Chart};
use grand_charges::integrators::{integrate, GridSpec, Method, SolverConfig, Xi};

pub fn run_example() -> grand_charges::Result<()> {
    let exp = preset("fig1-im")?.build()?;
    let grid = GridSpec::new(0.0, 0.5, 1600)?;
    let traj = integrate(&exp.initial, &grid, &SolverConfig::new(Method::Midpoint(Xi::Midpoint)), &exp.model)?;
    let hd = traj
        .states
        .iter()
        .map(|s| hamiltonian(&chart_convert(s, Chart::Rescaled)?, &exp.model))
        .collect::<grand_charges::Result<Vec<_>>>()?;
    let h = grid.h();
    for k in [1, 400, 800, 1200, 1599] {
        let centered = (hd[k + 1].0 - hd[k - 1].0) / (2.0 * h);
        println!(
            "t = {:.4}: H = {:+.6e}, dH/dt = {:+.6e}, centered = {:+.6e}, rel = {:.1e}",
            grid.time(k),
            hd[k].0,
            hd[k].1,
            centered,
            (centered - hd[k].1).abs() / hd[k].1.abs()
        );
    }
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
