//! Which rotation generators commute with W, and the charges they define.

use grand_charges::charges::{charge_rescaled, charge_y, commutes, skew_basis, COMMUTE_TOL};
use grand_charges::graph_model::{chart_convert, Chart, FeatureMatrix, PhaseVector};
use nalgebra::DMatrix;

pub fn run_example() -> grand_charges::Result<()> {
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1e-3, 1e-3, 1.0, 1.0]));
    let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0, 1.0, 1.0], vec![1.0, 0.5, 0.0, 1.0]])?;
    let p = FeatureMatrix::from_rows(&[vec![0.2, 0.0, -0.1, 0.0], vec![0.0, 0.3, 0.0, 0.1]])?;
    let s = PhaseVector::canonical(x, p, 0.25, 0.1)?;
    let y = chart_convert(&s, Chart::Rescaled)?;
    for (k, r) in skew_basis(4)?.iter().enumerate() {
        let (ok, res) = commutes(&w, r, COMMUTE_TOL);
        println!(
            "Q{} {}: commutes = {ok:<5} |[W,R]| = {res:.1e}  Q = {:+.6} (rescaled chart {:+.6})",
            k + 1,
            r.label(),
            charge_y(&s, r)?,
            charge_rescaled(&y, r)?
        );
    }
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
