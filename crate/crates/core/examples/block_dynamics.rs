//! The block matrix C(x): symmetry, constant-field kernel, and C x = ∇U.

use grand_charges::dynamics::{build_c, gradient_check_c, rhs_diffusion, Model};
use grand_charges::graph_model::{ActivationFn, AttentionParams, FeatureMatrix, Graph};
use nalgebra::DMatrix;

pub fn run_example() -> grand_charges::Result<()> {
    let g = Graph::complete(3)?;
    let w = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, 0.2, 0.3]);
    let p = AttentionParams::from_symmetric(w, ActivationFn::Tanh)?;
    let x = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, -0.5]])?;

    let c = build_c(&x, &g, &p)?;
    println!("C is {0}x{0}, symmetry residual {1:.1e}", c.n_hat(), c.symmetry_residual());
    println!("block (0,1):\n{}", c.block(0, 1));

    // consensus is a fixed point of the diffusion
    let flat = FeatureMatrix::from_rows(&vec![vec![0.3, -0.7]; 3])?;
    let at_consensus = build_c(&flat, &g, &p)?.apply(flat.as_slice());
    println!("C(x) x at consensus: {at_consensus:?}");

    let chk = gradient_check_c(&x, &g, &p)?;
    println!("|Cx - grad U| = {:.2e} (gradient norm {:.3})", chk.residual, chk.gradient_norm);

    let model = Model::new(g, p)?;
    let xdot = rhs_diffusion(&x, &model)?;
    println!("diffusion limit x' = {:?}", xdot.as_slice());
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
