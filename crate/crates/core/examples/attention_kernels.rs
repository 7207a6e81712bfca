//! Similarity variants, activations, and the softmax frozen at t0.

use grand_charges::attention::{attention_matrix, freeze_softmax, similarity};
use grand_charges::graph_model::{ActivationFn, AttentionParams, FeatureMatrix, Graph, Variant};
use nalgebra::DMatrix;

pub fn run_example() -> grand_charges::Result<()> {
    let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])?;
    let x = FeatureMatrix::from_rows(&[
        vec![1.0, 0.0, 0.5],
        vec![0.2, 1.0, 0.0],
        vec![-0.3, 0.4, 1.0],
        vec![0.7, -0.2, 0.1],
    ])?;
    let wk = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.0, 0.4, 0.2, 0.1, 0.0, 0.6]);
    let wq = DMatrix::from_row_slice(3, 3, &[0.3, 0.0, 0.1, 0.2, 0.5, 0.0, 0.0, 0.1, 0.4]);

    for variant in [Variant::ScaledDot, Variant::CosineSimilarity, Variant::ExponentialKernel { scale: 2.0 }] {
        let p = AttentionParams::from_key_query(wk.clone(), wq.clone(), variant, ActivationFn::Sigmoid)?;
        let c = similarity(&x, &p, &g)?;
        let a = attention_matrix(&c, &g, p.activation())?;
        println!("{}: C_01 = {:+.4}, G_01 = {:.4}", variant.name(), c.get(0, 1), a.get(0, 1));
    }

    let p = AttentionParams::from_key_query(wk, wq, Variant::ScaledDot, ActivationFn::Softmax)?;
    let c = similarity(&x, &p, &g)?;
    let frozen = freeze_softmax(&c, &g)?;
    let a = attention_matrix(&c, &g, &frozen)?;
    if let ActivationFn::FrozenSoftmax(den) = &frozen {
        println!("frozen denominators: {den:.4?}");
    }
    for i in 0..4 {
        let row: f64 = (0..4).map(|j| a.get(i, j)).sum();
        println!("row {i} of frozen softmax sums to {row:.12}");
    }
    Ok(())
}

fn main() -> grand_charges::Result<()> {
    run_example()
}
