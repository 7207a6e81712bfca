//! Global convergence orders on a smooth problem, and the CSV trace
//! round-trip property.

use grand_charges::charges::charge_y;
use grand_charges::dynamics::Model;
use grand_charges::experiments::{self, fit_slope, ExperimentConfig};
use grand_charges::experiments::trace::TraceTable;
use grand_charges::graph_model::{ActivationFn, AttentionParams, FeatureMatrix, Graph, PhaseVector};
use grand_charges::integrators::{integrate, GridSpec, Method, SolverConfig, Xi};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn smooth_problem() -> (Model, PhaseVector) {
    let w = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, 0.1, 0.3, -0.2, 0.0, -0.2, 0.5]);
    let params = AttentionParams::from_symmetric(w, ActivationFn::Tanh).unwrap();
    let model = Model::new(Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap(), params).unwrap();
    let x = FeatureMatrix::from_rows(&[
        vec![1.0, 0.2, -0.3],
        vec![-0.5, 0.8, 0.1],
        vec![0.3, -0.4, 0.9],
        vec![0.0, 0.5, -0.7],
    ])
    .unwrap();
    let p = FeatureMatrix::from_rows(&[
        vec![0.1, 0.0, -0.2],
        vec![0.0, 0.3, 0.1],
        vec![-0.2, 0.1, 0.0],
        vec![0.05, -0.1, 0.2],
    ])
    .unwrap();
    (model, PhaseVector::canonical(x, p, 0.0, 1.0).unwrap())
}

fn endpoint(model: &Model, s0: &PhaseVector, method: Method, steps: usize) -> Vec<f64> {
    let grid = GridSpec::new(0.0, 0.5, steps).unwrap();
    let mut cfg = SolverConfig::new(method);
    cfg.fp_tol = 1e-14;
    cfg.fp_max_iters = 200;
    integrate(s0, &grid, &cfg, model).unwrap().last().to_flat()
}

fn observed_order(method: Method) -> f64 {
    let (model, s0) = smooth_problem();
    let steps = [20, 40, 80, 160];
    let reference = endpoint(&model, &s0, Method::Midpoint(Xi::Midpoint), 160 * 64);
    let errors: Vec<f64> = steps
        .iter()
        .map(|&n| {
            let y = endpoint(&model, &s0, method, n);
            y.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .collect();
    let hs: Vec<f64> = steps.iter().map(|&n| 0.5 / n as f64).collect();
    fit_slope(&hs, &errors).unwrap()
}

#[test]
fn forward_euler_is_first_order() {
    let q = observed_order(Method::ForwardEuler);
    assert!((0.85..=1.15).contains(&q), "{q}");
}

#[test]
fn backward_euler_is_first_order() {
    let q = observed_order(Method::BackwardEuler);
    assert!((0.85..=1.15).contains(&q), "{q}");
}

#[test]
fn left_frozen_midpoint_is_first_order() {
    let q = observed_order(Method::Midpoint(Xi::Left));
    assert!((0.85..=1.15).contains(&q), "{q}");
}

#[test]
fn midpoint_is_second_order() {
    let q = observed_order(Method::Midpoint(Xi::Midpoint));
    assert!((1.85..=2.15).contains(&q), "{q}");
}

fn config(method: &str, steps: usize, scale: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{
        "name": "recompute",
        "graph": {"n": 3, "edges": [[0, 1], [1, 2]]},
        "d": 3,
        "epsilon": 0.4,
        "t1": 0.3,
        "steps": 6,
        "method": "im",
        "attention": {"activation": "sigmoid", "w": [[0.3, 0.1, 0], [0.1, 0.3, 0], [0, 0, 0.8]]},
        "initial": {
            "x": [[1, 0, 0.5], [0, 1, 0], [0.3, 0.3, 1]],
            "p": [[0.1, 0, 0], [0, -0.2, 0.1], [0.05, 0, 0]]
        }
    }"#,
    )
    .unwrap();
    cfg.method = method.into();
    cfg.steps = steps;
    for row in &mut cfg.initial.x {
        row.iter_mut().for_each(|v| *v *= scale);
    }
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn charges_recompute_from_stored_states(
        method in prop::sample::select(vec!["fe", "be", "im", "im-left"]),
        // h = 0.3 / steps stays where the fixed-point iterations contract
        steps in 6usize..16,
        scale in 0.2f64..2.0,
    ) {
        let cfg = config(method, steps, scale);
        let dir = tempfile::tempdir().unwrap();
        let art = experiments::run(&cfg, Some(dir.path())).unwrap();
        let table = TraceTable::read(&art.csv_path).unwrap();
        let exp = cfg.build().unwrap();
        prop_assert_eq!(table.rows.len(), steps + 1);
        for k in 0..table.rows.len() {
            let s = table.state(k, 3, 3, cfg.epsilon).unwrap();
            for r in &exp.charges {
                let col = experiments::trace::charge_column(r);
                let stored = table.rows[k][table.index_of(&col).unwrap()];
                let recomputed = charge_y(&s, r).unwrap();
                prop_assert!((stored - recomputed).abs() <= 1e-12, "{} at step {}: {} vs {}", col, k, stored, recomputed);
            }
        }
    }
}
