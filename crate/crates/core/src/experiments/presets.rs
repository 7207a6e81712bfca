//! The two three-node experiments with `d = 4`, each under forward Euler
//! and the modified midpoint rule.

use super::config::{
    AttentionConfig, EdgeSpec, ExperimentConfig, GraphConfig, InitialState, OutputConfig, SolverOptions,
};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 4] = ["fig1-fe", "fig1-im", "fig2-fe", "fig2-im"];

fn diag(values: [f64; 4]) -> Vec<Vec<f64>> {
    (0..4)
        .map(|i| (0..4).map(|j| if i == j { values[i] } else { 0.0 }).collect())
        .collect()
}

/// `fig1-*` uses `𝕎 = 10⁻³ I₄`, `fig2-*` uses `𝕎 = diag(10⁻³, 10⁻³, 1, 1)`;
/// `*-fe` is forward Euler and `*-im` the midpoint rule frozen at `y_k`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (w, method) = match name {
        "fig1-fe" => (diag([1e-3; 4]), "fe"),
        "fig1-im" => (diag([1e-3; 4]), "im-left"),
        "fig2-fe" => (diag([1e-3, 1e-3, 1.0, 1.0]), "fe"),
        "fig2-im" => (diag([1e-3, 1e-3, 1.0, 1.0]), "im-left"),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(ExperimentConfig {
        name: Some(name.to_string()),
        graph: GraphConfig {
            n: 3,
            edges: EdgeSpec::Named("complete".into()),
        },
        d: 4,
        epsilon: 0.1,
        t0: 0.0,
        t1: 1.0,
        steps: 50,
        method: method.into(),
        solver: SolverOptions::default(),
        attention: AttentionConfig {
            variant: "scaled-dot".into(),
            kernel_scale: None,
            activation: "frozen-softmax".into(),
            w: Some(w),
            key: None,
            query: None,
        },
        initial: InitialState {
            x: vec![vec![0.0, 1.0, 1.0, 1.0], vec![1.0; 4], vec![1.0; 4]],
            p: Some(vec![vec![0.0; 4]; 3]),
        },
        charges: None,
        output: OutputConfig::default(),
        seed: 0,
    })
}
