//! JSON experiment configuration.
//!
//! The schema lives in `schema/experiment.schema.json`. Node indices in edge
//! lists are 0-based; charge generators are named by their 1-based `(a, b)`
//! so that `[4, 3]` is `R43`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::attention::{freeze_softmax, similarity};
use crate::charges::{skew_basis, SkewGenerator};
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::graph_model::{
    assemble_w, ActivationFn, AttentionParams, FeatureMatrix, Graph, PhaseVector, Variant,
};
use crate::integrators::{GridSpec, Method, SolverConfig};

/// Largest tolerated gap between a literal `w` and `assemble_w(key, query)`.
pub const W_CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub graph: GraphConfig,
    pub d: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub method: String,
    #[serde(default)]
    pub solver: SolverOptions,
    pub attention: AttentionConfig,
    pub initial: InitialState,
    /// 1-based `(a, b)` pairs; the full basis when absent.
    #[serde(default)]
    pub charges: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed for randomized probes (drift study momenta).
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub n: usize,
    pub edges: EdgeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSpec {
    /// The string `"complete"`.
    Named(String),
    List(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iters")]
    pub fp_max_iters: usize,
}

fn default_fp_tol() -> f64 {
    1e-12
}

fn default_fp_max_iters() -> usize {
    50
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            fp_tol: default_fp_tol(),
            fp_max_iters: default_fp_max_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionConfig {
    #[serde(default = "default_variant")]
    pub variant: String,
    /// `ς` for the exponential kernel.
    #[serde(default)]
    pub kernel_scale: Option<f64>,
    pub activation: String,
    /// Symmetric `𝕎`, row-major nested arrays.
    #[serde(default)]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub key: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub query: Option<Vec<Vec<f64>>>,
}

fn default_variant() -> String {
    "scaled-dot".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: Vec<Vec<f64>>,
    /// Canonical momenta; zero when absent.
    #[serde(default)]
    pub p: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// File stem for the trace and plots; defaults to the config name.
    #[serde(default)]
    pub prefix: Option<String>,
}

/// Everything needed to run: model, start state, grid, solver, charges.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub model: Model,
    pub initial: PhaseVector,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub charges: Vec<SkewGenerator>,
    /// Frozen softmax denominators, when that activation is used.
    pub denominators: Option<Vec<f64>>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(format!("{what} must be a non-empty rectangular matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn parse_activation(name: &str) -> Result<ActivationFn> {
    Ok(match name {
        "exp" => ActivationFn::Exp,
        "exp-clamped" => ActivationFn::ClampedExp,
        "sigmoid" => ActivationFn::Sigmoid,
        "tanh" => ActivationFn::Tanh,
        "softplus" => ActivationFn::Softplus,
        "identity" => ActivationFn::Identity,
        // frozen from the initial features when the experiment is built
        "softmax" | "frozen-softmax" => ActivationFn::Softmax,
        other => return Err(invalid(format!("unknown activation `{other}`"))),
    })
}

pub fn parse_variant(name: &str, scale: Option<f64>) -> Result<Variant> {
    Ok(match name {
        "scaled-dot" => Variant::ScaledDot,
        "cosine-similarity" => Variant::CosineSimilarity,
        "exponential-kernel" => Variant::ExponentialKernel {
            scale: scale.ok_or_else(|| invalid("exponential-kernel needs kernel_scale"))?,
        },
        other => return Err(invalid(format!("unknown similarity variant `{other}`"))),
    })
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "experiment".into())
    }

    pub fn method(&self) -> Result<Method> {
        self.method.parse().map_err(|_| invalid(format!("unknown method `{}`", self.method)))
    }

    pub fn graph(&self) -> Result<Graph> {
        let n = self.graph.n;
        if n == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        match &self.graph.edges {
            EdgeSpec::Named(s) if s == "complete" => Graph::complete(n),
            EdgeSpec::Named(s) => Err(invalid(format!("unknown graph `{s}`; use \"complete\" or an edge list"))),
            EdgeSpec::List(edges) => {
                let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                Graph::from_edges(n, &pairs).map_err(|e| invalid(format!("edge list: {e}")))
            }
        }
    }

    pub fn attention_params(&self) -> Result<AttentionParams> {
        let a = &self.attention;
        let activation = parse_activation(&a.activation)?;
        let variant = parse_variant(&a.variant, a.kernel_scale)?;
        let literal = a.w.as_deref().map(|w| matrix(w, "w")).transpose()?;
        let kq = match (&a.key, &a.query) {
            (Some(k), Some(q)) => Some((matrix(k, "key")?, matrix(q, "query")?)),
            (None, None) => None,
            _ => return Err(invalid("key and query must be given together")),
        };
        let params = match (literal, kq) {
            (Some(w), Some((k, q))) => {
                let assembled = assemble_w(&k, &q)?;
                if assembled.shape() != w.shape() {
                    return Err(invalid("w and key/query disagree in shape"));
                }
                let gap = (&assembled - &w).amax();
                if gap > W_CONSISTENCY_TOL {
                    return Err(invalid(format!(
                        "w differs from the matrix assembled from key/query by {gap:.3e}"
                    )));
                }
                AttentionParams::from_key_query(k, q, variant, activation)?
            }
            (None, Some((k, q))) => AttentionParams::from_key_query(k, q, variant, activation)?,
            (Some(w), None) => {
                if variant != Variant::ScaledDot {
                    return Err(invalid(format!("variant `{}` needs key and query", variant.name())));
                }
                AttentionParams::from_symmetric(w, activation)?
            }
            (None, None) => return Err(invalid("attention needs `w` or `key`/`query`")),
        };
        if params.d() != self.d {
            return Err(invalid(format!("W is {0}x{0} but d = {1}", params.d(), self.d)));
        }
        Ok(params)
    }

    pub fn charge_generators(&self) -> Result<Vec<SkewGenerator>> {
        match &self.charges {
            None => skew_basis(self.d),
            Some(list) => list
                .iter()
                .map(|[a, b]| SkewGenerator::new(self.d, *a, *b).map_err(|e| invalid(e.to_string())))
                .collect(),
        }
    }

    fn features(&self, rows: &[Vec<f64>], what: &str) -> Result<FeatureMatrix> {
        if rows.len() != self.graph.n || rows.iter().any(|r| r.len() != self.d) {
            return Err(invalid(format!("{what} must be {}x{}", self.graph.n, self.d)));
        }
        FeatureMatrix::from_rows(rows).map_err(|e| invalid(format!("{what}: {e}")))
    }

    /// Validates the config and assembles an [`Experiment`].
    pub fn build(&self) -> Result<Experiment> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        let grid = GridSpec::new(self.t0, self.t1, self.steps).map_err(|e| invalid(e.to_string()))?;
        let solver = SolverConfig {
            method: self.method()?,
            fp_tol: self.solver.fp_tol,
            fp_max_iters: self.solver.fp_max_iters,
        };
        solver.validate().map_err(|e| invalid(e.to_string()))?;
        let graph = self.graph()?;
        let mut params = self.attention_params()?;
        let x = self.features(&self.initial.x, "initial x")?;
        let p = match &self.initial.p {
            Some(rows) => self.features(rows, "initial p")?,
            None => FeatureMatrix::zeros(self.graph.n, self.d),
        };
        let mut denominators = None;
        if params.activation() == &ActivationFn::Softmax {
            let frozen = freeze_softmax(&similarity(&x, &params, &graph)?, &graph)?;
            if let ActivationFn::FrozenSoftmax(d) = &frozen {
                denominators = Some(d.clone());
            }
            params = params.with_activation(frozen);
        }
        let model = Model::new(graph, params)?;
        let initial = PhaseVector::canonical(x, p, self.t0, self.epsilon)?;
        Ok(Experiment {
            name: self.display_name(),
            model,
            initial,
            grid,
            solver,
            charges: self.charge_generators()?,
            denominators,
        })
    }
}
