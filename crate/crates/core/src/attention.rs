//! Pairwise similarities, activations and the masked attention matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph_model::{ActivationFn, AttentionParams, FeatureMatrix, Graph, Variant};

/// Argument above which [`ActivationFn::ClampedExp`] stops growing.
pub const EXP_CLAMP: f64 = 50.0;

/// `C_ij` for every ordered node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(DMatrix<f64>);

/// `G_ij = w_ij g(C_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix(DMatrix<f64>);

impl SimilarityMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "similarity matrix is {:?}",
                values.shape()
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

impl AttentionMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ActivationFn {
    /// Value and exact derivative at `z`. `row` selects the frozen
    /// denominator and is ignored by elementwise activations.
    pub fn evaluate(&self, z: f64, row: usize) -> Result<(f64, f64)> {
        Ok(match self {
            ActivationFn::Exp => {
                let e = z.exp();
                (e, e)
            }
            ActivationFn::ClampedExp => {
                let e = z.min(EXP_CLAMP).exp();
                (e, e)
            }
            ActivationFn::Sigmoid => {
                let s = sigmoid(z);
                (s, s * (1.0 - s))
            }
            ActivationFn::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
            ActivationFn::Softplus => {
                let v = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                (v, sigmoid(z))
            }
            ActivationFn::Identity => (z, 1.0),
            ActivationFn::Softmax => return Err(Error::MissingFrozenDenominators),
            ActivationFn::FrozenSoftmax(denominators) => {
                let denom = *denominators.get(row).ok_or_else(|| {
                    Error::ShapeMismatch(format!(
                        "no frozen denominator for node {row} ({} stored)",
                        denominators.len()
                    ))
                })?;
                let v = z.exp() / denom;
                (v, v)
            }
        })
    }
}

/// `(g(z), g'(z))`; see [`ActivationFn::evaluate`].
pub fn activation_eval(f: &ActivationFn, z: f64, row: usize) -> Result<(f64, f64)> {
    f.evaluate(z, row)
}

/// Activation value and derivative on the undirected edge `{r, s}`.
///
/// The dynamics only see the symmetric part of `G`, so for frozen softmax
/// the two row-normalized values are averaged. Elementwise activations are
/// returned unchanged.
pub fn edge_activation(f: &ActivationFn, z: f64, r: usize, s: usize) -> Result<(f64, f64)> {
    match f {
        ActivationFn::FrozenSoftmax(_) => {
            let (a, da) = f.evaluate(z, r)?;
            let (b, db) = f.evaluate(z, s)?;
            Ok((0.5 * (a + b), 0.5 * (da + db)))
        }
        _ => f.evaluate(z, r),
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x_iᵀ 𝕎 x_j` for all pairs, computed once per unordered pair so the
/// result is exactly symmetric.
pub(crate) fn scaled_dot(x: &FeatureMatrix, w_sym: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.n();
    let wx: Vec<Vec<f64>> = (0..n).map(|j| mat_vec(w_sym, x.node(j))).collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(x.node(i), &wx[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

pub fn similarity(x: &FeatureMatrix, p: &AttentionParams, g: &Graph) -> Result<SimilarityMatrix> {
    let n = x.n();
    if g.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} nodes, features have {n}",
            g.n()
        )));
    }
    if x.d() != p.d() {
        return Err(Error::ShapeMismatch(format!(
            "features have dimension {}, W is {}x{}",
            x.d(),
            p.d(),
            p.d()
        )));
    }
    if p.variant() == Variant::ScaledDot {
        return SimilarityMatrix::new(scaled_dot(x, p.w_sym()));
    }

    let (key, query) = p
        .key_query()
        .ok_or(Error::UnsupportedVariant(p.variant().name()))?;
    let keys: Vec<Vec<f64>> = (0..n).map(|i| mat_vec(key, x.node(i))).collect();
    let queries: Vec<Vec<f64>> = (0..n).map(|i| mat_vec(query, x.node(i))).collect();
    let m = |i: usize, j: usize| dot(&keys[i], &queries[j]);
    let key_norm: Vec<f64> = keys.iter().map(|k| dot(k, k).sqrt()).collect();
    let query_norm: Vec<f64> = queries.iter().map(|q| dot(q, q).sqrt()).collect();

    let mut c = DMatrix::zeros(n, n);
    match p.variant() {
        Variant::CosineSimilarity => {
            for i in 0..n {
                for &j in g.neighbors(i) {
                    if key_norm[i] == 0.0 {
                        return Err(Error::ZeroNormFeature {
                            node: i,
                            which: "key",
                        });
                    }
                    if query_norm[j] == 0.0 {
                        return Err(Error::ZeroNormFeature {
                            node: j,
                            which: "query",
                        });
                    }
                    c[(i, j)] = m(i, j) / (key_norm[i] * query_norm[j]);
                }
            }
        }
        Variant::ExponentialKernel { scale } => {
            let s2 = scale * scale;
            for i in 0..n {
                for j in 0..n {
                    let arg = key_norm[i].powi(2) + query_norm[j].powi(2) - m(i, j) - m(j, i);
                    c[(i, j)] = (-arg / s2).exp();
                }
            }
        }
        Variant::ScaledDot => unreachable!(),
    }
    SimilarityMatrix::new(c)
}

pub fn attention_matrix(c: &SimilarityMatrix, g: &Graph, f: &ActivationFn) -> Result<AttentionMatrix> {
    let n = g.n();
    if c.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "similarity is {n2}x{n2}, graph has {n} nodes",
            n2 = c.n()
        )));
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            out[(i, j)] = f.evaluate(c.get(i, j), i)?.0;
        }
    }
    Ok(AttentionMatrix(out))
}

/// Fixes the softmax denominators `Σ_{j ~ i} e^{C_ij}` at the given
/// similarities. Nodes without neighbors get a zero denominator, which is
/// never read because their attention row is fully masked.
pub fn freeze_softmax(c: &SimilarityMatrix, g: &Graph) -> Result<ActivationFn> {
    if c.n() != g.n() {
        return Err(Error::ShapeMismatch("similarity and graph sizes differ".into()));
    }
    let denominators: Vec<f64> = (0..g.n())
        .map(|i| g.neighbors(i).iter().map(|&j| c.get(i, j).exp()).sum())
        .collect();
    if denominators.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::NonFinite("softmax denominators"));
    }
    Ok(ActivationFn::FrozenSoftmax(denominators))
}
