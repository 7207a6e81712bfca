//! Block dynamics matrices, right-hand sides and the Hamiltonian.
//!
//! Sign convention: in the rescaled chart `Ṗ = (P − Cx)/ε`, which is the
//! chart image of `ṗ = −(e^{−t/ε}/ε) C x`. The diffusion limit is `ẋ = Cx`.

use nalgebra::DMatrix;

use crate::attention::{attention_matrix, edge_activation, scaled_dot, similarity};
use crate::charges::kron_j_r;
use crate::error::{Error, Result};
use crate::graph_model::{
    time_scale, ActivationFn, AttentionParams, Chart, FeatureMatrix, Graph, PhaseVector, Variant,
};

/// `C(x)` stored as coefficients: block `(r, s)` is `α_rs I_d + β_rs 𝕎`.
///
/// Diagonal blocks have `β_rr = 0`. Both coefficient matrices are exactly
/// symmetric because each edge is evaluated once and mirrored.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrixC {
    alpha: DMatrix<f64>,
    beta: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl BlockMatrixC {
    pub fn n(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn d(&self) -> usize {
        self.w.nrows()
    }

    /// `n·d`, the side of the assembled matrix.
    pub fn n_hat(&self) -> usize {
        self.n() * self.d()
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn block(&self, r: usize, s: usize) -> DMatrix<f64> {
        let d = self.d();
        &self.w * self.beta[(r, s)] + DMatrix::identity(d, d) * self.alpha[(r, s)]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, d) = (self.n(), self.d());
        let mut out = DMatrix::zeros(n * d, n * d);
        for r in 0..n {
            for s in 0..n {
                out.view_mut((r * d, s * d), (d, d)).copy_from(&self.block(r, s));
            }
        }
        out
    }

    /// `C v` for a stacked `n̂`-vector.
    ///
    /// Evaluated in difference form `Σ_{s≠r} α_rs (v_s − v_r) + β_rs 𝕎 v_s`
    /// (the diagonal is minus the off-diagonal row sum), so the `α` part
    /// sends a constant field to exactly zero; at constant features `β`
    /// vanishes too and `C x = 0` holds bitwise.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let (n, d) = (self.n(), self.d());
        assert_eq!(v.len(), n * d, "vector length must be n*d");
        let wv: Vec<f64> = (0..n)
            .flat_map(|s| {
                let vs = &v[s * d..(s + 1) * d];
                (0..d).map(move |a| (0..d).map(|b| self.w[(a, b)] * vs[b]).sum::<f64>())
            })
            .collect();
        let mut out = vec![0.0; n * d];
        for r in 0..n {
            let row = &mut out[r * d..(r + 1) * d];
            for s in (0..n).filter(|&s| s != r) {
                let (al, be) = (self.alpha[(r, s)], self.beta[(r, s)]);
                if al == 0.0 && be == 0.0 {
                    continue;
                }
                for a in 0..d {
                    row[a] += al * (v[s * d + a] - v[r * d + a]) + be * wv[s * d + a];
                }
            }
        }
        out
    }

    /// `max |C − Cᵀ|` over the assembled matrix.
    pub fn symmetry_residual(&self) -> f64 {
        let dense = self.to_dense();
        (&dense - dense.transpose()).amax()
    }
}

/// Assembles `C(x)` for the scaled-dot similarity.
///
/// Off-diagonal block `(r, s)` on an edge is `2 g I − g' ‖x_r − x_s‖² 𝕎`,
/// diagonal block `r` is `−2 Σ_{i≠r} w_ri g I`. For frozen softmax the two
/// row-normalized values of an edge are averaged (see [`edge_activation`]).
pub fn build_c(x: &FeatureMatrix, g: &Graph, p: &AttentionParams) -> Result<BlockMatrixC> {
    if p.variant() != Variant::ScaledDot {
        return Err(Error::UnsupportedVariant(p.variant().name()));
    }
    let n = x.n();
    if g.n() != n || x.d() != p.d() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} nodes, features are {}x{}, W is {}x{}",
            g.n(),
            n,
            x.d(),
            p.d(),
            p.d()
        )));
    }
    let sim = scaled_dot(x, p.w_sym());
    let mut alpha = DMatrix::zeros(n, n);
    let mut beta = DMatrix::zeros(n, n);
    for (r, s) in g.edges() {
        let (gv, gd) = edge_activation(p.activation(), sim[(r, s)], r, s)?;
        let dist2: f64 = x
            .node(r)
            .iter()
            .zip(x.node(s))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        alpha[(r, s)] = 2.0 * gv;
        alpha[(s, r)] = 2.0 * gv;
        beta[(r, s)] = -gd * dist2;
        beta[(s, r)] = -gd * dist2;
    }
    for r in 0..n {
        let sum: f64 = (0..n).filter(|&i| i != r).map(|i| alpha[(r, i)]).sum();
        alpha[(r, r)] = -sum;
    }
    if alpha.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("C blocks"));
    }
    Ok(BlockMatrixC {
        alpha,
        beta,
        w: p.w_sym().clone(),
    })
}

/// `U(x) = −½ Σ_ij G_ij ‖x_i − x_j‖²`, ordered double sum over the raw
/// attention matrix.
pub fn potential(x: &FeatureMatrix, g: &Graph, p: &AttentionParams) -> Result<f64> {
    Ok(-0.5 * pair_energy(x, g, p)?)
}

/// `Σ_ij G_ij ‖x_i − x_j‖²`.
fn pair_energy(x: &FeatureMatrix, g: &Graph, p: &AttentionParams) -> Result<f64> {
    let att = attention_matrix(&similarity(x, p, g)?, g, p.activation())?;
    let mut sum = 0.0;
    for i in 0..x.n() {
        for &j in g.neighbors(i) {
            let d2: f64 = x
                .node(i)
                .iter()
                .zip(x.node(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sum += att.get(i, j) * d2;
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// `max_i ‖(Cx)_i − ∇_{x_i} U‖₂`.
    pub residual: f64,
    /// `residual / (1 + ‖x‖₂)`.
    pub relative: f64,
    /// Largest per-node gradient norm, for scale.
    pub gradient_norm: f64,
}

/// Compares `C(x) x` against a central-difference gradient of [`potential`]
/// (step `1e-5`).
pub fn gradient_check_c(x: &FeatureMatrix, g: &Graph, p: &AttentionParams) -> Result<GradientCheck> {
    const STEP: f64 = 1e-5;
    let cx = build_c(x, g, p)?.apply(x.as_slice());
    let (n, d) = (x.n(), x.d());
    let mut residual: f64 = 0.0;
    let mut gradient_norm: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..n {
        let mut err2 = 0.0;
        let mut grad2 = 0.0;
        for a in 0..d {
            let orig = x.node(i)[a];
            probe.node_mut(i)[a] = orig + STEP;
            let up = potential(&probe, g, p)?;
            probe.node_mut(i)[a] = orig - STEP;
            let down = potential(&probe, g, p)?;
            probe.node_mut(i)[a] = orig;
            let fd = (up - down) / (2.0 * STEP);
            err2 += (cx[i * d + a] - fd).powi(2);
            grad2 += fd * fd;
        }
        residual = residual.max(err2.sqrt());
        gradient_norm = gradient_norm.max(grad2.sqrt());
    }
    let xnorm = x.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(GradientCheck {
        residual,
        relative: residual / (1.0 + xnorm),
        gradient_norm,
    })
}

/// `E = [[O, a I], [−b C, O]]` with `a = e^{t/ε}`, `b = e^{−t/ε}/ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrixE {
    t: f64,
    epsilon: f64,
    a: f64,
    b: f64,
    c: BlockMatrixC,
}

impl SystemMatrixE {
    pub fn new(c: BlockMatrixC, t: f64, epsilon: f64) -> Result<Self> {
        let a = time_scale(t, epsilon, 1.0)?;
        let b = time_scale(t, epsilon, -1.0)? / epsilon;
        Ok(Self { t, epsilon, a, b, c })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `(e^{t/ε}, e^{−t/ε}/ε)`.
    pub fn scales(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn c(&self) -> &BlockMatrixC {
        &self.c
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let m = self.c.n_hat();
        assert_eq!(y.len(), 2 * m, "phase vector length must be 2*n*d");
        let (x, p) = y.split_at(m);
        let cx = self.c.apply(x);
        p.iter()
            .map(|v| self.a * v)
            .chain(cx.iter().map(|v| -self.b * v))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.c.n_hat();
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, m), (m, m))
            .copy_from(&(DMatrix::identity(m, m) * self.a));
        out.view_mut((m, 0), (m, m))
            .copy_from(&(self.c.to_dense() * -self.b));
        out
    }
}

/// `B = (1/ε) [[O, ε I], [−C, I]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrixB {
    epsilon: f64,
    c: BlockMatrixC,
}

impl SystemMatrixB {
    pub fn new(c: BlockMatrixC, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self { epsilon, c })
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let m = self.c.n_hat();
        assert_eq!(y.len(), 2 * m, "phase vector length must be 2*n*d");
        let (x, p) = y.split_at(m);
        let cx = self.c.apply(x);
        p.iter()
            .copied()
            .chain(p.iter().zip(&cx).map(|(pv, cv)| (pv - cv) / self.epsilon))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.c.n_hat();
        let inv = 1.0 / self.epsilon;
        let mut out = DMatrix::zeros(2 * m, 2 * m);
        out.view_mut((0, m), (m, m)).fill_with_identity();
        out.view_mut((m, 0), (m, m))
            .copy_from(&(self.c.to_dense() * -inv));
        out.view_mut((m, m), (m, m))
            .copy_from(&(DMatrix::identity(m, m) * inv));
        out
    }
}

/// Graph plus attention parameters: everything the right-hand side needs
/// besides the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    graph: Graph,
    params: AttentionParams,
}

impl Model {
    /// Rejects configurations the closed-form dynamics cannot handle:
    /// non-scaled-dot similarity, unfrozen softmax, mismatched denominators.
    pub fn new(graph: Graph, params: AttentionParams) -> Result<Self> {
        if params.variant() != Variant::ScaledDot {
            return Err(Error::UnsupportedVariant(params.variant().name()));
        }
        match params.activation() {
            ActivationFn::Softmax => return Err(Error::MissingFrozenDenominators),
            ActivationFn::FrozenSoftmax(den) if den.len() != graph.n() => {
                return Err(Error::ShapeMismatch(format!(
                    "{} frozen denominators for {} nodes",
                    den.len(),
                    graph.n()
                )))
            }
            _ => {}
        }
        Ok(Self { graph, params })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn params(&self) -> &AttentionParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn d(&self) -> usize {
        self.params.d()
    }

    pub fn c_matrix(&self, x: &FeatureMatrix) -> Result<BlockMatrixC> {
        build_c(x, &self.graph, &self.params)
    }

    pub fn system_e(&self, x: &FeatureMatrix, t: f64, epsilon: f64) -> Result<SystemMatrixE> {
        SystemMatrixE::new(self.c_matrix(x)?, t, epsilon)
    }

    pub(crate) fn check_state(&self, s: &PhaseVector) -> Result<()> {
        if s.n() != self.n() || s.d() != self.d() {
            return Err(Error::ShapeMismatch(format!(
                "state is {}x{}, model is {}x{}",
                s.n(),
                s.d(),
                self.n(),
                self.d()
            )));
        }
        Ok(())
    }
}

/// `(ẋ, ṗ) = (e^{t/ε} p, −(e^{−t/ε}/ε) C x)`, returned as a canonical
/// phase vector at the same `(t, ε)`.
pub fn rhs_canonical(s: &PhaseVector, model: &Model) -> Result<PhaseVector> {
    s.expect_chart(Chart::Canonical)?;
    model.check_state(s)?;
    let e = model.system_e(s.positions(), s.t(), s.epsilon())?;
    PhaseVector::from_flat(
        Chart::Canonical,
        s.n(),
        s.d(),
        &e.apply(&s.to_flat()),
        s.t(),
        s.epsilon(),
    )
}

/// `(Ẋ, Ṗ) = (P, (P − C x)/ε)`.
pub fn rhs_rescaled(s: &PhaseVector, model: &Model) -> Result<PhaseVector> {
    s.expect_chart(Chart::Rescaled)?;
    model.check_state(s)?;
    let b = SystemMatrixB::new(model.c_matrix(s.positions())?, s.epsilon())?;
    PhaseVector::from_flat(
        Chart::Rescaled,
        s.n(),
        s.d(),
        &b.apply(&s.to_flat()),
        s.t(),
        s.epsilon(),
    )
}

/// `ẋ = C(x) x`, the ε → 0 limit.
pub fn rhs_diffusion(x: &FeatureMatrix, model: &Model) -> Result<FeatureMatrix> {
    let cx = model.c_matrix(x)?.apply(x.as_slice());
    FeatureMatrix::new(x.n(), x.d(), cx)
}

/// `(H, dH/dt)` on a rescaled state.
///
/// `H = e^{−t/ε}(½ Σ P² − (1/2ε) Σ G ‖Δx‖²)`, and the derivative uses the
/// explicit form `(e^{−t/ε}/2ε)(Σ P² + (1/ε) Σ G ‖Δx‖²)`.
pub fn hamiltonian(s: &PhaseVector, model: &Model) -> Result<(f64, f64)> {
    s.expect_chart(Chart::Rescaled)?;
    model.check_state(s)?;
    let decay = time_scale(s.t(), s.epsilon(), -1.0)?;
    let eps = s.epsilon();
    let kinetic: f64 = s.momenta().as_slice().iter().map(|v| v * v).sum();
    let pair = pair_energy(s.positions(), model.graph(), model.params())?;
    let h = decay * (0.5 * kinetic - pair / (2.0 * eps));
    let dh = decay / (2.0 * eps) * (kinetic + pair / eps);
    Ok((h, dh))
}

/// `max |Eᵀ K + K E|` with `K = J ⊗ (I_n ⊗ R)`; zero when `[𝕎, R] = 0`.
pub fn canonical_identity_residual(e: &SystemMatrixE, r: &DMatrix<f64>) -> f64 {
    let k = kron_j_r(e.c().n(), r);
    let ed = e.to_dense();
    (ed.transpose() * &k + &k * ed).amax()
}

/// `max |Bᵀ K + K B − K/ε|`.
pub fn rescaled_identity_residual(b: &SystemMatrixB, r: &DMatrix<f64>) -> f64 {
    let k = kron_j_r(b.c.n(), r);
    let bd = b.to_dense();
    (bd.transpose() * &k + &k * bd - &k / b.epsilon).amax()
}

/// `max |Eᵀ K E − (1/ε) diag(C, C) K|`.
pub fn congruence_residual(e: &SystemMatrixE, r: &DMatrix<f64>) -> f64 {
    let m = e.c().n_hat();
    let c = e.c().to_dense();
    let mut rhs = DMatrix::zeros(2 * m, 2 * m);
    rhs.view_mut((0, 0), (m, m)).copy_from(&c);
    rhs.view_mut((m, m), (m, m)).copy_from(&c);
    congruence_against(e, r, rhs)
}

/// Same as [`congruence_residual`] with the off-diagonal placement
/// `(1/ε) [[O, C], [C, O]] K`. That form does not hold in general; it is
/// kept so the discrepancy can be measured.
pub fn congruence_residual_offdiagonal(e: &SystemMatrixE, r: &DMatrix<f64>) -> f64 {
    let m = e.c().n_hat();
    let c = e.c().to_dense();
    let mut rhs = DMatrix::zeros(2 * m, 2 * m);
    rhs.view_mut((0, m), (m, m)).copy_from(&c);
    rhs.view_mut((m, 0), (m, m)).copy_from(&c);
    congruence_against(e, r, rhs)
}

fn congruence_against(e: &SystemMatrixE, r: &DMatrix<f64>, rhs: DMatrix<f64>) -> f64 {
    let k = kron_j_r(e.c().n(), r);
    let ed = e.to_dense();
    let lhs = ed.transpose() * &k * &ed;
    (lhs - rhs * &k / e.epsilon()).amax()
}
