//! Rotation generators and the charges `Q = Σ p_iᵀ R x_i`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph_model::{time_scale, Chart, PhaseVector};

/// Elementary skew matrix with `+1` at (row `a`, col `b`) and `−1` at
/// `(b, a)`. Indices are 1-based with `a > b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SkewGenerator {
    d: usize,
    a: usize,
    b: usize,
}

impl SkewGenerator {
    pub fn new(d: usize, a: usize, b: usize) -> Result<Self> {
        if !(1 <= b && b < a && a <= d) {
            return Err(Error::InvalidArgument(format!(
                "generator R_{{{a},{b}}} needs 1 <= b < a <= d = {d}"
            )));
        }
        Ok(Self { d, a, b })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// 1-based `(a, b)`.
    pub fn indices(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn label(&self) -> String {
        format!("R{}{}", self.a, self.b)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.d);
        m[(self.a - 1, self.b - 1)] = 1.0;
        m[(self.b - 1, self.a - 1)] = -1.0;
        m
    }

    /// `pᵀ R x = p_a x_b − p_b x_a`.
    pub fn bilinear(&self, p: &[f64], x: &[f64]) -> f64 {
        let (a, b) = (self.a - 1, self.b - 1);
        p[a] * x[b] - p[b] * x[a]
    }
}

/// All `d(d−1)/2` generators: `R21, R31, …, Rd1, R32, …`.
pub fn skew_basis(d: usize) -> Result<Vec<SkewGenerator>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "rotation generators need d >= 2, got {d}"
        )));
    }
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for b in 1..d {
        for a in b + 1..=d {
            out.push(SkewGenerator { d, a, b });
        }
    }
    Ok(out)
}

/// Default tolerance for [`commutes`].
pub const COMMUTE_TOL: f64 = 1e-12;

/// `(‖𝕎R − R𝕎‖_max ≤ tol, ‖𝕎R − R𝕎‖_max)`.
pub fn commutes(w: &DMatrix<f64>, r: &SkewGenerator, tol: f64) -> (bool, f64) {
    let rm = r.matrix();
    let residual = (w * &rm - &rm * w).amax();
    (residual <= tol, residual)
}

/// `J ⊗ (I_n ⊗ R)` with `J = [[O, I], [−I, O]]`, so that
/// `−½ yᵀ K y = Σ p_iᵀ R x_i`.
pub fn kron_j_r(n: usize, r: &DMatrix<f64>) -> DMatrix<f64> {
    let d = r.nrows();
    let m = n * d;
    let mut k = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..n {
        let o = i * d;
        k.view_mut((o, m + o), (d, d)).copy_from(r);
        k.view_mut((m + o, o), (d, d)).copy_from(&(-r));
    }
    k
}

fn raw_sum(s: &PhaseVector, r: &SkewGenerator) -> Result<f64> {
    if s.d() != r.d() {
        return Err(Error::ShapeMismatch(format!(
            "generator is {0}x{0}, features have dimension {1}",
            r.d(),
            s.d()
        )));
    }
    Ok((0..s.n())
        .map(|i| r.bilinear(s.momenta().node(i), s.positions().node(i)))
        .sum())
}

/// `Q = Σ p_iᵀ R x_i` on a canonical state.
pub fn charge_y(s: &PhaseVector, r: &SkewGenerator) -> Result<f64> {
    s.expect_chart(Chart::Canonical)?;
    let q = raw_sum(s, r)?;
    #[cfg(debug_assertions)]
    {
        let y = nalgebra::DVector::from_vec(s.to_flat());
        let k = kron_j_r(s.n(), &r.matrix());
        let quad = -0.5 * (y.transpose() * k * &y)[(0, 0)];
        // both sums cancel; the rounding scale is ‖y‖², not |Q|
        debug_assert!(
            (quad - q).abs() <= 1e-12 * (1.0 + y.norm_squared()),
            "charge {q} disagrees with its quadratic form {quad}"
        );
    }
    Ok(q)
}

/// `Q = e^{−t/ε} Σ P_iᵀ R x_i` on a rescaled state.
pub fn charge_rescaled(s: &PhaseVector, r: &SkewGenerator) -> Result<f64> {
    s.expect_chart(Chart::Rescaled)?;
    Ok(time_scale(s.t(), s.epsilon(), -1.0)? * raw_sum(s, r)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeReport {
    pub generator: SkewGenerator,
    /// `(t_k, Q_k)`.
    pub values: Vec<(f64, f64)>,
    /// `max_k |Q_k − Q_0|`.
    pub drift: f64,
}

pub fn charge_trace(states: &[PhaseVector], r: &SkewGenerator) -> Result<ChargeReport> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let q0 = charge_y(first, r)?;
    let mut values = Vec::with_capacity(states.len());
    let mut drift: f64 = 0.0;
    for s in states {
        let q = charge_y(s, r)?;
        drift = drift.max((q - q0).abs());
        values.push((s.t(), q));
    }
    Ok(ChargeReport {
        generator: *r,
        values,
        drift,
    })
}
