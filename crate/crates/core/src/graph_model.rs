//! Graph topology, node features, attention parameters and phase-space
//! states.
//!
//! Features are stored row-major with the node index as the row, so the
//! vector of node `i` is a contiguous slice. The stacked phase-space layout
//! (all position blocks, then all momentum blocks) only appears at the
//! integrator boundary through [`PhaseVector::to_flat`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest `|t|/ε` for which `e^{±t/ε}` is treated as representable.
pub const SCALE_LIMIT: f64 = 700.0;

/// Undirected, self-avoiding graph with a 0/1 incidence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

/// Checks that `w` is a square 0/1 matrix with zero diagonal and `w = wᵀ`.
pub fn validate_graph(w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != w.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "incidence matrix is {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    let n = w.nrows();
    for i in 0..n {
        for j in 0..n {
            let value = w[(i, j)];
            if value != 0.0 && value != 1.0 {
                return Err(Error::NonBinaryIncidence { i, j, value });
            }
        }
    }
    for i in 0..n {
        if w[(i, i)] != 0.0 {
            return Err(Error::NonzeroDiagonal(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if w[(i, j)] != w[(j, i)] {
                return Err(Error::AsymmetricIncidence { i, j });
            }
        }
    }
    Ok(())
}

impl Graph {
    pub fn from_matrix(w: &DMatrix<f64>) -> Result<Self> {
        validate_graph(w)?;
        let n = w.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one node".into()));
        }
        let adjacency = (0..n * n).map(|k| w[(k / n, k % n)] == 1.0).collect();
        Ok(Self::with_adjacency(n, adjacency))
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("incidence rows must all have length n".into()));
        }
        let w = DMatrix::from_fn(n, n, |i, j| f64::from(rows[i][j]));
        Self::from_matrix(&w)
    }

    /// Every node linked to every other node.
    pub fn complete(n: usize) -> Result<Self> {
        let w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        Self::from_matrix(&w)
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::from_matrix(&DMatrix::zeros(n, n))
    }

    /// Undirected edge list with 0-based endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::NonzeroDiagonal(i));
            }
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        Self::from_matrix(&w)
    }

    fn with_adjacency(n: usize, adjacency: Vec<bool>) -> Self {
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[i * n + j]).collect())
            .collect();
        Self {
            n,
            adjacency,
            neighbors,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    /// `w_ij` as a real number.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.linked(i, j) {
            1.0
        } else {
            0.0
        }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn incidence(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.weight(i, j))
    }

    /// Unordered edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors[i]
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }
}

/// `n × d` matrix whose row `i` is the feature vector of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n}x{d} feature matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self { n, d, data })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch("feature rows differ in length".into()));
        }
        Self::new(n, d, rows.concat())
    }

    /// Wraps data produced internally; finiteness is the caller's concern.
    pub(crate) fn from_raw(n: usize, d: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * d);
        Self { n, d, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.d.max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_raw(self.n, self.d, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }
}

/// Similarity construction feeding the activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    ScaledDot,
    CosineSimilarity,
    /// `exp(-(K_i² + Q_j² - M_ij - M_ji) / ς²)` with the given `ς`.
    ExponentialKernel { scale: f64 },
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::ScaledDot => "scaled-dot",
            Variant::CosineSimilarity => "cosine-similarity",
            Variant::ExponentialKernel { .. } => "exponential-kernel",
        }
    }
}

/// Scalar activation `g` applied to similarities.
///
/// `Softmax` is the unfrozen marker; it must be turned into
/// `FrozenSoftmax` (see [`crate::attention::freeze_softmax`]) before it can
/// be evaluated. The frozen form holds one denominator per node.
#[derive(Debug, Clone, PartialEq)]
pub enum ActivationFn {
    Exp,
    /// `exp` continued constantly above [`crate::attention::EXP_CLAMP`].
    ClampedExp,
    Sigmoid,
    Tanh,
    Softplus,
    Identity,
    Softmax,
    FrozenSoftmax(Vec<f64>),
}

impl ActivationFn {
    /// True for activations that act on each entry independently of its row.
    pub fn is_elementwise(&self) -> bool {
        !matches!(self, ActivationFn::Softmax | ActivationFn::FrozenSoftmax(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationFn::Exp => "exp",
            ActivationFn::ClampedExp => "exp-clamped",
            ActivationFn::Sigmoid => "sigmoid",
            ActivationFn::Tanh => "tanh",
            ActivationFn::Softplus => "softplus",
            ActivationFn::Identity => "identity",
            ActivationFn::Softmax => "softmax",
            ActivationFn::FrozenSoftmax(_) => "frozen-softmax",
        }
    }

    pub fn elementwise() -> [ActivationFn; 6] {
        [
            ActivationFn::Exp,
            ActivationFn::ClampedExp,
            ActivationFn::Sigmoid,
            ActivationFn::Tanh,
            ActivationFn::Softplus,
            ActivationFn::Identity,
        ]
    }
}

/// Returns `𝕎 = W_Kᵀ W_Q + W_Qᵀ W_K`, symmetric bit for bit.
pub fn assemble_w(key: &DMatrix<f64>, query: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if key.shape() != query.shape() {
        return Err(Error::ShapeMismatch(format!(
            "W_K is {:?} but W_Q is {:?}",
            key.shape(),
            query.shape()
        )));
    }
    let m = key.transpose() * query;
    let d = m.nrows();
    Ok(DMatrix::from_fn(d, d, |i, j| m[(i, j)] + m[(j, i)]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    key: Option<DMatrix<f64>>,
    query: Option<DMatrix<f64>>,
    w_sym: DMatrix<f64>,
    variant: Variant,
    activation: ActivationFn,
}

impl AttentionParams {
    pub fn from_key_query(
        key: DMatrix<f64>,
        query: DMatrix<f64>,
        variant: Variant,
        activation: ActivationFn,
    ) -> Result<Self> {
        if key.nrows() < key.ncols() {
            return Err(Error::InvalidArgument(format!(
                "key/query matrices must be d'xd with d' >= d, got {}x{}",
                key.nrows(),
                key.ncols()
            )));
        }
        if let Variant::ExponentialKernel { scale } = variant {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "kernel scale must be positive, got {scale}"
                )));
            }
        }
        let w_sym = assemble_w(&key, &query)?;
        Ok(Self {
            key: Some(key),
            query: Some(query),
            w_sym,
            variant,
            activation,
        })
    }

    /// Scaled-dot parameters given directly by a symmetric `𝕎`.
    pub fn from_symmetric(w: DMatrix<f64>, activation: ActivationFn) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::ShapeMismatch(format!("W is {:?}", w.shape())));
        }
        let asym = (&w - w.transpose()).amax();
        if asym > 1e-12 * (1.0 + w.amax()) {
            return Err(Error::InvalidArgument(format!(
                "W must be symmetric (max asymmetry {asym:.3e})"
            )));
        }
        Ok(Self {
            key: None,
            query: None,
            w_sym: w,
            variant: Variant::ScaledDot,
            activation,
        })
    }

    pub fn with_activation(mut self, activation: ActivationFn) -> Self {
        self.activation = activation;
        self
    }

    pub fn d(&self) -> usize {
        self.w_sym.nrows()
    }

    pub fn w_sym(&self) -> &DMatrix<f64> {
        &self.w_sym
    }

    pub fn key_query(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        self.key.as_ref().zip(self.query.as_ref())
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn activation(&self) -> &ActivationFn {
        &self.activation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// `y = (x, p)` with `p = e^{-t/ε} ∂x/∂t`.
    Canonical,
    /// `Y = (x, P)` with `P = ∂x/∂t`.
    Rescaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    chart: Chart,
    t: f64,
    epsilon: f64,
    positions: FeatureMatrix,
    momenta: FeatureMatrix,
}

impl PhaseVector {
    pub fn new(
        chart: Chart,
        positions: FeatureMatrix,
        momenta: FeatureMatrix,
        t: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !positions.same_shape(&momenta) {
            return Err(Error::ShapeMismatch(
                "positions and momenta must have the same shape".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !t.is_finite() {
            return Err(Error::NonFinite("time"));
        }
        Ok(Self {
            chart,
            t,
            epsilon,
            positions,
            momenta,
        })
    }

    pub fn canonical(
        positions: FeatureMatrix,
        momenta: FeatureMatrix,
        t: f64,
        epsilon: f64,
    ) -> Result<Self> {
        Self::new(Chart::Canonical, positions, momenta, t, epsilon)
    }

    pub fn rescaled(
        positions: FeatureMatrix,
        momenta: FeatureMatrix,
        t: f64,
        epsilon: f64,
    ) -> Result<Self> {
        Self::new(Chart::Rescaled, positions, momenta, t, epsilon)
    }

    /// Rebuilds a state from the stacked `(x_1..x_n, p_1..p_n)` layout.
    pub fn from_flat(
        chart: Chart,
        n: usize,
        d: usize,
        flat: &[f64],
        t: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if flat.len() != 2 * n * d {
            return Err(Error::ShapeMismatch(format!(
                "flat phase vector has {} entries, expected {}",
                flat.len(),
                2 * n * d
            )));
        }
        let (x, p) = flat.split_at(n * d);
        Self::new(
            chart,
            FeatureMatrix::from_raw(n, d, x.to_vec()),
            FeatureMatrix::from_raw(n, d, p.to_vec()),
            t,
            epsilon,
        )
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.positions.as_slice().len());
        out.extend_from_slice(self.positions.as_slice());
        out.extend_from_slice(self.momenta.as_slice());
        out
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.positions.n()
    }

    pub fn d(&self) -> usize {
        self.positions.d()
    }

    pub fn positions(&self) -> &FeatureMatrix {
        &self.positions
    }

    pub fn momenta(&self) -> &FeatureMatrix {
        &self.momenta
    }

    pub fn is_finite(&self) -> bool {
        self.positions.is_finite() && self.momenta.is_finite()
    }

    pub(crate) fn expect_chart(&self, expected: Chart) -> Result<()> {
        if self.chart == expected {
            Ok(())
        } else {
            Err(Error::WrongChart {
                expected,
                found: self.chart,
            })
        }
    }
}

/// `e^{sign·t/ε}`, or `ScaleOverflow` when `|t|/ε` exceeds [`SCALE_LIMIT`].
pub fn time_scale(t: f64, epsilon: f64, sign: f64) -> Result<f64> {
    let ratio = t / epsilon;
    if !ratio.is_finite() || ratio.abs() > SCALE_LIMIT {
        return Err(Error::ScaleOverflow {
            ratio: ratio.abs(),
            limit: SCALE_LIMIT,
        });
    }
    Ok((sign * ratio).exp())
}

/// Moves a state between the canonical and rescaled charts.
///
/// Positions are untouched; momenta pick up `e^{t/ε}` going to the
/// rescaled chart and `e^{-t/ε}` going back.
pub fn chart_convert(s: &PhaseVector, target: Chart) -> Result<PhaseVector> {
    if s.chart == target {
        return Ok(s.clone());
    }
    let sign = match target {
        Chart::Rescaled => 1.0,
        Chart::Canonical => -1.0,
    };
    let factor = time_scale(s.t, s.epsilon, sign)?;
    PhaseVector::new(
        target,
        s.positions.clone(),
        s.momenta.scaled(factor),
        s.t,
        s.epsilon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn complete_three_node_graph_is_valid() {
        let w = mat(&[&[0., 1., 1.], &[1., 0., 1.], &[1., 1., 0.]]);
        assert!(validate_graph(&w).is_ok());
        assert_eq!(Graph::complete(3).unwrap().incidence(), w);
    }

    #[test]
    fn asymmetric_and_diagonal_are_rejected() {
        let w = mat(&[&[0., 1.], &[0., 0.]]);
        assert!(matches!(
            validate_graph(&w),
            Err(Error::AsymmetricIncidence { i: 0, j: 1 })
        ));
        let w = mat(&[&[1., 0.], &[0., 0.]]);
        assert!(matches!(validate_graph(&w), Err(Error::NonzeroDiagonal(0))));
        let w = mat(&[&[0., 0.5], &[0.5, 0.]]);
        assert!(matches!(
            validate_graph(&w),
            Err(Error::NonBinaryIncidence { .. })
        ));
    }

    #[test]
    fn exhaustive_small_incidence_matrices() {
        // every 0/1 matrix for n <= 3; accepted iff symmetric with zero diagonal
        for n in 1..=3usize {
            for bits in 0u32..(1 << (n * n)) {
                let w = DMatrix::from_fn(n, n, |i, j| f64::from((bits >> (i * n + j)) & 1));
                let expected = (0..n).all(|i| w[(i, i)] == 0.0)
                    && (0..n).all(|i| (0..n).all(|j| w[(i, j)] == w[(j, i)]));
                assert_eq!(validate_graph(&w).is_ok(), expected, "{w}");
            }
        }
    }

    proptest! {
        #[test]
        fn random_four_node_matrices(bits in 0u32..(1 << 16)) {
            let n = 4;
            let w = DMatrix::from_fn(n, n, |i, j| f64::from((bits >> (i * n + j)) & 1));
            let expected = (0..n).all(|i| w[(i, i)] == 0.0)
                && (0..n).all(|i| (0..n).all(|j| w[(i, j)] == w[(j, i)]));
            prop_assert_eq!(validate_graph(&w).is_ok(), expected);
        }

        #[test]
        fn assembled_w_is_symmetric(
            dp in 1usize..7, d in 1usize..7,
            seed in proptest::collection::vec(-3.0f64..3.0, 98),
        ) {
            let dp = dp.max(d);
            let k = DMatrix::from_fn(dp, d, |i, j| seed[i * d + j]);
            let q = DMatrix::from_fn(dp, d, |i, j| seed[49 + i * d + j]);
            let w = assemble_w(&k, &q).unwrap();
            prop_assert_eq!(&w, &w.transpose());
        }

        #[test]
        fn chart_conversion_round_trips(
            t in -5.0f64..5.0, eps in 0.05f64..3.0,
            p in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            let x = FeatureMatrix::new(2, 3, vec![1.0; 6]).unwrap();
            let p = FeatureMatrix::new(2, 3, p).unwrap();
            let s = PhaseVector::canonical(x, p, t, eps).unwrap();
            let back = chart_convert(&chart_convert(&s, Chart::Rescaled).unwrap(), Chart::Canonical).unwrap();
            for (a, b) in back.momenta().as_slice().iter().zip(s.momenta().as_slice()) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(f64::MIN_POSITIVE));
            }
            prop_assert_eq!(back.positions(), s.positions());
        }
    }

    #[test]
    fn assemble_w_special_cases() {
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(assemble_w(&id, &id).unwrap(), &id * 2.0);
        let zero = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(assemble_w(&zero, &id).unwrap(), zero);
        assert!(matches!(
            assemble_w(&DMatrix::zeros(3, 2), &DMatrix::zeros(2, 2)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn chart_convert_examples() {
        let x = FeatureMatrix::from_rows(&[vec![0.5, 1.0, 0.0, 2.0]]).unwrap();
        let p = FeatureMatrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0]]).unwrap();

        let s = PhaseVector::canonical(x.clone(), p.clone(), 0.0, 0.3).unwrap();
        let r = chart_convert(&s, Chart::Rescaled).unwrap();
        assert_eq!(r.chart(), Chart::Rescaled);
        assert_eq!(r.momenta(), s.momenta());

        let zero = PhaseVector::canonical(x.clone(), FeatureMatrix::zeros(1, 4), 2.0, 0.1).unwrap();
        assert_eq!(
            chart_convert(&zero, Chart::Rescaled).unwrap().momenta().max_abs(),
            0.0
        );

        let s = PhaseVector::canonical(x.clone(), p.clone(), 1.0, 0.1).unwrap();
        let r = chart_convert(&s, Chart::Rescaled).unwrap();
        assert!((r.momenta().node(0)[0] - 22026.465794806718).abs() < 1e-9);
        assert_eq!(&r.momenta().node(0)[1..], &[0.0, 0.0, 0.0]);

        let s = PhaseVector::canonical(x, p, 71.0, 0.1).unwrap();
        assert!(matches!(
            chart_convert(&s, Chart::Rescaled),
            Err(Error::ScaleOverflow { .. })
        ));
    }

    #[test]
    fn flat_layout_is_positions_then_momenta() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = FeatureMatrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let s = PhaseVector::canonical(x, p, 0.0, 1.0).unwrap();
        let flat = s.to_flat();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let back = PhaseVector::from_flat(Chart::Canonical, 2, 2, &flat, 0.0, 1.0).unwrap();
        assert_eq!(back, s);
    }
}
