//! Randomized check of the structural matrix identities behind charge
//! conservation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dynamics::{
    build_c, canonical_identity_residual, congruence_residual, congruence_residual_offdiagonal,
    rescaled_identity_residual, SystemMatrixB, SystemMatrixE,
};
use crate::error::{Error, Result};
use crate::graph_model::{ActivationFn, AttentionParams, FeatureMatrix, Graph};

/// Max-norm residuals over all trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub trials: usize,
    pub seed: u64,
    /// `Eᵀ K + K E = 0`.
    pub canonical: f64,
    /// `Bᵀ K + K B = K/ε`.
    pub rescaled: f64,
    /// `Eᵀ K E = (1/ε) diag(C, C) K`.
    pub congruence: f64,
    /// `Eᵀ K E = (1/ε) [[O, C], [C, O]] K`; not an identity, reported for
    /// comparison.
    pub congruence_offdiagonal: f64,
    /// Largest `‖𝕎R − R𝕎‖` among the generated pairs.
    pub commutator: f64,
}

/// Random symmetric `𝕎` and a skew `R` with `[𝕎, R] = 0`.
///
/// Both are built in a random orthonormal frame `Q`: `𝕎 = Q Λ Qᵀ` with
/// `λ_1 = λ_2`, and `R = Q (e_2 e_1ᵀ − e_1 e_2ᵀ) Qᵀ` rotates that
/// eigenplane.
pub fn random_commuting_pair(rng: &mut impl Rng, d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(d >= 2, "need d >= 2");
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let mut lambda: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
    lambda[1] = lambda[0];
    let w = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda)) * q.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let mut r0 = DMatrix::zeros(d, d);
    r0[(1, 0)] = 1.0;
    r0[(0, 1)] = -1.0;
    let r = &q * r0 * q.transpose();
    let r = (&r - r.transpose()) * 0.5;
    (w, r)
}

pub fn identities(trials: usize, seed: u64) -> Result<IdentityReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = IdentityReport {
        trials,
        seed,
        canonical: 0.0,
        rescaled: 0.0,
        congruence: 0.0,
        congruence_offdiagonal: 0.0,
        commutator: 0.0,
    };
    let activations = ActivationFn::elementwise();
    for _ in 0..trials {
        let n = rng.gen_range(1..=5);
        let d = rng.gen_range(2..=6);
        let (w, r) = random_commuting_pair(&mut rng, d);
        rep.commutator = rep.commutator.max((&w * &r - &r * &w).amax());
        let f = activations[rng.gen_range(0..activations.len())].clone();
        let p = AttentionParams::from_symmetric(w, f)?;
        let x = FeatureMatrix::new(n, d, (0..n * d).map(|_| rng.gen_range(-0.5..0.5)).collect())?;
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.gen_bool(0.7))
            .collect();
        let g = Graph::from_edges(n, &edges)?;
        let c = build_c(&x, &g, &p)?;
        let eps = rng.gen_range(0.2..1.0);
        let t = rng.gen_range(0.0..0.5);
        let e = SystemMatrixE::new(c.clone(), t, eps)?;
        let b = SystemMatrixB::new(c, eps)?;
        rep.canonical = rep.canonical.max(canonical_identity_residual(&e, &r));
        rep.rescaled = rep.rescaled.max(rescaled_identity_residual(&b, &r));
        rep.congruence = rep.congruence.max(congruence_residual(&e, &r));
        rep.congruence_offdiagonal = rep.congruence_offdiagonal.max(congruence_residual_offdiagonal(&e, &r));
    }
    Ok(rep)
}
