//! `(I − τE)⁻¹` through one `n̂ × n̂` factorization.
//!
//! With `E = [[O, aI], [−bC, O]]` and `ab = 1/ε`, `E² = −(1/ε) diag(C, C)`,
//! so `(I − τE)(I + τE) = I₂ ⊗ M` with `M = I + (τ²/ε) C`. Hence
//! `(I − τE)⁻¹ = (I₂ ⊗ M⁻¹)(I + τE)`.

use nalgebra::{DMatrix, DVector};

use super::lu::LuFactor;
use crate::dynamics::SystemMatrixE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolve {
    pub solution: Vec<f64>,
    /// Factorization + triangular solves + matrix-vector work.
    pub flops: u64,
    pub condition: f64,
}

/// A factorized `(I − τE)` ready for repeated solves.
#[derive(Debug, Clone)]
pub struct BlockwiseSolver<'e> {
    e: &'e SystemMatrixE,
    tau: f64,
    m: LuFactor,
}

impl<'e> BlockwiseSolver<'e> {
    pub fn new(e: &'e SystemMatrixE, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::NonFinite("step size"));
        }
        let k = e.c().n_hat();
        let m = DMatrix::identity(k, k) + e.c().to_dense() * (tau * tau / e.epsilon());
        Ok(Self {
            e,
            tau,
            m: LuFactor::new(&m)?,
        })
    }

    pub fn condition(&self) -> f64 {
        self.m.condition()
    }

    pub fn factor_flops(&self) -> u64 {
        self.m.flops()
    }

    /// `(I + τE) v`.
    pub fn apply_plus(&self, v: &[f64]) -> Vec<f64> {
        self.e
            .apply(v)
            .iter()
            .zip(v)
            .map(|(ev, vv)| vv + self.tau * ev)
            .collect()
    }

    /// `(I − τE)⁻¹ v` and the flops spent on it (excluding the factorization).
    pub fn solve_counted(&self, v: &[f64]) -> (Vec<f64>, u64) {
        let k = self.e.c().n_hat();
        let mut u = self.apply_plus(v);
        // dense-equivalent cost of C·v_x plus the two axpys
        let mut flops = (2 * k * k + 4 * k) as u64;
        let (ux, up) = u.split_at_mut(k);
        flops += self.m.solve_in_place(ux);
        flops += self.m.solve_in_place(up);
        (u, flops)
    }

    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.solve_counted(v).0
    }
}

/// Applies `(I − τE)⁻¹` to `rhs` via the block factorization.
pub fn solve_blockwise(e: &SystemMatrixE, tau: f64, rhs: &[f64]) -> Result<LinearSolve> {
    check_len(e, rhs)?;
    let solver = BlockwiseSolver::new(e, tau)?;
    let (solution, flops) = solver.solve_counted(rhs);
    Ok(LinearSolve {
        solution,
        flops: flops + solver.factor_flops(),
        condition: solver.condition(),
    })
}

/// Same system, factorized as a dense `2n̂ × 2n̂` matrix with the in-crate
/// LU. Used for the operation-count comparison.
pub fn solve_dense(e: &SystemMatrixE, tau: f64, rhs: &[f64]) -> Result<LinearSolve> {
    check_len(e, rhs)?;
    let k = 2 * e.c().n_hat();
    let a = DMatrix::identity(k, k) - e.to_dense() * tau;
    let lu = LuFactor::new(&a)?;
    let mut solution = rhs.to_vec();
    let flops = lu.flops() + lu.solve_in_place(&mut solution);
    Ok(LinearSolve {
        solution,
        flops,
        condition: lu.condition(),
    })
}

/// Independent oracle: nalgebra's LU on the dense system.
pub fn solve_dense_reference(e: &SystemMatrixE, tau: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    check_len(e, rhs)?;
    let k = 2 * e.c().n_hat();
    let a = DMatrix::identity(k, k) - e.to_dense() * tau;
    a.lu()
        .solve(&DVector::from_column_slice(rhs))
        .map(|v| v.as_slice().to_vec())
        .ok_or(Error::SingularLinearSystem {
            condition: f64::INFINITY,
        })
}

fn check_len(e: &SystemMatrixE, rhs: &[f64]) -> Result<()> {
    let k = 2 * e.c().n_hat();
    if rhs.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} entries, expected {k}",
            rhs.len()
        )));
    }
    Ok(())
}
