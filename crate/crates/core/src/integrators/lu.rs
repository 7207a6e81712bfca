//! Dense LU with partial pivoting, an operation counter and a 1-norm
//! condition estimate.
//!
//! Written in-crate rather than borrowed from nalgebra because the solver
//! comparison needs exact flop counts; nalgebra's LU serves as the oracle.

// Triangular sweeps read clearest as index loops; negated comparisons
// are deliberate so that NaN fails the checks.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Factorizations whose condition estimate exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct LuFactor {
    n: usize,
    /// Row-major; unit-lower `L` below the diagonal, `U` on and above.
    lu: Vec<f64>,
    /// Row `i` of `PA` is row `perm[i]` of `A`.
    perm: Vec<usize>,
    flops: u64,
    condition: f64,
}

impl LuFactor {
    /// Factorizes `a`; fails with `SingularLinearSystem` on a zero pivot or
    /// when the condition estimate exceeds [`CONDITION_LIMIT`].
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::ShapeMismatch(format!("LU of a {:?} matrix", a.shape())));
        }
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut flops = 0u64;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > 0.0) {
                return Err(Error::SingularLinearSystem {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                flops += 1;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    lu[i * n + j] -= l * lu[k * n + j];
                }
                flops += 2 * (n - k - 1) as u64;
            }
        }
        let mut f = Self {
            n,
            lu,
            perm,
            flops,
            condition: 0.0,
        };
        f.condition = norm1 * f.inverse_norm1_estimate();
        if !(f.condition <= CONDITION_LIMIT) {
            return Err(Error::SingularLinearSystem {
                condition: f.condition,
            });
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Flops spent in the factorization (multiply-subtract counts as two).
    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// `‖A‖₁ · est(‖A⁻¹‖₁)`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Overwrites `b` with `A⁻¹ b`; returns the flops spent.
    pub fn solve_in_place(&self, b: &mut [f64]) -> u64 {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        let mut flops = 0u64;
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * y[j];
            }
            flops += 2 * i as u64;
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * y[j];
            }
            flops += 2 * (n - i - 1) as u64 + 1;
            y[i] = s / self.lu[i * n + i];
        }
        b.copy_from_slice(&y);
        flops
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = b.to_vec();
        self.solve_in_place(&mut out);
        out
    }

    /// `A⁻ᵀ b`.
    fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ w = b, Lᵀ v = w, then undo P.
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s;
        }
        let mut out = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = w[k];
        }
        out
    }

    /// Hager's estimate of `‖A⁻¹‖₁` (a lower bound, usually sharp).
    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for iter in 0..5 {
            let y = self.solve(&x);
            let norm: f64 = y.iter().map(|v| v.abs()).sum();
            if !norm.is_finite() {
                return f64::INFINITY;
            }
            if iter > 0 && norm <= est {
                break;
            }
            est = norm;
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if iter > 0 && zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        est
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_match_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..12 {
            let a = DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = LuFactor::new(&a).unwrap();
            let x = lu.solve(&b);
            let oracle = a.clone().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
            for (u, v) in x.iter().zip(oracle.iter()) {
                assert!((u - v).abs() < 1e-12);
            }
            let xt = lu.solve_transpose(&x);
            let oracle = a.transpose().lu().solve(&nalgebra::DVector::from_vec(x)).unwrap();
            for (u, v) in xt.iter().zip(oracle.iter()) {
                assert!((u - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn condition_estimate_is_close_to_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = 6;
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let Ok(lu) = LuFactor::new(&a) else { continue };
            let inv = a.clone().try_inverse().unwrap();
            let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
            let exact = norm1(&a) * norm1(&inv);
            assert!(lu.condition() <= exact * (1.0 + 1e-10));
            assert!(lu.condition() >= exact / 10.0, "{} vs {exact}", lu.condition());
        }
    }

    #[test]
    fn singular_and_ill_conditioned_are_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(LuFactor::new(&a), Err(Error::SingularLinearSystem { .. })));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert!(matches!(LuFactor::new(&a), Err(Error::SingularLinearSystem { .. })));
    }

    #[test]
    fn flop_count_is_cubic() {
        let n = 20;
        let a = DMatrix::<f64>::from_fn(n, n, |i, j| if i == j { 4.0 } else { 1.0 / (1.0 + (i + j) as f64) });
        let lu = LuFactor::new(&a).unwrap();
        let expected: u64 = (0..n).map(|k| ((n - k - 1) * (1 + 2 * (n - k - 1))) as u64).sum();
        assert_eq!(lu.flops(), expected);
        let mut b = vec![1.0; n];
        assert_eq!(lu.solve_in_place(&mut b), (2 * n * n - n) as u64);
    }
}
