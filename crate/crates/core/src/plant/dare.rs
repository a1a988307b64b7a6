//! Discrete algebraic Riccati equation by fixed-point iteration.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

pub const DARE_TOLERANCE: f64 = 1e-10;
pub const DARE_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct DareSolution {
    /// Stabilizing solution `P`.
    pub p: DMatrix<f64>,
    /// State feedback gain `K = (R + B^T P B)^-1 B^T P A`, for `u = -K x`.
    pub k: DMatrix<f64>,
    pub iterations: usize,
}

/// Iterates `P <- Q + A^T P A - A^T P B (R + B^T P B)^-1 B^T P A` from `P = Q`
/// until the max-norm update drops below `1e-10` (relative to `max(1, |P|)`).
pub fn solve_dare(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DareSolution> {
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    for it in 1..=DARE_MAX_ITERS {
        let btp = &bt * &p;
        let s = r + &btp * b;
        let chol = Cholesky::new(s).ok_or(Error::RiccatiDiverged { iterations: it })?;
        let k = chol.solve(&(&btp * a));
        let mut next = q + &at * &p * a - &at * &p * b * &k;
        next = 0.5 * (&next + next.transpose());
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::RiccatiDiverged { iterations: it });
        }
        let delta = (&next - &p).amax();
        p = next;
        if delta <= DARE_TOLERANCE * p.amax().max(1.0) {
            let btp = &bt * &p;
            let chol = Cholesky::new(r + &btp * b).ok_or(Error::RiccatiDiverged { iterations: it })?;
            let k = chol.solve(&(&btp * a));
            return Ok(DareSolution { p, k, iterations: it });
        }
    }
    Err(Error::RiccatiDiverged {
        iterations: DARE_MAX_ITERS,
    })
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_golden_ratio() {
        let sol = solve_dare(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.p[(0, 0)] - golden).abs() < 1e-9);
        // p^2 - p - 1 = 0
        let p = sol.p[(0, 0)];
        assert!((p * p - p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_dynamics_returns_q() {
        let q = DMatrix::from_diagonal_element(3, 3, 2.5);
        let sol = solve_dare(&DMatrix::zeros(3, 3), &DMatrix::identity(3, 2), &q, &DMatrix::identity(2, 2)).unwrap();
        assert!((sol.p - q).amax() < 1e-14);
    }

    #[test]
    fn random_systems_are_stabilized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut solved = 0;
        while solved < 50 {
            let n = rng.random_range(1..5);
            let m = rng.random_range(1..=n);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.5..1.5));
            let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
            // skip (rare) numerically uncontrollable draws
            let mut ctrb = DMatrix::zeros(n, n * m);
            let mut ak = DMatrix::identity(n, n);
            for k in 0..n {
                ctrb.view_mut((0, k * m), (n, m)).copy_from(&(&ak * &b));
                ak = &a * ak;
            }
            if ctrb.clone().svd(false, false).singular_values.min() < 1e-3 {
                continue;
            }
            let sol = solve_dare(&a, &b, &DMatrix::identity(n, n), &DMatrix::identity(m, m)).unwrap();
            let closed = &a - &b * &sol.k;
            assert!(spectral_radius(&closed) < 1.0);
            solved += 1;
        }
    }

    #[test]
    fn residual_is_small() {
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.2, 0.0, 0.9]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = scalar(0.5);
        let sol = solve_dare(&a, &b, &q, &r).unwrap();
        let p = &sol.p;
        let resid = &q + a.transpose() * p * &a
            - a.transpose() * p * &b * (&r + b.transpose() * p * &b).try_inverse().unwrap() * b.transpose() * p * &a
            - p;
        assert!(resid.amax() < 1e-8);
    }
}
