//! Design of experiments that minimizes the posterior total variance of the
//! gradient at the current iterate.
//!
//! The total variance after adding a batch `Z` to the data is
//! `tr(sigma_f L^-2) - tr(J'^T C'^-1 J')`, where `C'` and `J'` are the
//! covariance matrix and kernel Jacobian of the training inputs extended by
//! `Z`. It depends only on the locations in `Z`, never on the values that
//! will eventually be observed there, so it can be minimized before any
//! experiment is run.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::ParamVector;
use crate::gp::{self, kernel_raw, GpModel};

/// Batch points closer than this are nudged apart.
pub const MIN_SEPARATION: f64 = 1e-6;
/// Size of the nudge applied to near-duplicate batch points.
pub const SEPARATION_NUDGE: f64 = 1e-4;
pub const DEFAULT_N_STARTS: usize = 8;
pub const MAX_ITERS: usize = 200;
/// Candidates scored per point by the greedy start.
pub const GREEDY_CANDIDATES: usize = 64;

/// Half-width of the box around `x*` used by the first start.
const FIRST_START_OFFSET: f64 = 0.1;
/// Other starts are drawn within this many lengthscales of `x*`.
const START_RADIUS_LENGTHSCALES: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DoePlan {
    pub batch: Vec<ParamVector>,
    pub achieved_total_variance: f64,
    pub starts_tried: usize,
}

/// Precomputed pieces of the total-variance objective for a fixed model and iterate.
///
/// Evaluation cost is one Cholesky of size `n + b`; the gradient with respect to
/// all batch coordinates comes almost for free from the same factorization.
pub struct TotalVariance<'a> {
    model: &'a GpModel,
    x_star: Vec<f64>,
    inv_sq_ls: Vec<f64>,
    prior_trace: f64,
    /// `K(X, X) + sigma_n^2 I` of the training data; jitter is added per solve.
    base_cov: DMatrix<f64>,
    /// Rows are `d k(x*, x_i) / d x*` for the training inputs.
    base_jac: DMatrix<f64>,
}

impl<'a> TotalVariance<'a> {
    pub fn new(model: &'a GpModel, x_star: &ParamVector) -> Self {
        let h = model.hyper();
        let n = model.len();
        let mut base_cov = gp::gram(model.train_x(), h);
        for i in 0..n {
            base_cov[(i, i)] += h.noise_variance;
        }
        let inv_sq_ls = h.inv_sq_lengthscales();
        let prior_trace = inv_sq_ls.iter().sum::<f64>() * h.signal_variance;
        Self {
            model,
            x_star: x_star.coords().to_vec(),
            inv_sq_ls,
            prior_trace,
            base_cov,
            base_jac: model.kappa_jacobian(x_star),
        }
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    fn point<'b>(&'b self, z: &'b [f64], i: usize) -> &'b [f64] {
        let n = self.model.len();
        if i < n {
            self.model.train_x()[i].coords()
        } else {
            let d = self.dim();
            &z[(i - n) * d..(i - n + 1) * d]
        }
    }

    fn jac_row<'b>(&'b self, p: &'b [f64]) -> impl Iterator<Item = f64> + 'b {
        let k = kernel_raw(&self.x_star, p, self.model.hyper());
        self.x_star
            .iter()
            .zip(p)
            .zip(&self.inv_sq_ls)
            .map(move |((xs, pi), lam)| -(xs - pi) * lam * k)
    }

    /// Augmented covariance `C'` and Jacobian `J'` for the flattened batch `z`.
    fn augmented(&self, z: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let h = self.model.hyper();
        let d = self.dim();
        let n = self.model.len();
        let b = z.len() / d;
        let m = n + b;
        let mut c = DMatrix::zeros(m, m);
        c.view_mut((0, 0), (n, n)).copy_from(&self.base_cov);
        for j in n..m {
            let pj = self.point(z, j);
            c[(j, j)] = h.signal_variance + h.noise_variance;
            for i in 0..j {
                let v = kernel_raw(pj, self.point(z, i), h);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let mut jac = DMatrix::zeros(m, d);
        jac.view_mut((0, 0), (n, d)).copy_from(&self.base_jac);
        for j in n..m {
            for (c_idx, v) in self.jac_row(self.point(z, j)).enumerate() {
                jac[(j, c_idx)] = v;
            }
        }
        (c, jac)
    }

    /// `A = C'^-1 J'`, or `None` if `C'` cannot be factorized.
    fn solve(&self, z: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let (c, jac) = self.augmented(z);
        if c.nrows() == 0 {
            return Some((jac.clone(), jac));
        }
        let (chol, _) = gp::robust_cholesky(c, self.model.hyper().signal_variance).ok()?;
        let a = chol.solve(&jac);
        Some((jac, a))
    }

    /// Total variance for the flattened batch `z` (length `b * d`).
    pub fn value(&self, z: &[f64]) -> f64 {
        match self.solve(z) {
            Some((jac, a)) => self.prior_trace - jac.component_mul(&a).sum(),
            None => f64::INFINITY,
        }
    }

    /// Total variance and its gradient with respect to every entry of `z`.
    pub fn value_and_grad(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let Some((jac, a)) = self.solve(z) else {
            return (f64::INFINITY, vec![0.0; z.len()]);
        };
        let value = self.prior_trace - jac.component_mul(&a).sum();
        let h = self.model.hyper();
        let d = self.dim();
        let n = self.model.len();
        let m = jac.nrows();
        let mut grad = vec![0.0; z.len()];
        for j in 0..z.len() / d {
            let p = n + j;
            let zj = self.point(z, p);
            let k_star = kernel_raw(&self.x_star, zj, h);
            // kernel values between z_j and every other input
            let others: Vec<(usize, f64, f64)> = (0..m)
                .filter(|&q| q != p)
                .map(|q| {
                    let wq = self.point(z, q);
                    let aat: f64 = (0..d).map(|e| a[(p, e)] * a[(q, e)]).sum();
                    (q, kernel_raw(zj, wq, h), aat)
                })
                .collect();
            for c in 0..d {
                let lam_c = self.inv_sq_ls[c];
                let dk_star = (self.x_star[c] - zj[c]) * lam_c;
                let mut d_jac = 0.0;
                for e in 0..d {
                    let base = if e == c { self.inv_sq_ls[e] } else { 0.0 };
                    let row = -(self.x_star[e] - zj[e]) * self.inv_sq_ls[e];
                    d_jac += (base + row * dk_star) * k_star * a[(p, e)];
                }
                let mut d_cov = 0.0;
                for &(q, kq, aat) in &others {
                    let wq = self.point(z, q);
                    d_cov += -(zj[c] - wq[c]) * lam_c * kq * aat;
                }
                // d tr(J^T C^-1 J) = 2 tr(dJ^T A) - tr(A^T dC A)
                grad[j * d + c] = -(2.0 * d_jac - 2.0 * d_cov);
            }
        }
        (value, grad)
    }
}

/// Total variance `tr(grad k_{D'}(x*))` of the gradient posterior after the
/// locations `x_prime` are added to the model's data.
pub fn total_variance(model: &GpModel, x_star: &ParamVector, x_prime: &[ParamVector]) -> f64 {
    let tv = TotalVariance::new(model, x_star);
    tv.value(&flatten(x_prime))
}

fn flatten(points: &[ParamVector]) -> Vec<f64> {
    points.iter().flat_map(|p| p.coords().iter().copied()).collect()
}

fn unflatten(z: &[f64], d: usize) -> Vec<ParamVector> {
    z.chunks(d).map(|c| ParamVector::new(c.to_vec())).collect()
}

/// Nudges batch points that sit on top of each other.
fn separate(z: &mut [f64], d: usize) {
    let b = z.len() / d;
    for j in 1..b {
        for i in 0..j {
            let dist2: f64 = (0..d).map(|c| (z[j * d + c] - z[i * d + c]).powi(2)).sum();
            if dist2.sqrt() < MIN_SEPARATION {
                for c in 0..d {
                    let v = z[j * d + c];
                    // move inward so the nudge never gets clipped away
                    z[j * d + c] = if v + SEPARATION_NUDGE <= 1.0 {
                        v + SEPARATION_NUDGE
                    } else {
                        v - SEPARATION_NUDGE
                    };
                }
            }
        }
    }
}

fn project(z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Projected gradient descent with Armijo backtracking on the unit cube.
fn local_minimize(tv: &TotalVariance<'_>, start: Vec<f64>) -> (Vec<f64>, f64) {
    let mut z = start;
    let (mut f, mut g) = tv.value_and_grad(&z);
    if !f.is_finite() {
        return (z, f);
    }
    let mut step = 0.1 / g.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    for _ in 0..MAX_ITERS {
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect();
            project(&mut cand);
            let decrease: f64 = z.iter().zip(&cand).zip(&g).map(|((a, b), gi)| gi * (a - b)).sum();
            if decrease <= 0.0 {
                break;
            }
            let fc = tv.value(&cand);
            if fc <= f - 1e-4 * decrease {
                let (nf, ng) = tv.value_and_grad(&cand);
                let improvement = f - nf;
                z = cand;
                f = nf;
                g = ng;
                accepted = true;
                step *= 2.0;
                if improvement <= 1e-12 * f.abs().max(1e-12) {
                    return (z, f);
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (z, f)
}

/// Builds a batch one point at a time, each the best of [`GREEDY_CANDIDATES`]
/// draws within two lengthscales of `x*` given the points already chosen.
/// Reaches clustered optima that independent uniform starts rarely land in.
fn greedy_start(tv: &TotalVariance<'_>, x_star: &ParamVector, b: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = x_star.dim();
    let radius: Vec<f64> = tv.model.hyper().lengthscales.iter().map(|l| START_RADIUS_LENGTHSCALES * l).collect();
    let mut z: Vec<f64> = Vec::with_capacity(b * d);
    for _ in 0..b {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..GREEDY_CANDIDATES {
            let mut cand = z.clone();
            cand.extend((0..d).map(|c| x_star.coords()[c] + rng.random_range(-radius[c]..=radius[c])));
            project(&mut cand);
            separate(&mut cand, d);
            let f = tv.value(&cand);
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((cand, f));
            }
        }
        z = best.expect("at least one candidate").0;
    }
    z
}

/// Draws the start batches: the first puts the batch on distinct `+-0.1` corners around `x*`,
/// the rest are uniform within two lengthscales of `x*`.
fn start_batches(model: &GpModel, x_star: &ParamVector, b: usize, n_starts: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = x_star.dim();
    let radius: Vec<f64> = model
        .hyper()
        .lengthscales
        .iter()
        .map(|l| START_RADIUS_LENGTHSCALES * l)
        .collect();
    (0..n_starts.max(1))
        .map(|s| {
            let mut z = Vec::with_capacity(b * d);
            for j in 0..b {
                for c in 0..d {
                    let x = x_star.coords()[c];
                    let v = if s == 0 {
                        // point j sits on the corner given by the bits of j, so no two coincide
                        if (j >> (c % usize::BITS as usize)) & 1 == 1 {
                            x + FIRST_START_OFFSET
                        } else {
                            x - FIRST_START_OFFSET
                        }
                    } else {
                        x + rng.random_range(-radius[c]..=radius[c])
                    };
                    z.push(v);
                }
            }
            project(&mut z);
            separate(&mut z, d);
            z
        })
        .collect()
}

/// Plans a batch of `b` points minimizing the gradient total variance at `x_star`.
///
/// Uses `n_starts` random starts plus one greedy start. Starts are optimized
/// independently (possibly in parallel); the winner is the
/// lowest value with ties broken by start index, so the result depends only on
/// `seed`.
pub fn plan_doe(model: &GpModel, x_star: &ParamVector, b: usize, n_starts: usize, seed: u64) -> DoePlan {
    let d = x_star.dim();
    let b = b.max(1);
    let tv = TotalVariance::new(model, x_star);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = start_batches(model, x_star, b, n_starts, &mut rng);
    starts.push(greedy_start(&tv, x_star, b, &mut rng));

    let results: Vec<(Vec<f64>, f64)> = starts
        .into_par_iter()
        .map(|start| {
            let initial = tv.value(&start);
            let (mut z, _) = local_minimize(&tv, start.clone());
            separate(&mut z, d);
            let f = tv.value(&z);
            if f <= initial {
                (z, f)
            } else {
                (start, initial)
            }
        })
        .collect();

    let starts_tried = results.len();
    let (z, f) = results
        .into_iter()
        .reduce(|best, cand| if cand.1 < best.1 { cand } else { best })
        .expect("at least one start");
    DoePlan {
        batch: unflatten(&z, d),
        achieved_total_variance: f,
        starts_tried,
    }
}

/// Total variance computed by conditioning a fresh GP on the batch with explicit
/// pseudo-values. Slow; used to cross-check [`total_variance`].
pub fn total_variance_with_values(model: &GpModel, x_star: &ParamVector, x_prime: &[ParamVector], y_prime: &[f64]) -> f64 {
    let mut xs = model.train_x().to_vec();
    xs.extend_from_slice(x_prime);
    let mut ys: Vec<f64> = model.train_y().iter().copied().collect();
    ys.extend_from_slice(y_prime);
    match gp::fit(&xs, &ys, model.hyper()) {
        Ok(m) => m.posterior_gradient(x_star).total_variance(),
        Err(_) => f64::INFINITY,
    }
}
