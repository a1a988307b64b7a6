//! Gaussian-process regression with a Gaussian (squared-exponential) kernel.
//!
//! Besides the usual value posterior, a fitted [`GpModel`] exposes the
//! posterior over the gradient of the latent function, which is again
//! Gaussian with mean `J^T C^-1 (y - m)` and covariance
//! `sigma_f L^-2 - J^T C^-1 J`, where `J` stacks the kernel Jacobians
//! `d k(x*, x_i) / d x*` of the training inputs.
//!
//! The kernel is `k(x, x') = sigma_f * exp(-0.5 (x - x')^T L^-2 (x - x'))`
//! with a diagonal lengthscale matrix `L`. `sigma_f` is the signal
//! variance itself, so `k(x, x) = sigma_f`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, ParamVector};
use crate::error::{Error, Result};

/// Initial diagonal jitter, relative to the signal variance.
pub const JITTER_START: f64 = 1e-10;
/// Largest relative jitter tried before giving up on a factorization.
pub const JITTER_MAX: f64 = 1e-4;

/// Smallest noise variance considered by [`fit_noise`].
pub const NOISE_MIN: f64 = 1e-8;
const NOISE_GRID_POINTS: usize = 61;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    /// Diagonal of `L`, in normalized units.
    pub lengthscales: Vec<f64>,
    /// `sigma_f`, the prior variance `k(x, x)`.
    pub signal_variance: f64,
    /// `sigma_n^2`.
    pub noise_variance: f64,
    /// Constant prior mean `mu_0`.
    pub prior_mean: f64,
}

impl GpHyperparams {
    /// The fixed tuning values used throughout the benchmark suite:
    /// `L = 0.25 I`, `sigma_f = 0.5`, `mu_0 = 1`.
    pub fn standard(d: usize, noise_variance: f64) -> Self {
        Self {
            lengthscales: vec![0.25; d],
            signal_variance: 0.5,
            noise_variance,
            prior_mean: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidConfig("lengthscales must be positive".into()));
        }
        if !(self.signal_variance > 0.0) {
            return Err(Error::InvalidConfig("signal variance must be positive".into()));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::InvalidConfig("noise variance must be non-negative".into()));
        }
        if !self.prior_mean.is_finite() {
            return Err(Error::InvalidConfig("prior mean must be finite".into()));
        }
        Ok(())
    }

    /// Diagonal of `L^-2`.
    pub fn inv_sq_lengthscales(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| 1.0 / (l * l)).collect()
    }
}

/// Squared Mahalanobis distance under `L^-2`.
fn scaled_sq_dist(x: &[f64], x2: &[f64], h: &GpHyperparams) -> f64 {
    x.iter()
        .zip(x2)
        .zip(&h.lengthscales)
        .map(|((a, b), l)| {
            let r = (a - b) / l;
            r * r
        })
        .sum()
}

pub(crate) fn kernel_raw(x: &[f64], x2: &[f64], h: &GpHyperparams) -> f64 {
    h.signal_variance * (-0.5 * scaled_sq_dist(x, x2, h)).exp()
}

pub fn kernel(x: &ParamVector, x2: &ParamVector, h: &GpHyperparams) -> f64 {
    kernel_raw(x.coords(), x2.coords(), h)
}

/// `d k(x_star, x2) / d x_star = -L^-2 (x_star - x2) k(x_star, x2)`.
pub fn kernel_jacobian(x_star: &ParamVector, x2: &ParamVector, h: &GpHyperparams) -> DVector<f64> {
    let (a, b) = (x_star.coords(), x2.coords());
    let k = kernel_raw(a, b, h);
    DVector::from_iterator(
        a.len(),
        a.iter()
            .zip(b)
            .zip(&h.lengthscales)
            .map(|((ai, bi), l)| -(ai - bi) / (l * l) * k),
    )
}

/// `d^2 k(x, x2) / dx dx2^T = (L^-2 - L^-2 (x - x2)(x - x2)^T L^-2) k(x, x2)`.
pub fn kernel_cross_hessian(x: &ParamVector, x2: &ParamVector, h: &GpHyperparams) -> DMatrix<f64> {
    let (a, b) = (x.coords(), x2.coords());
    let d = a.len();
    let k = kernel_raw(a, b, h);
    let lam = h.inv_sq_lengthscales();
    let s: Vec<f64> = (0..d).map(|i| lam[i] * (a[i] - b[i])).collect();
    DMatrix::from_fn(d, d, |i, j| {
        let diag = if i == j { lam[i] } else { 0.0 };
        (diag - s[i] * s[j]) * k
    })
}

/// Posterior mean and covariance of the gradient at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GradientBelief {
    pub fn total_variance(&self) -> f64 {
        self.cov.trace()
    }
}

/// Gram matrix `k(X, X)` (no noise, no jitter).
pub fn gram(xs: &[ParamVector], h: &GpHyperparams) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = h.signal_variance;
        for j in 0..i {
            let v = kernel(&xs[i], &xs[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `c + jitter * I`, escalating the jitter by 10x from
/// `JITTER_START * scale` up to `JITTER_MAX * scale`.
pub(crate) fn robust_cholesky(c: DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * scale;
        let mut m = c.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, jitter));
        }
        if rel >= JITTER_MAX * (1.0 - 1e-12) {
            return Err(Error::IllConditioned { jitter });
        }
        rel *= 10.0;
    }
}

/// A fitted GP posterior. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyperparams,
    train_x: Vec<ParamVector>,
    train_y: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Conditions the prior on `(xs, ys)`.
pub fn fit(xs: &[ParamVector], ys: &[f64], h: &GpHyperparams) -> Result<GpModel> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if let Some(bad) = xs.iter().find(|x| x.dim() != h.dim()) {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: bad.dim(),
        });
    }
    let n = xs.len();
    let train_y = DVector::from_column_slice(ys);
    if n == 0 {
        return Ok(GpModel {
            hyper: h.clone(),
            train_x: Vec::new(),
            train_y,
            chol: None,
            alpha: DVector::zeros(0),
            jitter: 0.0,
        });
    }
    let mut c = gram(xs, h);
    for i in 0..n {
        c[(i, i)] += h.noise_variance;
    }
    let (chol, jitter) = robust_cholesky(c, h.signal_variance)?;
    let resid = train_y.add_scalar(-h.prior_mean);
    let alpha = chol.solve(&resid);
    Ok(GpModel {
        hyper: h.clone(),
        train_x: xs.to_vec(),
        train_y,
        chol: Some(chol),
        alpha,
        jitter,
    })
}

/// Fits on the successful observations of `ds` only.
pub fn fit_feasible(ds: &Dataset, h: &GpHyperparams) -> Result<GpModel> {
    fit(ds.x(), ds.y(), h)
}

impl GpModel {
    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn train_x(&self) -> &[ParamVector] {
        &self.train_x
    }

    pub fn train_y(&self) -> &DVector<f64> {
        &self.train_y
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    /// Jitter that was added to the diagonal of `C` to make it factorizable.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Cholesky factor of `C`, `None` for the prior model.
    pub fn cholesky(&self) -> Option<&Cholesky<f64, Dyn>> {
        self.chol.as_ref()
    }

    /// Cached `C^-1 (y - mu_0)`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Cross-covariance vector `kappa(x*) = k(X, x*)`.
    pub fn kappa(&self, x_star: &ParamVector) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.train_x.iter().map(|xi| kernel(x_star, xi, &self.hyper)),
        )
    }

    /// `n x d` matrix whose rows are `d k(x*, x_i) / d x*`.
    pub fn kappa_jacobian(&self, x_star: &ParamVector) -> DMatrix<f64> {
        let d = self.hyper.dim();
        let mut j = DMatrix::zeros(self.len(), d);
        for (i, xi) in self.train_x.iter().enumerate() {
            j.set_row(i, &kernel_jacobian(x_star, xi, &self.hyper).transpose());
        }
        j
    }

    pub fn posterior_mean(&self, x_star: &ParamVector) -> f64 {
        if self.is_empty() {
            return self.hyper.prior_mean;
        }
        self.hyper.prior_mean + self.kappa(x_star).dot(&self.alpha)
    }

    /// Posterior mean and variance of the latent function at `x_star`.
    pub fn posterior(&self, x_star: &ParamVector) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (self.hyper.prior_mean, self.hyper.signal_variance);
        };
        let kap = self.kappa(x_star);
        let mean = self.hyper.prior_mean + kap.dot(&self.alpha);
        let v = chol.l().solve_lower_triangular(&kap).expect("triangular factor is invertible");
        let var = (self.hyper.signal_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    /// Posterior over `grad f(x_star)`.
    pub fn posterior_gradient(&self, x_star: &ParamVector) -> GradientBelief {
        let d = self.hyper.dim();
        let prior_cov = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            self.hyper.inv_sq_lengthscales().into_iter().map(|l| l * self.hyper.signal_variance),
        ));
        let Some(chol) = &self.chol else {
            return GradientBelief {
                mean: DVector::zeros(d),
                cov: prior_cov,
            };
        };
        let jac = self.kappa_jacobian(x_star);
        let mean = jac.transpose() * &self.alpha;
        let v = chol.l().solve_lower_triangular(&jac).expect("triangular factor is invertible");
        let mut cov = prior_cov - v.transpose() * v;
        symmetrize(&mut cov);
        GradientBelief { mean, cov }
    }

    /// Log marginal likelihood of the training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let Some(chol) = &self.chol else {
            return 0.0;
        };
        let resid = self.train_y.add_scalar(-self.hyper.prior_mean);
        let n = self.len() as f64;
        let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        -0.5 * resid.dot(&self.alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Log-spaced candidate noise variances in `[NOISE_MIN, sigma_f]`.
pub fn noise_grid(h: &GpHyperparams) -> Vec<f64> {
    let lo = NOISE_MIN.ln();
    let hi = h.signal_variance.max(NOISE_MIN).ln();
    (0..NOISE_GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (NOISE_GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// Log marginal likelihood of `ds`'s successful observations under `h`.
pub fn log_marginal_likelihood(ds: &Dataset, h: &GpHyperparams) -> Result<f64> {
    Ok(fit_feasible(ds, h)?.log_marginal_likelihood())
}

/// Re-estimates only `noise_variance` by maximizing the log marginal likelihood
/// over a log-spaced grid in `[NOISE_MIN, sigma_f]`. Every other hyperparameter
/// is left alone. With fewer than two observations `h` is returned unchanged.
pub fn fit_noise(ds: &Dataset, h: &GpHyperparams) -> GpHyperparams {
    if ds.n_feasible() < 2 {
        return h.clone();
    }
    let mut best: Option<(f64, f64)> = None;
    for noise in noise_grid(h) {
        let cand = GpHyperparams {
            noise_variance: noise,
            ..h.clone()
        };
        let Ok(lml) = log_marginal_likelihood(ds, &cand) else {
            continue;
        };
        if best.is_none_or(|(_, b)| lml > b) {
            best = Some((noise, lml));
        }
    }
    match best {
        Some((noise, _)) => GpHyperparams {
            noise_variance: noise,
            ..h.clone()
        },
        None => h.clone(),
    }
}
