//! Variational learning of vector-valued membership-mappings with auxiliary
//! inducing points.
//!
//! Training is closed-form: the regression weights solve a regularized
//! M-dimensional symmetric system, and the only iteration is a scalar
//! fixed-point on the disturbance precision `beta` (the inverse of the mean
//! squared training error). The number of inducing points `M` is shrunk
//! geometrically until the smoothing statistic `tau` clears a floor, and the
//! kernel variance is then scaled so the smoothing level is at least the data
//! variance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numkit::{
    cholesky_jittered, kernel, kernel_matrix, kmeans_centroids, solve_spd, DataMatrix, KernelParams,
};

/// Student-t degrees of freedom used throughout.
pub const NU: f64 = 2.1;

/// Floor on tau(M, 1) maintained by the inducing-point shrink loop.
pub const KAPPA: f64 = 0.1;

const BETA_REL_TOL: f64 = 1e-3;
const BETA_MAX_ITERS: u32 = 100;
/// Precision assigned when the training error is exactly zero.
const BETA_CAP: f64 = 1e15;
/// Relative noise floor on the Nystrom residual tr(K_xx) - q: below this the
/// inducing set explains the inputs to numerical precision and the smoothing
/// statistic carries no information, so the shrink loop must not act on it.
const RESIDUAL_NOISE_FLOOR: f64 = 1e-8;

/// A trained membership-mapping: weights `alpha` (M x p), inducing points
/// (n x M), kernel parameters, degrees of freedom and the converged
/// disturbance precision.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMappingModel {
    alpha: DMatrix<f64>,
    inducing: DMatrix<f64>,
    kp: KernelParams,
    nu: f64,
    beta: f64,
    beta_iters: u32,
}

impl MembershipMappingModel {
    /// Assemble a model from raw parts (used by deserialization and tests).
    pub fn from_parts(
        alpha: DMatrix<f64>,
        inducing: DMatrix<f64>,
        kp: KernelParams,
        nu: f64,
        beta: f64,
        beta_iters: u32,
    ) -> Result<Self> {
        if alpha.nrows() != inducing.ncols() {
            return Err(Error::invalid(format!(
                "alpha has {} rows but there are {} inducing points",
                alpha.nrows(),
                inducing.ncols()
            )));
        }
        if kp.dim() != inducing.nrows() {
            return Err(Error::invalid(format!(
                "kernel weights dimension {} does not match inducing dimension {}",
                kp.dim(),
                inducing.nrows()
            )));
        }
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        if nu.is_nan() || nu <= 2.0 {
            return Err(Error::invalid(format!("nu must exceed 2, got {nu}")));
        }
        Ok(MembershipMappingModel {
            alpha,
            inducing,
            kp,
            nu,
            beta,
            beta_iters,
        })
    }

    /// Variational learning on inputs `x` (n x N) and targets `y` (p x N)
    /// with at most `m_max` inducing points.
    pub fn fit(x: &DataMatrix, y: &DataMatrix, m_max: usize, seed: u64) -> Result<Self> {
        let n_samples = x.len();
        if y.len() != n_samples {
            return Err(Error::invalid(format!(
                "inputs have {} samples, targets have {}",
                n_samples,
                y.len()
            )));
        }
        if m_max == 0 || m_max > n_samples {
            return Err(Error::invalid(format!(
                "m_max must lie in [1, {n_samples}], got {m_max}"
            )));
        }

        let weights = feature_weights(x);
        let unit_kp = KernelParams::new(1.0, weights.clone())?;

        // Shrink M until tau(M, 1) clears the kappa floor. The shrink step
        // only fires while the residual is numerically meaningful: once the
        // inducing set captures tr(K_xx) to within the noise floor, further
        // shrinking would be driven by roundoff, not by the data.
        let mut m = m_max;
        let (inducing, tau_unit) = loop {
            let centroids = kmeans_centroids(x, m, seed)?;
            let (t, residual) = tau_with_residual(x, &centroids, &unit_kp, NU)?;
            if t >= KAPPA {
                break (centroids, t);
            }
            let floor = RESIDUAL_NOISE_FLOOR * x.len() as f64; // tr(K_xx) at sigma2 = 1
            if residual <= floor {
                break (centroids, t);
            }
            if m == 1 {
                return Err(Error::DegenerateData(format!(
                    "tau(1, 1) = {t:.3e} still below {KAPPA}; inputs cannot support the smoothing criterion"
                )));
            }
            let shrunk = (0.9 * m as f64).ceil() as usize;
            m = shrunk.min(m - 1).max(1);
        };

        // Scale the kernel variance so smoothing covers the data variance.
        // Fully degenerate inputs (tau <= 0, e.g. every column identical)
        // fall back to sigma2 = 1 and a near-constant predictor.
        let var_mean = mean_dimension_variance(y.matrix());
        let sigma2 = if tau_unit >= var_mean || tau_unit <= 0.0 {
            1.0
        } else {
            var_mean / tau_unit
        };
        let kp = KernelParams::new(sigma2, weights)?;
        let tau_sigma = sigma2 * tau_unit.max(0.0);

        let kaa = kernel_matrix(&inducing, &inducing, &kp)?;
        let kxa = kernel_matrix(x, &inducing, &kp)?;
        let gram = kxa.transpose() * &kxa;
        let y_t = y.matrix().transpose();
        let rhs = kxa.transpose() * &y_t;

        let solve_for = |beta: f64| -> Result<DMatrix<f64>> {
            let system = &gram + (&kaa * tau_sigma) + (&kaa / beta);
            solve_spd(&system, &rhs)
        };

        // Fixed point: beta is the inverse mean squared training error.
        let mut beta = 1.0f64;
        let mut iters = 0u32;
        while iters < BETA_MAX_ITERS {
            let alpha = solve_for(beta)?;
            let mse = (&y_t - &kxa * &alpha).norm_squared() / (n_samples * y.dim()) as f64;
            let beta_new = if mse > 0.0 { 1.0 / mse } else { BETA_CAP };
            iters += 1;
            let rel = (beta_new - beta).abs() / beta;
            beta = beta_new;
            if rel < BETA_REL_TOL {
                break;
            }
        }
        let alpha = solve_for(beta)?;

        Ok(MembershipMappingModel {
            alpha,
            inducing: inducing.into_inner(),
            kp,
            nu: NU,
            beta,
            beta_iters: iters,
        })
    }

    /// Predicted output for a single input: alpha^T G(x)^T where G(x) is the
    /// kernel row against the inducing points.
    pub fn predict(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has length {}, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let g = self.kernel_row(x);
        Ok(self.alpha.transpose() * g)
    }

    /// Predictions for a batch of inputs given column-wise (n x B),
    /// returned column-wise (p x B).
    pub fn predict_batch(&self, xs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if xs.nrows() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch has dimension {}, model expects {}",
                xs.nrows(),
                self.input_dim()
            )));
        }
        let xs_dm = DataMatrix::new(xs.clone())?;
        let inducing_dm = DataMatrix::new(self.inducing.clone())?;
        let keval = kernel_matrix(&xs_dm, &inducing_dm, &self.kp)?;
        Ok((keval * &self.alpha).transpose())
    }

    fn kernel_row(&self, x: &[f64]) -> DVector<f64> {
        let m = self.m();
        let mut g = DVector::zeros(m);
        for j in 0..m {
            let col = self.inducing_column(j);
            g[j] = kernel(x, col, &self.kp).expect("dimensions checked");
        }
        g
    }

    fn inducing_column(&self, j: usize) -> &[f64] {
        let n = self.inducing.nrows();
        &self.inducing.as_slice()[j * n..(j + 1) * n]
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn inducing_points(&self) -> &DMatrix<f64> {
        &self.inducing
    }

    /// Number of inducing points M.
    pub fn m(&self) -> usize {
        self.inducing.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inducing.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn kernel_params(&self) -> &KernelParams {
        &self.kp
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of fixed-point updates performed while estimating beta.
    pub fn beta_iters(&self) -> u32 {
        self.beta_iters
    }
}

/// Smoothing statistic
/// tau = [tr(K_xx) - tr(K_aa^{-1} K_xa^T K_xa)] / (nu + M - 2).
pub fn tau(x: &DataMatrix, a: &DataMatrix, kp: &KernelParams, nu: f64) -> Result<f64> {
    tau_with_residual(x, a, kp, nu).map(|(t, _)| t)
}

/// Returns (tau, residual numerator). The projected trace is evaluated as the
/// Frobenius quadratic form ||L^{-1} K_xa^T||^2 with K_aa = L L^T, which keeps
/// it non-negative and monotone in the regularizing jitter; the generic
/// inverse turns into garbage exactly where K_aa is near-singular.
fn tau_with_residual(
    x: &DataMatrix,
    a: &DataMatrix,
    kp: &KernelParams,
    nu: f64,
) -> Result<(f64, f64)> {
    if x.dim() != a.dim() {
        return Err(Error::invalid(format!(
            "data dimension {} does not match inducing dimension {}",
            x.dim(),
            a.dim()
        )));
    }
    if nu.is_nan() || nu <= 2.0 {
        return Err(Error::invalid(format!("nu must exceed 2, got {nu}")));
    }
    let m = a.len();
    // kr(x, x) = sigma2 exactly, so tr(K_xx) = N * sigma2.
    let trace_kxx = x.len() as f64 * kp.sigma2;
    let kaa = kernel_matrix(a, a, kp)?;
    let kxa = kernel_matrix(x, a, kp)?;
    let chol = cholesky_jittered(&kaa)?;
    let half = chol
        .l()
        .solve_lower_triangular(&kxa.transpose())
        .ok_or_else(|| Error::NumericalFailure("triangular solve failed".into()))?;
    let residual = trace_kxx - half.norm_squared();
    Ok((residual / (nu + m as f64 - 2.0), residual))
}

/// The closed-form weight matrix for fixed inducing points and precision:
/// alpha = (K_xa^T K_xa + tau_num/(nu+M-2) K_aa + K_aa/beta)^{-1} K_xa^T Y^T.
pub fn solve_alpha(
    x: &DataMatrix,
    y: &DataMatrix,
    inducing: &DataMatrix,
    kp: &KernelParams,
    nu: f64,
    beta: f64,
) -> Result<DMatrix<f64>> {
    if y.len() != x.len() {
        return Err(Error::invalid(
            "inputs and targets disagree on sample count",
        ));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let tau_sigma = tau(x, inducing, kp, nu)?;
    let kaa = kernel_matrix(inducing, inducing, kp)?;
    let kxa = kernel_matrix(x, inducing, kp)?;
    let system = kxa.transpose() * &kxa + &kaa * tau_sigma + &kaa / beta;
    let rhs = kxa.transpose() * y.matrix().transpose();
    solve_spd(&system, &rhs)
}

/// Posterior over the mapping outputs at the inducing points: a shared M x M
/// covariance and a per-output-dimension mean stacked into an M x p matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InducingPosterior {
    pub mean: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
}

/// Closed-form inducing posterior:
/// covariance = [K_aa^{-1} + beta K_aa^{-1} K_xa^T K_xa K_aa^{-1}
///               + beta tau K_aa^{-1}]^{-1},
/// mean_j = beta * covariance * K_aa^{-1} K_xa^T y_j.
pub fn inducing_posterior(
    x: &DataMatrix,
    y: &DataMatrix,
    a: &DataMatrix,
    kp: &KernelParams,
    nu: f64,
    beta: f64,
) -> Result<InducingPosterior> {
    if y.len() != x.len() {
        return Err(Error::invalid(
            "inputs and targets disagree on sample count",
        ));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let m = a.len();
    let kaa = kernel_matrix(a, a, kp)?;
    let kxa = kernel_matrix(x, a, kp)?;
    let eye = DMatrix::identity(m, m);

    let kaa_inv = solve_spd(&kaa, &eye)?;
    let b = solve_spd(&kaa, &kxa.transpose())?; // K_aa^{-1} K_xa^T
    let tau_val = tau(x, a, kp, nu)?;

    let mut precision = &kaa_inv + (&b * b.transpose()) * beta + &kaa_inv * (beta * tau_val);
    symmetrize(&mut precision);
    let mut covariance = solve_spd(&precision, &eye)?;
    symmetrize(&mut covariance);

    let mean = (&covariance * (&b * y.matrix().transpose())) * beta;
    Ok(InducingPosterior { mean, covariance })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Kernel weights w_k = (max_i x_k^i - min_i x_k^i)^{-2}; a constant feature
/// gets weight 0 and contributes nothing to the kernel.
fn feature_weights(x: &DataMatrix) -> DVector<f64> {
    let n = x.dim();
    let mut w = DVector::zeros(n);
    for k in 0..n {
        let row = x.matrix().row(k);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in row.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        w[k] = if range > 0.0 {
            1.0 / (range * range)
        } else {
            0.0
        };
    }
    w
}

/// Sample variance (denominator N-1) per feature row, averaged over rows.
fn mean_dimension_variance(y: &DMatrix<f64>) -> f64 {
    let n = y.ncols();
    if n < 2 {
        return 0.0;
    }
    let p = y.nrows();
    let mut total = 0.0;
    for j in 0..p {
        let row = y.row(j);
        let mean = row.sum() / n as f64;
        let ss: f64 = row.iter().map(|&v| (v - mean) * (v - mean)).sum();
        total += ss / (n as f64 - 1.0);
    }
    total / p as f64
}
