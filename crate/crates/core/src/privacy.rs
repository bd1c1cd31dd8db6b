//! The optimal (ε, δ)-differentially-private noise mechanism: a point mass of
//! weight δ at zero mixed with a two-sided exponential of scale d/ε. That
//! mixture minimizes the expected noise magnitude among densities satisfying
//! the sufficient conditions for (ε, δ)-differential privacy of any algorithm
//! consuming the perturbed data, and it is sampled by inverse-transform.
//!
//! ε = +∞ is accepted as the non-private limit: every draw is exactly zero.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkit::DataMatrix;

/// Privacy parameters: loss bound ε, failure probability δ, adjacency scale d
/// (a single matrix entry may change by at most d).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpParams {
    epsilon: f64,
    delta: f64,
    d: f64,
}

impl DpParams {
    pub fn new(epsilon: f64, delta: f64, d: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::invalid(format!(
                "adjacency scale d must be positive and finite, got {d}"
            )));
        }
        Ok(DpParams { epsilon, delta, d })
    }

    /// The non-private limit: infinite privacy-loss bound, zero noise.
    pub fn non_private() -> Self {
        DpParams {
            epsilon: f64::INFINITY,
            delta: 1e-5,
            d: 1.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn is_non_private(&self) -> bool {
        self.epsilon.is_infinite()
    }

    /// Analytic expected noise magnitude (1 - δ) d / ε.
    pub fn expected_magnitude(&self) -> f64 {
        if self.is_non_private() {
            0.0
        } else {
            (1.0 - self.delta) * self.d / self.epsilon
        }
    }
}

/// Continuous part of the noise density: (1-δ) (ε/2d) exp(-(ε/d)|v|).
/// The atom at zero is reported separately by [`atom_mass`].
pub fn density(v: f64, dp: &DpParams) -> f64 {
    if dp.is_non_private() {
        return 0.0;
    }
    let rate = dp.epsilon / dp.d;
    (1.0 - dp.delta) * 0.5 * rate * (-rate * v.abs()).exp()
}

/// Probability mass sitting exactly at v = 0.
pub fn atom_mass(dp: &DpParams) -> f64 {
    dp.delta
}

/// Cumulative distribution function of the mechanism.
pub fn cdf(v: f64, dp: &DpParams) -> f64 {
    let rate = dp.epsilon / dp.d;
    if v < 0.0 {
        0.5 * (1.0 - dp.delta) * (rate * v).exp()
    } else if v > 0.0 {
        1.0 - 0.5 * (1.0 - dp.delta) * (-rate * v).exp()
    } else {
        0.5 * (1.0 + dp.delta)
    }
}

/// Inverse CDF on (0, 1):
/// (d/ε) ln(2t/(1-δ)) below the flat interval, 0 on
/// [(1-δ)/2, (1+δ)/2], -(d/ε) ln(2(1-t)/(1-δ)) above it.
pub fn inverse_cdf(t: f64, dp: &DpParams) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!(
            "inverse CDF argument must lie in (0, 1), got {t}"
        )));
    }
    let lo = 0.5 * (1.0 - dp.delta);
    let hi = 0.5 * (1.0 + dp.delta);
    let scale = dp.d / dp.epsilon;
    Ok(if t < lo {
        scale * (2.0 * t / (1.0 - dp.delta)).ln()
    } else if t > hi {
        -scale * (2.0 * (1.0 - t) / (1.0 - dp.delta)).ln()
    } else {
        0.0
    })
}

fn strictly_open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `count` independent draws from the mechanism via inverse-transform
/// sampling of uniforms on (0, 1). Deterministic for a fixed seed.
pub fn sample_noise(count: usize, dp: &DpParams, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let t = strictly_open_uniform(&mut rng);
        out.push(inverse_cdf(t, dp).expect("t in (0,1)"));
    }
    Ok(out)
}

/// Entry-wise perturbation Y + V with independent draws. Column j uses the
/// ChaCha stream j of the given seed, so generation parallelizes without
/// changing the result.
pub fn perturb(y: &DataMatrix, dp: &DpParams, seed: u64) -> DataMatrix {
    let p = y.dim();
    let n = y.len();
    let mut values = vec![0.0; p * n];
    values.par_chunks_mut(p).enumerate().for_each(|(j, col)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let src = y.column(j);
        for (i, slot) in col.iter_mut().enumerate() {
            let t = strictly_open_uniform(&mut rng);
            *slot = src[i] + inverse_cdf(t, dp).expect("t in (0,1)");
        }
    });
    DataMatrix::new(DMatrix::from_vec(p, n, values)).expect("finite noise on finite data")
}

/// Perturb each class matrix with a distinct stream: group c uses seed + c.
pub fn perturb_groups(groups: &[DataMatrix], dp: &DpParams, seed: u64) -> Vec<DataMatrix> {
    groups
        .iter()
        .enumerate()
        .map(|(c, g)| perturb(g, dp, seed.wrapping_add(c as u64)))
        .collect()
}
