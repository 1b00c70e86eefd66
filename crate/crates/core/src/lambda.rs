//! Penalty sequence design for a target false discovery rate.
//!
//! Under the clean-snapshot null with an aligned basis, the residual column
//! norm `||(I - P)x||` is a scaled chi random variable with `2(m - d)`
//! degrees of freedom, so the r-th largest penalty entry is placed at the
//! `1 - q r / n` quantile of that law ([`lambda_chi`]). When the null
//! distribution is not chi (misaligned basis, structured signal), the same
//! quantiles can be estimated by simulation ([`lambda_monte_carlo`]).

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::slope::PenaltyVector;
use crate::solver::SubspaceEstimate;
use crate::special;

/// Inputs of the penalty design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSpec {
    /// Target false discovery rate, in (0, 1).
    pub q: f64,
    /// Snapshot count; the penalty vector has this length.
    pub n: usize,
    /// Channel count.
    pub m: usize,
    /// Signal subspace dimension, `1 <= d < m`.
    pub d: usize,
    /// Noise scale: the sigma of a complex circular Gaussian noise vector
    /// with covariance `sigma^2 I` (total per-entry variance `sigma^2`,
    /// split evenly between real and imaginary parts).
    pub sigma: f64,
}

impl LambdaSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidProbability {
                p: self.q,
                domain: "(0, 1)",
            });
        }
        if self.n == 0 {
            return Err(Error::Empty {
                what: "snapshot count",
            });
        }
        if self.d == 0 || self.d >= self.m {
            return Err(Error::ModelOrder {
                d: self.d,
                m: self.m,
            });
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::NonPositive {
                what: "sigma",
                value: self.sigma,
            });
        }
        Ok(())
    }

    /// Degrees of freedom of the residual-norm law: `2 (m - d)`.
    pub fn degrees_of_freedom(&self) -> usize {
        2 * (self.m - self.d)
    }
}

/// How `sigma` in [`LambdaSpec`] parameterizes the noise.
///
/// The residual norm of a projected noise vector is `c * chi_{2(m-d)}` where
/// `c` depends on the per-part variance; the convention fixes `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseConvention {
    /// Complex circular: entry variance `sigma^2` total, i.e. real and
    /// imaginary parts are each `N(0, sigma^2 / 2)`. Chi scale
    /// `sigma * sqrt(2) / 2`.
    #[default]
    ComplexCircular,
    /// Real and imaginary parts are each `N(0, sigma^2)`. Chi scale `sigma`,
    /// i.e. `sqrt(2)` times the complex-circular penalty.
    IndependentParts,
}

impl NoiseConvention {
    /// Multiplier applied to the chi quantile.
    pub fn chi_scale(&self, sigma: f64) -> f64 {
        match self {
            NoiseConvention::ComplexCircular => sigma * std::f64::consts::SQRT_2 / 2.0,
            NoiseConvention::IndependentParts => sigma,
        }
    }

    /// Stable identifier used in reports and config files.
    pub fn label(&self) -> &'static str {
        match self {
            NoiseConvention::ComplexCircular => "complex-circular",
            NoiseConvention::IndependentParts => "independent-parts",
        }
    }
}

impl std::str::FromStr for NoiseConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "complex-circular" => Ok(NoiseConvention::ComplexCircular),
            "independent-parts" => Ok(NoiseConvention::IndependentParts),
            other => Err(format!(
                "unknown noise convention '{other}' (expected complex-circular or independent-parts)"
            )),
        }
    }
}

/// Quantile of a chi-distributed variable with `k` degrees of freedom at
/// probability `p` in `[0, 1)`: the square root of the chi-square quantile.
///
/// Strictly increasing in `p` and zero at `p = 0`.
pub fn chi_quantile(k: usize, p: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::NonPositive {
            what: "degrees of freedom",
            value: 0.0,
        });
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability {
            p,
            domain: "[0, 1)",
        });
    }
    Ok(special::chi2_quantile(k as f64, p, None).sqrt())
}

/// Closed-form penalty: the r-th largest entry is
/// `scale * chi_quantile(2(m-d), 1 - q r / n)` for `r = 1..n`, where `scale`
/// comes from the noise convention. Entries are clipped at zero should the
/// tail probability reach 1 (unreachable for `q < 1`, kept for safety).
///
/// With this penalty and a basis matching the true subspace, the expected
/// fraction of clean snapshots among the detections is bounded by
/// `q * n0 / n` with `n0` the number of clean snapshots.
pub fn lambda_chi(spec: &LambdaSpec, convention: NoiseConvention) -> Result<PenaltyVector> {
    spec.validate()?;
    let k = spec.degrees_of_freedom() as f64;
    let scale = convention.chi_scale(spec.sigma);
    let n = spec.n;

    let mut values = vec![0.0; n];
    // Sweep r downward so p increases and each root warm-starts the next.
    let mut hint = None;
    for r in (1..=n).rev() {
        let p = 1.0 - spec.q * (r as f64) / (n as f64);
        if p <= 0.0 {
            continue; // clipped at zero
        }
        let x2 = special::chi2_quantile(k, p, hint);
        hint = Some(x2);
        values[r - 1] = scale * x2.sqrt();
    }
    PenaltyVector::new(values)
}

/// Simulation-based penalty: empirical `1 - q r / n` quantiles of the
/// residual norm `||x - B B^H x||` over `trials` independent draws from
/// `sample`, which must produce interference-free snapshots.
///
/// Empirical quantiles use the midpoint (Hazen) order-statistic convention:
/// level `p` falls at position `trials * p + 0.5` with linear interpolation
/// between order statistics. Requires `trials >= 100`; extreme ranks beyond
/// the largest order statistic saturate at the sample maximum, so tail
/// entries are only as good as `trials` allows.
pub fn lambda_monte_carlo(
    spec: &LambdaSpec,
    basis: &SubspaceEstimate,
    mut sample: impl FnMut() -> DVector<Complex64>,
    trials: usize,
) -> Result<PenaltyVector> {
    spec.validate()?;
    if trials < 100 {
        return Err(Error::TooFewTrials {
            got: trials,
            min: 100,
        });
    }
    if basis.channels() != spec.m || basis.dim() != spec.d {
        return Err(Error::ShapeMismatch {
            expected_rows: spec.m,
            expected_cols: spec.d,
            rows: basis.channels(),
            cols: basis.dim(),
        });
    }

    let mut norms = Vec::with_capacity(trials);
    for _ in 0..trials {
        let x = sample();
        norms.push(basis.residual_norm(&x)?);
    }
    norms.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    let n = spec.n;
    let mut values = vec![0.0; n];
    for r in 1..=n {
        let p = 1.0 - spec.q * (r as f64) / (n as f64);
        if p <= 0.0 {
            continue;
        }
        values[r - 1] = hazen_quantile(&norms, p);
    }
    PenaltyVector::new(values)
}

/// Midpoint-convention empirical quantile of an ascending-sorted sample.
fn hazen_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = n as f64 * p + 0.5; // 1-based fractional position
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let k = h.floor() as usize; // 1-based lower order statistic
    let g = h - k as f64;
    sorted[k - 1] + g * (sorted[k] - sorted[k - 1])
}
