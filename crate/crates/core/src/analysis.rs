//! Closed-form mean-square error of the regularized iteration.
//!
//! With `ξ_i = 1 - τγ - τλ_i` the eigenvalues of `Q`,
//!
//! ```text
//! H_t = (ν²/N) Σ ξ_i^{2t} + (τσ²/N) Σ (1 - ξ_i^{2t}) / (1 - ξ_i)
//! H_∞ = (σ²/N) Σ 1/(γ + λ_i)
//! ```
//!
//! `H_t` is evaluated as `H_∞ + (τσ²/N) Σ ξ_i^{2t} (α - 1/(1 - ξ_i))` with
//! `α = 1/(τγ)`. The two forms are algebraically identical; the second keeps
//! `H_t - H_∞` accurate to a few ulps all the way down, and the `i = 0` term
//! drops out exactly because `1 - ξ_0 = τγ`.
//!
//! Stopping-time bounds use the natural logarithm.

use crate::error::{Error, Result};
use crate::graph::LaplacianSpectrum;
use crate::problem::gamma as gamma_of;

/// Slack on the containment `ξ_i ∈ [-1 + τγ, 1 - τγ]`.
const CONTAINMENT_TOL: f64 = 1e-9;

/// Eigenvalues of `Q`, descending, with `1 - ξ_i = τ(γ + λ_i)` kept
/// separately to avoid cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct QSpectrum {
    xi: Vec<f64>,
    one_minus_xi: Vec<f64>,
    tau: f64,
    gamma: f64,
}

impl QSpectrum {
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn one_minus_xi(&self) -> &[f64] {
        &self.one_minus_xi
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        alpha(self.tau, self.gamma)
    }
}

/// Maps the Laplacian spectrum through `λ ↦ 1 - τγ - τλ`.
///
/// Fails with [`Error::StepSize`] when `τγ ≥ 1` or some `ξ_i` falls below
/// `-1 + τγ`, i.e. when the stability assumption cannot hold.
pub fn q_spectrum(spectrum: &LaplacianSpectrum, tau: f64, gamma: f64) -> Result<QSpectrum> {
    if !(tau > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau and gamma must be positive, got tau={tau}, gamma={gamma}"
        )));
    }
    let tg = tau * gamma;
    let lambda_max = spectrum.max();
    let limit = (1.0 / gamma).min(2.0 / (2.0 * gamma + lambda_max));
    if tg >= 1.0 {
        return Err(Error::StepSize { tau, limit });
    }
    let one_minus_xi: Vec<f64> = spectrum.eigenvalues().iter().map(|&l| tg + tau * l).collect();
    let xi: Vec<f64> = spectrum.eigenvalues().iter().map(|&l| 1.0 - tg - tau * l).collect();
    if xi.iter().any(|&x| x < -1.0 + tg - CONTAINMENT_TOL) {
        return Err(Error::StepSize { tau, limit });
    }
    Ok(QSpectrum {
        xi,
        one_minus_xi,
        tau,
        gamma,
    })
}

/// `α = 1/(τγ)`.
pub fn alpha(tau: f64, gamma: f64) -> f64 {
    1.0 / (tau * gamma)
}

/// `h(ξ) = αξ² + ξ + 1 - α`; `H_{t+1} - H_t = (τσ²/N) Σ ξ_i^{2t} h(ξ_i)`.
pub fn increment_factor(xi: f64, alpha: f64) -> f64 {
    alpha * xi * xi + xi + 1.0 - alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    ClosedForm,
    Empirical,
}

/// Parameters an MSE curve was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams {
    pub tau: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub nu: f64,
    pub graph: String,
}

/// `H_0..=H_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseCurve {
    pub values: Vec<f64>,
    pub kind: CurveKind,
    pub params: CurveParams,
}

impl MseCurve {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }
}

/// Incremental evaluator of `H_t`, `t = 0, 1, 2, ...`.
///
/// Powers `ξ_i^{2t}` are advanced by one multiplication by `ξ_i²` per step.
#[derive(Debug, Clone)]
pub struct MseEvaluator {
    powers: Vec<f64>,
    ratios: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
    h_inf: f64,
    t: usize,
}

impl MseEvaluator {
    pub fn new(qs: &QSpectrum, sigma: f64, nu: f64) -> Result<Self> {
        if !(sigma > 0.0 && nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma and nu must be positive, got sigma={sigma}, nu={nu}"
            )));
        }
        let g = gamma_of(sigma, nu);
        if (g - qs.gamma).abs() > 1e-12 * g {
            return Err(Error::InvalidParameter(format!(
                "spectrum built for gamma={} but sigma²/nu² = {g}",
                qs.gamma
            )));
        }
        let n = qs.len() as f64;
        let a = qs.alpha();
        let inv: Vec<f64> = qs.one_minus_xi.iter().map(|d| 1.0 / d).collect();
        let scale = qs.tau * sigma * sigma / n;
        Ok(Self {
            powers: vec![1.0; qs.len()],
            ratios: qs.xi.iter().map(|x| x * x).collect(),
            weights: inv.iter().map(|c| a - c).collect(),
            scale,
            h_inf: scale * inv.iter().sum::<f64>(),
            t: 0,
        })
    }

    /// Current `t`.
    pub fn time(&self) -> usize {
        self.t
    }

    /// `H_t` at the current `t`.
    pub fn value(&self) -> f64 {
        self.h_inf + self.excess()
    }

    /// `H_t - H_∞` at the current `t`.
    pub fn excess(&self) -> f64 {
        self.scale * self.powers.iter().zip(&self.weights).map(|(p, w)| p * w).sum::<f64>()
    }

    pub fn h_inf(&self) -> f64 {
        self.h_inf
    }

    pub fn advance(&mut self) {
        for (p, r) in self.powers.iter_mut().zip(&self.ratios) {
            *p *= r;
        }
        self.t += 1;
    }
}

/// `H_0..=H_horizon` from the closed form.
pub fn closed_form_mse(qs: &QSpectrum, sigma: f64, nu: f64, horizon: usize) -> Result<MseCurve> {
    let mut ev = MseEvaluator::new(qs, sigma, nu)?;
    let mut values = Vec::with_capacity(horizon + 1);
    values.push(ev.value());
    for _ in 0..horizon {
        ev.advance();
        values.push(ev.value());
    }
    Ok(MseCurve {
        values,
        kind: CurveKind::ClosedForm,
        params: CurveParams {
            tau: qs.tau,
            gamma: qs.gamma,
            sigma,
            nu,
            graph: format!("N={}", qs.len()),
        },
    })
}

/// `H_∞ = (σ²/N) Σ 1/(γ + λ_i)`; independent of the step size.
pub fn asymptotic_mse(spectrum: &LaplacianSpectrum, sigma: f64, gamma: f64) -> f64 {
    let n = spectrum.len() as f64;
    sigma * sigma / n * spectrum.eigenvalues().iter().map(|l| 1.0 / (gamma + l)).sum::<f64>()
}

/// Smallest `t` with `H_t < (1 + ε) H_∞`.
///
/// Scans `t` upward. Scanning past ten times the universal bound means the
/// evaluation is broken, since the crossing time is provably finite, and is
/// reported as [`Error::NumericalFailure`].
pub fn stopping_time_exact(qs: &QSpectrum, sigma: f64, nu: f64, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut ev = MseEvaluator::new(qs, sigma, nu)?;
    let threshold = (1.0 + epsilon) * ev.h_inf();
    let bound = stopping_time_bound(qs.alpha(), epsilon);
    let cap = (10.0 * bound.max(1.0)).ceil() as usize;
    while ev.value() >= threshold {
        if ev.time() >= cap {
            return Err(Error::NumericalFailure(format!(
                "H_t did not cross (1+{epsilon}) H_inf within {cap} steps"
            )));
        }
        ev.advance();
    }
    Ok(ev.time())
}

/// Universal bound `(α/2) ln(2α/ε)`, valid for any graph and node count.
///
/// Returns NaN outside the domain `α > 1, ε > 0`.
pub fn stopping_time_bound(alpha: f64, epsilon: f64) -> f64 {
    if !(alpha > 1.0 && epsilon > 0.0) {
        return f64::NAN;
    }
    alpha / 2.0 * (2.0 * alpha / epsilon).ln()
}

/// The sharper bound `ln(2α/ε) / ln(1/(1 - 1/α)²)` it is derived from.
///
/// Returns NaN outside the domain `α > 1, ε > 0`.
pub fn tightest_intermediate_bound(alpha: f64, epsilon: f64) -> f64 {
    if !(alpha > 1.0 && epsilon > 0.0) {
        return f64::NAN;
    }
    (2.0 * alpha / epsilon).ln() / (-2.0 * (-1.0 / alpha).ln_1p())
}
