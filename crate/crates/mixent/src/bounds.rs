//! Analytical entropy bounds for a zero-mean, equal-weight, two-component
//! scalar Gaussian mixture.
//!
//! Writing the mixture density as `p(y) = (e^a + e^b) / (2 sqrt(2 pi))` with
//! `a = -y^2/(2 s1^2) - ln s1` and `b = -y^2/(2 s2^2) - ln s2`, the Jacobian
//! logarithm bounds the log of the sum:
//!
//! ```text
//! max(a, b) < ln(e^a + e^b) <= max(a, b) + ln 2
//! ```
//!
//! with equality on the right where `a = b`, i.e. at the intersection points
//! `y = +-lambda` of the two component densities. Integrating the pointwise
//! `max` branch against `p` splits at `lambda`, and both pieces reduce to
//! zeroth and second moments of truncated normal distributions, which have
//! closed forms in the standard normal cdf. The result is an upper entropy
//! bound; subtracting the `ln 2` slack gives the lower bound, and the pair
//! sandwiches the true entropy with width exactly `ln 2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::taylor::{EntropyEstimate, EstimatorMethod};

/// Standard deviations of a two-component, zero-mean, equal-weight scalar
/// mixture with `sigma1 <= sigma2`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarMixturePair {
    sigma1: f64,
    sigma2: f64,
}

impl ScalarMixturePair {
    /// Requires `0 < sigma1 <= sigma2`. Equal values construct a degenerate
    /// pair: the mixture collapses to a single Gaussian, the intersection
    /// point is undefined, and the bounds coincide with the exact entropy.
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "standard deviations must be positive and finite (got {sigma1}, {sigma2})"
            )));
        }
        if sigma2 < sigma1 {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be >= sigma1 (got {sigma1} > {sigma2})"
            )));
        }
        Ok(Self { sigma1, sigma2 })
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma1 == self.sigma2
    }
}

/// Lower and upper entropy bounds in nats.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyBounds {
    pub lower: f64,
    pub upper: f64,
}

impl EntropyBounds {
    pub fn lower_estimate(&self) -> EntropyEstimate {
        EntropyEstimate {
            nats: self.lower,
            method: EstimatorMethod::Bounds,
            order: None,
            schedule: None,
            stderr: None,
        }
    }
}

/// Standard normal cdf.
fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
fn npdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Positive intersection point of the two component densities: the `lambda`
/// with `N(lambda; 0, s1^2) = N(lambda; 0, s2^2)`, given by
/// `lambda^2 = s1^2 s2^2 (ln s2^2 - ln s1^2) / (s2^2 - s1^2)`.
pub fn intersection_lambda(pair: &ScalarMixturePair) -> Result<f64> {
    if pair.is_degenerate() {
        return Err(Error::DegenerateInput(
            "equal standard deviations: the component densities coincide".into(),
        ));
    }
    let v1 = pair.sigma1 * pair.sigma1;
    let v2 = pair.sigma2 * pair.sigma2;
    let lambda_sq = v1 * v2 * (v2.ln() - v1.ln()) / (v2 - v1);
    Ok(lambda_sq.sqrt())
}

/// Integral of `N(y; 0, sigma^2)` over `[a, b]` (`b = inf` allowed).
fn trunc_mass(sigma: f64, a: f64, b: f64) -> f64 {
    let upper = if b.is_infinite() { 1.0 } else { phi(b / sigma) };
    upper - phi(a / sigma)
}

/// Integral of `y^2 N(y; 0, sigma^2)` over `[a, b]` (`b = inf` allowed).
fn trunc_second_moment(sigma: f64, a: f64, b: f64) -> f64 {
    let g = |t: f64| {
        if t.is_infinite() {
            1.0
        } else {
            phi(t) - t * npdf(t)
        }
    };
    sigma * sigma * (g(b / sigma) - g(a / sigma))
}

/// Closed-form entropy bounds in nats; the true entropy lies in
/// `[lower, upper]` and `upper - lower = ln 2`.
pub fn entropy_bounds_1d(pair: &ScalarMixturePair) -> Result<EntropyBounds> {
    if pair.is_degenerate() {
        let exact = 0.5
            * (2.0 * std::f64::consts::PI * std::f64::consts::E * pair.sigma1 * pair.sigma1).ln();
        return Ok(EntropyBounds {
            lower: exact,
            upper: exact,
        });
    }
    let s1 = pair.sigma1;
    let s2 = pair.sigma2;
    let lambda = intersection_lambda(pair)?;

    // upper = int_0^lambda (p1+p2)(y^2/(2 s1^2) + ln(2 sqrt(2pi) s1)) dy
    //       + int_lambda^inf (p1+p2)(y^2/(2 s2^2) + ln(2 sqrt(2pi) s2)) dy
    // using the symmetry of all densities about zero.
    let log_norm = |s: f64| (2.0 * (2.0 * std::f64::consts::PI).sqrt() * s).ln();
    let inner = trunc_second_moment(s1, 0.0, lambda) + trunc_second_moment(s2, 0.0, lambda);
    let outer =
        trunc_second_moment(s1, lambda, f64::INFINITY) + trunc_second_moment(s2, lambda, f64::INFINITY);
    let upper = inner / (2.0 * s1 * s1)
        + log_norm(s1) * (trunc_mass(s1, 0.0, lambda) + trunc_mass(s2, 0.0, lambda))
        + outer / (2.0 * s2 * s2)
        + log_norm(s2)
            * (trunc_mass(s1, lambda, f64::INFINITY) + trunc_mass(s2, lambda, f64::INFINITY));
    // The Jacobian-logarithm correction term ln(1 + e^{-|a-b|}) never exceeds
    // ln 2, so the same integral shifted by ln 2 bounds the entropy from
    // below.
    let lower = upper - std::f64::consts::LN_2;
    Ok(EntropyBounds { lower, upper })
}
