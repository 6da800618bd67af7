//! Bootstrap-t percentile confidence intervals for the median.
//!
//! For samples `x_1..x_s` with median `M`, draw `B` with-replacement
//! resamples. Resample `b` yields a median `M*_b` and a nested-bootstrap
//! standard deviation `sigma*_b` (the spread of medians over `inner_b`
//! resamples of resample `b`), giving the studentized statistic
//!
//! ```text
//! t*_b = (M - M*_b) / (sigma*_b / sqrt(s)).
//! ```
//!
//! The empirical percentiles `t_lo`, `t_hi` of the `t*_b` map back to the
//! interval endpoints `M - t_pct * sigma_hat / sqrt(s)`, where `sigma_hat` is
//! the standard deviation of the `B` outer medians; the endpoints are sorted.
//! The `sqrt(s)` factors cancel between the studentization and the endpoint
//! mapping, leaving the usual pivot `deviation / sigma*_b` scaled by
//! `sigma_hat`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resample counts, percentile levels, and seed for [`bootstrap_t_ci`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BootstrapSpec {
    /// Outer resamples.
    pub outer: usize,
    /// Nested resamples used to studentize each outer resample.
    pub inner: usize,
    /// Percentile levels in percent, e.g. (2.5, 97.5).
    pub levels: (f64, f64),
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            outer: 1000,
            inner: 200,
            levels: (2.5, 97.5),
            seed: 0,
        }
    }
}

impl BootstrapSpec {
    fn validate(&self) -> Result<()> {
        if self.outer < 2 || self.inner < 2 {
            return Err(Error::InvalidConfig(format!(
                "resample counts must be >= 2 (got outer {}, inner {})",
                self.outer, self.inner
            )));
        }
        let (lo, hi) = self.levels;
        if !(0.0 < lo && lo < hi && hi < 100.0) {
            return Err(Error::InvalidConfig(format!(
                "percentile levels must satisfy 0 < lo < hi < 100 (got {lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Median with confidence interval endpoints.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BootstrapCi {
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Set when the input was too small or too uniform for a studentized
    /// interval and a fallback was returned.
    pub degenerate: bool,
}

/// Median of a nonempty slice; even counts average the two middle order
/// statistics.
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples("median of empty input".into()));
    }
    let mut v = samples.to_vec();
    Ok(median_in_place(&mut v))
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (below, m, _) = v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
    if n % 2 == 1 {
        *m
    } else {
        // even count: the lower middle is the largest element left of the pivot
        let upper = *m;
        let lower = below.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Empirical percentile at position `B * q` (1-based) with linear
/// interpolation between adjacent order statistics, clamped to the range.
fn percentile_sorted(sorted: &[f64], level_percent: f64) -> f64 {
    let b = sorted.len();
    let pos = (b as f64) * level_percent / 100.0; // 1-based position
    if pos <= 1.0 {
        return sorted[0];
    }
    if pos >= b as f64 {
        return sorted[b - 1];
    }
    let lo = pos.floor();
    let frac = pos - lo;
    let i = lo as usize - 1;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    var.max(0.0).sqrt()
}

/// Bootstrap-t percentile confidence interval for the median. Deterministic
/// given `spec.seed`.
///
/// Constant input returns a zero-width interval at the common value; fewer
/// than 3 samples fall back to `(min, max)` with the `degenerate` flag set.
pub fn bootstrap_t_ci(samples: &[f64], spec: &BootstrapSpec) -> Result<BootstrapCi> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::InsufficientSamples(
            "bootstrap of empty sample set".into(),
        ));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("samples contain non-finite values".into()));
    }
    let s = samples.len();
    let m = median(samples)?;

    let first = samples[0];
    if samples.iter().all(|&v| v == first) {
        return Ok(BootstrapCi {
            median: first,
            ci_low: first,
            ci_high: first,
            degenerate: false,
        });
    }
    if s < 3 {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(BootstrapCi {
            median: m,
            ci_low: lo,
            ci_high: hi,
            degenerate: true,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let sqrt_s = (s as f64).sqrt();
    let mut resample = vec![0.0f64; s];
    let mut nested = vec![0.0f64; s];
    let mut inner_medians = vec![0.0f64; spec.inner];
    let mut outer_medians = Vec::with_capacity(spec.outer);
    let mut t_values = Vec::with_capacity(spec.outer);

    for _ in 0..spec.outer {
        for slot in resample.iter_mut() {
            *slot = samples[rng.gen_range(0..s)];
        }
        let mut scratch = resample.clone();
        let m_star = median_in_place(&mut scratch);
        outer_medians.push(m_star);

        for im in inner_medians.iter_mut() {
            for slot in nested.iter_mut() {
                *slot = resample[rng.gen_range(0..s)];
            }
            *im = median_in_place(&mut nested);
        }
        // A resample whose nested medians all coincide has no usable scale;
        // computing std_dev there only returns accumulated rounding noise.
        let first_im = inner_medians[0];
        if inner_medians.iter().all(|&v| v == first_im) {
            continue;
        }
        let sigma_star = std_dev(&inner_medians);
        if sigma_star > 0.0 {
            t_values.push((m - m_star) / (sigma_star / sqrt_s));
        }
    }

    if t_values.len() < 2 {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(BootstrapCi {
            median: m,
            ci_low: lo,
            ci_high: hi,
            degenerate: true,
        });
    }

    t_values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let t_lo = percentile_sorted(&t_values, spec.levels.0);
    let t_hi = percentile_sorted(&t_values, spec.levels.1);
    let sigma_hat = std_dev(&outer_medians);
    let e1 = m - t_lo * sigma_hat / sqrt_s;
    let e2 = m - t_hi * sigma_hat / sqrt_s;
    Ok(BootstrapCi {
        median: m,
        ci_low: e1.min(e2),
        ci_high: e1.max(e2),
        degenerate: false,
    })
}
