//! Gaussian mixture types, density evaluation, and derivatives of the
//! log-mixture density up to fourth order.
//!
//! A [`GaussianMixture`] is an ordered list of weighted multivariate normal
//! components with weights summing to one. Densities are evaluated through
//! per-component Cholesky factors cached at construction, combined with
//! log-sum-exp so that tail probabilities stay finite in log space.
//!
//! [`log_density_derivatives`] returns the gradient, Hessian, and the third-
//! and fourth-order derivative tensors of `f(z) = ln p(z)` for the full
//! mixture `p`, assembled from the closed-form Gaussian density derivatives
//! by the quotient rule. Tensors are stored as matrices in a row-major
//! Kronecker layout: entry `(a*n + b, c)` of the third-order matrix is
//! `d^3 f / dz_a dz_b dz_c`, and entry `(a*n + b, c*n + d)` of the
//! fourth-order matrix is `d^4 f / dz_a dz_b dz_c dz_d`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on covariance input.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Relative tolerance for the unit-sum check on mixture weights.
pub const WEIGHT_SUM_RTOL: f64 = 1e-12;

const LN_2PI: f64 = 1.8378770664093453;

/// How many derivative orders of the log-density to evaluate.
///
/// Matches the orders of the entropy expansion: `Second` fills the gradient
/// and Hessian, `Fourth` additionally fills the third- and fourth-order
/// tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaylorOrder {
    Zeroth,
    Second,
    Fourth,
}

impl TaylorOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            TaylorOrder::Zeroth => 0,
            TaylorOrder::Second => 2,
            TaylorOrder::Fourth => 4,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(TaylorOrder::Zeroth),
            2 => Ok(TaylorOrder::Second),
            4 => Ok(TaylorOrder::Fourth),
            _ => Err(Error::InvalidConfig(format!(
                "expansion order must be 0, 2, or 4 (got {v})"
            ))),
        }
    }
}

/// Symmetric positive definite covariance matrix with cached factorizations.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
    /// Lower Cholesky factor L with C = L L^T.
    chol_l: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_det: f64,
}

impl CovarianceMatrix {
    /// Validates symmetry (relative tolerance 1e-12) and positive
    /// definiteness, then caches the Cholesky factor, inverse, and
    /// log-determinant.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n.max(1),
                got: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("covariance contains non-finite entries".into()));
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut max_asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_asym = max_asym.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if max_asym / scale > SYMMETRY_RTOL {
            return Err(Error::NotSymmetric {
                max_asym: max_asym / scale,
            });
        }
        // Symmetrize exactly so downstream algebra sees C = C^T to the bit.
        let sym = (&entries + entries.transpose()) * 0.5;
        let chol = sym.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let chol_l: DMatrix<f64> = chol.l();
        let log_det = 2.0 * chol_l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let inverse = chol.inverse();
        Ok(Self {
            entries: sym,
            chol_l,
            inverse,
            log_det,
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("covariance rows are not square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Lower Cholesky factor.
    pub fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Largest eigenvalue (all are positive by construction).
    pub fn max_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }
}

/// One weighted multivariate normal component.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    weight: f64,
    mean: DVector<f64>,
    cov: CovarianceMatrix,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: DVector<f64>, cov: CovarianceMatrix) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) || !weight.is_finite() {
            return Err(Error::InvalidWeights(format!(
                "component weight must lie in (0, 1], got {weight}"
            )));
        }
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("mean contains non-finite entries".into()));
        }
        Ok(Self { weight, mean, cov })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &CovarianceMatrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `ln N(x; mean, cov)` via the cached Cholesky factor.
    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let diff = x - &self.mean;
        // Solve L z = diff; the quadratic form is |z|^2.
        let z = self
            .cov
            .chol_l
            .solve_lower_triangular(&diff)
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
        let n = self.dim() as f64;
        Ok(-0.5 * n * LN_2PI - 0.5 * self.cov.log_det - 0.5 * z.norm_squared())
    }
}

/// Gaussian mixture: nonempty component list with weights summing to one.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    dim: usize,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyMixture)?;
        let dim = first.dim();
        if let Some(bad) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        let total: f64 = components.iter().map(|c| c.weight()).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_RTOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components, dim })
    }

    /// Single-component mixture with unit weight.
    pub fn single(mean: DVector<f64>, cov: CovarianceMatrix) -> Result<Self> {
        Self::new(vec![GaussianComponent::new(1.0, mean, cov)?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty component lists
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    /// `ln p(x)` for the mixture via log-sum-exp over components.
    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        let mut logs = Vec::with_capacity(self.components.len());
        for c in &self.components {
            logs.push(c.weight().ln() + c.log_pdf(x)?);
        }
        Ok(log_sum_exp(&logs))
    }

    /// Mixture density `p(x) = sum_i w_i N(x; mu_i, C_i)`.
    pub fn pdf(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    m + logs.iter().map(|&l| (l - m).exp()).sum::<f64>().ln()
}

/// `ln N(x; mu, C)` for a standalone component.
pub fn gaussian_log_pdf(x: &DVector<f64>, comp: &GaussianComponent) -> Result<f64> {
    comp.log_pdf(x)
}

/// Mixture density at `x` (log-sum-exp internally).
pub fn mixture_pdf(x: &DVector<f64>, gmm: &GaussianMixture) -> Result<f64> {
    gmm.pdf(x)
}

/// Derivatives of the log-mixture density `f(z) = ln p(z)` at a point.
///
/// Tensor layout is described in the module docs. Fields above the requested
/// order are `None`.
#[derive(Debug, Clone)]
pub struct LogDensityDerivatives {
    /// `f(z) = ln p(z)`.
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
    /// Third-order tensor as an `n^2 x n` matrix.
    pub third: Option<DMatrix<f64>>,
    /// Fourth-order tensor as an `n^2 x n^2` matrix.
    pub fourth: Option<DMatrix<f64>>,
}

/// Derivatives of `ln p` for the full mixture, up to the requested order.
///
/// Per-component Gaussian density derivatives (the Hermite-form products of
/// `e_i = C_i^{-1}(mu_i - z)` and `A_i = C_i^{-1}`) are accumulated into
/// density derivatives of `p`, then converted to derivatives of `ln p` by the
/// quotient rule. All component terms are rescaled by the largest component
/// log-density before summation, which cancels in every ratio and keeps the
/// accumulation finite in the far tails.
pub fn log_density_derivatives(
    x: &DVector<f64>,
    gmm: &GaussianMixture,
    order: TaylorOrder,
) -> Result<LogDensityDerivatives> {
    let n = gmm.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }

    let mut logs = Vec::with_capacity(gmm.len());
    for c in gmm.components() {
        logs.push(c.weight().ln() + c.log_pdf(x)?);
    }
    let m = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let value = log_sum_exp(&logs);
    if order == TaylorOrder::Zeroth {
        return Ok(LogDensityDerivatives {
            value,
            gradient: None,
            hessian: None,
            third: None,
            fourth: None,
        });
    }

    // Scaled density derivatives: u_k = (d^k p) * exp(-m). The common factor
    // cancels in the log-derivative ratios below.
    let n2 = n * n;
    let mut u0 = 0.0f64;
    let mut u1 = DVector::<f64>::zeros(n);
    let mut u2 = DMatrix::<f64>::zeros(n, n);
    let fourth_order = order == TaylorOrder::Fourth;
    let mut u3 = if fourth_order {
        Some(DMatrix::<f64>::zeros(n2, n))
    } else {
        None
    };
    let mut u4 = if fourth_order {
        Some(DMatrix::<f64>::zeros(n2, n2))
    } else {
        None
    };

    for (c, &lw) in gmm.components().iter().zip(&logs) {
        let s = (lw - m).exp();
        if s == 0.0 {
            continue;
        }
        let a = c.cov().inverse();
        let e = a * (c.mean() - x);
        u0 += s;
        for i in 0..n {
            u1[i] += s * e[i];
        }
        for i in 0..n {
            for j in 0..n {
                u2[(i, j)] += s * (e[i] * e[j] - a[(i, j)]);
            }
        }
        if let (Some(u3), Some(u4)) = (u3.as_mut(), u4.as_mut()) {
            for i in 0..n {
                for j in 0..n {
                    let eij = e[i] * e[j];
                    let aij = a[(i, j)];
                    for k in 0..n {
                        u3[(i * n + j, k)] += s
                            * (eij * e[k]
                                - aij * e[k]
                                - a[(i, k)] * e[j]
                                - a[(j, k)] * e[i]);
                        for l in 0..n {
                            u4[(i * n + j, k * n + l)] += s
                                * (eij * e[k] * e[l]
                                    - aij * e[k] * e[l]
                                    - a[(i, k)] * e[j] * e[l]
                                    - a[(i, l)] * e[j] * e[k]
                                    - a[(j, k)] * e[i] * e[l]
                                    - a[(j, l)] * e[i] * e[k]
                                    - a[(k, l)] * eij
                                    + aij * a[(k, l)]
                                    + a[(i, k)] * a[(j, l)]
                                    + a[(i, l)] * a[(j, k)]);
                        }
                    }
                }
            }
        }
    }

    if u0 <= 0.0 || !u0.is_finite() {
        return Err(Error::Numeric(
            "mixture density underflowed during derivative evaluation".into(),
        ));
    }

    // Quotient rule for f = ln p in terms of density-derivative ratios.
    let g = &u1 / u0;
    let mut hess = &u2 / u0;
    for i in 0..n {
        for j in 0..n {
            hess[(i, j)] -= g[i] * g[j];
        }
    }

    if !fourth_order {
        return Ok(LogDensityDerivatives {
            value,
            gradient: Some(g),
            hessian: Some(hess),
            third: None,
            fourth: None,
        });
    }

    let u3 = u3.unwrap();
    let u4 = u4.unwrap();
    let r2 = &u2 / u0; // second density ratio, distinct from the log Hessian
    let r3 = &u3 / u0;
    let mut third = DMatrix::<f64>::zeros(n2, n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                third[(i * n + j, k)] = r3[(i * n + j, k)]
                    - (r2[(i, j)] * g[k] + r2[(i, k)] * g[j] + r2[(j, k)] * g[i])
                    + 2.0 * g[i] * g[j] * g[k];
            }
        }
    }
    let mut fourth = DMatrix::<f64>::zeros(n2, n2);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = u4[(i * n + j, k * n + l)] / u0
                        - (r3[(i * n + j, k)] * g[l]
                            + r3[(i * n + j, l)] * g[k]
                            + r3[(i * n + k, l)] * g[j]
                            + r3[(j * n + k, l)] * g[i])
                        - (r2[(i, j)] * r2[(k, l)]
                            + r2[(i, k)] * r2[(j, l)]
                            + r2[(i, l)] * r2[(j, k)])
                        + 2.0
                            * (r2[(i, j)] * g[k] * g[l]
                                + r2[(i, k)] * g[j] * g[l]
                                + r2[(i, l)] * g[j] * g[k]
                                + r2[(j, k)] * g[i] * g[l]
                                + r2[(j, l)] * g[i] * g[k]
                                + r2[(k, l)] * g[i] * g[j])
                        - 6.0 * g[i] * g[j] * g[k] * g[l];
                    fourth[(i * n + j, k * n + l)] = v;
                }
            }
        }
    }

    Ok(LogDensityDerivatives {
        value,
        gradient: Some(g),
        hessian: Some(hess),
        third: Some(third),
        fourth: Some(fourth),
    })
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

/// Serde view of a mixture: `{ "components": [{ "weight", "mean", "cov" }] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmJson {
    pub components: Vec<ComponentJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentJson {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GmmJson {
    pub fn from_mixture(gmm: &GaussianMixture) -> Self {
        let components = gmm
            .components()
            .iter()
            .map(|c| ComponentJson {
                weight: c.weight(),
                mean: c.mean().iter().copied().collect(),
                cov: (0..c.dim())
                    .map(|i| (0..c.dim()).map(|j| c.cov().entries()[(i, j)]).collect())
                    .collect(),
            })
            .collect();
        Self { components }
    }

    pub fn into_mixture(self) -> Result<GaussianMixture> {
        let mut comps = Vec::with_capacity(self.components.len());
        for c in self.components {
            let cov = CovarianceMatrix::from_rows(&c.cov)?;
            comps.push(GaussianComponent::new(
                c.weight,
                DVector::from_vec(c.mean),
                cov,
            )?);
        }
        GaussianMixture::new(comps)
    }
}

/// Parse a mixture from its JSON wire format.
pub fn mixture_from_json(text: &str) -> Result<GaussianMixture> {
    let parsed: GmmJson =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("gmm json: {e}")))?;
    parsed.into_mixture()
}

/// Serialize a mixture to its JSON wire format.
pub fn mixture_to_json(gmm: &GaussianMixture) -> String {
    serde_json::to_string_pretty(&GmmJson::from_mixture(gmm)).expect("gmm json serialization")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn cov1(v: f64) -> CovarianceMatrix {
        CovarianceMatrix::new(DMatrix::from_element(1, 1, v)).unwrap()
    }

    pub(crate) fn scalar_mixture(weights: &[f64], sigmas: &[f64]) -> GaussianMixture {
        let comps = weights
            .iter()
            .zip(sigmas)
            .map(|(&w, &s)| {
                GaussianComponent::new(w, DVector::zeros(1), cov1(s * s)).unwrap()
            })
            .collect();
        GaussianMixture::new(comps).unwrap()
    }

    /// Independent log-density evaluation used as the test oracle: explicit
    /// determinant/inverse, no Cholesky, no log-sum-exp.
    fn naive_log_mixture_pdf(x: &DVector<f64>, gmm: &GaussianMixture) -> f64 {
        let n = gmm.dim() as f64;
        let p: f64 = gmm
            .components()
            .iter()
            .map(|c| {
                let cov = c.cov().entries();
                let det = cov.determinant();
                let inv = cov.clone().try_inverse().unwrap();
                let d = x - c.mean();
                let q = (inv * &d).dot(&d);
                c.weight() * (-0.5 * q).exp()
                    / ((2.0 * std::f64::consts::PI).powf(n / 2.0) * det.sqrt())
            })
            .sum();
        p.ln()
    }

    #[test]
    fn standard_normal_at_mode() {
        let c = GaussianComponent::new(1.0, DVector::zeros(1), cov1(1.0)).unwrap();
        let v = gaussian_log_pdf(&DVector::zeros(1), &c).unwrap();
        assert_relative_eq!(v, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
    }

    #[test]
    fn log_pdf_at_mean_depends_only_on_dim_for_identity_cov() {
        for n in [1usize, 2, 3, 5] {
            let cov = CovarianceMatrix::new(DMatrix::identity(n, n)).unwrap();
            let c = GaussianComponent::new(1.0, DVector::zeros(n), cov).unwrap();
            let v = c.log_pdf(&DVector::zeros(n)).unwrap();
            assert_relative_eq!(v, -0.5 * n as f64 * LN_2PI, epsilon = 1e-13);
        }
    }

    #[test]
    fn log_pdf_2x2_against_explicit_inverse() {
        // x = [1,1], mu = 0, C = [[4,2],[2,4]]: |C| = 12, C^{-1} = [[1/3,-1/6],[-1/6,1/3]]
        // q = x' C^{-1} x = 2*(1/3) - 2*(1/6) = 1/3
        let cov = CovarianceMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let c = GaussianComponent::new(1.0, DVector::zeros(2), cov).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let expect = -LN_2PI - 0.5 * 12.0f64.ln() - 0.5 / 3.0;
        assert_relative_eq!(c.log_pdf(&x).unwrap(), expect, epsilon = 1e-13);
    }

    #[test]
    fn mixture_pdf_single_component_at_mode() {
        let gmm = scalar_mixture(&[1.0], &[1.0]);
        let p = mixture_pdf(&DVector::zeros(1), &gmm).unwrap();
        assert_relative_eq!(p, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn mixture_collapse_duplicate_components() {
        // Splitting a component's weight across duplicates leaves the density
        // unchanged at every point.
        let single = scalar_mixture(&[1.0], &[1.5]);
        let dup = scalar_mixture(&[0.25, 0.5, 0.25], &[1.5, 1.5, 1.5]);
        for i in -20..=20 {
            let x = DVector::from_element(1, i as f64 * 0.37);
            let a = single.pdf(&x).unwrap();
            let b = dup.pdf(&x).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "x={x}, {a} vs {b}");
        }
    }

    #[test]
    fn equal_weight_scalar_mixture_value() {
        let gmm = scalar_mixture(&[0.5, 0.5], &[1.0, 2.0]);
        let p = mixture_pdf(&DVector::zeros(1), &gmm).unwrap();
        let expect = 0.5 * (0.3989422804014327 + 0.19947114020071635);
        assert_relative_eq!(p, expect, epsilon = 1e-12);
    }

    #[test]
    fn tail_log_density_stays_finite() {
        let gmm = scalar_mixture(&[0.5, 0.5], &[1.0, 2.0]);
        let x = DVector::from_element(1, 150.0);
        let lp = gmm.log_pdf(&x).unwrap();
        assert!(lp.is_finite() && lp < -2000.0);
        // exp underflows to zero but the log-space value is still usable
        assert_eq!(gmm.pdf(&x).unwrap(), 0.0);
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(
            CovarianceMatrix::new(m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CovarianceMatrix::new(m),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let gmm = scalar_mixture(&[1.0], &[1.0]);
        let x = DVector::zeros(2);
        assert!(matches!(
            gmm.log_pdf(&x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_weight_sum() {
        let c1 = GaussianComponent::new(0.5, DVector::zeros(1), cov1(1.0)).unwrap();
        let c2 = GaussianComponent::new(0.4, DVector::zeros(1), cov1(2.0)).unwrap();
        assert!(matches!(
            GaussianMixture::new(vec![c1, c2]),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn single_gaussian_derivatives_at_mean() {
        let cov = CovarianceMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let inv = cov.inverse().clone();
        let gmm = GaussianMixture::single(DVector::zeros(2), cov).unwrap();
        let d = log_density_derivatives(&DVector::zeros(2), &gmm, TaylorOrder::Fourth).unwrap();
        let g = d.gradient.unwrap();
        assert!(g.norm() < 1e-14);
        let h = d.hessian.unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(h[(i, j)], -inv[(i, j)], epsilon = 1e-13);
            }
        }
        // log-density of a single Gaussian is quadratic: orders 3 and 4 vanish
        assert!(d.third.unwrap().amax() < 1e-13);
        assert!(d.fourth.unwrap().amax() < 1e-12);
    }

    #[test]
    fn single_gaussian_higher_tensors_vanish_off_mean() {
        let cov = CovarianceMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let gmm = GaussianMixture::single(DVector::from_vec(vec![0.4, -1.0]), cov).unwrap();
        let x = DVector::from_vec(vec![1.7, 0.9]);
        let d = log_density_derivatives(&x, &gmm, TaylorOrder::Fourth).unwrap();
        assert!(d.third.unwrap().amax() < 1e-11);
        assert!(d.fourth.unwrap().amax() < 1e-11);
    }

    /// Central finite differences with one Richardson extrapolation level.
    /// Step sizes grow with the order to balance truncation against the
    /// cancellation noise of repeated differencing in f64.
    pub(crate) struct FdOracle<'a> {
        pub gmm: &'a GaussianMixture,
    }

    impl FdOracle<'_> {
        fn diff(&self, x: &DVector<f64>, dirs: &[usize], h: f64) -> f64 {
            fn rec(
                f: &dyn Fn(&DVector<f64>) -> f64,
                x: &DVector<f64>,
                dirs: &[usize],
                h: f64,
            ) -> f64 {
                match dirs.split_last() {
                    None => f(x),
                    Some((&d, rest)) => {
                        let mut xp = x.clone();
                        xp[d] += h;
                        let mut xm = x.clone();
                        xm[d] -= h;
                        (rec(f, &xp, rest, h) - rec(f, &xm, rest, h)) / (2.0 * h)
                    }
                }
            }
            let gmm = self.gmm;
            let f = move |y: &DVector<f64>| naive_log_mixture_pdf(y, gmm);
            let a = rec(&f, x, dirs, h);
            let b = rec(&f, x, dirs, h / 2.0);
            (4.0 * b - a) / 3.0
        }

        pub fn gradient(&self, x: &DVector<f64>, i: usize) -> f64 {
            self.diff(x, &[i], 1e-3)
        }
        pub fn hessian(&self, x: &DVector<f64>, i: usize, j: usize) -> f64 {
            self.diff(x, &[i, j], 1e-3)
        }
        pub fn third(&self, x: &DVector<f64>, i: usize, j: usize, k: usize) -> f64 {
            self.diff(x, &[i, j, k], 1e-2)
        }
        pub fn fourth(&self, x: &DVector<f64>, i: usize, j: usize, k: usize, l: usize) -> f64 {
            self.diff(x, &[i, j, k, l], 2e-2)
        }
    }

    #[test]
    fn two_component_scalar_derivatives_match_finite_differences() {
        let gmm = scalar_mixture(&[0.5, 0.5], &[1.0, 2.0]);
        let x = DVector::from_element(1, 0.3);
        let d = log_density_derivatives(&x, &gmm, TaylorOrder::Fourth).unwrap();
        let fd = FdOracle { gmm: &gmm };
        let g = d.gradient.unwrap()[0];
        let h = d.hessian.unwrap()[(0, 0)];
        let t = d.third.unwrap()[(0, 0)];
        let f4 = d.fourth.unwrap()[(0, 0)];
        assert_relative_eq!(g, fd.gradient(&x, 0), max_relative = 1e-6);
        assert_relative_eq!(h, fd.hessian(&x, 0, 0), max_relative = 1e-6);
        assert_relative_eq!(t, fd.third(&x, 0, 0, 0), max_relative = 1e-6);
        assert_relative_eq!(f4, fd.fourth(&x, 0, 0, 0, 0), max_relative = 1e-6);
    }

    #[test]
    fn derivative_tensors_are_symmetric() {
        let c1 = CovarianceMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let c2 = CovarianceMatrix::from_rows(&[vec![5.0, 2.0], vec![2.0, 7.0]]).unwrap();
        let gmm = GaussianMixture::new(vec![
            GaussianComponent::new(0.4, DVector::from_vec(vec![0.3, -0.2]), c1).unwrap(),
            GaussianComponent::new(0.6, DVector::from_vec(vec![0.1, 0.5]), c2).unwrap(),
        ])
        .unwrap();
        let x = DVector::from_vec(vec![0.7, -0.4]);
        let d = log_density_derivatives(&x, &gmm, TaylorOrder::Fourth).unwrap();
        let h = d.hessian.unwrap();
        let scale = h.amax();
        assert!((&h - h.transpose()).amax() <= 1e-10 * scale);
        let f = d.fourth.unwrap();
        // symmetric under transposition of its two n^2 blocks
        assert!((&f - f.transpose()).amax() <= 1e-8 * f.amax());
        // and under permutations inside each index pair
        let t = d.third.unwrap();
        let n = 2;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let base = t[(i * n + j, k)];
                    assert_relative_eq!(t[(j * n + i, k)], base, max_relative = 1e-8);
                    assert_relative_eq!(t[(i * n + k, j)], base, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn gmm_json_round_trip() {
        let c1 = CovarianceMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let c2 = CovarianceMatrix::from_rows(&[vec![5.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let gmm = GaussianMixture::new(vec![
            GaussianComponent::new(0.5, DVector::zeros(2), c1).unwrap(),
            GaussianComponent::new(0.5, DVector::zeros(2), c2).unwrap(),
        ])
        .unwrap();
        let text = mixture_to_json(&gmm);
        let back = mixture_from_json(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.dim(), 2);
        assert_eq!(back.components()[1].cov().entries()[(0, 0)], 5.0);
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            mixture_from_json("{\"components\": [{\"weight\": 1.0}]}"),
            Err(Error::Parse(_))
        ));
    }
}
