//! Benchmark estimators that assume selection on observables: probit
//! propensity scores, control-function regressions, inverse probability
//! weighting, regression adjustment and a naive probit with the treatment as
//! a regressor.
//!
//! Second-stage standard errors are classic OLS errors with no correction for
//! the estimated propensity score, so they understate the true uncertainty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{collinear_columns, gram};

pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const GRADIENT_TOL: f64 = 1e-8;
/// Coefficients beyond this magnitude are taken as evidence of separation.
pub const SEPARATION_BOUND: f64 = 1e3;
/// A total log-likelihood within this distance of zero means perfect prediction.
const SEPARATION_LOGLIK: f64 = 1e-6;
/// Propensity scores outside `(IPW_TRIM, 1 - IPW_TRIM)` are excluded from IPW.
pub const IPW_TRIM: f64 = 1e-3;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 − 1/x² + 3/x⁴ − 15/x⁶`, the leading terms of `Φ(x)(−x)/φ(x)` for `x → −∞`.
fn tail_series(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    1.0 - r + 3.0 * r * r - 15.0 * r * r * r
}

const TAIL_SWITCH: f64 = -30.0;

pub fn log_norm_cdf(x: f64) -> f64 {
    if x > TAIL_SWITCH {
        norm_cdf(x).ln()
    } else {
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + tail_series(x).ln()
    }
}

/// Inverse Mills ratio `φ(x) / Φ(x)`.
pub fn inverse_mills(x: f64) -> f64 {
    if x > TAIL_SWITCH {
        norm_pdf(x) / norm_cdf(x)
    } else {
        -x / tail_series(x)
    }
}

/// Named columns of a regression design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, x: DMatrix<f64>) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "column names vs design columns",
                expected: x.ncols(),
                got: names.len(),
            });
        }
        Ok(DesignMatrix { names, x })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Appends a column at the end.
    pub fn with_column(&self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                what: "appended column length",
                expected: self.nrows(),
                got: values.len(),
            });
        }
        let mut x = self.x.clone().insert_column(self.ncols(), 0.0);
        x.column_mut(self.ncols()).copy_from_slice(values);
        let mut names = self.names.clone();
        names.push(name.to_string());
        Ok(DesignMatrix { names, x })
    }

    fn rows_where(&self, keep: &[bool]) -> DesignMatrix {
        let idx: Vec<usize> = (0..self.nrows()).filter(|&i| keep[i]).collect();
        DesignMatrix {
            names: self.names.clone(),
            x: self.x.select_rows(idx.iter()),
        }
    }

    fn check_rank(&self) -> Result<()> {
        if self.nrows() <= self.ncols() {
            return Err(Error::Domain(format!(
                "{} rows are not enough for {} columns",
                self.nrows(),
                self.ncols()
            )));
        }
        let bad = collinear_columns(&gram(&self.x));
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::RankDeficient {
                columns: bad.into_iter().map(|j| self.names[j].clone()).collect(),
            })
        }
    }
}

/// Propensity covariates for a dataset: every column of `x1` and `x2`, each once.
pub fn propensity_design(dataset: &Dataset) -> Result<DesignMatrix> {
    let layout = dataset.layout();
    let mut names = layout.x1_names.clone();
    let extra: Vec<usize> = (0..layout.x2_names.len())
        .filter(|&j| !layout.x1_names.contains(&layout.x2_names[j]))
        .collect();
    names.extend(extra.iter().map(|&j| layout.x2_names[j].clone()));
    let k1 = layout.k1();
    let x = DMatrix::from_fn(dataset.len(), names.len(), |i, j| {
        let r = &dataset.records[i];
        if j < k1 {
            r.x1[j]
        } else {
            r.x2[extra[j - k1]]
        }
    });
    DesignMatrix::new(names, x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub n_used: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Probit fits only.
    pub log_likelihood: Option<f64>,
    /// OLS fits only.
    pub residual_variance: Option<f64>,
    #[serde(skip)]
    pub covariance: Option<DMatrix<f64>>,
}

impl FitResult {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[j], self.standard_errors[j]))
    }

    fn cov(&self) -> DMatrix<f64> {
        self.covariance
            .clone()
            .unwrap_or_else(|| DMatrix::from_diagonal(&DVector::from_iterator(
                self.standard_errors.len(),
                self.standard_errors.iter().map(|s| s * s),
            )))
    }
}

fn probit_loglik(x: &DMatrix<f64>, d: &[bool], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(d)
        .map(|(&e, &di)| log_norm_cdf(if di { e } else { -e }))
        .sum()
}

/// Gradient and observed information of the probit log-likelihood.
fn probit_derivatives(x: &DMatrix<f64>, d: &[bool], beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eta = x * beta;
    let k = x.ncols();
    let mut g = DVector::zeros(k);
    let mut w = DVector::zeros(x.nrows());
    for (i, (&e, &di)) in eta.iter().zip(d).enumerate() {
        let q = if di { 1.0 } else { -1.0 };
        let lam = q * inverse_mills(q * e);
        g.axpy(lam, &x.row(i).transpose(), 1.0);
        w[i] = lam * (lam + e);
    }
    let xw = DMatrix::from_fn(x.nrows(), k, |i, j| x[(i, j)] * w[i]);
    (g, x.tr_mul(&xw))
}

/// Maximum-likelihood probit by Newton's method on the observed information,
/// with step halving.
pub fn probit_fit(design: &DesignMatrix, d: &[bool]) -> Result<FitResult> {
    if d.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "outcome length vs design rows",
            expected: design.nrows(),
            got: d.len(),
        });
    }
    design.check_rank()?;
    let x = &design.x;
    let k = design.ncols();
    let mut beta = DVector::zeros(k);
    let mut ll = probit_loglik(x, d, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut info = DMatrix::identity(k, k);
    while iterations < MAX_NEWTON_ITERATIONS {
        let (g, h) = probit_derivatives(x, d, &beta);
        info = h;
        if g.amax() < GRADIENT_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let chol = info
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("probit information matrix is not positive definite".into()))?;
        let step = chol.solve(&g);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand = &beta + &step * t;
            let cll = probit_loglik(x, d, &cand);
            // Near the optimum true gains fall below the rounding noise of ll.
            if cll >= ll - 1e-12 * (1.0 + ll.abs()) {
                beta = cand;
                ll = cll;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if beta.amax() > SEPARATION_BOUND {
            return Err(Error::Separation(format!("probit coefficients diverged past {SEPARATION_BOUND}")));
        }
        if !improved {
            // Numerical floor reached; report the gradient test honestly.
            let (g, h) = probit_derivatives(x, d, &beta);
            info = h;
            converged = g.amax() < GRADIENT_TOL;
            break;
        }
    }
    if !converged && beta.amax() > 0.5 * SEPARATION_BOUND {
        return Err(Error::Separation(format!("probit coefficients diverged past {SEPARATION_BOUND}")));
    }
    // Complete separation drives the likelihood to one while the gradient
    // vanishes, which can pass the gradient test at finite coefficients.
    if ll > -SEPARATION_LOGLIK {
        return Err(Error::Separation("the outcome is perfectly predicted".into()));
    }
    let cov = info
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular probit information".into()))?;
    Ok(FitResult {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
        n_used: d.len(),
        converged,
        iterations,
        log_likelihood: Some(ll),
        residual_variance: None,
        covariance: Some(cov),
    })
}

/// Fitted probabilities `Φ(Xβ̂)`.
pub fn propensity_scores(fit: &FitResult, design: &DesignMatrix) -> Result<Vec<f64>> {
    if !fit.converged {
        return Err(Error::Domain("propensity fit did not converge".into()));
    }
    if fit.coefficients.len() != design.ncols() {
        return Err(Error::DimensionMismatch {
            what: "coefficients vs design columns",
            expected: design.ncols(),
            got: fit.coefficients.len(),
        });
    }
    let eta = &design.x * DVector::from_column_slice(&fit.coefficients);
    Ok(eta.iter().map(|&e| norm_cdf(e)).collect())
}

/// Least squares via the normal equations, with classic standard errors.
pub fn ols_fit(design: &DesignMatrix, y: &[f64]) -> Result<FitResult> {
    if y.len() != design.nrows() {
        return Err(Error::DimensionMismatch {
            what: "outcome length vs design rows",
            expected: design.nrows(),
            got: y.len(),
        });
    }
    design.check_rank()?;
    let x = &design.x;
    let xtx = gram(x);
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient { columns: design.names.clone() })?;
    let yv = DVector::from_column_slice(y);
    let beta = chol.solve(&x.tr_mul(&yv));
    let resid = &yv - x * &beta;
    let n = y.len() as f64;
    let k = design.ncols() as f64;
    let sigma2 = resid.norm_squared() / (n - k);
    let cov = chol.inverse() * sigma2;
    Ok(FitResult {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
        n_used: y.len(),
        converged: true,
        iterations: 0,
        log_likelihood: None,
        residual_variance: Some(sigma2),
        covariance: Some(cov),
    })
}

/// An estimated treatment effect and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub ate: f64,
    pub se: f64,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn check_lengths(n: usize, others: &[(&'static str, usize)]) -> Result<()> {
    for &(what, got) in others {
        if got != n {
            return Err(Error::DimensionMismatch { what, expected: n, got });
        }
    }
    if n == 0 {
        return Err(Error::Empty("no observations".into()));
    }
    Ok(())
}

/// Regresses `y` on `1, d, p̂ [, p̂², p̂³], d·(p̂ − mean p̂)`; the ATE is the
/// coefficient on `d`.
pub fn control_function_ate(y: &[f64], d: &[bool], p_hat: &[f64], degree: u8) -> Result<(Estimate, FitResult)> {
    check_lengths(y.len(), &[("treatment length", d.len()), ("score length", p_hat.len())])?;
    if degree != 1 && degree != 3 {
        return Err(Error::Config(format!("control-function degree must be 1 or 3, got {degree}")));
    }
    if p_hat.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::Domain("propensity scores must lie in (0, 1)".into()));
    }
    let n = y.len();
    let mu = p_hat.iter().sum::<f64>() / n as f64;
    let sd = (p_hat.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd < 1e-8 {
        return Err(Error::RankDeficient {
            columns: vec!["p_hat".into()],
        });
    }
    let mut names = vec!["(intercept)".to_string(), "d".into(), "p_hat".into()];
    if degree == 3 {
        names.push("p_hat^2".into());
        names.push("p_hat^3".into());
    }
    names.push("d*(p_hat-mean)".into());
    let k = names.len();
    let x = DMatrix::from_fn(n, k, |i, j| {
        let p = p_hat[i];
        let di = flag(d[i]);
        match (j, degree) {
            (0, _) => 1.0,
            (1, _) => di,
            (2, _) => p,
            (3, 3) => p * p,
            (4, 3) => p * p * p,
            _ => di * (p - mu),
        }
    });
    let fit = ols_fit(&DesignMatrix::new(names, x)?, y)?;
    let est = Estimate {
        ate: fit.coefficients[1],
        se: fit.standard_errors[1],
    };
    Ok((est, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpwResult {
    pub ate: f64,
    pub se: f64,
    pub n_used: usize,
    pub trimmed: usize,
}

/// `(1/n) Σ yᵢ (dᵢ − p̂ᵢ) / (p̂ᵢ (1 − p̂ᵢ))` over rows with untrimmed scores.
pub fn ipw_ate(y: &[f64], d: &[bool], p_hat: &[f64]) -> Result<IpwResult> {
    check_lengths(y.len(), &[("treatment length", d.len()), ("score length", p_hat.len())])?;
    let terms: Vec<f64> = (0..y.len())
        .filter(|&i| p_hat[i] > IPW_TRIM && p_hat[i] < 1.0 - IPW_TRIM)
        .map(|i| y[i] * (flag(d[i]) - p_hat[i]) / (p_hat[i] * (1.0 - p_hat[i])))
        .collect();
    if terms.is_empty() {
        return Err(Error::Empty("every propensity score was trimmed".into()));
    }
    let m = terms.len() as f64;
    let ate = terms.iter().sum::<f64>() / m;
    let var = if terms.len() > 1 {
        terms.iter().map(|t| (t - ate).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(IpwResult {
        ate,
        se: (var / m).sqrt(),
        n_used: terms.len(),
        trimmed: y.len() - terms.len(),
    })
}

/// Per-arm probability model: a probit fit, or a constant when the arm's
/// outcome never varies.
enum ArmModel {
    Constant(f64),
    Probit(FitResult),
}

impl ArmModel {
    fn fit(design: &DesignMatrix, y: &[f64]) -> Result<Self> {
        let first = y[0];
        if y.iter().all(|&v| v == first) {
            return Ok(ArmModel::Constant(first));
        }
        let yb: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
        Ok(ArmModel::Probit(probit_fit(design, &yb)?))
    }

    /// Predicted probabilities and the average gradient `mean φ(xβ) x`.
    fn predict(&self, design: &DesignMatrix) -> (Vec<f64>, DVector<f64>) {
        let n = design.nrows();
        match self {
            ArmModel::Constant(c) => (vec![*c; n], DVector::zeros(design.ncols())),
            ArmModel::Probit(fit) => {
                let eta = &design.x * DVector::from_column_slice(&fit.coefficients);
                let mut grad = DVector::zeros(design.ncols());
                for (i, &e) in eta.iter().enumerate() {
                    grad.axpy(norm_pdf(e) / n as f64, &design.x.row(i).transpose(), 1.0);
                }
                (eta.iter().map(|&e| norm_cdf(e)).collect(), grad)
            }
        }
    }

    fn quad(&self, g: &DVector<f64>) -> f64 {
        match self {
            ArmModel::Constant(_) => 0.0,
            ArmModel::Probit(fit) => (g.transpose() * fit.cov() * g)[(0, 0)],
        }
    }
}

/// Average over all rows of the difference between per-arm probit
/// predictions. The SE combines the delta method for both fits with the
/// sampling variance of the averaged differences.
pub fn regression_adjustment_ate(design: &DesignMatrix, y: &[f64], d: &[bool]) -> Result<Estimate> {
    check_lengths(design.nrows(), &[("outcome length", y.len()), ("treatment length", d.len())])?;
    let not_d: Vec<bool> = d.iter().map(|b| !b).collect();
    let arms = [d.to_vec(), not_d];
    let mut models = Vec::with_capacity(2);
    for keep in &arms {
        let sub = design.rows_where(keep);
        if sub.nrows() == 0 {
            return Err(Error::Empty("a treatment arm has no observations".into()));
        }
        let ys: Vec<f64> = (0..y.len()).filter(|&i| keep[i]).map(|i| y[i]).collect();
        models.push(ArmModel::fit(&sub, &ys)?);
    }
    let (p1, g1) = models[0].predict(design);
    let (p0, g0) = models[1].predict(design);
    let r: Vec<f64> = p1.iter().zip(&p0).map(|(a, b)| a - b).collect();
    let n = r.len() as f64;
    let ate = r.iter().sum::<f64>() / n;
    let var_r = r.iter().map(|v| (v - ate).powi(2)).sum::<f64>() / n;
    let var = models[0].quad(&g1) + models[1].quad(&g0) + var_r / n;
    Ok(Estimate { ate, se: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveEffect {
    pub fit: FitResult,
    pub average_marginal_effect: f64,
    pub ame_se: f64,
}

/// Probit of `outcome` on a design that includes the treatment column
/// `d_column`, with the average marginal effect of switching it from 0 to 1.
pub fn naive_probit_effect(design: &DesignMatrix, outcome: &[bool], d_column: &str) -> Result<NaiveEffect> {
    let jd = design
        .column_index(d_column)
        .ok_or_else(|| Error::Schema(format!("design has no `{d_column}` column")))?;
    let fit = probit_fit(design, outcome)?;
    let beta = DVector::from_column_slice(&fit.coefficients);
    let n = design.nrows();
    let mut ame = 0.0;
    let mut grad = DVector::zeros(design.ncols());
    for i in 0..n {
        let mut row = design.x.row(i).transpose();
        row[jd] = 1.0;
        let e1 = row.dot(&beta);
        let mut g_row = row.clone() * norm_pdf(e1);
        row[jd] = 0.0;
        let e0 = row.dot(&beta);
        g_row -= row * norm_pdf(e0);
        ame += norm_cdf(e1) - norm_cdf(e0);
        grad += g_row;
    }
    ame /= n as f64;
    grad /= n as f64;
    let ame_se = (grad.transpose() * fit.cov() * &grad)[(0, 0)].max(0.0).sqrt();
    Ok(NaiveEffect {
        fit,
        average_marginal_effect: ame,
        ame_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn intercept_only(n: usize) -> DesignMatrix {
        DesignMatrix::new(vec!["(intercept)".into()], DMatrix::from_element(n, 1, 1.0)).unwrap()
    }

    #[test]
    fn tail_functions_are_continuous() {
        for x in [TAIL_SWITCH - 1e-9, TAIL_SWITCH + 1e-9] {
            assert!((log_norm_cdf(x) - log_norm_cdf(TAIL_SWITCH)).abs() < 1e-6);
            assert!((inverse_mills(x) / inverse_mills(TAIL_SWITCH) - 1.0).abs() < 1e-6);
        }
        // statrs reference inside its accurate range
        let sn = Normal::standard();
        for x in [-8.0, -1.0, 0.0, 2.5] {
            assert!((norm_cdf(x) - sn.cdf(x)).abs() < 1e-15);
        }
        assert!(log_norm_cdf(-40.0).is_finite());
    }

    #[test]
    fn intercept_only_probit() {
        let d: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let f = probit_fit(&intercept_only(1000), &d).unwrap();
        assert!(f.converged);
        assert!(f.coefficients[0].abs() < 1e-12);

        let d: Vec<bool> = (0..10_000).map(|i| i < 6898).collect();
        let f = probit_fit(&intercept_only(10_000), &d).unwrap();
        let exact = Normal::standard().inverse_cdf(0.6898);
        assert!((f.coefficients[0] - exact).abs() < 1e-9);
        // the commonly quoted 0.4956 is a rounded approximation of 0.49528
        assert!((f.coefficients[0] - 0.4956).abs() < 5e-4);
    }

    fn random_design(n: usize, seed: u64) -> (DesignMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
        let d = (0..n)
            .map(|i| {
                let e = 0.3 + 0.8 * x[(i, 1)] - 0.5 * x[(i, 2)];
                rng.random::<f64>() < norm_cdf(e)
            })
            .collect();
        (DesignMatrix::new(vec!["(intercept)".into(), "a".into(), "b".into()], x).unwrap(), d)
    }

    /// Fisher scoring with expected information; shares no code with `probit_fit`.
    fn irls(x: &DMatrix<f64>, d: &[bool]) -> DVector<f64> {
        let sn = Normal::standard();
        let mut beta = DVector::zeros(x.ncols());
        for _ in 0..200 {
            let eta = x * &beta;
            let w = DVector::from_iterator(
                x.nrows(),
                eta.iter().map(|&e| {
                    let (p, f) = (sn.cdf(e), (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt());
                    f * f / (p * (1.0 - p))
                }),
            );
            let z = DVector::from_iterator(
                x.nrows(),
                eta.iter().zip(d).map(|(&e, &di)| {
                    let (p, f) = (sn.cdf(e), (-0.5 * e * e).exp() / (2.0 * std::f64::consts::PI).sqrt());
                    e + (if di { 1.0 } else { 0.0 } - p) / f
                }),
            );
            let xw = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i]);
            let xtwx = x.tr_mul(&xw);
            let xtwz = xw.tr_mul(&z);
            beta = xtwx.lu().solve(&xtwz).unwrap();
        }
        beta
    }

    #[test]
    fn matches_irls_oracle() {
        let (design, d) = random_design(500, 77);
        let f = probit_fit(&design, &d).unwrap();
        assert!(f.converged);
        let oracle = irls(&design.x, &d);
        for j in 0..3 {
            assert!((f.coefficients[j] - oracle[j]).abs() < 1e-6, "{j}");
        }
    }

    #[test]
    fn separation_is_detected() {
        let n = 200;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 - 99.5 });
        let d: Vec<bool> = (0..n).map(|i| i >= 100).collect();
        let design = DesignMatrix::new(vec!["(intercept)".into(), "x".into()], x).unwrap();
        assert!(matches!(probit_fit(&design, &d), Err(Error::Separation(_))));
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let (design, d) = random_design(100, 3);
        let dup = design.with_column("(intercept) copy", &vec![1.0; 100]).unwrap();
        match probit_fit(&dup, &d) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["(intercept) copy"]),
            other => panic!("{other:?}"),
        }
        let y = vec![0.0; 100];
        assert!(matches!(ols_fit(&dup, &y), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn propensity_score_values() {
        let (design, _) = random_design(100, 5);
        let mut fit = FitResult {
            names: design.names.clone(),
            coefficients: vec![0.0; 3],
            standard_errors: vec![0.0; 3],
            n_used: 100,
            converged: true,
            iterations: 0,
            log_likelihood: None,
            residual_variance: None,
            covariance: None,
        };
        assert!(propensity_scores(&fit, &design).unwrap().iter().all(|&p| p == 0.5));
        fit.coefficients = vec![0.2, -0.7, 1.1];
        let sn = Normal::standard();
        let p = propensity_scores(&fit, &design).unwrap();
        for i in 0..100 {
            let e = 0.2 - 0.7 * design.x[(i, 1)] + 1.1 * design.x[(i, 2)];
            assert!((p[i] - sn.cdf(e)).abs() < 1e-15);
        }
    }

    #[test]
    fn ols_exact_and_oracle() {
        let d: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { d[i] });
        let design = DesignMatrix::new(vec!["(intercept)".into(), "d".into()], x).unwrap();
        let y: Vec<f64> = d.iter().map(|v| 2.0 + 3.0 * v).collect();
        let f = ols_fit(&design, &y).unwrap();
        assert!((f.coefficients[0] - 2.0).abs() < 1e-12 && (f.coefficients[1] - 3.0).abs() < 1e-12);
        assert!(f.standard_errors.iter().all(|s| *s < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DMatrix::from_fn(50, 3, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let design = DesignMatrix::new(vec!["a".into(), "b".into(), "c".into()], x.clone()).unwrap();
        let f = ols_fit(&design, &y).unwrap();
        let hand = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * DVector::from_column_slice(&y);
        for j in 0..3 {
            assert!((f.coefficients[j] - hand[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn control_function_rejects_constant_scores() {
        let y = vec![1.0, 0.0, 1.0, 0.0];
        let d = vec![true, true, false, false];
        assert!(matches!(
            control_function_ate(&y, &d, &[0.4; 4], 1),
            Err(Error::RankDeficient { .. })
        ));
        assert!(control_function_ate(&y, &d, &[0.4; 4], 2).is_err());
    }

    #[test]
    fn ipw_small_cases() {
        let r = ipw_ate(&[1.0, 0.0, 1.0, 0.0], &[true, true, false, false], &[0.5; 4]).unwrap();
        assert_eq!(r.ate, 0.0);
        let r = ipw_ate(&[1.0, 0.0], &[true, false], &[0.5; 2]).unwrap();
        assert_eq!(r.ate, 1.0);
        let r = ipw_ate(&[1.0, 1.0, 0.0], &[true, false, true], &[0.5, 0.0005, 0.9995]).unwrap();
        assert_eq!((r.n_used, r.trimmed), (1, 2));
        assert!(ipw_ate(&[1.0], &[true], &[1e-4]).is_err());
    }

    #[test]
    fn regression_adjustment_constant_outcome() {
        let (design, d) = random_design(200, 11);
        let r = regression_adjustment_ate(&design, &[1.0; 200], &d).unwrap();
        assert_eq!(r.ate, 0.0);
    }

    #[test]
    fn naive_ame_closed_form() {
        // Intercept fixed at 0 by symmetric outcome shares within each arm.
        let n = 4000;
        let d: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let p1 = norm_cdf(0.6);
        let y: Vec<bool> = (0..n)
            .map(|i| {
                let k = i / 2;
                if d[i] == 1.0 {
                    (k as f64) < p1 * (n / 2) as f64
                } else {
                    k < n / 4
                }
            })
            .collect();
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { d[i] });
        let design = DesignMatrix::new(vec!["(intercept)".into(), "d".into()], x).unwrap();
        let r = naive_probit_effect(&design, &y, "d").unwrap();
        let b = r.fit.coefficients.clone();
        assert!(b[0].abs() < 1e-9);
        let expect = norm_cdf(b[0] + b[1]) - norm_cdf(b[0]);
        assert!((r.average_marginal_effect - expect).abs() < 1e-12);
        assert!((r.average_marginal_effect - (norm_cdf(b[1]) - 0.5)).abs() < 1e-9);
    }
}
