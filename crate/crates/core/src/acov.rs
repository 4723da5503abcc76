//! Autocovariance curves from local-linear fits of squared differences, and
//! the naive detrend-then-smooth comparator.

use crate::diffseries::difference;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::locallinear::{fit_curve, fitted_values, CurveOnGrid};
use crate::procgen::TimeSeries;
use crate::tuning::BandwidthRule;

/// How an [`AcovEstimate`] was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Difference-based, with truncation lag `h`.
    Difference { h: usize },
    /// Residuals from a local-linear mean fit with `mean_bandwidth`.
    Naive { mean_bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcovEstimate {
    pub lag: usize,
    pub curve: CurveOnGrid,
    /// `b_h` for lag 0, `b_k` otherwise; the smoothing bandwidth for naive estimates.
    pub bandwidth: f64,
    pub estimator: Estimator,
    /// Set when a lag-0 estimate dips below zero somewhere.
    pub negative: bool,
}

impl AcovEstimate {
    fn new(lag: usize, curve: CurveOnGrid, bandwidth: f64, estimator: Estimator) -> Self {
        let negative = lag == 0 && curve.values.iter().any(|v| *v < 0.0);
        AcovEstimate {
            lag,
            curve,
            bandwidth,
            estimator,
            negative,
        }
    }
}

/// `gamma_0(t) = beta_h(t) / 2`.
pub fn estimate_gamma0(
    y: &TimeSeries,
    h: usize,
    b_h: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<AcovEstimate> {
    let rho = difference(y, h)?;
    let fit = fit_curve(&rho.values, b_h, kernel, grid)?;
    Ok(AcovEstimate::new(
        0,
        fit.map(|v| 0.5 * v),
        b_h,
        Estimator::Difference { h },
    ))
}

/// `gamma_k(t) = (beta_h(t) - beta_k(t)) / 2`, both fits with bandwidth `b_k`.
pub fn estimate_gammak(
    y: &TimeSeries,
    k: usize,
    h: usize,
    b_k: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<AcovEstimate> {
    if k == 0 || k >= h {
        return Err(Error::InvalidLag { lag: k, len: h });
    }
    let far = fit_curve(&difference(y, h)?.values, b_k, kernel, grid)?;
    let near = fit_curve(&difference(y, k)?.values, b_k, kernel, grid)?;
    let values = far
        .values
        .iter()
        .zip(&near.values)
        .map(|(a, b)| 0.5 * (a - b))
        .collect();
    Ok(AcovEstimate::new(
        k,
        CurveOnGrid::new(grid.to_vec(), values),
        b_k,
        Estimator::Difference { h },
    ))
}

/// Series fed to the lag-`k` bandwidth selector: `rho^h - rho^k` on the
/// common index range `j = 1..N-h`.
pub fn gammak_gcv_series(y: &TimeSeries, k: usize, h: usize) -> Result<Vec<f64>> {
    let far = difference(y, h)?;
    let near = difference(y, k)?;
    Ok(far
        .values
        .iter()
        .zip(&near.values)
        .map(|(a, b)| a - b)
        .collect())
}

/// `e_i = y_i - mu_hat(t_i)`.
pub fn naive_residuals(y: &TimeSeries, b_mean: f64, kernel: Kernel) -> Result<Vec<f64>> {
    let fit = fitted_values(y.values(), b_mean, kernel)?;
    Ok(y.values().iter().zip(&fit).map(|(a, b)| a - b).collect())
}

/// `e_i e_{i-k}` for `i = k+1..n`.
pub fn lagged_products(e: &[f64], k: usize) -> Result<Vec<f64>> {
    if k >= e.len() {
        return Err(Error::InvalidLag {
            lag: k,
            len: e.len(),
        });
    }
    Ok(e[k..].iter().zip(e).map(|(a, b)| a * b).collect())
}

/// Detrend with a local-linear mean fit, then smooth lagged residual products.
pub fn naive_estimate(
    y: &TimeSeries,
    k: usize,
    mean_rule: &BandwidthRule,
    var_rule: &BandwidthRule,
    kernel: Kernel,
    grid: &[f64],
) -> Result<AcovEstimate> {
    let b_mean = mean_rule.select(y.values(), kernel)?;
    let e = naive_residuals(y, b_mean, kernel)?;
    let products = lagged_products(&e, k)?;
    let b_var = var_rule.select(&products, kernel)?;
    let curve = fit_curve(&products, b_var, kernel, grid)?;
    Ok(AcovEstimate::new(
        k,
        curve,
        b_var,
        Estimator::Naive {
            mean_bandwidth: b_mean,
        },
    ))
}
