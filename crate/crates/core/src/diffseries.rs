//! Squared-difference series and the choice of the truncation lag.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::locallinear::{self, CurveOnGrid};
use crate::procgen::TimeSeries;
use crate::tuning::BandwidthRule;

/// `rho_j = (y_{j+k} - y_j)^2`, `j = 1..N-k`, placed on its own grid `j/(N-k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceSeries {
    pub lag: usize,
    pub values: Vec<f64>,
    pub source_len: usize,
}

impl DifferenceSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> Vec<f64> {
        locallinear::data_grid(self.len())
    }
}

pub fn difference(y: &TimeSeries, k: usize) -> Result<DifferenceSeries> {
    let v = y.values();
    if k == 0 || k >= v.len() {
        return Err(Error::InvalidLag {
            lag: k,
            len: v.len(),
        });
    }
    let values = v[k..]
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(DifferenceSeries {
        lag: k,
        values,
        source_len: v.len(),
    })
}

/// Default threshold of the abrupt-change rule.
pub const DEFAULT_LAG_THRESHOLD: f64 = 3.0;

/// Default largest candidate lag: `ceil(n^{1/4} log n / 4)` clamped to `[3, 20]`.
pub fn default_max_lag(n: usize) -> usize {
    let nf = n as f64;
    ((nf.powf(0.25) * nf.ln() / 4.0).ceil() as usize).clamp(3, 20)
}

/// Upper limit `n^{1/4} log n` on the candidate lag.
pub fn max_lag_guard(n: usize) -> usize {
    let nf = n as f64;
    (nf.powf(0.25) * nf.ln()).ceil() as usize
}

/// Outcome of the lag scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSelection {
    pub h: usize,
    /// Scan points `t_i`.
    pub grid: Vec<f64>,
    /// `h*(t_i)` at each scan point.
    pub local: Vec<usize>,
    /// `(k, b_k, beta_hat_k on grid)` for `k = 1..=h0`.
    pub profile: Vec<(usize, f64, CurveOnGrid)>,
}

impl LagSelection {
    /// Time average of `beta_hat_k` for each scanned `k`.
    pub fn mean_profile(&self) -> Vec<(usize, f64)> {
        self.profile
            .iter()
            .map(|(k, _, c)| (*k, c.values.iter().sum::<f64>() / c.len() as f64))
            .collect()
    }
}

/// Scan `k = h0, h0-1, ..., 1` at every design point and stop where the
/// local linear estimate of `beta_k(t)` jumps.
///
/// The reference step is the mean of `|beta_k(t) - beta_{k+1}(t)|` over all
/// scan points and the upper half of the scanned lags, where the profile is
/// flat. At each `t` the rule fires at the largest `k` with
/// `|beta_k(t) - beta_{k+1}(t)| > threshold * reference`, giving
/// `h*(t) = k + 1`, or `h*(t) = 1` when it never fires. The returned lag is
/// the rounded mean of `h*`.
pub fn select_lag(
    y: &TimeSeries,
    h0: usize,
    rule: &BandwidthRule,
    kernel: Kernel,
    threshold: f64,
) -> Result<LagSelection> {
    let n = y.len();
    let guard = max_lag_guard(n);
    if h0 < 2 || h0 > guard || 2 * h0 >= n {
        return Err(Error::Config(format!(
            "candidate lag h0 = {h0} outside [2, {guard}] for n = {n}"
        )));
    }
    if !(threshold > 0.0) {
        return Err(Error::Config(format!(
            "lag threshold must be positive, got {threshold}"
        )));
    }
    let mut series = Vec::with_capacity(h0);
    let mut bandwidths = Vec::with_capacity(h0);
    for k in 1..=h0 {
        let rho = difference(y, k)?;
        bandwidths.push(rule.select(&rho.values, kernel)?);
        series.push(rho);
    }
    let b_max = bandwidths.iter().cloned().fold(0.0, f64::max);
    let grid = locallinear::interior_grid(n, b_max);
    if grid.is_empty() {
        return Err(Error::Config("no scan points inside [b, 1-b]".into()));
    }
    let profile: Vec<(usize, f64, CurveOnGrid)> = series
        .iter()
        .zip(&bandwidths)
        .map(|(rho, &b)| {
            locallinear::fit_curve(&rho.values, b, kernel, &grid).map(|c| (rho.lag, b, c))
        })
        .collect::<Result<_>>()?;

    let beta = |k: usize, i: usize| profile[k - 1].2.values[i];
    let step = |k: usize, i: usize| (beta(k, i) - beta(k + 1, i)).abs();
    // Noise scale of the flat tail: mean step over all scan points and the
    // upper half of the scanned lags.
    let tail = h0.div_ceil(2)..h0;
    let reference = tail
        .clone()
        .flat_map(|k| (0..grid.len()).map(move |i| (k, i)))
        .map(|(k, i)| step(k, i))
        .sum::<f64>()
        / (tail.len() * grid.len()) as f64;
    let scale = profile[h0 - 1]
        .2
        .values
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
        / grid.len() as f64;
    let reference = reference.max(f64::EPSILON * scale.max(f64::MIN_POSITIVE));
    let local: Vec<usize> = (0..grid.len())
        .map(|i| {
            (1..h0)
                .rev()
                .find(|&k| step(k, i) > threshold * reference)
                .map_or(1, |k| k + 1)
        })
        .collect();
    let mean = local.iter().sum::<usize>() as f64 / local.len() as f64;
    Ok(LagSelection {
        h: (mean.round() as usize).max(1),
        grid,
        local,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_differences() {
        let y = TimeSeries::new(vec![2.5; 40]).unwrap();
        for k in 1..5 {
            assert!(difference(&y, k).unwrap().values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn hand_example() {
        let y = TimeSeries::new(vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let d = difference(&y, 1).unwrap();
        assert_eq!(d.values, vec![1.0, 1.0, 1.0]);
        assert_eq!(d.source_len, 4);
        let d = difference(&y, 2).unwrap();
        assert_eq!(d.values, vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_lag() {
        let y = TimeSeries::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(difference(&y, 3), Err(Error::InvalidLag { .. })));
        assert!(matches!(difference(&y, 0), Err(Error::InvalidLag { .. })));
    }

    #[test]
    fn shift_invariance() {
        let v: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.25).collect();
        let a = difference(&TimeSeries::new(v.clone()).unwrap(), 3).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + 1024.0).collect();
        let b = difference(&TimeSeries::new(shifted).unwrap(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_and_guard() {
        assert_eq!(default_max_lag(400), 7);
        assert_eq!(default_max_lag(50), 3);
        assert!(max_lag_guard(400) >= default_max_lag(400));
        let y = TimeSeries::new((0..100).map(|i| (i as f64).sin()).collect()).unwrap();
        let rule = BandwidthRule::Fixed(0.2);
        assert!(select_lag(&y, 1, &rule, Kernel::Epanechnikov, 3.0).is_err());
        assert!(select_lag(&y, 60, &rule, Kernel::Epanechnikov, 3.0).is_err());
    }
}
