//! End-to-end estimation for one series: lag choice, bandwidths, curves,
//! long-run covariance and bands.

use crate::acov::{self, AcovEstimate};
use crate::diffseries::{self, LagSelection, DEFAULT_LAG_THRESHOLD};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::locallinear::{self, CurveOnGrid};
use crate::lrv::{self, ResidualPair, Sym2};
use crate::procgen::TimeSeries;
use crate::rng;
use crate::scb::{self, BandMethod, BandResult};
use crate::tuning::{self, BandwidthRule, MinVolResult};

#[derive(Debug, Clone, PartialEq)]
pub enum LagRule {
    Fixed(usize),
    /// Data-driven scan from `h0` (default from the sample size) downwards.
    Select {
        h0: Option<usize>,
        threshold: f64,
    },
}

impl Default for LagRule {
    fn default() -> Self {
        LagRule::Select {
            h0: None,
            threshold: DEFAULT_LAG_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LrvRule {
    /// `m = None` means `ceil(n^{1/3})` of the residual length.
    Fixed { m: Option<usize>, tau: f64 },
    /// `m_grid = None` means the default grid for the residual length.
    MinVolatility {
        m_grid: Option<Vec<usize>>,
        tau_grid: Vec<f64>,
    },
}

impl Default for LrvRule {
    fn default() -> Self {
        LrvRule::MinVolatility {
            m_grid: None,
            tau_grid: tuning::default_tau_grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandKind {
    Bootstrap { draws: usize },
    Gumbel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub kernel: Kernel,
    pub alpha: f64,
    pub band: BandKind,
    pub lags: Vec<usize>,
    pub lag_rule: LagRule,
    pub bandwidth_grid: Vec<f64>,
    pub b_h: Option<f64>,
    pub b_k: Option<f64>,
    pub lrv_rule: LrvRule,
    /// Evaluation grid `i / G`, `i = 1..G`; `None` uses the data grid.
    pub grid_points: Option<usize>,
    /// Multiplies every critical value (1 for the nominal band).
    pub critical_scale: f64,
    pub seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            kernel: Kernel::default(),
            alpha: 0.05,
            band: BandKind::Bootstrap {
                draws: scb::DEFAULT_DRAWS,
            },
            lags: vec![0, 1],
            lag_rule: LagRule::default(),
            bandwidth_grid: tuning::default_bandwidth_grid(),
            b_h: None,
            b_k: None,
            lrv_rule: LrvRule::default(),
            grid_points: None,
            critical_scale: 1.0,
            seed: 0,
        }
    }
}

/// Tuning values resolved for one lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagTuning {
    pub lag: usize,
    pub bandwidth: f64,
    pub m: usize,
    pub tau: f64,
}

/// Every data-driven choice of a run; feeding it back reproduces the run
/// without re-tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    /// Difference lag (`None` for the naive estimator).
    pub h: Option<usize>,
    /// Mean-smoother bandwidth of the naive estimator.
    pub mean_bandwidth: Option<f64>,
    pub lags: Vec<LagTuning>,
}

impl Resolved {
    fn lag(&self, k: usize) -> Result<&LagTuning> {
        self.lags
            .iter()
            .find(|l| l.lag == k)
            .ok_or_else(|| Error::Config(format!("no resolved tuning for lag {k}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagOutput {
    pub estimate: AcovEstimate,
    pub band: BandResult,
    /// Length of the smoothed series behind the estimate.
    pub working_len: usize,
    pub tuning: LagTuning,
    pub min_vol: Option<MinVolResult>,
    pub bootstrap_seed: Option<u64>,
    pub sigma_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimation {
    pub n: usize,
    pub resolved: Resolved,
    /// Set when the selected lag was raised above the largest requested lag.
    pub h_raised: bool,
    pub lag_selection: Option<LagSelection>,
    pub lags: Vec<LagOutput>,
}

/// Evaluation grid before restriction to `[b, 1 - b]`.
pub fn evaluation_grid(n: usize, grid_points: Option<usize>) -> Vec<f64> {
    locallinear::data_grid(grid_points.unwrap_or(n))
}

fn interior(grid: &[f64], b: f64) -> Vec<f64> {
    grid.iter()
        .cloned()
        .filter(|&t| locallinear::in_interior(t, b))
        .collect()
}

fn check_options(n: usize, opts: &EstimateOptions) -> Result<()> {
    if n < crate::MIN_SERIES_LEN {
        return Err(Error::TooShort {
            len: n,
            min: crate::MIN_SERIES_LEN,
        });
    }
    if opts.lags.is_empty() {
        return Err(Error::Config("no lags requested".into()));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {}",
            opts.alpha
        )));
    }
    if !(opts.critical_scale > 0.0) {
        return Err(Error::Config("critical scale must be positive".into()));
    }
    if let BandKind::Bootstrap { draws } = opts.band {
        if draws < scb::MIN_DRAWS {
            return Err(Error::Config(format!(
                "bootstrap needs at least {} draws, got {draws}",
                scb::MIN_DRAWS
            )));
        }
    }
    if let Some(g) = opts.grid_points {
        if g < 10 {
            return Err(Error::Config(format!(
                "grid resolution {g} below 10 points"
            )));
        }
    }
    for b in opts
        .bandwidth_grid
        .iter()
        .chain(opts.b_h.iter())
        .chain(opts.b_k.iter())
    {
        locallinear::check_bandwidth(*b)?;
    }
    Ok(())
}

fn bandwidth_rule(grid: &[f64], fixed: Option<f64>) -> BandwidthRule {
    match fixed {
        Some(b) => BandwidthRule::Fixed(b),
        None => BandwidthRule::Gcv(grid.to_vec()),
    }
}

fn bootstrap_seed(root: u64, lag: usize, naive: bool) -> u64 {
    let label = if lag == 0 {
        rng::label::BOOTSTRAP_GAMMA0
    } else {
        rng::label::BOOTSTRAP_GAMMAK
    };
    let s = rng::derive_seed(rng::derive_seed(root, label), lag as u64);
    if naive {
        rng::derive_seed(s, 0x6e61_6976_65)
    } else {
        s
    }
}

/// Long-run covariance on `grid` under `rule`, or under the resolved pair.
fn long_run_cov(
    res: &ResidualPair,
    rule: &LrvRule,
    fixed: Option<(usize, f64)>,
    kernel: Kernel,
    grid: &[f64],
) -> Result<(Vec<Sym2>, usize, f64, Option<MinVolResult>)> {
    let n = res.len();
    let (m, tau, mv) = match (fixed, rule) {
        (Some((m, tau)), _) => (m, tau, None),
        (None, LrvRule::Fixed { m, tau }) => {
            (m.unwrap_or_else(|| lrv::default_block(n)), *tau, None)
        }
        (None, LrvRule::MinVolatility { m_grid, tau_grid }) => {
            let mg = m_grid.clone().unwrap_or_else(|| tuning::default_m_grid(n));
            let r = tuning::min_volatility(res, &mg, tau_grid, kernel)?;
            (r.m, r.tau, Some(r))
        }
    };
    let curve = lrv::lrv_curve(res, m, tau, kernel, grid)?;
    Ok((curve.matrices, m, tau, mv))
}

fn critical_value(
    opts: &EstimateOptions,
    n_work: usize,
    b: f64,
    seed: u64,
) -> Result<(f64, BandMethod, Option<u64>)> {
    let kernel = opts.kernel;
    match opts.band {
        BandKind::Bootstrap { draws } => {
            let sup_grid = evaluation_grid(n_work, opts.grid_points);
            let q =
                scb::bootstrap_quantile_on(n_work, b, kernel, draws, opts.alpha, seed, &sup_grid)?;
            Ok((
                q.quantile,
                BandMethod::Bootstrap { draws, seed },
                Some(seed),
            ))
        }
        BandKind::Gumbel => {
            let c =
                scb::gumbel_scale(n_work, b, kernel) * scb::gumbel_critical(b, kernel, opts.alpha)?;
            Ok((c, BandMethod::Gumbel, None))
        }
    }
}

fn sigma_curve(matrices: &[Sym2], grid: &[f64], lag: usize) -> (CurveOnGrid, bool) {
    let lrv = lrv::LongRunCovCurve {
        grid: grid.to_vec(),
        matrices: matrices.to_vec(),
        m: 0,
        tau: 0.0,
    };
    let s = lrv::sigma_functionals(&lrv);
    let curve = if lag == 0 { s.sigma_h } else { s.sigma_c };
    (curve, s.clamped)
}

/// Difference-based estimates and bands for every requested lag.
pub fn estimate(y: &TimeSeries, opts: &EstimateOptions) -> Result<Estimation> {
    estimate_with(y, opts, None)
}

/// As [`estimate`], reusing the tuning values in `fixed` when given.
pub fn estimate_with(
    y: &TimeSeries,
    opts: &EstimateOptions,
    fixed: Option<&Resolved>,
) -> Result<Estimation> {
    let n = y.len();
    check_options(n, opts)?;
    let kernel = opts.kernel;
    let max_lag = *opts.lags.iter().max().unwrap_or(&0);

    let (mut h, lag_selection) = match (fixed.and_then(|f| f.h), &opts.lag_rule) {
        (Some(h), _) => (h, None),
        (None, LagRule::Fixed(h)) => (*h, None),
        (None, LagRule::Select { h0, threshold }) => {
            let h0 = h0.unwrap_or_else(|| diffseries::default_max_lag(n));
            let rule = BandwidthRule::Gcv(opts.bandwidth_grid.clone());
            let sel = diffseries::select_lag(y, h0, &rule, kernel, *threshold)?;
            (sel.h, Some(sel))
        }
    };
    if h == 0 || h >= n / 2 {
        return Err(Error::InvalidLag { lag: h, len: n });
    }
    let h_raised = h <= max_lag;
    if h_raised {
        h = max_lag + 1;
    }

    let rho_h = diffseries::difference(y, h)?;
    let base_grid = evaluation_grid(n, opts.grid_points);
    let mut lags = Vec::with_capacity(opts.lags.len());
    let mut tunings = Vec::with_capacity(opts.lags.len());
    for &k in &opts.lags {
        let prior = fixed.map(|f| f.lag(k)).transpose()?;
        let (b, res) = if k == 0 {
            let b = match prior {
                Some(p) => p.bandwidth,
                None => {
                    bandwidth_rule(&opts.bandwidth_grid, opts.b_h).select(&rho_h.values, kernel)?
                }
            };
            (
                b,
                lrv::residuals_from_series(&rho_h.values, &rho_h.values, b, kernel)?,
            )
        } else {
            let b = match prior {
                Some(p) => p.bandwidth,
                None => {
                    let series = acov::gammak_gcv_series(y, k, h)?;
                    bandwidth_rule(&opts.bandwidth_grid, opts.b_k).select(&series, kernel)?
                }
            };
            (b, lrv::residuals(y, k, h, b, kernel)?)
        };
        let grid = interior(&base_grid, b);
        if grid.is_empty() {
            return Err(Error::Config(format!(
                "no evaluation points inside [{b}, {}]",
                1.0 - b
            )));
        }
        let estimate = if k == 0 {
            acov::estimate_gamma0(y, h, b, kernel, &grid)?
        } else {
            acov::estimate_gammak(y, k, h, b, kernel, &grid)?
        };
        let (matrices, m, tau, min_vol) = long_run_cov(
            &res,
            &opts.lrv_rule,
            prior.map(|p| (p.m, p.tau)),
            kernel,
            &grid,
        )?;
        let (sigma, sigma_clamped) = sigma_curve(&matrices, &grid, k);
        let n_work = rho_h.len();
        let (critical, method, bootstrap_seed) =
            critical_value(opts, n_work, b, bootstrap_seed(opts.seed, k, false))?;
        let band = scb::band_with_critical(
            &estimate,
            &sigma,
            method,
            opts.alpha,
            critical * opts.critical_scale,
        )?;
        let tuning = LagTuning {
            lag: k,
            bandwidth: b,
            m,
            tau,
        };
        tunings.push(tuning);
        lags.push(LagOutput {
            estimate,
            band,
            working_len: n_work,
            tuning,
            min_vol,
            bootstrap_seed,
            sigma_clamped,
        });
    }
    Ok(Estimation {
        n,
        resolved: Resolved {
            h: Some(h),
            mean_bandwidth: None,
            lags: tunings,
        },
        h_raised,
        lag_selection,
        lags,
    })
}

/// Detrend-then-smooth estimates with bands of the same bootstrap form.
///
/// The naive estimate is a plain smooth of lagged residual products, so its
/// fluctuation is `sum_i w(t,i) xi_i` without the factor 1/2 carried by
/// `mu_dagger`; the critical value is doubled accordingly.
pub fn estimate_naive(y: &TimeSeries, opts: &EstimateOptions) -> Result<Estimation> {
    estimate_naive_with(y, opts, None)
}

pub fn estimate_naive_with(
    y: &TimeSeries,
    opts: &EstimateOptions,
    fixed: Option<&Resolved>,
) -> Result<Estimation> {
    let n = y.len();
    check_options(n, opts)?;
    let kernel = opts.kernel;
    let b_mean = match fixed.and_then(|f| f.mean_bandwidth) {
        Some(b) => b,
        None => BandwidthRule::Gcv(opts.bandwidth_grid.clone()).select(y.values(), kernel)?,
    };
    let e = acov::naive_residuals(y, b_mean, kernel)?;
    let base_grid = evaluation_grid(n, opts.grid_points);
    let mut lags = Vec::with_capacity(opts.lags.len());
    let mut tunings = Vec::with_capacity(opts.lags.len());
    for &k in &opts.lags {
        let prior = fixed.map(|f| f.lag(k)).transpose()?;
        let products = acov::lagged_products(&e, k)?;
        let b = match prior {
            Some(p) => p.bandwidth,
            None => {
                let over = if k == 0 { opts.b_h } else { opts.b_k };
                bandwidth_rule(&opts.bandwidth_grid, over).select(&products, kernel)?
            }
        };
        let grid = interior(&base_grid, b);
        if grid.is_empty() {
            return Err(Error::Config(format!(
                "no evaluation points inside [{b}, {}]",
                1.0 - b
            )));
        }
        let curve = locallinear::fit_curve(&products, b, kernel, &grid)?;
        let estimate = AcovEstimate {
            lag: k,
            negative: k == 0 && curve.values.iter().any(|v| *v < 0.0),
            curve,
            bandwidth: b,
            estimator: acov::Estimator::Naive {
                mean_bandwidth: b_mean,
            },
        };
        let fit = locallinear::fitted_values(&products, b, kernel)?;
        let res = ResidualPair {
            h: k,
            k,
            bandwidth: b,
            values: products
                .iter()
                .zip(&fit)
                .map(|(p, f)| [p - f, p - f])
                .collect(),
        };
        let (matrices, m, tau, min_vol) = long_run_cov(
            &res,
            &opts.lrv_rule,
            prior.map(|p| (p.m, p.tau)),
            kernel,
            &grid,
        )?;
        let (sigma, sigma_clamped) = sigma_curve(&matrices, &grid, 0);
        let n_work = products.len();
        let (critical, method, bootstrap_seed) =
            critical_value(opts, n_work, b, bootstrap_seed(opts.seed, k, true))?;
        let band = scb::band_with_critical(
            &estimate,
            &sigma,
            method,
            opts.alpha,
            2.0 * critical * opts.critical_scale,
        )?;
        let tuning = LagTuning {
            lag: k,
            bandwidth: b,
            m,
            tau,
        };
        tunings.push(tuning);
        lags.push(LagOutput {
            estimate,
            band,
            working_len: n_work,
            tuning,
            min_vol,
            bootstrap_seed,
            sigma_clamped,
        });
    }
    Ok(Estimation {
        n,
        resolved: Resolved {
            h: None,
            mean_bandwidth: Some(b_mean),
            lags: tunings,
        },
        h_raised: false,
        lag_selection: None,
        lags,
    })
}
