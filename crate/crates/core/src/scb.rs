//! Simultaneous confidence bands: simulation-assisted bootstrap and the
//! asymptotic Gumbel formula.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::acov::AcovEstimate;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::locallinear::{self, CurveOnGrid, WeightSet};
use crate::rng;

pub const MIN_DRAWS: usize = 1000;
pub const DEFAULT_DRAWS: usize = 10_000;

/// Draws of `sup_t |mu_dagger(t)|` and their empirical quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapQuantile {
    pub n: usize,
    pub bandwidth: f64,
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub quantile: f64,
    /// Sorted suprema, one per draw.
    pub sups: Vec<f64>,
}

impl BootstrapQuantile {
    /// Quantile at another level on the same draw set.
    pub fn at(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(type7_quantile(&self.sups, 1.0 - alpha))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Linear interpolation between order statistics of sorted data (type 7).
pub fn type7_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `Var mu_dagger(t) = sum_i w(t,i)^2 / 4`.
pub fn mu_dagger_variance(w: &WeightSet) -> f64 {
    0.25 * w.sum_of_squares()
}

/// One realization of `mu_dagger` on the rows' grid, from draw `index`.
pub fn mu_dagger(rows: &[WeightSet], n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut r = rng::substream(seed, index);
    let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    rows.iter().map(|w| 0.5 * w.apply_fast(&u)).collect()
}

/// Bootstrap quantile with the sup taken over the working length's design
/// points inside `[b, 1 - b]`.
pub fn bootstrap_quantile(
    n: usize,
    b: f64,
    kernel: Kernel,
    draws: usize,
    alpha: f64,
    seed: u64,
) -> Result<BootstrapQuantile> {
    let grid = locallinear::interior_grid(n, b);
    bootstrap_quantile_on(n, b, kernel, draws, alpha, seed, &grid)
}

/// As [`bootstrap_quantile`] with an explicit sup grid. Draw `d` uses RNG
/// substream `d` of `seed`, so the result does not depend on thread count.
pub fn bootstrap_quantile_on(
    n: usize,
    b: f64,
    kernel: Kernel,
    draws: usize,
    alpha: f64,
    seed: u64,
    grid: &[f64],
) -> Result<BootstrapQuantile> {
    if draws < MIN_DRAWS {
        return Err(Error::Config(format!(
            "bootstrap needs at least {MIN_DRAWS} draws, got {draws}"
        )));
    }
    check_alpha(alpha)?;
    let grid: Vec<f64> = grid
        .iter()
        .cloned()
        .filter(|&t| locallinear::in_interior(t, b))
        .collect();
    if grid.is_empty() {
        return Err(Error::Config(format!(
            "no evaluation points inside [{b}, {}]",
            1.0 - b
        )));
    }
    let rows = locallinear::weight_rows(n, &grid, b, kernel)?;
    let mut sups: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            mu_dagger(&rows, n, seed, d)
                .into_iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .collect();
    sups.sort_by(f64::total_cmp);
    let quantile = type7_quantile(&sups, 1.0 - alpha);
    Ok(BootstrapQuantile {
        n,
        bandwidth: b,
        draws,
        alpha,
        seed,
        quantile,
        sups,
    })
}

/// `B_K(m*)` with `m* = 1/b`.
pub fn gumbel_location(b: f64, kernel: Kernel) -> Result<f64> {
    if !(b > 0.0 && b < (-1.0f64).exp()) {
        return Err(Error::InvalidBandwidth(b));
    }
    let l = (2.0 * (1.0 / b).ln()).sqrt();
    let phi0 = kernel.squared_moment(0);
    let c = (kernel.derivative_roughness() / (4.0 * phi0)).sqrt() / std::f64::consts::PI;
    Ok(l + c.ln() / l)
}

/// Multiplier such that the Gumbel band half-width is
/// `sigma(t) * sqrt(phi_0 / (4 n b)) * multiplier`.
pub fn gumbel_critical(b: f64, kernel: Kernel, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let loc = gumbel_location(b, kernel)?;
    let l = (2.0 * (1.0 / b).ln()).sqrt();
    Ok(loc - (-0.5 * (1.0 - alpha).ln()).ln() / l)
}

/// `sqrt(phi_0 / (4 n b))`, the standard deviation scale of `mu_dagger`.
pub fn gumbel_scale(n: usize, b: f64, kernel: Kernel) -> f64 {
    (kernel.squared_moment(0) / (4.0 * n as f64 * b)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandMethod {
    Bootstrap { draws: usize, seed: u64 },
    Gumbel,
}

impl BandMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BandMethod::Bootstrap { .. } => "bootstrap",
            BandMethod::Gumbel => "gumbel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandResult {
    pub lag: usize,
    pub center: CurveOnGrid,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sigma: Vec<f64>,
    pub method: BandMethod,
    pub alpha: f64,
    pub bandwidth: f64,
    /// Half-width divided by `sigma`.
    pub critical: f64,
}

impl BandResult {
    pub fn grid(&self) -> &[f64] {
        &self.center.grid
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.bandwidth, 1.0 - self.bandwidth)
    }

    pub fn mean_width(&self) -> f64 {
        let w: f64 = self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).sum();
        w / self.lower.len() as f64
    }
}

/// Band `center(t) +- critical * sigma(t)` over the estimate's grid points
/// inside `[b, 1 - b]`, where `b` is the estimate's bandwidth and `n` the
/// working length of the smoothed series.
pub fn build_band(
    est: &AcovEstimate,
    sigma: &CurveOnGrid,
    method: BandMethod,
    alpha: f64,
    n: usize,
    kernel: Kernel,
) -> Result<BandResult> {
    let b = est.bandwidth;
    check_alpha(alpha)?;
    check_aligned(&est.curve.grid, &sigma.grid)?;
    let keep: Vec<usize> = (0..est.curve.len())
        .filter(|&i| locallinear::in_interior(est.curve.grid[i], b))
        .collect();
    if keep.is_empty() {
        return Err(Error::Config(format!(
            "no grid points inside [{b}, {}]",
            1.0 - b
        )));
    }
    for &i in &keep {
        let s = sigma.values[i];
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::DegenerateVariance { t: sigma.grid[i] });
        }
    }
    let critical = match method {
        BandMethod::Bootstrap { draws, seed } => {
            bootstrap_quantile(n, b, kernel, draws, alpha, seed)?.quantile
        }
        BandMethod::Gumbel => gumbel_scale(n, b, kernel) * gumbel_critical(b, kernel, alpha)?,
    };
    Ok(assemble(est, sigma, &keep, method, alpha, critical))
}

/// Band from a precomputed critical value.
pub fn band_with_critical(
    est: &AcovEstimate,
    sigma: &CurveOnGrid,
    method: BandMethod,
    alpha: f64,
    critical: f64,
) -> Result<BandResult> {
    check_aligned(&est.curve.grid, &sigma.grid)?;
    let keep: Vec<usize> = (0..est.curve.len())
        .filter(|&i| locallinear::in_interior(est.curve.grid[i], est.bandwidth))
        .collect();
    if let Some(&i) = keep.iter().find(|&&i| !(sigma.values[i] > 0.0)) {
        return Err(Error::DegenerateVariance { t: sigma.grid[i] });
    }
    Ok(assemble(est, sigma, &keep, method, alpha, critical))
}

fn assemble(
    est: &AcovEstimate,
    sigma: &CurveOnGrid,
    keep: &[usize],
    method: BandMethod,
    alpha: f64,
    critical: f64,
) -> BandResult {
    let grid: Vec<f64> = keep.iter().map(|&i| est.curve.grid[i]).collect();
    let center: Vec<f64> = keep.iter().map(|&i| est.curve.values[i]).collect();
    let sig: Vec<f64> = keep.iter().map(|&i| sigma.values[i]).collect();
    let lower = center
        .iter()
        .zip(&sig)
        .map(|(c, s)| c - critical * s)
        .collect();
    let upper = center
        .iter()
        .zip(&sig)
        .map(|(c, s)| c + critical * s)
        .collect();
    BandResult {
        lag: est.lag,
        center: CurveOnGrid::new(grid, center),
        lower,
        upper,
        sigma: sig,
        method,
        alpha,
        bandwidth: est.bandwidth,
        critical,
    }
}

fn check_aligned(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::Alignment(format!(
            "grids differ ({} vs {} points)",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// True iff `lower <= truth <= upper` at every band grid point.
pub fn coverage_check(band: &BandResult, truth: &CurveOnGrid) -> Result<bool> {
    check_aligned(band.grid(), &truth.grid)?;
    Ok(truth
        .values
        .iter()
        .zip(band.lower.iter().zip(&band.upper))
        .all(|(v, (l, u))| l <= v && v <= u))
}
