//! Data-driven tuning: GCV bandwidths and the extended minimum-volatility
//! choice of the long-run covariance block size and bandwidth.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::locallinear::{self, compensated_sum};
use crate::lrv::{self, ResidualPair, Sym2};

/// Candidate bandwidths `0.15, 0.16, ..., 0.45`.
pub fn default_bandwidth_grid() -> Vec<f64> {
    (15..=45).map(|i| i as f64 / 100.0).collect()
}

/// How a bandwidth is obtained for a given series.
#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRule {
    Fixed(f64),
    Gcv(Vec<f64>),
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Gcv(default_bandwidth_grid())
    }
}

impl BandwidthRule {
    pub fn select(&self, series: &[f64], kernel: Kernel) -> Result<f64> {
        match self {
            BandwidthRule::Fixed(b) => {
                locallinear::check_bandwidth(*b)?;
                Ok(*b)
            }
            BandwidthRule::Gcv(grid) => Ok(gcv_bandwidth(series, grid, kernel)?.bandwidth),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcvResult {
    pub grid: Vec<f64>,
    /// `None` where the candidate was infeasible (singular window, trace >= n).
    pub scores: Vec<Option<f64>>,
    pub bandwidth: f64,
}

/// `n^{-1} sum (y_i - yhat_i)^2 / (1 - tr(H)/n)^2`.
pub fn gcv_score(series: &[f64], b: f64, kernel: Kernel) -> Result<f64> {
    let n = series.len() as f64;
    let (fitted, trace) = locallinear::fit_with_trace(series, b, kernel)?;
    if !(trace < n) {
        return Err(Error::Tuning(format!(
            "hat trace {trace} not below n at b = {b}"
        )));
    }
    let rss = compensated_sum(series.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)));
    let denom = 1.0 - trace / n;
    Ok(rss / n / (denom * denom))
}

/// Minimize GCV over `grid`. Scores within a relative `1e-12` of the data's
/// mean square count as ties, which go to the larger bandwidth.
pub fn gcv_bandwidth(series: &[f64], grid: &[f64], kernel: Kernel) -> Result<GcvResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty bandwidth grid".into()));
    }
    for &b in grid {
        locallinear::check_bandwidth(b)?;
    }
    let scores: Vec<Option<f64>> = grid
        .iter()
        .map(|&b| gcv_score(series, b, kernel).ok().filter(|s| s.is_finite()))
        .collect();
    let best = scores
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Tuning(
            "no feasible bandwidth on the GCV grid".into(),
        ));
    }
    let mean_sq = series.iter().map(|y| y * y).sum::<f64>() / series.len() as f64;
    let tol = 1e-12 * mean_sq.max(f64::MIN_POSITIVE);
    let bandwidth = grid
        .iter()
        .zip(&scores)
        .filter(|(_, s)| s.is_some_and(|s| s <= best + tol))
        .map(|(b, _)| *b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GcvResult {
        grid: grid.to_vec(),
        scores,
        bandwidth,
    })
}

/// Default block half-widths: seven values from `ceil(n^{1/3}/2)` to `ceil(2 n^{1/3})`.
pub fn default_m_grid(n: usize) -> Vec<usize> {
    let c = (n as f64).cbrt();
    let lo = (c / 2.0).ceil();
    let hi = (2.0 * c).ceil();
    let mut g: Vec<usize> = (0..7)
        .map(|i| (lo + (hi - lo) * i as f64 / 6.0).round() as usize)
        .collect();
    g.dedup();
    g
}

pub fn default_tau_grid() -> Vec<f64> {
    vec![0.10, 0.15, 0.20, 0.25, 0.30]
}

/// Outcome of the minimum-volatility search.
#[derive(Debug, Clone, PartialEq)]
pub struct MinVolResult {
    pub m_grid: Vec<usize>,
    pub tau_grid: Vec<f64>,
    /// `ise[i][j]` for `(m_i, tau_j)`; `None` off the interior.
    pub ise: Vec<Vec<Option<f64>>>,
    pub m: usize,
    pub tau: f64,
}

/// Largest number of evaluation points used inside the ISE integral.
const MAX_ISE_POINTS: usize = 200;

/// Evaluation grid for the ISE integral: design points of the residual
/// series, thinned to at most [`MAX_ISE_POINTS`].
pub fn ise_grid(n: usize) -> Vec<f64> {
    let stride = n.div_ceil(MAX_ISE_POINTS).max(1);
    locallinear::data_grid(n)
        .into_iter()
        .step_by(stride)
        .collect()
}

/// Compute `Sigma_hat(m_i, tau_j, t)` over both grids and pick the pair
/// whose neighbourhood of estimates is least volatile.
pub fn min_volatility(
    res: &ResidualPair,
    m_grid: &[usize],
    tau_grid: &[f64],
    kernel: Kernel,
) -> Result<MinVolResult> {
    let (m_grid, tau_grid) = normalize_grids(m_grid, tau_grid)?;
    let n = res.len();
    for &m in &m_grid {
        lrv::check_lrv_params(n, m, tau_grid[0])?;
    }
    for &tau in &tau_grid {
        lrv::check_lrv_params(n, m_grid[0], tau)?;
    }
    let grid = ise_grid(n);
    let curves: Vec<Vec<Vec<Sym2>>> = m_grid
        .iter()
        .map(|&m| {
            let blocks = lrv::block_products(res, m);
            tau_grid
                .iter()
                .map(|&tau| padded_curve(&blocks, tau, kernel, &grid))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    select_min_volatility(&m_grid, &tau_grid, &curves, &grid)
}

/// Estimate on `[tau, 1 - tau]`, extended to the rest of `grid` by the
/// nearest interior value.
fn padded_curve(blocks: &[Sym2], tau: f64, kernel: Kernel, grid: &[f64]) -> Result<Vec<Sym2>> {
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| locallinear::in_interior(grid[i], tau))
        .collect();
    if inside.is_empty() {
        return Err(Error::Config(format!(
            "no evaluation points inside [{tau}, {}]",
            1.0 - tau
        )));
    }
    let pts: Vec<f64> = inside.iter().map(|&i| grid[i]).collect();
    let vals = lrv::smooth_blocks(blocks, tau, kernel, &pts)?;
    let first = inside[0];
    Ok((0..grid.len())
        .map(|i| {
            let j = i.saturating_sub(first).min(vals.len() - 1);
            vals[j]
        })
        .collect())
}

fn normalize_grids(m_grid: &[usize], tau_grid: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut m: Vec<usize> = m_grid.to_vec();
    m.sort_unstable();
    m.dedup();
    let mut tau: Vec<f64> = tau_grid.to_vec();
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("non-finite tau candidate".into()));
    }
    tau.sort_by(f64::total_cmp);
    tau.dedup();
    if m.len() < 5 || tau.len() < 5 {
        return Err(Error::Config(format!(
            "minimum volatility needs at least 5 distinct values per grid, got {} and {}",
            m.len(),
            tau.len()
        )));
    }
    Ok((m, tau))
}

/// Pick the interior pair minimizing the integrated standard error of its
/// nine neighbouring estimates. `curves[i][j][t]` must be tabulated on `grid`.
pub fn select_min_volatility(
    m_grid: &[usize],
    tau_grid: &[f64],
    curves: &[Vec<Vec<Sym2>>],
    grid: &[f64],
) -> Result<MinVolResult> {
    let (m1, m2) = (m_grid.len(), tau_grid.len());
    if m1 < 5 || m2 < 5 {
        return Err(Error::Config(
            "minimum volatility needs grids of length >= 5".into(),
        ));
    }
    if curves.len() != m1 || curves.iter().any(|row| row.len() != m2) {
        return Err(Error::Alignment(
            "curve table does not match the grids".into(),
        ));
    }
    if curves.iter().flatten().any(|c| c.len() != grid.len()) {
        return Err(Error::Alignment(
            "curve length does not match the grid".into(),
        ));
    }
    let mut ise = vec![vec![None; m2]; m1];
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 2..m1 - 2 {
        for j in 2..m2 - 2 {
            let mut members: Vec<(usize, usize)> = (0..5).map(|r| (i + r - 2, j)).collect();
            members.extend((0..5).filter(|&r| r != 2).map(|r| (i, j + r - 2)));
            let profile: Vec<f64> = (0..grid.len())
                .map(|t| {
                    let l = members.len() as f64;
                    let mean = members
                        .iter()
                        .fold(Sym2::default(), |acc, &(a, b)| acc.add(curves[a][b][t]))
                        .scale(1.0 / l);
                    let ss: f64 = members
                        .iter()
                        .map(|&(a, b)| curves[a][b][t].sub(mean).frobenius_sq())
                        .sum();
                    (ss / (l - 1.0)).sqrt()
                })
                .collect();
            let value = integrate_unit(grid, &profile);
            ise[i][j] = Some(value);
            if best.is_none_or(|(v, _, _)| value < v) {
                best = Some((value, i, j));
            }
        }
    }
    let (_, i, j) = best.ok_or_else(|| Error::Tuning("no interior (m, tau) pair".into()))?;
    Ok(MinVolResult {
        m_grid: m_grid.to_vec(),
        tau_grid: tau_grid.to_vec(),
        ise,
        m: m_grid[i],
        tau: tau_grid[j],
    })
}

/// Trapezoid rule over `[0, 1]`, extending the integrand flat beyond the grid ends.
fn integrate_unit(grid: &[f64], f: &[f64]) -> f64 {
    let mut total = grid[0] * f[0];
    for w in 0..grid.len() - 1 {
        total += 0.5 * (f[w] + f[w + 1]) * (grid[w + 1] - grid[w]);
    }
    total + (1.0 - grid[grid.len() - 1]) * f[f.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    const EPA: Kernel = Kernel::Epanechnikov;

    #[test]
    fn default_grid_is_015_to_045() {
        let g = default_bandwidth_grid();
        assert_eq!(g.len(), 31);
        assert_eq!(g[0], 0.15);
        assert_eq!(g[30], 0.45);
        assert!((g[1] - g[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn noise_free_line_prefers_largest_bandwidth() {
        let y: Vec<f64> = (1..=200).map(|i| 0.5 + 3.0 * i as f64 / 200.0).collect();
        let r = gcv_bandwidth(&y, &default_bandwidth_grid(), EPA).unwrap();
        assert_eq!(r.bandwidth, 0.45);
        assert!(r.scores.iter().flatten().all(|s| *s < 1e-20));
    }

    #[test]
    fn gcv_invariant_to_constant_shift() {
        let y: Vec<f64> = (0..300).map(|i| ((i * 7919) % 37) as f64 / 10.0).collect();
        let z: Vec<f64> = y.iter().map(|v| v + 5.0).collect();
        for b in [0.15, 0.3, 0.45] {
            let a = gcv_score(&y, b, EPA).unwrap();
            let c = gcv_score(&z, b, EPA).unwrap();
            assert!((a - c).abs() < 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn gcv_u_shape_interior_minimum() {
        let grid: Vec<f64> = (2..=45).map(|i| i as f64 / 100.0).collect();
        let n = 400;
        let mut inside = 0;
        for seed in 0..100u64 {
            let mut r = rng::substream(seed, 99);
            let y: Vec<f64> = (1..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    let z: f64 = StandardNormal.sample(&mut r);
                    (4.0 * std::f64::consts::PI * t).sin() + 0.5 * z
                })
                .collect();
            let res = gcv_bandwidth(&y, &grid, EPA).unwrap();
            if res.bandwidth > grid[0] && res.bandwidth < grid[grid.len() - 1] {
                inside += 1;
            }
        }
        assert!(inside >= 90, "{inside}");
    }

    #[test]
    fn all_singular_is_tuning_failure() {
        let y = vec![1.0; 6];
        assert!(matches!(
            gcv_bandwidth(&y, &[0.1, 0.2], EPA),
            Err(Error::Tuning(_))
        ));
    }

    #[test]
    fn default_m_grid_shape() {
        let g = default_m_grid(400);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 4);
        assert_eq!(g[6], 15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    fn noise_pair(n: usize, seed: u64, phi: f64) -> ResidualPair {
        let mut r = rng::substream(seed, 5);
        let mut prev = [0.0f64; 2];
        let values = (0..n + 200)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut r);
                let b: f64 = StandardNormal.sample(&mut r);
                prev = [phi * prev[0] + a, phi * prev[1] + b];
                prev
            })
            .skip(200)
            .collect();
        ResidualPair {
            h: 2,
            k: 1,
            bandwidth: 0.2,
            values,
        }
    }

    #[test]
    fn min_volatility_is_deterministic_and_order_free() {
        let res = noise_pair(1500, 3, 0.0);
        let m = default_m_grid(1500);
        let tau = default_tau_grid();
        let a = min_volatility(&res, &m, &tau, EPA).unwrap();
        let b = min_volatility(&res, &m, &tau, EPA).unwrap();
        assert_eq!(a, b);
        let mut m_rev = m.clone();
        m_rev.reverse();
        let tau_perm = vec![0.25, 0.1, 0.3, 0.2, 0.15];
        let c = min_volatility(&res, &m_rev, &tau_perm, EPA).unwrap();
        assert_eq!((a.m, a.tau), (c.m, c.tau));
        let best = a
            .ise
            .iter()
            .flatten()
            .flatten()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let i = a.m_grid.iter().position(|&x| x == a.m).unwrap();
        let j = a.tau_grid.iter().position(|&x| x == a.tau).unwrap();
        assert_eq!(a.ise[i][j], Some(best));
    }

    #[test]
    fn persistent_residuals_need_larger_blocks() {
        let n = 5000;
        let m = vec![1, 2, 3, 5, 8, 12, 18, 27, 40];
        let tau = default_tau_grid();
        let mut larger = 0;
        for seed in 0..50u64 {
            let iid = min_volatility(&noise_pair(n, seed, 0.0), &m, &tau, EPA).unwrap();
            let ar = min_volatility(&noise_pair(n, seed, 0.8), &m, &tau, EPA).unwrap();
            if ar.m > iid.m {
                larger += 1;
            }
        }
        assert!(larger >= 40, "{larger}");
    }

    #[test]
    fn perturbed_neighbourhood_is_never_selected() {
        let (m1, m2) = (9, 9);
        let m_grid: Vec<usize> = (1..=m1).collect();
        let tau_grid: Vec<f64> = (0..m2).map(|j| 0.05 + 0.03 * j as f64).collect();
        let grid: Vec<f64> = (1..=50).map(|i| i as f64 / 50.0).collect();
        let target = (4usize, 4usize);
        for seed in 0..20u64 {
            let mut r = rng::substream(seed, 17);
            let mut curves: Vec<Vec<Vec<Sym2>>> = (0..m1)
                .map(|_| {
                    (0..m2)
                        .map(|_| {
                            (0..grid.len())
                                .map(|_| {
                                    let z: f64 = StandardNormal.sample(&mut r);
                                    Sym2::new(1.0 + 0.1 * z, 0.0, 1.0)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let mut sign = 1.0;
            for r in 0..5 {
                for (a, b) in [(target.0 + r - 2, target.1), (target.0, target.1 + r - 2)] {
                    for s in curves[a][b].iter_mut() {
                        s.xx += 5.0 * sign;
                    }
                    sign = -sign;
                }
            }
            let out = select_min_volatility(&m_grid, &tau_grid, &curves, &grid).unwrap();
            assert_ne!((out.m, out.tau), (m_grid[target.0], tau_grid[target.1]));
        }
    }

    #[test]
    fn grids_too_small() {
        let res = noise_pair(500, 1, 0.0);
        assert!(matches!(
            min_volatility(&res, &[2, 3, 4, 5], &default_tau_grid(), EPA),
            Err(Error::Config(_))
        ));
    }
}
