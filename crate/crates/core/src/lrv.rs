//! Time-varying long-run covariance of the difference-series errors.
//!
//! Residual pairs `e_i = (e_i^h, e_i^k)` are summed over blocks
//! `Q_i = sum_{|j|<=m} e_{i+j}`, turned into rank-one matrices
//! `N_i = Q_i Q_i^T / (block length)` and smoothed in time with
//! normalized kernel weights of bandwidth `tau`. Each estimate is a convex
//! combination of rank-one PSD matrices, hence symmetric PSD.

use crate::diffseries::difference;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::locallinear::{self, design_point, CurveOnGrid};
use crate::procgen::TimeSeries;

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn outer(v: [f64; 2]) -> Self {
        Sym2::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    pub fn scale(self, c: f64) -> Self {
        Sym2::new(self.xx * c, self.xy * c, self.yy * c)
    }

    pub fn add(self, o: Sym2) -> Self {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(self, o: Sym2) -> Self {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    /// Squared Frobenius norm (off-diagonal counted twice).
    pub fn frobenius_sq(self) -> f64 {
        self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy
    }

    /// Largest absolute entry.
    pub fn max_abs(self) -> f64 {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }

    /// `v^T S v`.
    pub fn quad(self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    pub fn eigenvalues(self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let d = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mean - d, mean + d)
    }
}

/// Residuals of the two difference series entering `gamma_k`, aligned on
/// the first observation of each difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair {
    pub h: usize,
    pub k: usize,
    pub bandwidth: f64,
    /// `(e^h_j, e^k_j)`, `j = 1..N-h`, on the grid `j/(N-h)`.
    pub values: Vec<[f64; 2]>,
}

impl ResidualPair {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> ResidualPair {
        ResidualPair {
            values: self.values.iter().map(|[a, b]| [a * c, b * c]).collect(),
            ..self.clone()
        }
    }
}

/// `e^h_j = rho^h_j - beta_h(t)`, `e^k_j = rho^k_j - beta_k(t)` with both fits
/// at bandwidth `b`. `k == h` yields the pair used for the variance band,
/// whose two components coincide.
pub fn residuals(
    y: &TimeSeries,
    k: usize,
    h: usize,
    b: f64,
    kernel: Kernel,
) -> Result<ResidualPair> {
    if k == 0 || k > h {
        return Err(Error::InvalidLag { lag: k, len: h });
    }
    let rho_h = difference(y, h)?;
    let rho_k = difference(y, k)?;
    let mut pair = residuals_from_series(&rho_h.values, &rho_k.values, b, kernel)?;
    pair.h = h;
    pair.k = k;
    Ok(pair)
}

/// Residual pair from two difference series given directly. The second
/// series must be at least as long as the first; each is fitted on its own
/// design grid.
pub fn residuals_from_series(
    rho_h: &[f64],
    rho_k: &[f64],
    b: f64,
    kernel: Kernel,
) -> Result<ResidualPair> {
    if rho_k.len() < rho_h.len() {
        return Err(Error::Alignment(
            "lag-k series shorter than lag-h series".into(),
        ));
    }
    let fit_h = locallinear::fitted_values(rho_h, b, kernel)?;
    let fit_k = if rho_k.len() == rho_h.len() && rho_k == rho_h {
        fit_h.clone()
    } else {
        locallinear::fitted_values(rho_k, b, kernel)?
    };
    let values = (0..rho_h.len())
        .map(|j| [rho_h[j] - fit_h[j], rho_k[j] - fit_k[j]])
        .collect();
    Ok(ResidualPair {
        h: 0,
        k: 0,
        bandwidth: b,
        values,
    })
}

/// `Sigma_hat(t)` on a grid, with the tuning pair that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRunCovCurve {
    pub grid: Vec<f64>,
    pub matrices: Vec<Sym2>,
    pub m: usize,
    pub tau: f64,
}

/// Block outer products `N_i`, edge blocks renormalized by their true length.
pub fn block_products(res: &ResidualPair, m: usize) -> Vec<Sym2> {
    let n = res.len();
    let mut prefix = vec![[0.0f64; 2]; n + 1];
    for (i, v) in res.values.iter().enumerate() {
        prefix[i + 1] = [prefix[i][0] + v[0], prefix[i][1] + v[1]];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(m);
            let hi = (i + m + 1).min(n);
            let q = [prefix[hi][0] - prefix[lo][0], prefix[hi][1] - prefix[lo][1]];
            Sym2::outer(q).scale(1.0 / (hi - lo) as f64)
        })
        .collect()
}

pub fn check_lrv_params(n: usize, m: usize, tau: f64) -> Result<()> {
    if m == 0 || 4 * m > n {
        return Err(Error::Config(format!(
            "block half-width m = {m} outside [1, n/4], n = {n}"
        )));
    }
    if !(tau > 0.0 && tau < 0.5) {
        return Err(Error::InvalidBandwidth(tau));
    }
    Ok(())
}

/// Kernel-smoothed block products, `Sigma_hat(t) = sum_i w(t,i) N_i` with
/// `w(t,i) = K((t_i - t)/tau) / sum_l K((t_l - t)/tau)`.
pub fn lrv_curve(
    res: &ResidualPair,
    m: usize,
    tau: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<LongRunCovCurve> {
    let n = res.len();
    check_lrv_params(n, m, tau)?;
    let blocks = block_products(res, m);
    let matrices = smooth_blocks(&blocks, tau, kernel, grid)?;
    Ok(LongRunCovCurve {
        grid: grid.to_vec(),
        matrices,
        m,
        tau,
    })
}

pub(crate) fn smooth_blocks(
    blocks: &[Sym2],
    tau: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<Vec<Sym2>> {
    let n = blocks.len();
    let nf = n as f64;
    grid.iter()
        .map(|&t| {
            let lo = ((t - tau) * nf).floor().max(1.0) as usize - 1;
            let hi = ((t + tau) * nf).ceil().min(nf).max(0.0) as usize;
            let mut wsum = 0.0;
            let mut acc = Sym2::default();
            for (i, blk) in blocks.iter().enumerate().take(hi).skip(lo) {
                let w = kernel.value((design_point(i, n) - t) / tau);
                if w > 0.0 {
                    wsum += w;
                    acc = acc.add(blk.scale(w));
                }
            }
            if !(wsum > 0.0) {
                return Err(Error::SingularDesign { t });
            }
            Ok(acc.scale(1.0 / wsum))
        })
        .collect()
}

/// Default block half-width `ceil(n^{1/3})`.
pub fn default_block(n: usize) -> usize {
    ((n as f64).cbrt().ceil() as usize).max(1)
}

/// Default smoothing bandwidth for the long-run covariance.
pub const DEFAULT_TAU: f64 = 0.2;

/// Pointwise `sigma_h(t)` and `sigma_{C,k}(t)` with `C = (1, -1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaCurves {
    pub sigma_h: CurveOnGrid,
    pub sigma_c: CurveOnGrid,
    /// Set when a (numerically) negative quantity was clamped to zero.
    pub clamped: bool,
}

pub fn sigma_functionals(lrv: &LongRunCovCurve) -> SigmaCurves {
    let mut clamped = false;
    let mut root = |v: f64| {
        if v <= 0.0 {
            clamped |= v < 0.0;
            0.0
        } else {
            v.sqrt()
        }
    };
    let h: Vec<f64> = lrv.matrices.iter().map(|s| root(s.xx)).collect();
    let c: Vec<f64> = lrv
        .matrices
        .iter()
        .map(|s| root(s.quad([1.0, -1.0])))
        .collect();
    SigmaCurves {
        sigma_h: CurveOnGrid::new(lrv.grid.clone(), h),
        sigma_c: CurveOnGrid::new(lrv.grid.clone(), c),
        clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procgen::{generate, model_presets, Preset};

    fn pair(values: Vec<[f64; 2]>) -> ResidualPair {
        ResidualPair {
            h: 2,
            k: 1,
            bandwidth: 0.2,
            values,
        }
    }

    #[test]
    fn alternating_hand_example() {
        let c = 1.5;
        let res = pair(
            (1..=8)
                .map(|i| {
                    let v = if i % 2 == 0 { c } else { -c };
                    [v, v]
                })
                .collect(),
        );
        let blocks = block_products(&res, 1);
        // Edge blocks hold two opposite terms and cancel.
        assert_eq!(blocks[0], Sym2::default());
        assert_eq!(blocks[7], Sym2::default());
        for b in &blocks[1..7] {
            let v = c * c / 3.0;
            assert!(
                (b.xx - v).abs() < 1e-15 && (b.xy - v).abs() < 1e-15 && (b.yy - v).abs() < 1e-15
            );
        }
    }

    #[test]
    fn smoothing_weights_sum_to_one() {
        // Constant block products pass through unchanged.
        let blocks = vec![Sym2::new(2.0, 0.5, 1.0); 300];
        let grid = locallinear::interior_grid(300, 0.2);
        for s in smooth_blocks(&blocks, 0.2, Kernel::Epanechnikov, &grid).unwrap() {
            assert!((s.xx - 2.0).abs() < 1e-12 && (s.xy - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn psd_and_scale_equivariance() {
        let res = pair(
            (0..500)
                .map(|i| {
                    let a = ((i * 7919) % 101) as f64 / 50.0 - 1.0;
                    let b = ((i * 104_729) % 97) as f64 / 48.0 - 1.0;
                    [a, 0.3 * a + b]
                })
                .collect(),
        );
        let grid = locallinear::data_grid(500);
        let curve = lrv_curve(&res, 6, 0.15, Kernel::Epanechnikov, &grid).unwrap();
        for s in &curve.matrices {
            let (lo, _) = s.eigenvalues();
            assert!(lo >= -1e-10);
            assert!(s.quad([1.0, -1.0]) >= 0.0);
        }
        let scaled = lrv_curve(&res.scaled(3.0), 6, 0.15, Kernel::Epanechnikov, &grid).unwrap();
        for (a, b) in curve.matrices.iter().zip(&scaled.matrices) {
            assert!((b.xx - 9.0 * a.xx).abs() <= 1e-12 * b.xx.abs().max(1.0));
            assert!((b.xy - 9.0 * a.xy).abs() <= 1e-12 * b.xy.abs().max(1.0));
        }
    }

    #[test]
    fn sigma_functionals_arithmetic() {
        let lrv = LongRunCovCurve {
            grid: vec![0.3, 0.6],
            matrices: vec![Sym2::IDENTITY, Sym2::new(4.0, 1.0, 1.0)],
            m: 1,
            tau: 0.2,
        };
        let s = sigma_functionals(&lrv);
        assert_eq!(s.sigma_h.values, vec![1.0, 2.0]);
        assert!((s.sigma_c.values[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.sigma_c.values[1] - 3f64.sqrt()).abs() < 1e-15);
        assert!(!s.clamped);
        let neg = LongRunCovCurve {
            matrices: vec![Sym2::new(-1e-18, 0.0, 0.0), Sym2::IDENTITY],
            ..lrv
        };
        let s = sigma_functionals(&neg);
        assert_eq!(s.sigma_h.values[0], 0.0);
        assert!(s.clamped);
    }

    #[test]
    fn noise_free_residuals_vanish() {
        let y = TimeSeries::new((1..=300).map(|i| 2.0 + 5.0 * i as f64 / 300.0).collect()).unwrap();
        let r = residuals(&y, 1, 3, 0.2, Kernel::Epanechnikov).unwrap();
        assert!(r
            .values
            .iter()
            .all(|v| v[0].abs() < 1e-12 && v[1].abs() < 1e-12));
        let flat = TimeSeries::new(vec![1.0; 200]).unwrap();
        let r = residuals(&flat, 1, 4, 0.2, Kernel::Epanechnikov).unwrap();
        assert!(r.values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
    }

    #[test]
    fn residuals_absorb_linear_trends() {
        let n = 400;
        let rh: Vec<f64> = (0..n).map(|i| ((i * 7919) % 23) as f64 / 7.0).collect();
        let rk: Vec<f64> = (0..n + 2).map(|i| ((i * 31) % 19) as f64 / 5.0).collect();
        let base = residuals_from_series(&rh, &rk, 0.2, Kernel::Epanechnikov).unwrap();
        let th: Vec<f64> = rh
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.7 + 2.0 * (i + 1) as f64 / n as f64)
            .collect();
        let tk: Vec<f64> = rk
            .iter()
            .enumerate()
            .map(|(i, v)| v - 1.3 + 0.5 * (i + 1) as f64 / (n + 2) as f64)
            .collect();
        let moved = residuals_from_series(&th, &tk, 0.2, Kernel::Epanechnikov).unwrap();
        for (a, b) in base.values.iter().zip(&moved.values) {
            assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn model1_sigma_is_positive_and_smooth() {
        let (mean, err) = model_presets(Preset::Model1);
        let y = generate(&mean, &err, 800, 2).unwrap();
        let r = residuals(&y, 1, 3, 0.2, Kernel::Epanechnikov).unwrap();
        let grid = locallinear::interior_grid(r.len(), 0.2);
        let lrv = lrv_curve(&r, default_block(r.len()), 0.2, Kernel::Epanechnikov, &grid).unwrap();
        let s = sigma_functionals(&lrv);
        let v = &s.sigma_h.values;
        let top = v.iter().cloned().fold(0.0, f64::max);
        let dt = grid[1] - grid[0];
        assert!(v.iter().all(|x| *x > 0.0));
        for w in v.windows(2) {
            assert!((w[1] - w[0]).abs() < 5.0 * dt * top);
        }
    }

    #[test]
    fn invalid_params() {
        let res = pair(vec![[0.0, 0.0]; 40]);
        assert!(lrv_curve(&res, 0, 0.2, Kernel::Epanechnikov, &[0.5]).is_err());
        assert!(lrv_curve(&res, 11, 0.2, Kernel::Epanechnikov, &[0.5]).is_err());
        assert!(lrv_curve(&res, 2, 0.6, Kernel::Epanechnikov, &[0.5]).is_err());
    }
}
