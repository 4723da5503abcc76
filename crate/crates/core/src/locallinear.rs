//! Local linear kernel regression on the equispaced design `t_i = i/n`.
//!
//! For an evaluation point `t` and bandwidth `b` the fit is the intercept of
//! the kernel-weighted least-squares line through `(t_i, y_i)`, written in
//! closed form as `sum_i w_i(t) y_i` with
//!
//! ```text
//! w_i(t) = K((t_i - t)/b) [S2 - (t_i - t) S1] / (S2 S0 - S1^2),
//! Sj     = sum_i (t_i - t)^j K((t_i - t)/b).
//! ```
//!
//! Sums are taken in the scaled coordinate `x_i = (t_i - t)/b`, which keeps
//! every term in `[-1, 1]`, and accumulated with Neumaier compensation.
//! Windows are located by index arithmetic, so a single evaluation costs
//! `O(nb)`.

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Minimum number of design points with positive kernel weight.
pub const MIN_WINDOW_POINTS: usize = 4;

const DET_TOL: f64 = 1e-14;
const GRID_EPS: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::default();
    for x in it {
        s.add(x);
    }
    s.value()
}

/// Design point `t_i` for the 0-based index `i` of a length-`n` series.
#[inline]
pub fn design_point(i: usize, n: usize) -> f64 {
    (i + 1) as f64 / n as f64
}

/// The full design grid `i/n`, `i = 1..=n`.
pub fn data_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| design_point(i, n)).collect()
}

/// Design points of a length-`n` series lying in `[b, 1 - b]`.
pub fn interior_grid(n: usize, b: f64) -> Vec<f64> {
    data_grid(n)
        .into_iter()
        .filter(|&t| in_interior(t, b))
        .collect()
}

/// Whether `t` lies in `[b, 1 - b]` (with a small tolerance for grid round-off).
#[inline]
pub fn in_interior(t: f64, b: f64) -> bool {
    t >= b - GRID_EPS && t <= 1.0 - b + GRID_EPS
}

pub fn check_bandwidth(b: f64) -> Result<()> {
    if b.is_finite() && b > 0.0 && b < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(b))
    }
}

/// Index range `[lo, hi)` (0-based) of design points within `b` of `t`.
#[inline]
fn window(n: usize, t: f64, b: f64) -> (usize, usize) {
    let nf = n as f64;
    // 1-based indices i with |i/n - t| <= b; one index of slack on each side,
    // the kernel vanishes outside its support anyway.
    let lo1 = ((t - b) * nf).floor().max(1.0) as usize;
    let hi1 = (((t + b) * nf).ceil().min(nf)).max(0.0) as usize;
    if hi1 < lo1 {
        return (0, 0);
    }
    (lo1 - 1, hi1)
}

/// Kernel values and normalized design moments of one local window.
struct LocalDesign {
    lo: usize,
    x: Vec<f64>,
    k: Vec<f64>,
    q0: f64,
    q1: f64,
    q2: f64,
    det: f64,
}

impl LocalDesign {
    fn new(n: usize, t: f64, b: f64, kernel: Kernel) -> Result<Self> {
        let (lo, hi) = window(n, t, b);
        let mut x = Vec::with_capacity(hi - lo);
        let mut k = Vec::with_capacity(hi - lo);
        let (mut s0, mut s1, mut s2) = (
            CompensatedSum::default(),
            CompensatedSum::default(),
            CompensatedSum::default(),
        );
        let mut positive = 0usize;
        for i in lo..hi {
            let xi = (design_point(i, n) - t) / b;
            let ki = kernel.value(xi);
            if ki > 0.0 {
                positive += 1;
            }
            s0.add(ki);
            s1.add(ki * xi);
            s2.add(ki * xi * xi);
            x.push(xi);
            k.push(ki);
        }
        // Normalize by nb so the determinant is O(1) whatever n and b are.
        let scale = n as f64 * b;
        let (q0, q1, q2) = (s0.value() / scale, s1.value() / scale, s2.value() / scale);
        let det = q0 * q2 - q1 * q1;
        if positive < MIN_WINDOW_POINTS || !(det > DET_TOL) {
            return Err(Error::SingularDesign { t });
        }
        Ok(LocalDesign {
            lo,
            x,
            k,
            q0: q0 * scale,
            q1: q1 * scale,
            q2: q2 * scale,
            det: det * scale * scale,
        })
    }

    #[inline]
    fn weight(&self, j: usize) -> f64 {
        self.k[j] * (self.q2 - self.x[j] * self.q1) / self.det
    }
}

/// Local linear weights at a single evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub t: f64,
    pub bandwidth: f64,
    /// 0-based index of the first entry of `weights`.
    pub lo: usize,
    pub weights: Vec<f64>,
}

impl WeightSet {
    /// 0-based index range `[lo, hi)` covered by `weights`.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.lo..self.lo + self.weights.len()
    }

    /// Weight of observation `i` (0-based); zero outside the window.
    pub fn get(&self, i: usize) -> f64 {
        if self.range().contains(&i) {
            self.weights[i - self.lo]
        } else {
            0.0
        }
    }

    /// `sum_i w_i data_i`.
    pub fn apply(&self, data: &[f64]) -> f64 {
        let mut s = CompensatedSum::default();
        for (w, y) in self.weights.iter().zip(&data[self.range()]) {
            s.add(w * y);
        }
        s.value()
    }

    /// Uncompensated dot product, for hot Monte-Carlo loops.
    #[inline]
    pub fn apply_fast(&self, data: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&data[self.range()])
            .map(|(w, y)| w * y)
            .sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        compensated_sum(self.weights.iter().map(|w| w * w))
    }
}

/// Closed-form local linear weights for a length-`n` design at `t`.
pub fn weights(n: usize, t: f64, b: f64, kernel: Kernel) -> Result<WeightSet> {
    check_bandwidth(b)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config(format!(
            "evaluation point {t} outside [0, 1]"
        )));
    }
    let design = LocalDesign::new(n, t, b, kernel)?;
    let mut w: Vec<f64> = (0..design.x.len()).map(|j| design.weight(j)).collect();
    let mut lo = design.lo;
    // Trim the zero-kernel slack at both ends.
    let lead = w.iter().take_while(|v| **v == 0.0).count();
    w.drain(..lead);
    lo += lead;
    while w.last() == Some(&0.0) {
        w.pop();
    }
    Ok(WeightSet {
        t,
        bandwidth: b,
        lo,
        weights: w,
    })
}

/// Weight sets for every point of `grid`.
pub fn weight_rows(n: usize, grid: &[f64], b: f64, kernel: Kernel) -> Result<Vec<WeightSet>> {
    grid.iter().map(|&t| weights(n, t, b, kernel)).collect()
}

/// A real function tabulated on an evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveOnGrid {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// First derivative estimates, when the producer provides them.
    pub derivative: Option<Vec<f64>>,
}

impl CurveOnGrid {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Self {
        CurveOnGrid {
            grid,
            values,
            derivative: None,
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Pointwise map of the values, keeping the grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CurveOnGrid {
        CurveOnGrid::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Restriction to the grid points in `[b, 1 - b]`.
    pub fn restrict_interior(&self, b: f64) -> CurveOnGrid {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| in_interior(self.grid[i], b))
            .collect();
        CurveOnGrid {
            grid: keep.iter().map(|&i| self.grid[i]).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
            derivative: self
                .derivative
                .as_ref()
                .map(|d| keep.iter().map(|&i| d[i]).collect()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() != self.values.len() {
            return Err(Error::Alignment("grid and values differ in length".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Alignment("grid not strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite curve value".into()));
        }
        Ok(())
    }
}

/// Local linear fit of `data` (on `i/n`) evaluated on `grid`, with slopes.
pub fn fit_curve(data: &[f64], b: f64, kernel: Kernel, grid: &[f64]) -> Result<CurveOnGrid> {
    check_bandwidth(b)?;
    let n = data.len();
    let mut values = Vec::with_capacity(grid.len());
    let mut slopes = Vec::with_capacity(grid.len());
    for &t in grid {
        let d = LocalDesign::new(n, t, b, kernel)?;
        let (mut r0, mut r1) = (CompensatedSum::default(), CompensatedSum::default());
        for (j, y) in data[d.lo..d.lo + d.x.len()].iter().enumerate() {
            r0.add(d.k[j] * y);
            r1.add(d.k[j] * d.x[j] * y);
        }
        let (r0, r1) = (r0.value(), r1.value());
        values.push((d.q2 * r0 - d.q1 * r1) / d.det);
        // Second component of the 2x2 solve is b * slope in scaled units.
        slopes.push((d.q0 * r1 - d.q1 * r0) / d.det / b);
    }
    Ok(CurveOnGrid {
        grid: grid.to_vec(),
        values,
        derivative: Some(slopes),
    })
}

/// Weights shared by every design point whose kernel window lies inside the
/// sample, indexed by offset `-reach..=reach`.
struct InteriorTemplate {
    reach: usize,
    weights: Vec<f64>,
}

impl InteriorTemplate {
    fn new(n: usize, b: f64, kernel: Kernel) -> Option<Self> {
        let nb = n as f64 * b;
        let reach = nb.floor() as usize;
        if 2 * reach + 1 > n {
            return None;
        }
        let x: Vec<f64> = (0..=2 * reach)
            .map(|j| (j as f64 - reach as f64) / nb)
            .collect();
        let k: Vec<f64> = x.iter().map(|&v| kernel.value(v)).collect();
        let q0 = compensated_sum(k.iter().cloned()) / nb;
        let q1 = compensated_sum(k.iter().zip(&x).map(|(a, v)| a * v)) / nb;
        let q2 = compensated_sum(k.iter().zip(&x).map(|(a, v)| a * v * v)) / nb;
        let det = q0 * q2 - q1 * q1;
        if k.iter().filter(|v| **v > 0.0).count() < MIN_WINDOW_POINTS || !(det > DET_TOL) {
            return None;
        }
        let weights = k
            .iter()
            .zip(&x)
            .map(|(a, v)| a * (q2 - v * q1) / (det * nb))
            .collect();
        Some(InteriorTemplate { reach, weights })
    }

    fn covers(&self, i: usize, n: usize) -> bool {
        i >= self.reach && i + self.reach < n
    }
}

/// Fitted values at the design points themselves (the hat-matrix image of `data`).
pub fn fitted_values(data: &[f64], b: f64, kernel: Kernel) -> Result<Vec<f64>> {
    Ok(fit_with_trace(data, b, kernel)?.0)
}

/// Fitted values at the design points together with the hat-matrix trace.
pub fn fit_with_trace(data: &[f64], b: f64, kernel: Kernel) -> Result<(Vec<f64>, f64)> {
    check_bandwidth(b)?;
    let n = data.len();
    let template = InteriorTemplate::new(n, b, kernel);
    let mut trace = CompensatedSum::default();
    let mut interior = 0usize;
    let fitted = (0..n)
        .map(|i| {
            if let Some(tp) = template.as_ref().filter(|tp| tp.covers(i, n)) {
                interior += 1;
                let win = &data[i - tp.reach..=i + tp.reach];
                return Ok(win.iter().zip(&tp.weights).map(|(y, w)| y * w).sum());
            }
            let t = design_point(i, n);
            let d = LocalDesign::new(n, t, b, kernel)?;
            trace.add(kernel.value(0.0) * d.q2 / d.det);
            let (mut r0, mut r1) = (0.0, 0.0);
            for (j, y) in data[d.lo..d.lo + d.x.len()].iter().enumerate() {
                r0 += d.k[j] * y;
                r1 += d.k[j] * d.x[j] * y;
            }
            Ok((d.q2 * r0 - d.q1 * r1) / d.det)
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(tp) = template {
        trace.add(interior as f64 * tp.weights[tp.reach]);
    }
    Ok((fitted, trace.value()))
}

/// Trace of the `n x n` smoother matrix, without materializing it.
pub fn hat_trace(n: usize, b: f64, kernel: Kernel) -> Result<f64> {
    check_bandwidth(b)?;
    let template = InteriorTemplate::new(n, b, kernel);
    let mut s = CompensatedSum::default();
    let mut interior = 0usize;
    for i in 0..n {
        if template.as_ref().is_some_and(|tp| tp.covers(i, n)) {
            interior += 1;
            continue;
        }
        let t = design_point(i, n);
        let d = LocalDesign::new(n, t, b, kernel)?;
        s.add(kernel.value(0.0) * d.q2 / d.det);
    }
    if let Some(tp) = template {
        s.add(interior as f64 * tp.weights[tp.reach]);
    }
    Ok(s.value())
}
