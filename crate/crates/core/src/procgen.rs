//! Synthetic locally stationary series with piecewise-smooth trends.
//!
//! A series is `y_i = mu(i/n) + x_i` where `mu` is piecewise affine with
//! abrupt jumps and `x_i = sum_j a_j(i/n) zeta_{i-j}` is a linear process
//! whose coefficients vary smoothly with rescaled time.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Default bound on `sup_t |a_J(t)|` for truncating infinite linear processes.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// A polynomial in `t`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    pub fn affine(c0: f64, c1: f64) -> Self {
        Poly(vec![c0, c1])
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `sup_{t in [0,1]} |p(t)|`, on a fine grid.
    fn sup_abs(&self) -> f64 {
        (0..=1000)
            .map(|i| self.eval(i as f64 / 1000.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Piecewise trend `mu(t) = sum_j mu_j(t) 1{a_j <= t < a_{j+1}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSpec {
    breakpoints: Vec<f64>,
    pieces: Vec<Poly>,
}

impl MeanSpec {
    /// `pieces.len()` must be `breakpoints.len() + 1`; breakpoints strictly
    /// increasing inside `(0, 1)`.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Poly>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::Config(format!(
                "{} breakpoints need {} segment functions, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("breakpoints must lie in (0, 1)".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if pieces.iter().any(|p| p.0.iter().any(|c| !c.is_finite())) {
            return Err(Error::Config("non-finite segment coefficient".into()));
        }
        Ok(MeanSpec {
            breakpoints,
            pieces,
        })
    }

    pub fn zero() -> Self {
        MeanSpec {
            breakpoints: vec![],
            pieces: vec![Poly::constant(0.0)],
        }
    }

    /// Piecewise-constant trend with the given levels.
    pub fn piecewise_constant(breakpoints: Vec<f64>, levels: &[f64]) -> Result<Self> {
        MeanSpec::new(
            breakpoints,
            levels.iter().map(|&c| Poly::constant(c)).collect(),
        )
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    /// Index of the segment containing `t` (right-open intervals).
    pub fn segment(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&a| a <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.pieces[self.segment(t)].eval(t)
    }
}

/// Zero-mean locally stationary linear error process.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorModel {
    /// `x_i = sum_{j=first}^{truncation} r(t_i)^j zeta_{i-j}`.
    LinearLs {
        ratio: Poly,
        first: usize,
        truncation: usize,
        innovation_var: f64,
    },
    /// `x_i = sum_{j=0}^{2} a_j(t_i) zeta_{i-j}`.
    Ma2Ls {
        coefficients: [Poly; 3],
        innovation_var: f64,
    },
}

impl ErrorModel {
    /// Geometric linear process truncated at the smallest order meeting
    /// [`TRUNCATION_TOL`].
    pub fn linear(ratio: Poly, first: usize, innovation_var: f64) -> Result<Self> {
        let sup = ratio.sup_abs();
        if !(sup < 1.0) {
            return Err(Error::Config(format!(
                "coefficient ratio must stay below 1 in modulus, sup = {sup}"
            )));
        }
        let truncation = if sup == 0.0 {
            first
        } else {
            (TRUNCATION_TOL.ln() / sup.ln()).ceil().max(first as f64) as usize
        };
        let m = ErrorModel::LinearLs {
            ratio,
            first,
            truncation,
            innovation_var,
        };
        m.validate()?;
        Ok(m)
    }

    /// iid `N(0, var)` errors.
    pub fn white_noise(innovation_var: f64) -> Self {
        ErrorModel::Ma2Ls {
            coefficients: [
                Poly::constant(1.0),
                Poly::constant(0.0),
                Poly::constant(0.0),
            ],
            innovation_var,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.innovation_var() > 0.0 && self.innovation_var().is_finite()) {
            return Err(Error::Config("innovation variance must be positive".into()));
        }
        if let ErrorModel::LinearLs {
            ratio, truncation, ..
        } = self
        {
            let tail = ratio.sup_abs().powi(*truncation as i32);
            if !(tail < TRUNCATION_TOL) {
                return Err(Error::Config(format!(
                    "truncation order {truncation} leaves sup |a_J| = {tail:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn innovation_var(&self) -> f64 {
        match self {
            ErrorModel::LinearLs { innovation_var, .. }
            | ErrorModel::Ma2Ls { innovation_var, .. } => *innovation_var,
        }
    }

    /// Largest lag `j` with a (possibly) nonzero coefficient.
    pub fn max_lag(&self) -> usize {
        match self {
            ErrorModel::LinearLs { truncation, .. } => *truncation,
            ErrorModel::Ma2Ls { .. } => 2,
        }
    }

    /// `a_j(t)`; zero outside the support of the model.
    pub fn coefficient(&self, j: usize, t: f64) -> f64 {
        match self {
            ErrorModel::LinearLs {
                ratio,
                first,
                truncation,
                ..
            } => {
                if j < *first || j > *truncation {
                    0.0
                } else {
                    ratio.eval(t).powi(j as i32)
                }
            }
            ErrorModel::Ma2Ls { coefficients, .. } => {
                coefficients.get(j).map_or(0.0, |p| p.eval(t))
            }
        }
    }
}

/// Observations `y_1..y_n` on the implicit grid `t_i = i/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                len: values.len(),
                min: 2,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite observation at index {}",
                i + 1
            )));
        }
        Ok(TimeSeries { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Simulate `y_i = mu(i/n) + x_i`, deterministic in `seed`.
pub fn generate(mean: &MeanSpec, err: &ErrorModel, n: usize, seed: u64) -> Result<TimeSeries> {
    if n < 2 {
        return Err(Error::TooShort { len: n, min: 2 });
    }
    err.validate()?;
    let burn = err.max_lag();
    let sd = err.innovation_var().sqrt();
    let mut rng = rng::substream(seed, rng::label::SERIES);
    // zeta[s] holds the innovation with time index s + 1 - burn.
    let zeta: Vec<f64> = (0..n + burn)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    let mut coef = vec![0.0; burn + 1];
    let mut values = Vec::with_capacity(n);
    for i in 1..=n {
        let t = i as f64 / n as f64;
        for (j, c) in coef.iter_mut().enumerate() {
            *c = err.coefficient(j, t);
        }
        let s = i - 1 + burn;
        let x: f64 = coef.iter().enumerate().map(|(j, c)| c * zeta[s - j]).sum();
        if !x.is_finite() {
            return Err(Error::Numeric(format!("non-finite error value at i = {i}")));
        }
        values.push(mean.eval(t) + x);
    }
    TimeSeries::new(values)
}

/// Frozen-time lag-`k` autocovariance `var(zeta) sum_j a_j(t) a_{j+k}(t)`.
pub fn true_gamma(err: &ErrorModel, k: usize, t: f64) -> f64 {
    let top = err.max_lag();
    if k > top {
        return 0.0;
    }
    let s: f64 = (0..=top - k)
        .map(|j| err.coefficient(j, t) * err.coefficient(j + k, t))
        .sum();
    err.innovation_var() * s
}

/// The simulation designs used in the coverage study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Model1,
    Model2,
    Model3,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model1" => Ok(Preset::Model1),
            "model2" => Ok(Preset::Model2),
            "model3" => Ok(Preset::Model3),
            other => Err(Error::Config(format!("unknown model preset '{other}'"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Model1 => "model1",
            Preset::Model2 => "model2",
            Preset::Model3 => "model3",
        })
    }
}

/// Six change points, in groups around 1/6, 1/2 and 5/6.
pub fn preset_breakpoints() -> Vec<f64> {
    vec![
        1.0 / 6.0 - 1.0 / 36.0,
        1.0 / 6.0 + 1.0 / 36.0,
        3.0 / 6.0 - 2.0 / 36.0,
        3.0 / 6.0 + 2.0 / 36.0,
        5.0 / 6.0 - 3.0 / 36.0,
        5.0 / 6.0 + 3.0 / 36.0,
    ]
}

/// Model 3 innovation variance.
pub const MODEL3_INNOVATION_VAR: f64 = 0.3;

pub fn model_presets(name: Preset) -> (MeanSpec, ErrorModel) {
    let levels: &[f64] = match name {
        Preset::Model2 => &[0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        _ => &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
    };
    let mean = MeanSpec::piecewise_constant(preset_breakpoints(), levels)
        .expect("preset breakpoints are valid");
    let err = match name {
        Preset::Model1 | Preset::Model2 => {
            ErrorModel::linear(Poly::affine(0.0, 0.5), 1, 1.0).expect("preset error model is valid")
        }
        Preset::Model3 => ErrorModel::Ma2Ls {
            coefficients: [
                Poly::constant(1.0),
                Poly::affine(0.025, 0.5),
                Poly(vec![0.000625, 0.025, 0.25]),
            ],
            innovation_var: MODEL3_INNOVATION_VAR,
        },
    };
    (mean, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakpoints_validated() {
        assert!(MeanSpec::piecewise_constant(vec![0.3, 0.2], &[0.0, 1.0, 0.0]).is_err());
        assert!(MeanSpec::piecewise_constant(vec![0.0], &[0.0, 1.0]).is_err());
        assert!(MeanSpec::piecewise_constant(vec![0.5], &[0.0]).is_err());
        // The literal reading of the second group (3/36 +- 2/36) collides with
        // the first group and is rejected.
        let literal = vec![
            5.0 / 36.0,
            7.0 / 36.0,
            1.0 / 36.0,
            5.0 / 36.0,
            27.0 / 36.0,
            33.0 / 36.0,
        ];
        assert!(MeanSpec::piecewise_constant(literal, &[0.0; 7]).is_err());
    }

    #[test]
    fn segments_are_right_open() {
        let m = MeanSpec::piecewise_constant(vec![0.5], &[0.0, 1.0]).unwrap();
        assert_eq!(m.eval(0.4999), 0.0);
        assert_eq!(m.eval(0.5), 1.0);
        assert_eq!(m.eval(1.0), 1.0);
    }

    #[test]
    fn noise_free_series_is_zero() {
        let err = ErrorModel::Ma2Ls {
            coefficients: [
                Poly::constant(0.0),
                Poly::constant(0.0),
                Poly::constant(0.0),
            ],
            innovation_var: 1.0,
        };
        let y = generate(&MeanSpec::zero(), &err, 50, 3).unwrap();
        assert!(y.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn generation_is_deterministic_and_mean_injection_exact() {
        let (mean, err) = model_presets(Preset::Model1);
        let a = generate(&mean, &err, 300, 11).unwrap();
        let b = generate(&mean, &err, 300, 11).unwrap();
        assert_eq!(a, b);
        let z = generate(&MeanSpec::zero(), &err, 300, 11).unwrap();
        for (i, (ya, yz)) in a.values().iter().zip(z.values()).enumerate() {
            let t = (i + 1) as f64 / 300.0;
            assert!((ya - yz - mean.eval(t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn model1_segment_means() {
        let (mean, err) = model_presets(Preset::Model1);
        let n = 400;
        let y = generate(&mean, &err, n, 5).unwrap();
        let bps = mean.breakpoints();
        for (seg, level) in [(0usize, 0.0), (1, 1.0)] {
            let lo = if seg == 0 { 0.0 } else { bps[seg - 1] };
            let hi = bps[seg];
            let vals: Vec<f64> = (1..=n)
                .filter(|i| {
                    let t = *i as f64 / n as f64;
                    t >= lo && t < hi
                })
                .map(|i| y.values()[i - 1])
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            let se = (var / vals.len() as f64).sqrt();
            assert!((m - level).abs() < 3.0 * se.max(1e-3), "segment {seg}: {m}");
        }
    }

    #[test]
    fn model3_variance_near_end() {
        let (_, err) = model_presets(Preset::Model3);
        let n = 100_000;
        let y = generate(&MeanSpec::zero(), &err, n, 17).unwrap();
        let tail = &y.values()[n - 5000..];
        let m = tail.iter().sum::<f64>() / tail.len() as f64;
        let v = tail.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (tail.len() - 1) as f64;
        let target: f64 = 0.3 * (0..3).map(|j| err.coefficient(j, 1.0).powi(2)).sum::<f64>();
        assert!((v / target - 1.0).abs() < 0.05, "{v} vs {target}");
    }

    #[test]
    fn presets() {
        let (m1, e1) = model_presets(Preset::Model1);
        let (m2, _) = model_presets(Preset::Model2);
        let seg2 = (m1.breakpoints()[0] + m1.breakpoints()[1]) / 2.0;
        assert_eq!(m1.eval(seg2), 1.0);
        assert_eq!(m2.eval(seg2), 2.0);
        assert_eq!(m1.eval(0.01), 0.0);
        assert_eq!(m1.eval(0.3), 0.0);
        assert_eq!(m1.eval(0.5), 1.0);
        assert_eq!(e1.coefficient(0, 0.5), 0.0);
        assert_eq!(e1.max_lag(), 40);
        let (_, e3) = model_presets(Preset::Model3);
        for &t in &[0.0, 0.3, 1.0] {
            assert!((e3.coefficient(0, t) - 1.0).abs() < 1e-15);
            assert!((e3.coefficient(1, t) - (t + 0.05) / 2.0).abs() < 1e-15);
            assert!((e3.coefficient(2, t) - (t + 0.05f64).powi(2) / 4.0).abs() < 1e-15);
        }
        assert!("model4".parse::<Preset>().is_err());
    }

    #[test]
    fn model1_closed_forms() {
        let (_, e) = model_presets(Preset::Model1);
        for &t in &[0.1, 0.5, 0.9, 1.0] {
            let r = t / 2.0;
            let g0 = r * r / (1.0 - r * r);
            let g1 = r * r * r / (1.0 - r * r);
            assert!((true_gamma(&e, 0, t) - g0).abs() < 1e-12);
            assert!((true_gamma(&e, 1, t) - g1).abs() < 1e-12);
        }
        let (_, e3) = model_presets(Preset::Model3);
        assert_eq!(true_gamma(&e3, 3, 0.4), 0.0);
    }

    #[test]
    fn gamma_decay_is_dominated() {
        for p in [Preset::Model1, Preset::Model3] {
            let (_, e) = model_presets(p);
            for &t in &[0.25, 0.5, 0.75, 1.0] {
                // Constant fitted on the leading lags; the tail must stay under it.
                let c = (1..=5)
                    .map(|k| (k * k) as f64 * true_gamma(&e, k, t).abs())
                    .fold(0.0, f64::max);
                for k in 1..40 {
                    assert!(true_gamma(&e, k, t).abs() <= c / (k * k) as f64 + 1e-15);
                }
            }
        }
    }

    #[test]
    fn invalid_error_models() {
        assert!(ErrorModel::linear(Poly::affine(0.0, 1.2), 1, 1.0).is_err());
        assert!(ErrorModel::white_noise(0.0).validate().is_err());
        let short = ErrorModel::LinearLs {
            ratio: Poly::affine(0.0, 0.5),
            first: 1,
            truncation: 5,
            innovation_var: 1.0,
        };
        assert!(short.validate().is_err());
    }
}
