//! Monte-Carlo coverage study of the bands.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, ErrorCategory, Result};
use crate::pipeline::{self, EstimateOptions, Estimation, Resolved};
use crate::procgen::{self, model_presets, MeanSpec, Poly, Preset};
use crate::rng;
use crate::scb;

/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Mean function used when generating replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanKind {
    /// The preset's piecewise-constant mean.
    #[default]
    Preset,
    Zero,
    /// `2 t (1 - t)`, smooth and free of change points.
    Smooth,
}

impl MeanKind {
    pub fn name(self) -> &'static str {
        match self {
            MeanKind::Preset => "preset",
            MeanKind::Zero => "zero",
            MeanKind::Smooth => "smooth",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "preset" => Some(MeanKind::Preset),
            "zero" => Some(MeanKind::Zero),
            "smooth" => Some(MeanKind::Smooth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub preset: Preset,
    pub mean: MeanKind,
    pub n: usize,
    pub reps: usize,
    /// Estimation settings; `seed` is replaced per replication.
    pub options: EstimateOptions,
    /// Tune on the first replication only and reuse the values.
    pub fix_tuning: bool,
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(preset: Preset, n: usize, reps: usize) -> Self {
        StudyConfig {
            preset,
            mean: MeanKind::Preset,
            n,
            reps,
            options: EstimateOptions {
                band: pipeline::BandKind::Bootstrap { draws: 2000 },
                ..EstimateOptions::default()
            },
            fix_tuning: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.n < crate::MIN_SERIES_LEN {
            return Err(Error::Config(format!(
                "n = {} below the minimum {}",
                self.n,
                crate::MIN_SERIES_LEN
            )));
        }
        if self.options.bandwidth_grid.is_empty() {
            return Err(Error::Config("empty bandwidth grid".into()));
        }
        for &b in &self.options.bandwidth_grid {
            crate::locallinear::check_bandwidth(b)?;
        }
        Ok(())
    }

    /// Mean and error model used to generate replications.
    pub fn models(&self) -> (MeanSpec, procgen::ErrorModel) {
        models_for(self.preset, self.mean)
    }
}

/// Preset error model combined with the chosen mean function.
pub fn models_for(preset: Preset, kind: MeanKind) -> (MeanSpec, procgen::ErrorModel) {
    let (mean, err) = model_presets(preset);
    let mean = match kind {
        MeanKind::Preset => mean,
        MeanKind::Zero => MeanSpec::zero(),
        MeanKind::Smooth => {
            MeanSpec::new(vec![], vec![Poly(vec![0.0, 2.0, -2.0])]).expect("single smooth segment")
        }
    };
    (mean, err)
}

/// Seed of replication `r`.
pub fn replication_seed(root: u64, r: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(root, rng::label::REPLICATION), r as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagCoverage {
    pub lag: usize,
    pub covered: bool,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub h: Option<usize>,
    /// Empty when the replication failed.
    pub lags: Vec<LagCoverage>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSummary {
    pub lag: usize,
    pub covered: usize,
    pub valid: usize,
    pub coverage: f64,
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub naive: bool,
    pub targets: Vec<TargetSummary>,
    pub replications: Vec<Replication>,
    pub failures: usize,
    pub elapsed: Duration,
}

/// Difference-based coverage study.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run(cfg, false)
}

/// Same protocol with the detrend-then-smooth estimator.
pub fn run_naive_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run(cfg, true)
}

fn estimate_one(
    cfg: &StudyConfig,
    naive: bool,
    r: usize,
    fixed: Option<&Resolved>,
) -> Result<(u64, Estimation)> {
    let (mean, err) = cfg.models();
    let seed = replication_seed(cfg.seed, r);
    let y = procgen::generate(&mean, &err, cfg.n, seed)?;
    let opts = EstimateOptions {
        seed,
        ..cfg.options.clone()
    };
    let est = if naive {
        pipeline::estimate_naive_with(&y, &opts, fixed)?
    } else {
        pipeline::estimate_with(&y, &opts, fixed)?
    };
    Ok((seed, est))
}

fn score(cfg: &StudyConfig, est: &Estimation) -> Result<Vec<LagCoverage>> {
    let (_, err) = cfg.models();
    est.lags
        .iter()
        .map(|out| {
            let truth = out
                .band
                .grid()
                .iter()
                .map(|&t| procgen::true_gamma(&err, out.band.lag, t))
                .collect();
            let truth = crate::locallinear::CurveOnGrid::new(out.band.grid().to_vec(), truth);
            Ok(LagCoverage {
                lag: out.band.lag,
                covered: scb::coverage_check(&out.band, &truth)?,
                width: out.band.mean_width(),
            })
        })
        .collect()
}

fn run(cfg: &StudyConfig, naive: bool) -> Result<StudyReport> {
    cfg.validate()?;
    let start = Instant::now();
    let fixed = if cfg.fix_tuning {
        Some(estimate_one(cfg, naive, 0, None)?.1.resolved)
    } else {
        None
    };
    let replications: Vec<Replication> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let outcome = estimate_one(cfg, naive, r, fixed.as_ref())
                .and_then(|(seed, est)| Ok((seed, est.resolved.h, score(cfg, &est)?)));
            match outcome {
                Ok((seed, h, lags)) => Ok(Replication {
                    index: r,
                    seed,
                    h,
                    lags,
                    error: None,
                }),
                Err(e)
                    if matches!(e.category(), ErrorCategory::Numeric | ErrorCategory::Tuning) =>
                {
                    Ok(Replication {
                        index: r,
                        seed: replication_seed(cfg.seed, r),
                        h: None,
                        lags: Vec::new(),
                        error: Some(e.to_string()),
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let failures = replications.iter().filter(|r| r.error.is_some()).count();
    if failures as f64 > MAX_FAILURE_RATE * cfg.reps as f64 {
        let first = replications
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::Numeric(format!(
            "{failures} of {} replications failed (first: {first})",
            cfg.reps
        )));
    }
    let targets = cfg
        .options
        .lags
        .iter()
        .map(|&lag| {
            let hits: Vec<&LagCoverage> = replications
                .iter()
                .flat_map(|r| r.lags.iter().filter(move |l| l.lag == lag))
                .collect();
            let valid = hits.len();
            let covered = hits.iter().filter(|l| l.covered).count();
            let mean_width = hits.iter().map(|l| l.width).sum::<f64>() / valid.max(1) as f64;
            TargetSummary {
                lag,
                covered,
                valid,
                coverage: if valid == 0 {
                    0.0
                } else {
                    covered as f64 / valid as f64
                },
                mean_width,
            }
        })
        .collect();
    Ok(StudyReport {
        config: cfg.clone(),
        naive,
        targets,
        replications,
        failures,
        elapsed: start.elapsed(),
    })
}
