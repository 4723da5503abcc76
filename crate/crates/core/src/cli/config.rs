//! Run configuration and its flat `key=value` text form.
//!
//! Every command-line flag has a config key of the same name. Files may
//! contain blank lines and `#` comments; keys beginning with `resolved.`
//! and the `version` / `command` keys written into manifests are accepted
//! and ignored, so a manifest can be fed back as a config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::pipeline::{BandKind, EstimateOptions, LagRule, LrvRule};
use crate::procgen::Preset;
use crate::scb;
use crate::study::{MeanKind, StudyConfig};
use crate::tuning;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Study,
    NaiveStudy,
    Tune,
    LagSelect,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Study => "study",
            Command::NaiveStudy => "naive-study",
            Command::Tune => "tune",
            Command::LagSelect => "lag-select",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Command::Estimate,
            Command::Study,
            Command::NaiveStudy,
            Command::Tune,
            Command::LagSelect,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    pub fn is_study(self) -> bool {
        matches!(self, Command::Study | Command::NaiveStudy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandChoice {
    Bootstrap,
    Gumbel,
}

/// Keys accepted in config files and as `--key value` flags.
pub const KEYS: &[&str] = &[
    "input",
    "model",
    "mean",
    "n",
    "reps",
    "out",
    "alpha",
    "band",
    "draws",
    "seed",
    "lags",
    "kernel",
    "bandwidth-grid",
    "b-h",
    "b-k",
    "h",
    "h0",
    "lag-threshold",
    "m",
    "tau",
    "m-grid",
    "tau-grid",
    "grid-points",
    "fix-tuning",
    "threads",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub model: Option<Preset>,
    pub mean: MeanKind,
    /// Series length when simulating from a model.
    pub n: usize,
    pub reps: usize,
    pub out: PathBuf,
    pub alpha: f64,
    pub band: BandChoice,
    /// Bootstrap draws; `None` picks 10^4 for single runs and 2000 for studies.
    pub draws: Option<usize>,
    pub seed: u64,
    pub lags: Vec<usize>,
    pub kernel: Kernel,
    pub bandwidth_grid: Vec<f64>,
    pub b_h: Option<f64>,
    pub b_k: Option<f64>,
    pub h: Option<usize>,
    pub h0: Option<usize>,
    pub lag_threshold: f64,
    pub m: Option<usize>,
    pub tau: Option<f64>,
    pub m_grid: Option<Vec<usize>>,
    pub tau_grid: Vec<f64>,
    pub grid_points: Option<usize>,
    pub fix_tuning: bool,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: None,
            model: None,
            mean: MeanKind::Preset,
            n: 400,
            reps: 200,
            out: PathBuf::from("tvcov-out"),
            alpha: 0.05,
            band: BandChoice::Bootstrap,
            draws: None,
            seed: 0,
            lags: vec![0, 1],
            kernel: Kernel::default(),
            bandwidth_grid: tuning::default_bandwidth_grid(),
            b_h: None,
            b_k: None,
            h: None,
            h0: None,
            lag_threshold: crate::diffseries::DEFAULT_LAG_THRESHOLD,
            m: None,
            tau: None,
            m_grid: None,
            tau_grid: tuning::default_tau_grid(),
            grid_points: None,
            fix_tuning: false,
            threads: None,
        }
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "input" => self.input = Some(PathBuf::from(v)),
            "model" => self.model = Some(v.parse()?),
            "mean" => {
                self.mean = MeanKind::from_name(v)
                    .ok_or_else(|| bad(key, v, "expected preset, zero or smooth"))?
            }
            "n" => self.n = parse(key, v)?,
            "reps" => self.reps = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "alpha" => self.alpha = parse(key, v)?,
            "band" => {
                self.band = match v {
                    "bootstrap" => BandChoice::Bootstrap,
                    "gumbel" => BandChoice::Gumbel,
                    _ => return Err(bad(key, v, "expected bootstrap or gumbel")),
                }
            }
            "draws" => self.draws = Some(parse(key, v)?),
            "seed" => self.seed = parse(key, v)?,
            "lags" => self.lags = parse_list(key, v)?,
            "kernel" => {
                self.kernel = Kernel::from_name(v)
                    .ok_or_else(|| bad(key, v, "expected epanechnikov, quartic or triweight"))?
            }
            "bandwidth-grid" => self.bandwidth_grid = parse_grid(key, v)?,
            "b-h" => self.b_h = Some(parse(key, v)?),
            "b-k" => self.b_k = Some(parse(key, v)?),
            "h" => self.h = Some(parse(key, v)?),
            "h0" => self.h0 = Some(parse(key, v)?),
            "lag-threshold" => self.lag_threshold = parse(key, v)?,
            "m" => self.m = Some(parse(key, v)?),
            "tau" => self.tau = Some(parse(key, v)?),
            "m-grid" => self.m_grid = Some(parse_list(key, v)?),
            "tau-grid" => self.tau_grid = parse_grid(key, v)?,
            "grid-points" => self.grid_points = Some(parse(key, v)?),
            "fix-tuning" => {
                self.fix_tuning = match v {
                    "" | "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad(key, v, "expected true or false")),
                }
            }
            "threads" => self.threads = Some(parse(key, v)?),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Apply a flat `key=value` text.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{origin}:{}: expected key=value", idx + 1))
            })?;
            let key = key.trim();
            if key.starts_with("resolved.") || key == "version" {
                continue;
            }
            if key == "command" {
                if Command::from_name(value.trim()).is_none() {
                    return Err(Error::Config(format!(
                        "{origin}:{}: unknown command '{}'",
                        idx + 1,
                        value.trim()
                    )));
                }
                continue;
            }
            self.set(key, value)
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", idx + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn effective_draws(&self) -> usize {
        self.draws.unwrap_or(if self.command.is_study() {
            2000
        } else {
            scb::DEFAULT_DRAWS
        })
    }

    fn lrv_fixed(&self) -> bool {
        self.m.is_some() || self.tau.is_some()
    }

    /// Every setting that influences output files, as canonical pairs.
    /// `out` and `threads` are omitted: neither changes any result.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut p: Vec<(&'static str, String)> = vec![("command", self.command.name().into())];
        if let Some(i) = &self.input {
            p.push(("input", i.display().to_string()));
        }
        if let Some(m) = self.model {
            p.push(("model", m.to_string()));
            p.push(("mean", self.mean.name().into()));
            p.push(("n", self.n.to_string()));
        }
        if self.command.is_study() {
            p.push(("reps", self.reps.to_string()));
            p.push(("fix-tuning", self.fix_tuning.to_string()));
        }
        p.push(("alpha", self.alpha.to_string()));
        p.push((
            "band",
            match self.band {
                BandChoice::Bootstrap => "bootstrap",
                BandChoice::Gumbel => "gumbel",
            }
            .into(),
        ));
        if self.band == BandChoice::Bootstrap {
            p.push(("draws", self.effective_draws().to_string()));
        }
        p.push(("seed", self.seed.to_string()));
        p.push(("lags", join(&self.lags)));
        p.push(("kernel", self.kernel.name().into()));
        p.push(("bandwidth-grid", join(&self.bandwidth_grid)));
        if let Some(b) = self.b_h {
            p.push(("b-h", b.to_string()));
        }
        if let Some(b) = self.b_k {
            p.push(("b-k", b.to_string()));
        }
        match self.h {
            Some(h) => p.push(("h", h.to_string())),
            None => {
                if let Some(h0) = self.h0 {
                    p.push(("h0", h0.to_string()));
                }
                p.push(("lag-threshold", self.lag_threshold.to_string()));
            }
        }
        if self.lrv_fixed() {
            if let Some(m) = self.m {
                p.push(("m", m.to_string()));
            }
            p.push(("tau", self.tau.unwrap_or(DEFAULT_TAU).to_string()));
        } else {
            if let Some(g) = &self.m_grid {
                p.push(("m-grid", join(g)));
            }
            p.push(("tau-grid", join(&self.tau_grid)));
        }
        if let Some(g) = self.grid_points {
            p.push(("grid-points", g.to_string()));
        }
        p
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Check cross-field rules that single keys cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.command.is_study() {
            if self.input.is_some() {
                return Err(Error::Config(
                    "studies simulate their data; --input is not allowed".into(),
                ));
            }
        } else if self.input.is_some() == self.model.is_some() {
            return Err(Error::Config(
                "give exactly one of --input and --model".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.lags.is_empty() {
            return Err(Error::Config("no lags requested".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.model.is_some() && self.n < crate::MIN_SERIES_LEN {
            return Err(Error::Config(format!(
                "n = {} below the minimum {}",
                self.n,
                crate::MIN_SERIES_LEN
            )));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t < 0.5) {
                return Err(Error::Config(format!("tau must lie in (0, 1/2), got {t}")));
            }
        }
        if self.lrv_fixed() && self.m_grid.is_some() {
            return Err(Error::Config(
                "m-grid conflicts with a fixed m or tau".into(),
            ));
        }
        Ok(())
    }

    pub fn estimate_options(&self) -> EstimateOptions {
        EstimateOptions {
            kernel: self.kernel,
            alpha: self.alpha,
            band: match self.band {
                BandChoice::Bootstrap => BandKind::Bootstrap {
                    draws: self.effective_draws(),
                },
                BandChoice::Gumbel => BandKind::Gumbel,
            },
            lags: self.lags.clone(),
            lag_rule: match self.h {
                Some(h) => LagRule::Fixed(h),
                None => LagRule::Select {
                    h0: self.h0,
                    threshold: self.lag_threshold,
                },
            },
            bandwidth_grid: self.bandwidth_grid.clone(),
            b_h: self.b_h,
            b_k: self.b_k,
            lrv_rule: if self.lrv_fixed() {
                LrvRule::Fixed {
                    m: self.m,
                    tau: self.tau.unwrap_or(DEFAULT_TAU),
                }
            } else {
                LrvRule::MinVolatility {
                    m_grid: self.m_grid.clone(),
                    tau_grid: self.tau_grid.clone(),
                }
            },
            grid_points: self.grid_points,
            critical_scale: 1.0,
            seed: self.seed,
        }
    }

    pub fn study_config(&self) -> StudyConfig {
        let mut cfg = StudyConfig::new(self.model.unwrap_or(Preset::Model1), self.n, self.reps);
        cfg.mean = self.mean;
        cfg.options = self.estimate_options();
        cfg.fix_tuning = self.fix_tuning;
        cfg.seed = self.seed;
        cfg
    }
}

/// Long-run covariance bandwidth used when only `m` is fixed.
pub const DEFAULT_TAU: f64 = 0.2;

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("invalid value '{value}' for {key}: {what}"))
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(key, v, std::any::type_name::<T>()))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

/// Comma list, or `lo:step:hi` with both ends included.
fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        [_] => parse_list(key, v),
        [lo, step, hi] => {
            let (lo, step, hi): (f64, f64, f64) = (
                parse(key, lo.trim())?,
                parse(key, step.trim())?,
                parse(key, hi.trim())?,
            );
            if !(step > 0.0) || !(hi >= lo) {
                return Err(bad(key, v, "range needs step > 0 and hi >= lo"));
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            if count > 10_000 {
                return Err(bad(key, v, "range has more than 10000 points"));
            }
            // Rounded so that 0.15:0.01:0.45 yields exactly 0.16, 0.17, ...
            Ok((0..count)
                .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        _ => Err(bad(key, v, "expected a comma list or lo:step:hi")),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}
