//! Command-line front end: `estimate`, `study`, `naive-study`, `tune` and
//! `lag-select`.
//!
//! Settings are resolved in three layers: built-in defaults, then an
//! optional `--config` file, then explicit flags. Each command writes plain
//! CSV and `key=value` files into `--out`; timing goes to stderr only so
//! that reruns are byte-identical.

pub mod config;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::acov;
use crate::diffseries;
use crate::error::{Error, Result};
use crate::pipeline::{self, BandKind};
use crate::procgen::{self, TimeSeries};
use crate::study;
use crate::tuning;

pub use config::{BandChoice, Command, RunConfig};
pub use io::ingest_csv;

#[derive(Debug, Parser)]
#[command(
    name = "tvcov",
    version,
    about = "Time-varying autocovariance curves with simultaneous confidence bands"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Estimate autocovariance curves and bands for one series.
    Estimate(Flags),
    /// Coverage study of the difference-based bands on simulated data.
    Study(Flags),
    /// Coverage study of the detrend-then-smooth estimator.
    NaiveStudy(Flags),
    /// Report the GCV and minimum-volatility tuning tables.
    Tune(Flags),
    /// Run the difference-lag scan.
    LagSelect(Flags),
}

/// Flags shared by all commands; each mirrors a config-file key.
#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Flat key=value file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV (one column, or index/date plus value).
    #[arg(long)]
    pub input: Option<String>,
    /// Simulation preset: model1, model2 or model3.
    #[arg(long)]
    pub model: Option<String>,
    /// Mean for simulated data: preset, zero or smooth.
    #[arg(long)]
    pub mean: Option<String>,
    /// Length of simulated series.
    #[arg(long)]
    pub n: Option<String>,
    /// Study replications.
    #[arg(long)]
    pub reps: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Band level; the band has coverage 1 - alpha.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Band construction: bootstrap or gumbel.
    #[arg(long)]
    pub band: Option<String>,
    /// Bootstrap draws.
    #[arg(long)]
    pub draws: Option<String>,
    /// Root seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Comma-separated lags to estimate.
    #[arg(long)]
    pub lags: Option<String>,
    /// Kernel: epanechnikov, quartic or triweight.
    #[arg(long)]
    pub kernel: Option<String>,
    /// GCV candidates, as a comma list or lo:step:hi.
    #[arg(long = "bandwidth-grid")]
    pub bandwidth_grid: Option<String>,
    /// Fixed bandwidth for the variance curve.
    #[arg(long = "b-h")]
    pub b_h: Option<String>,
    /// Fixed bandwidth for the lag-k curves.
    #[arg(long = "b-k")]
    pub b_k: Option<String>,
    /// Fixed difference lag.
    #[arg(long)]
    pub h: Option<String>,
    /// Largest lag in the lag scan.
    #[arg(long)]
    pub h0: Option<String>,
    /// Step threshold of the lag scan, in units of the tail noise.
    #[arg(long = "lag-threshold")]
    pub lag_threshold: Option<String>,
    /// Fixed long-run covariance block half-width.
    #[arg(long)]
    pub m: Option<String>,
    /// Fixed long-run covariance smoothing bandwidth.
    #[arg(long)]
    pub tau: Option<String>,
    /// Minimum-volatility candidates for m.
    #[arg(long = "m-grid")]
    pub m_grid: Option<String>,
    /// Minimum-volatility candidates for tau.
    #[arg(long = "tau-grid")]
    pub tau_grid: Option<String>,
    /// Evaluation grid resolution (default: the data grid).
    #[arg(long = "grid-points")]
    pub grid_points: Option<String>,
    /// Tune on the first replication and reuse the values.
    #[arg(long = "fix-tuning", num_args = 0..=1, default_missing_value = "true")]
    pub fix_tuning: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let all: [(&'static str, &Option<String>); 25] = [
            ("input", &self.input),
            ("model", &self.model),
            ("mean", &self.mean),
            ("n", &self.n),
            ("reps", &self.reps),
            ("out", &self.out),
            ("alpha", &self.alpha),
            ("band", &self.band),
            ("draws", &self.draws),
            ("seed", &self.seed),
            ("lags", &self.lags),
            ("kernel", &self.kernel),
            ("bandwidth-grid", &self.bandwidth_grid),
            ("b-h", &self.b_h),
            ("b-k", &self.b_k),
            ("h", &self.h),
            ("h0", &self.h0),
            ("lag-threshold", &self.lag_threshold),
            ("m", &self.m),
            ("tau", &self.tau),
            ("m-grid", &self.m_grid),
            ("tau-grid", &self.tau_grid),
            ("grid-points", &self.grid_points),
            ("fix-tuning", &self.fix_tuning),
            ("threads", &self.threads),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

impl Cli {
    /// Defaults, then the config file, then explicit flags.
    pub fn into_config(self) -> Result<RunConfig> {
        let (command, flags) = match self.command {
            CommandArgs::Estimate(f) => (Command::Estimate, f),
            CommandArgs::Study(f) => (Command::Study, f),
            CommandArgs::NaiveStudy(f) => (Command::NaiveStudy, f),
            CommandArgs::Tune(f) => (Command::Tune, f),
            CommandArgs::LagSelect(f) => (Command::LagSelect, f),
        };
        let mut cfg = RunConfig::new(command);
        if let Some(path) = &flags.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in flags.pairs() {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.into_config().and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            let cat = e.category();
            eprintln!("error [{}]: {e}", cat.name());
            cat.exit_code()
        }
    }
}

/// Execute a resolved configuration.
pub fn run(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<()> {
    match cfg.command {
        Command::Estimate => run_estimate(cfg),
        Command::Study | Command::NaiveStudy => run_study(cfg),
        Command::Tune => run_tune(cfg),
        Command::LagSelect => run_lag_select(cfg),
    }
}

/// The series a single-series command works on.
pub fn load_series(cfg: &RunConfig) -> Result<TimeSeries> {
    match (&cfg.input, cfg.model) {
        (Some(path), None) => ingest_csv(path),
        (None, Some(preset)) => {
            let (mean, err) = study::models_for(preset, cfg.mean);
            procgen::generate(&mean, &err, cfg.n, cfg.seed)
        }
        _ => Err(Error::Config(
            "give exactly one of --input and --model".into(),
        )),
    }
}

fn run_estimate(cfg: &RunConfig) -> Result<()> {
    let y = load_series(cfg)?;
    let est = pipeline::estimate(&y, &cfg.estimate_options())?;
    let manifest = io::manifest_text(&cfg.to_text(), &io::resolved_pairs(&est));
    io::write_estimation(&cfg.out, &est, &manifest)?;
    for out in &est.lags {
        if out.estimate.negative {
            eprintln!("warning: variance estimate dips below zero");
        }
        if out.sigma_clamped {
            eprintln!(
                "warning: lag {} normalizer clamped to stay positive",
                out.tuning.lag
            );
        }
    }
    if est.h_raised {
        eprintln!(
            "warning: selected difference lag raised to {} to exceed the requested lags",
            est.resolved.h.unwrap_or(0)
        );
    }
    Ok(())
}

fn run_study(cfg: &RunConfig) -> Result<()> {
    let scfg = cfg.study_config();
    let report = if cfg.command == Command::NaiveStudy {
        study::run_naive_study(&scfg)?
    } else {
        study::run_study(&scfg)?
    };
    io::write_study(&cfg.out, &report, &cfg.to_text())?;
    for t in &report.targets {
        eprintln!(
            "{}: coverage {} ({} of {}), mean width {}",
            io::target_name(t.lag),
            t.coverage,
            t.covered,
            t.valid,
            t.mean_width
        );
    }
    eprintln!(
        "failures: {}; elapsed {:.1}s",
        report.failures,
        report.elapsed.as_secs_f64()
    );
    Ok(())
}

fn run_tune(cfg: &RunConfig) -> Result<()> {
    let y = load_series(cfg)?;
    let mut opts = cfg.estimate_options();
    // Only the tuning tables are reported; a cheap band suffices.
    if let BandKind::Bootstrap { draws } = &mut opts.band {
        *draws = crate::scb::MIN_DRAWS;
    }
    let est = pipeline::estimate(&y, &opts)?;
    let h = est
        .resolved
        .h
        .ok_or_else(|| Error::Numeric("no difference lag resolved".into()))?;
    for out in &est.lags {
        let k = out.tuning.lag;
        let series = if k == 0 {
            diffseries::difference(&y, h)?.values
        } else {
            acov::gammak_gcv_series(&y, k, h)?
        };
        let gcv = tuning::gcv_bandwidth(&series, &cfg.bandwidth_grid, cfg.kernel)?;
        io::write_text(&cfg.out, &format!("gcv_{k}.csv"), &io::gcv_csv(&gcv))?;
        if let Some(mv) = &out.min_vol {
            io::write_text(&cfg.out, &format!("minvol_{k}.csv"), &io::min_vol_csv(mv))?;
        }
    }
    let resolved: Vec<(String, String)> = io::resolved_pairs(&est)
        .into_iter()
        .filter(|(k, _)| {
            !(k.ends_with(".critical") || k.ends_with(".bootstrap-seed") || k.ends_with(".band"))
        })
        .collect();
    io::write_text(
        &cfg.out,
        "manifest.txt",
        &io::manifest_text(&cfg.to_text(), &resolved),
    )?;
    for l in &est.resolved.lags {
        eprintln!(
            "lag {}: b = {}, m = {}, tau = {}",
            l.lag, l.bandwidth, l.m, l.tau
        );
    }
    Ok(())
}

fn run_lag_select(cfg: &RunConfig) -> Result<()> {
    let y = load_series(cfg)?;
    let h0 = cfg
        .h0
        .unwrap_or_else(|| diffseries::default_max_lag(y.len()));
    let rule = tuning::BandwidthRule::Gcv(cfg.bandwidth_grid.clone());
    let sel = diffseries::select_lag(&y, h0, &rule, cfg.kernel, cfg.lag_threshold)?;
    let profile = sel.mean_profile();
    let mut text = String::from("k,bandwidth,mean_beta\n");
    for ((k, mean), (_, b, _)) in profile.iter().zip(&sel.profile) {
        text.push_str(&format!("{k},{b},{mean}\n"));
    }
    io::write_text(&cfg.out, "lag_profile.csv", &text)?;
    let mut local = String::from("t,h_star\n");
    for (t, h) in sel.grid.iter().zip(&sel.local) {
        local.push_str(&format!("{t},{h}\n"));
    }
    io::write_text(&cfg.out, "lag_local.csv", &local)?;
    let resolved = vec![
        ("resolved.n".to_string(), y.len().to_string()),
        ("resolved.h0".to_string(), h0.to_string()),
        ("resolved.h".to_string(), sel.h.to_string()),
    ];
    io::write_text(
        &cfg.out,
        "manifest.txt",
        &io::manifest_text(&cfg.to_text(), &resolved),
    )?;
    println!("{}", sel.h);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        Cli::try_parse_from(args).unwrap().into_config()
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "model=model3\nalpha=0.1\nseed=4\n").unwrap();
        let p = path.to_str().unwrap();
        let cfg = parse(&["tvcov", "estimate", "--config", p, "--seed", "9"]).unwrap();
        assert_eq!(cfg.model, Some(procgen::Preset::Model3));
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn every_key_has_a_flag() {
        let flags = Flags {
            input: Some("x".into()),
            ..Flags::default()
        };
        assert_eq!(flags.pairs(), vec![("input", "x")]);
        // Every key must appear among the flag names.
        let all = Flags {
            config: None,
            input: Some("a".into()),
            model: Some("a".into()),
            mean: Some("a".into()),
            n: Some("a".into()),
            reps: Some("a".into()),
            out: Some("a".into()),
            alpha: Some("a".into()),
            band: Some("a".into()),
            draws: Some("a".into()),
            seed: Some("a".into()),
            lags: Some("a".into()),
            kernel: Some("a".into()),
            bandwidth_grid: Some("a".into()),
            b_h: Some("a".into()),
            b_k: Some("a".into()),
            h: Some("a".into()),
            h0: Some("a".into()),
            lag_threshold: Some("a".into()),
            m: Some("a".into()),
            tau: Some("a".into()),
            m_grid: Some("a".into()),
            tau_grid: Some("a".into()),
            grid_points: Some("a".into()),
            fix_tuning: Some("a".into()),
            threads: Some("a".into()),
        };
        let keys: Vec<&str> = all.pairs().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, config::KEYS);
    }

    #[test]
    fn exit_codes_follow_categories() {
        assert_eq!(main_with_args(["tvcov", "estimate"]), 2);
        assert_eq!(
            main_with_args(["tvcov", "estimate", "--model", "model9"]),
            2
        );
        assert_eq!(main_with_args(["tvcov", "frobnicate"]), 2);
        let dir = tempfile::tempdir().unwrap();
        let short = dir.path().join("short.csv");
        std::fs::write(&short, "1.0\n2.0\n3.0\n").unwrap();
        let out = dir.path().join("out");
        let code = main_with_args([
            "tvcov",
            "estimate",
            "--input",
            short.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 3);
    }
}
