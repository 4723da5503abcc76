//! End-to-end runs of the `tvcov` binary.

use std::path::Path;
use std::process::{Command, Output};

use tvcov::cli::{self, io, Command as Cmd, RunConfig};
use tvcov::pipeline;

fn tvcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvcov"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = tvcov(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn estimate_writes_curves_and_manifest_and_replays() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    let args = [
        "--model", "model1", "--n", "400", "--lags", "0,1", "--alpha", "0.05", "--seed", "7",
    ];
    let mut first = vec!["estimate", "--out", p(&a)];
    first.extend_from_slice(&args);
    ok(&first);
    let mut second = vec!["estimate", "--out", p(&b)];
    second.extend_from_slice(&args);
    ok(&second);
    for name in [
        "gamma_0.csv",
        "gamma_1.csv",
        "sigma_0.csv",
        "sigma_1.csv",
        "manifest.txt",
    ] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let (header, rows) = io::read_table(&a.join("gamma_0.csv")).unwrap();
    assert_eq!(header, ["t", "center", "lower", "upper"]);
    assert!(rows.iter().all(|r| r[1] <= r[3] && r[2] <= r[1]));
    let manifest = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    for key in [
        "seed=7",
        "resolved.h=",
        "resolved.lag0.bandwidth=",
        "resolved.lag1.m=",
        "resolved.lag1.tau=",
        "resolved.lag0.bootstrap-seed=",
        "resolved.lag0.m-grid=",
    ] {
        assert!(manifest.contains(key), "manifest lacks {key}");
    }
}

#[test]
fn emitted_curves_round_trip_to_full_precision() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("out");
    ok(&[
        "estimate",
        "--model",
        "model3",
        "--n",
        "300",
        "--seed",
        "11",
        "--draws",
        "1000",
        "--out",
        p(&out),
    ]);
    let mut cfg = RunConfig::new(Cmd::Estimate);
    cfg.apply_file(&out.join("manifest.txt")).unwrap();
    let y = cli::load_series(&cfg).unwrap();
    let est = pipeline::estimate(&y, &cfg.estimate_options()).unwrap();
    for lag in &est.lags {
        let (_, rows) = io::read_table(&out.join(format!("gamma_{}.csv", lag.tuning.lag))).unwrap();
        assert_eq!(rows.len(), lag.band.center.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r[0].to_bits(), lag.band.center.grid[i].to_bits());
            assert_eq!(r[1].to_bits(), lag.band.center.values[i].to_bits());
            assert_eq!(r[2].to_bits(), lag.band.lower[i].to_bits());
            assert_eq!(r[3].to_bits(), lag.band.upper[i].to_bits());
        }
    }
}

#[test]
fn malformed_input_names_the_line() {
    let root = tempfile::tempdir().unwrap();
    let input = root.path().join("bad.csv");
    let mut text: String = (1..=16).map(|i| format!("{}\n", i as f64 / 10.0)).collect();
    text.push_str("n/a\n");
    text.extend((18..=80).map(|i| format!("{}\n", i as f64 / 10.0)));
    std::fs::write(&input, text).unwrap();
    let out = tvcov(&[
        "estimate",
        "--input",
        p(&input),
        "--out",
        p(&root.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 17"), "{err}");
    assert!(err.contains("[parse]"), "{err}");
}

#[test]
fn short_input_and_bad_config_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let input = root.path().join("short.csv");
    std::fs::write(&input, "1.0\n2.0\n3.0\n").unwrap();
    assert_eq!(cli::ingest_csv(&input).unwrap().len(), 3);
    let out = tvcov(&[
        "estimate",
        "--input",
        p(&input),
        "--out",
        p(&root.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = tvcov(&["estimate", "--model", "model1", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = tvcov(&["study", "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = rx
        .iter()
        .zip(&ry)
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    let var: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    cov / var
}

#[test]
fn decaying_variance_series_gives_decreasing_curve() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let n = 1965;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1856);
    let mut prev = 0.0;
    let mut text = String::from("date,anomaly\n");
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let z: f64 = StandardNormal.sample(&mut rng);
        let e = (0.6 - 0.4 * t) * z;
        let x = e + 0.3 * prev;
        prev = e;
        let trend = if t < 0.7 { -0.3 } else { 0.2 };
        text.push_str(&format!(
            "{}-{:02},{}\n",
            1856 + (i - 1) / 12,
            (i - 1) % 12 + 1,
            trend + x
        ));
    }
    let root = tempfile::tempdir().unwrap();
    let input = root.path().join("north.csv");
    std::fs::write(&input, text).unwrap();
    let out = root.path().join("out");
    ok(&[
        "estimate",
        "--input",
        p(&input),
        "--draws",
        "2000",
        "--out",
        p(&out),
    ]);
    let (_, rows) = io::read_table(&out.join("gamma_0.csv")).unwrap();
    let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let g: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let rho = spearman(&t, &g);
    assert!(rho < 0.0, "Spearman {rho}");
}

#[test]
fn study_commands_write_reports() {
    let root = tempfile::tempdir().unwrap();
    for cmd in ["study", "naive-study"] {
        let out = root.path().join(cmd);
        ok(&[
            cmd,
            "--model",
            "model1",
            "--n",
            "200",
            "--reps",
            "4",
            "--draws",
            "1000",
            "--out",
            p(&out),
        ]);
        let reps = std::fs::read_to_string(out.join("replications.csv")).unwrap();
        let mut lines = reps.lines();
        assert!(lines.next().unwrap().starts_with("index,seed,h,"));
        assert_eq!(lines.count(), 4);
        let summary = std::fs::read_to_string(out.join("study.csv")).unwrap();
        let mut lines = summary.lines();
        assert_eq!(
            lines.next(),
            Some("target,lag,covered,valid,coverage,mean_width")
        );
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            let covered: f64 = f[2].parse().unwrap();
            let valid: f64 = f[3].parse().unwrap();
            let coverage: f64 = f[4].parse().unwrap();
            assert!((coverage * valid - covered).abs() < 1e-9);
        }
        let kv = std::fs::read_to_string(out.join("study.txt")).unwrap();
        assert!(kv.contains("resolved.target.gamma0.coverage="));
        assert!(kv.contains("reps=4"));
    }
}

#[test]
fn tune_and_lag_select_write_tables() {
    let root = tempfile::tempdir().unwrap();
    let tune = root.path().join("tune");
    ok(&[
        "tune",
        "--model",
        "model3",
        "--n",
        "400",
        "--seed",
        "2",
        "--out",
        p(&tune),
    ]);
    let gcv = std::fs::read_to_string(tune.join("gcv_0.csv")).unwrap();
    let mut lines = gcv.lines();
    assert_eq!(lines.next(), Some("b,score"));
    assert_eq!(lines.count(), 31);
    assert!(tune.join("minvol_1.csv").exists());
    let lag = root.path().join("lag");
    let out = tvcov(&[
        "lag-select",
        "--model",
        "model3",
        "--n",
        "400",
        "--seed",
        "2",
        "--out",
        p(&lag),
    ]);
    assert!(out.status.success());
    let printed: usize = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    let manifest = std::fs::read_to_string(lag.join("manifest.txt")).unwrap();
    assert!(manifest.contains(&format!("resolved.h={printed}")));
    let (_, profile) = io::read_table(&lag.join("lag_profile.csv")).unwrap();
    assert!(!profile.is_empty());
}
