//! CSV ingestion and the output files written by the commands.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::Estimation;
use crate::procgen::TimeSeries;
use crate::scb::BandResult;
use crate::study::StudyReport;
use crate::tuning::{GcvResult, MinVolResult};

/// Read a numeric series from a one-column file or a two-column file whose
/// first column (an index or date) is ignored. A non-numeric first row is
/// taken as a header. Row order defines `t_i = i / n`.
pub fn ingest_csv(path: &Path) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = match record.len() {
            1 => &record[0],
            2 => &record[1],
            c => {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 1 or 2 columns, found {c}"),
                })
            }
        };
        let is_first = std::mem::replace(&mut first, false);
        if field.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "missing value".into(),
            });
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value '{field}'"),
                })
            }
            Err(_) if is_first => {}
            Err(_) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-numeric value '{field}'"),
                })
            }
        }
    }
    TimeSeries::new(values)
}

/// Read a numeric table with a header row.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("non-numeric value '{f}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn table(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `t,center,lower,upper` for one band.
pub fn band_csv(band: &BandResult) -> String {
    let c = &band.center;
    table(
        "t,center,lower,upper",
        (0..c.len()).map(|i| {
            format!(
                "{},{},{},{}",
                c.grid[i], c.values[i], band.lower[i], band.upper[i]
            )
        }),
    )
}

/// `t,sigma` for the normalizer behind one band.
pub fn sigma_csv(band: &BandResult) -> String {
    table(
        "t,sigma",
        band.grid()
            .iter()
            .zip(&band.sigma)
            .map(|(t, s)| format!("{t},{s}")),
    )
}

pub fn gcv_csv(g: &GcvResult) -> String {
    table(
        "b,score",
        g.grid
            .iter()
            .zip(&g.scores)
            .map(|(b, s)| format!("{b},{}", opt(*s))),
    )
}

pub fn min_vol_csv(mv: &MinVolResult) -> String {
    table(
        "m,tau,ise",
        mv.m_grid.iter().enumerate().flat_map(|(i, m)| {
            mv.tau_grid
                .iter()
                .enumerate()
                .map(move |(j, tau)| format!("{m},{tau},{}", opt(mv.ise[i][j])))
        }),
    )
}

/// Resolved values of a single-series run, as `resolved.*` pairs.
pub fn resolved_pairs(est: &Estimation) -> Vec<(String, String)> {
    let mut p = vec![("resolved.n".to_string(), est.n.to_string())];
    if let Some(h) = est.resolved.h {
        p.push(("resolved.h".into(), h.to_string()));
        p.push(("resolved.h-raised".into(), est.h_raised.to_string()));
    }
    if let Some(b) = est.resolved.mean_bandwidth {
        p.push(("resolved.mean-bandwidth".into(), b.to_string()));
    }
    for out in &est.lags {
        let k = out.tuning.lag;
        let key = |s: &str| format!("resolved.lag{k}.{s}");
        p.push((key("bandwidth"), out.tuning.bandwidth.to_string()));
        p.push((key("m"), out.tuning.m.to_string()));
        p.push((key("tau"), out.tuning.tau.to_string()));
        if let Some(mv) = &out.min_vol {
            p.push((key("m-grid"), join(&mv.m_grid)));
            p.push((key("tau-grid"), join(&mv.tau_grid)));
        }
        p.push((key("working-len"), out.working_len.to_string()));
        p.push((key("band"), out.band.method.name().to_string()));
        if let Some(s) = out.bootstrap_seed {
            p.push((key("bootstrap-seed"), s.to_string()));
        }
        p.push((key("critical"), out.band.critical.to_string()));
        p.push((key("sigma-clamped"), out.sigma_clamped.to_string()));
        p.push((key("negative"), out.estimate.negative.to_string()));
    }
    p
}

pub fn manifest_text(config: &str, resolved: &[(String, String)]) -> String {
    let mut s = format!("version={}\n", env!("CARGO_PKG_VERSION"));
    s.push_str(config);
    for (k, v) in resolved {
        s.push_str(&format!("{k}={v}\n"));
    }
    s
}

pub fn write_estimation(dir: &Path, est: &Estimation, manifest: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    for out in &est.lags {
        let k = out.tuning.lag;
        write(dir, &format!("gamma_{k}.csv"), &band_csv(&out.band))?;
        write(dir, &format!("sigma_{k}.csv"), &sigma_csv(&out.band))?;
    }
    write(dir, "manifest.txt", manifest)
}

pub fn target_name(lag: usize) -> String {
    format!("gamma{lag}")
}

/// Summary table, key-value records and the per-replication table.
pub fn write_study(dir: &Path, report: &StudyReport, config: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    write(
        dir,
        "study.csv",
        &table(
            "target,lag,covered,valid,coverage,mean_width",
            report.targets.iter().map(|t| {
                format!(
                    "{},{},{},{},{},{}",
                    target_name(t.lag),
                    t.lag,
                    t.covered,
                    t.valid,
                    t.coverage,
                    t.mean_width
                )
            }),
        ),
    )?;

    let mut kv = Vec::new();
    kv.push((
        "estimator".to_string(),
        if report.naive { "naive" } else { "difference" }.to_string(),
    ));
    kv.push(("replications".into(), report.replications.len().to_string()));
    kv.push(("failures".into(), report.failures.to_string()));
    for t in &report.targets {
        let name = target_name(t.lag);
        kv.push((format!("target.{name}.lag"), t.lag.to_string()));
        kv.push((format!("target.{name}.covered"), t.covered.to_string()));
        kv.push((format!("target.{name}.valid"), t.valid.to_string()));
        kv.push((format!("target.{name}.coverage"), t.coverage.to_string()));
        kv.push((
            format!("target.{name}.mean-width"),
            t.mean_width.to_string(),
        ));
    }
    let kv: Vec<(String, String)> = kv
        .into_iter()
        .map(|(k, v)| (format!("resolved.{k}"), v))
        .collect();
    write(dir, "study.txt", &manifest_text(config, &kv))?;

    let lags = &report.config.options.lags;
    let mut header = String::from("index,seed,h");
    for k in lags {
        header.push_str(&format!(",covered_{k},width_{k}"));
    }
    header.push_str(",error");
    write(
        dir,
        "replications.csv",
        &table(
            &header,
            report.replications.iter().map(|r| {
                let mut row = format!(
                    "{},{},{}",
                    r.index,
                    r.seed,
                    r.h.map(|h| h.to_string()).unwrap_or_default()
                );
                for k in lags {
                    match r.lags.iter().find(|l| l.lag == *k) {
                        Some(l) => row.push_str(&format!(",{},{}", l.covered as u8, l.width)),
                        None => row.push_str(",,"),
                    }
                }
                // Quote the message so commas inside it stay in one field.
                let err = r.error.as_deref().unwrap_or("").replace('"', "'");
                if err.is_empty() {
                    row.push(',');
                } else {
                    row.push_str(&format!(",\"{err}\""));
                }
                row
            }),
        ),
    )?;
    write(dir, "manifest.txt", &manifest_text(config, &[]))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    write(dir, name, text)
}
