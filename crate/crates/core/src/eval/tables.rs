//! Cross-report summary tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use crate::corpus::SplitKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableMode {
    /// One row per experiment: mae, mse and mdae as mean ± population std.
    Comparison,
    /// One row per held-out project with its size and effort moments.
    PerProject,
    /// Held-out project MAEs and their average.
    NewProject,
}

impl std::str::FromStr for TableMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comparison" => Ok(Self::Comparison),
            "per-project" => Ok(Self::PerProject),
            "new-project" => Ok(Self::NewProject),
            other => Err(Error::Config(format!("unknown table mode `{other}`"))),
        }
    }
}

pub(crate) fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

pub(crate) fn fmt_raw(v: f64) -> String {
    v.to_string()
}

pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_pair(dir: &Path, stem: &str, header: &[&str], raw_header: &[&str], display: &[Vec<String>], raw: &[Vec<String>]) -> Result<Vec<PathBuf>> {
    let a = dir.join(format!("{stem}.csv"));
    let b = dir.join(format!("{stem}_raw.csv"));
    write_csv(&a, header, display)?;
    write_csv(&b, raw_header, raw)?;
    Ok(vec![a, b])
}

fn require_experiment(r: &EvalReport) -> Result<()> {
    if r.experiment.trim().is_empty() {
        return Err(Error::MissingProvenance("report has no experiment id".into()));
    }
    Ok(())
}

fn require_projects(r: &EvalReport) -> Result<()> {
    require_experiment(r)?;
    if r.split != SplitKind::LeaveOneProjectOut {
        return Err(Error::MissingProvenance(format!(
            "report {} was not split by project",
            r.experiment
        )));
    }
    Ok(())
}

/// Writes display CSVs (two decimals) and `*_raw.csv` twins (full
/// precision) for `mode`. `targets` restricts new-project tables to the
/// named projects. Returns the written paths.
pub fn emit_tables(
    reports: &[EvalReport],
    mode: TableMode,
    dir: &Path,
    targets: Option<&[String]>,
) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match mode {
        TableMode::Comparison => {
            let mut display = Vec::new();
            let mut raw = Vec::new();
            for r in reports {
                require_experiment(r)?;
                let a = &r.aggregate;
                display.push(vec![
                    r.model_label(),
                    format!("{} ± {}", fmt2(a.mae.mean), fmt2(a.mae.std)),
                    format!("{} ± {}", fmt2(a.mse.mean), fmt2(a.mse.std)),
                    format!("{} ± {}", fmt2(a.mdae.mean), fmt2(a.mdae.std)),
                ]);
                raw.push(vec![
                    r.model_label(),
                    fmt_raw(a.mae.mean),
                    fmt_raw(a.mae.std),
                    fmt_raw(a.mse.mean),
                    fmt_raw(a.mse.std),
                    fmt_raw(a.mdae.mean),
                    fmt_raw(a.mdae.std),
                ]);
            }
            write_pair(
                dir,
                "comparison",
                &["model", "mae", "mse", "mdae"],
                &["model", "mae", "mae_pop_std", "mse", "mse_pop_std", "mdae", "mdae_pop_std"],
                &display,
                &raw,
            )
        }
        TableMode::PerProject => {
            let mut paths = Vec::new();
            for r in reports {
                require_projects(r)?;
                let rows = |fmt: fn(f64) -> String| -> Vec<Vec<String>> {
                    r.folds
                        .iter()
                        .map(|f| {
                            vec![
                                f.label.clone(),
                                f.metrics.n.to_string(),
                                fmt(f.effort_mean),
                                fmt(f.effort_std),
                                fmt(f.metrics.mae),
                            ]
                        })
                        .collect()
                };
                let header = ["project", "requirements", "effort_mean", "effort_pop_std", "mae"];
                paths.extend(write_pair(
                    dir,
                    &format!("per_project_{}", r.experiment),
                    &header,
                    &header,
                    &rows(fmt2),
                    &rows(fmt_raw),
                )?);
            }
            Ok(paths)
        }
        TableMode::NewProject => {
            let mut paths = Vec::new();
            for r in reports {
                require_projects(r)?;
                let chosen: Vec<_> = match targets {
                    None => r.folds.iter().collect(),
                    Some(t) => t
                        .iter()
                        .map(|name| {
                            r.folds.iter().find(|f| &f.label == name).ok_or_else(|| {
                                Error::MissingProvenance(format!("project {name} not in report {}", r.experiment))
                            })
                        })
                        .collect::<Result<_>>()?,
                };
                if chosen.is_empty() {
                    return Err(Error::EmptyInput);
                }
                let avg = chosen.iter().map(|f| f.metrics.mae).sum::<f64>() / chosen.len() as f64;
                let rows = |fmt: fn(f64) -> String| -> Vec<Vec<String>> {
                    chosen
                        .iter()
                        .map(|f| vec![f.label.clone(), fmt(f.metrics.mae)])
                        .chain(std::iter::once(vec!["avg".to_string(), fmt(avg)]))
                        .collect()
                };
                paths.extend(write_pair(
                    dir,
                    &format!("new_project_{}", r.experiment),
                    &["target", "mae"],
                    &["target", "mae"],
                    &rows(fmt2),
                    &rows(fmt_raw),
                )?);
            }
            Ok(paths)
        }
    }
}
