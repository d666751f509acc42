use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{CliError, RunRecord, METRICS_FILE, RUN_FILE};
use crate::nbody::ModelKind;

/// Metrics of one completed run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub dir: PathBuf,
    pub model: ModelKind,
    pub train_size: usize,
    /// `(split, mse, stderr)` rows.
    pub rows: Vec<(String, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: ModelKind,
    pub train_size: usize,
    pub split: String,
    pub mse: f64,
    pub stderr: f64,
    pub n_runs: usize,
}

fn parse_metrics(text: &str) -> Result<Vec<(String, f64, f64)>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "split,mse,stderr" => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(format!("malformed row {l:?}"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
            Ok((f[0].to_string(), num(f[1])?, num(f[2])?))
        })
        .collect()
}

/// Collects every run directory directly under `runs` (or `runs` itself)
/// that has a run record and a metrics file. Incomplete runs are skipped
/// with a warning.
pub fn read_metrics(runs: &Path) -> Result<Vec<RunMetrics>, CliError> {
    let entries =
        fs::read_dir(runs).map_err(|e| CliError::Usage(format!("cannot read runs directory {}: {e}", runs.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    if runs.join(RUN_FILE).exists() {
        dirs.push(runs.to_path_buf());
    }
    dirs.sort();
    let mut out = Vec::new();
    for dir in dirs {
        let record = match fs::read_to_string(dir.join(RUN_FILE)) {
            Ok(text) => match serde_json::from_str::<RunRecord>(&text) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("skipping {}: bad run record: {e}", dir.display());
                    continue;
                }
            },
            Err(_) => {
                log::warn!("skipping {}: no {RUN_FILE}", dir.display());
                continue;
            }
        };
        let rows = match fs::read_to_string(dir.join(METRICS_FILE)) {
            Ok(text) => match parse_metrics(&text) {
                Ok(rows) => rows,
                Err(e) => {
                    log::warn!("skipping {}: bad {METRICS_FILE}: {e}", dir.display());
                    continue;
                }
            },
            Err(_) => {
                log::warn!("skipping {}: no {METRICS_FILE}", dir.display());
                continue;
            }
        };
        out.push(RunMetrics {
            dir,
            model: record.model,
            train_size: record.train_size,
            rows,
        });
    }
    Ok(out)
}

/// One row per (model, train_size, split). A single run keeps its own
/// standard error; several runs report the mean over runs and the standard
/// error of that mean.
pub fn aggregate(runs: &[RunMetrics]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(usize, usize, String), Vec<(f64, f64)>> = BTreeMap::new();
    for run in runs {
        let order = ModelKind::ALL.iter().position(|k| *k == run.model).unwrap_or(0);
        for (split, mse, stderr) in &run.rows {
            groups
                .entry((order, run.train_size, split.clone()))
                .or_default()
                .push((*mse, *stderr));
        }
    }
    groups
        .into_iter()
        .map(|((order, train_size, split), v)| {
            let k = v.len() as f64;
            let mean = v.iter().map(|x| x.0).sum::<f64>() / k;
            let stderr = if v.len() == 1 {
                v[0].1
            } else {
                let var = v.iter().map(|x| (x.0 - mean).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            };
            ReportRow {
                model: ModelKind::ALL[order],
                train_size,
                split,
                mse: mean,
                stderr,
                n_runs: v.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(model: ModelKind, mse: f64) -> RunMetrics {
        RunMetrics {
            dir: PathBuf::new(),
            model,
            train_size: 100,
            rows: vec![("eval".into(), mse, 0.5)],
        }
    }

    #[test]
    fn single_run_keeps_its_stderr() {
        let rows = aggregate(&[run(ModelKind::Mlp, 2.0)]);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mse, rows[0].stderr, rows[0].n_runs), (2.0, 0.5, 1));
    }

    #[test]
    fn seeds_give_mean_and_standard_error() {
        let values = [1.0, 2.0, 3.0, 4.0, 5.0];
        let runs: Vec<_> = values.iter().map(|&v| run(ModelKind::Gatr, v)).collect();
        let rows = aggregate(&runs);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].mse - 3.0).abs() < 1e-15);
        // sample std sqrt(2.5), divided by sqrt(5)
        assert!((rows[0].stderr - (2.5f64 / 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn models_are_listed_in_fixed_order() {
        let rows = aggregate(&[run(ModelKind::Mlp, 1.0), run(ModelKind::Gatr, 1.0), run(ModelKind::Transformer, 1.0)]);
        let models: Vec<_> = rows.iter().map(|r| r.model).collect();
        assert_eq!(models, ModelKind::ALL);
    }

    #[test]
    fn metrics_parser_rejects_bad_header() {
        assert!(parse_metrics("a,b,c\n").is_err());
        assert_eq!(parse_metrics("split,mse,stderr\neval,1e-3,2e-4\n").unwrap(), vec![("eval".into(), 1e-3, 2e-4)]);
    }
}
