//! Seeds × configurations grid summarized as mean and sd per configuration.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{run_pipeline, EvalReport, PipelineConfig};
use crate::error::{Error, Result};
use crate::numerics::{mean, sample_sd};

pub const BENCHMARK_HEADER: &str = "method,auc_mean,auc_sd,f1_mean,f1_sd,fp_mean,fp_sd";

fn proposed() -> String {
    "proposed".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRun {
    /// Label written to the `method` column.
    #[serde(default = "proposed")]
    pub name: String,
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub runs: Vec<BenchmarkRun>,
    pub seeds: Vec<u64>,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(Error::config("runs", "at least one configuration required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed required"));
        }
        for run in &self.runs {
            run.config.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub method: String,
    pub reports: Vec<EvalReport>,
    /// First error met across the row's seeds; the row is then failed.
    pub error: Option<String>,
}

impl BenchmarkRow {
    fn stat(&self, f: impl Fn(&EvalReport) -> Option<f64>) -> Option<(f64, f64)> {
        let v: Vec<f64> = self.reports.iter().filter_map(f).collect();
        if v.is_empty() {
            None
        } else {
            Some((mean(&v), sample_sd(&v)))
        }
    }

    pub fn auc(&self) -> Option<(f64, f64)> {
        self.stat(|r| Some(r.auc))
    }

    pub fn f1(&self) -> Option<(f64, f64)> {
        self.stat(|r| Some(r.f1))
    }

    /// Over the seeds where feature precision is defined.
    pub fn feature_precision(&self) -> Option<(f64, f64)> {
        self.stat(|r| r.feature_precision)
    }
}

/// Runs every configuration under every seed (the config's own seed is
/// replaced) and groups the reports by configuration.
pub fn benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    cfg.validate()?;
    let jobs: Vec<(usize, u64)> = (0..cfg.runs.len())
        .flat_map(|r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let run = |&(r, seed): &(usize, u64)| {
        let config = PipelineConfig {
            seed,
            ..cfg.runs[r].config.clone()
        };
        run_pipeline(&config).map(|out| out.report)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<EvalReport>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<EvalReport>> = jobs.iter().map(run).collect();

    let mut rows: Vec<BenchmarkRow> = cfg
        .runs
        .iter()
        .map(|r| BenchmarkRow {
            method: r.name.clone(),
            reports: Vec::new(),
            error: None,
        })
        .collect();
    for (&(r, seed), res) in jobs.iter().zip(results) {
        match res {
            Ok(rep) => rows[r].reports.push(rep),
            Err(e) => {
                warn!("benchmark row `{}` seed {seed} failed: {e}", rows[r].method);
                rows[r].error.get_or_insert(format!("seed {seed}: {e}"));
            }
        }
    }
    Ok(rows)
}

/// Failed rows get `NA` statistics and a trailing comment with the error.
pub fn benchmark_csv(rows: &[BenchmarkRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str(BENCHMARK_HEADER);
    out.push('\n');
    let cell = |s: Option<(f64, f64)>| match s {
        Some((m, sd)) => format!("{m},{sd}"),
        None => "NA,NA".to_string(),
    };
    for row in rows {
        if row.error.is_some() {
            let _ = writeln!(out, "{},NA,NA,NA,NA,NA,NA", row.method);
        } else {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.method,
                cell(row.auc()),
                cell(row.f1()),
                cell(row.feature_precision())
            );
        }
    }
    for row in rows {
        if let Some(e) = &row.error {
            let _ = writeln!(out, "# failed {}: {}", row.method, e.replace('\n', " "));
        }
    }
    out
}
