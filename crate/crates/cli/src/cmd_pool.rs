//! `pool`: correlate pooled per-video predictions with overall ground truth.
//!
//! `--predictions` points at a directory of `<video_id>.csv` series (as
//! written by `predict` or `evaluate --predictions-out`); `--overall` is a
//! `video_id,overall_qoe` table. Rows without a prediction file are skipped
//! with a warning, so an overall table covering a whole corpus can be used
//! against a test-split's predictions.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use qoe_lstm_core::metrics::{pool_overall, PoolMethod};
use qoe_lstm_core::{Error, Result};
use serde::Serialize;

use crate::common::{read_overall_csv, read_prediction_csv, warn, write_json_pretty};
use crate::Ctx;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Mean,
    Median,
}

impl From<MethodArg> for PoolMethod {
    fn from(arg: MethodArg) -> PoolMethod {
        match arg {
            MethodArg::Mean => PoolMethod::Mean,
            MethodArg::Median => PoolMethod::Median,
        }
    }
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// Directory of per-video prediction CSVs named `<video_id>.csv`.
    #[arg(long)]
    pub predictions: PathBuf,

    /// Overall ground truth CSV (`video_id,overall_qoe`).
    #[arg(long)]
    pub overall: PathBuf,

    /// How each series collapses to one score.
    #[arg(long, value_enum)]
    pub method: MethodArg,

    /// Result JSON path; omit to print the JSON to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What `pool` writes: the correlation pair plus the audit trail of which
/// videos entered it and their pooled scores.
#[derive(Debug, Serialize)]
struct PoolReport {
    method: PoolMethod,
    lcc: f64,
    srocc: f64,
    videos: Vec<String>,
    pooled: Vec<f64>,
    overall_truth: Vec<f64>,
}

pub fn run(args: &PoolArgs, _ctx: &Ctx) -> Result<()> {
    let overall_rows = read_overall_csv(&args.overall)?;
    let mut videos = Vec::new();
    let mut series = Vec::new();
    let mut truth = Vec::new();
    for (video_id, overall) in overall_rows {
        let path = args.predictions.join(format!("{video_id}.csv"));
        if !path.is_file() {
            warn(
                "missing_prediction",
                &format!("no prediction file for {video_id}; row skipped"),
            );
            continue;
        }
        series.push(read_prediction_csv(&path)?);
        truth.push(overall);
        videos.push(video_id);
    }
    if videos.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "pooling needs at least 2 videos with predictions, found {}",
            videos.len()
        )));
    }

    let method = PoolMethod::from(args.method);
    let result = pool_overall(&series, &truth, method)?;
    let report = PoolReport {
        method,
        lcc: result.lcc,
        srocc: result.srocc,
        videos,
        pooled: result.pooled,
        overall_truth: truth,
    };
    match &args.out {
        Some(path) => {
            write_json_pretty(path, &report)?;
            println!(
                "pooled {} videos ({:?}): LCC {:.4}, SROCC {:.4}",
                report.videos.len(),
                method,
                report.lcc,
                report.srocc
            );
        }
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(|source| Error::Json {
                path: "<stdout>".into(),
                source,
            })?;
            println!("{text}");
        }
    }
    Ok(())
}
