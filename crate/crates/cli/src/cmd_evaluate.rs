//! `evaluate`: score per-fold models on their test videos.
//!
//! Folds are scored in parallel and merged in fold order, so the report is
//! identical no matter how many workers run. The report carries per-session
//! scores, mean and median aggregates of each measure, and — since every
//! scored video necessarily has a ground-truth series — pooled overall-QoE
//! correlations against the mean of each video's ground truth.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use qoe_lstm_core::metrics::{pool_overall, render_table, PoolMethod, PoolResult, SessionScores};
use qoe_lstm_core::{
    predict, Corpus, Error, MetricsReport, Result, SplitPlan, TrainedModel,
};

use crate::common::{
    ensure_dir, model_file_name, parse_protocol, split_plan_path, warn, write_json_pretty,
    write_prediction_csv,
};
use crate::cmd_train::split_checked;
use crate::Ctx;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Corpus directory (manifest + trace CSVs).
    #[arg(long)]
    pub corpus: PathBuf,

    /// Split protocol, used only when the models directory has no
    /// split_plan.json: netflix, lfovia, leave-p-out, random, fixed-80-20.
    #[arg(long)]
    pub protocol: Option<String>,

    /// Patterns held out per fold (leave-p-out only).
    #[arg(long, default_value_t = 5)]
    pub p: usize,

    /// Training fraction (random protocol only).
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,

    /// Directory of per-fold weight files from `train`.
    #[arg(long)]
    pub models: PathBuf,

    /// Outage threshold as a fraction of the QoE range.
    #[arg(long, default_value_t = 0.10)]
    pub or_delta: f64,

    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,

    /// Also write each test video's predicted series here as
    /// `<video_id>.csv`, ready for `pool`.
    #[arg(long)]
    pub predictions_out: Option<PathBuf>,
}

/// One scored test video: its scores and the predicted/truth series kept
/// for pooling and optional prediction dumps.
pub struct ScoredVideo {
    pub video_id: String,
    pub scores: SessionScores,
    pub pred: Vec<f64>,
    pub truth_mean: f64,
}

/// Score every active fold's models on their test videos, in parallel,
/// merging results in (fold, video) order.
pub fn evaluate_folds(
    corpus: &Corpus,
    plan: &SplitPlan,
    models_dir: &Path,
    or_delta: f64,
) -> Result<Vec<ScoredVideo>> {
    let active: Vec<(usize, &qoe_lstm_core::Fold)> = plan
        .folds
        .iter()
        .enumerate()
        .filter(|(_, fold)| !fold.degenerate)
        .collect();
    if active.is_empty() {
        return Err(Error::InvalidConfig(
            "split plan has no usable folds to evaluate".into(),
        ));
    }

    let per_fold: Vec<Vec<ScoredVideo>> = active
        .par_iter()
        .map(|&(idx, fold)| -> Result<Vec<ScoredVideo>> {
            let model = TrainedModel::load(&models_dir.join(model_file_name(idx)))?;
            let mut scored = Vec::with_capacity(fold.test.len());
            for video_id in &fold.test {
                let trace = corpus.trace(video_id).ok_or_else(|| {
                    Error::UnknownVideoId(video_id.clone())
                })?;
                let truth = trace.ground_truth_qoe.as_ref().ok_or_else(|| {
                    Error::InconsistentCorpus(format!(
                        "video {video_id} has no ground-truth QoE; it cannot be scored"
                    ))
                })?;
                let pred = predict(&model, trace)?;
                let scores = SessionScores::compute(
                    video_id.clone(),
                    &pred,
                    truth,
                    trace.meta.qoe_scale,
                    or_delta,
                )?;
                let truth_mean = truth.iter().sum::<f64>() / truth.len() as f64;
                scored.push(ScoredVideo {
                    video_id: video_id.clone(),
                    scores,
                    pred,
                    truth_mean,
                });
            }
            Ok(scored)
        })
        .collect::<Result<_>>()?;
    Ok(per_fold.into_iter().flatten().collect())
}

/// Pool each scored video's predicted series and correlate with the mean
/// of its ground truth, for both pooling methods. Videos scored in several
/// folds count once (first occurrence). Pooling needs at least three
/// videos and non-constant series; when undefined, it is omitted with a
/// warning rather than failing the whole report.
pub fn pool_against_truth_means(scored: &[ScoredVideo]) -> Option<Vec<PoolResult>> {
    let mut seen = HashSet::new();
    let mut series = Vec::new();
    let mut overall = Vec::new();
    for video in scored {
        if seen.insert(video.video_id.as_str()) {
            series.push(video.pred.clone());
            overall.push(video.truth_mean);
        }
    }
    if series.len() < 3 {
        return None;
    }
    let mut results = Vec::new();
    for method in [PoolMethod::Mean, PoolMethod::Median] {
        match pool_overall(&series, &overall, method) {
            Ok(result) => results.push(result),
            Err(err) => {
                warn("pooling_undefined", &err.to_string());
                return None;
            }
        }
    }
    Some(results)
}

/// Assemble the full report for a set of scored videos.
pub fn build_report(
    label: impl Into<String>,
    corpus: &Corpus,
    or_delta: f64,
    scored: Vec<ScoredVideo>,
) -> (MetricsReport, Vec<ScoredVideo>) {
    let pooling = pool_against_truth_means(&scored);
    let vqa_metric = corpus
        .traces
        .first()
        .map(|t| t.meta.vqa_metric.clone())
        .unwrap_or_default();
    let sessions = scored.iter().map(|v| v.scores.clone()).collect();
    let report = MetricsReport::from_sessions(label, vqa_metric, or_delta, sessions, pooling);
    (report, scored)
}

/// Load the split plan stored next to the models, or rebuild it from the
/// protocol flags when absent.
fn resolve_plan(args: &EvaluateArgs, corpus: &Corpus, ctx: &Ctx) -> Result<SplitPlan> {
    let stored = split_plan_path(&args.models);
    if stored.is_file() {
        return SplitPlan::load(&stored);
    }
    let name = args.protocol.as_deref().ok_or_else(|| {
        Error::InvalidConfig(format!(
            "no {} next to the models; pass --protocol to rebuild the plan",
            crate::common::SPLIT_PLAN_FILE
        ))
    })?;
    let protocol = parse_protocol(name, args.p, args.fraction, ctx.seed_or_default())?;
    split_checked(corpus, &protocol)
}

pub fn run(args: &EvaluateArgs, ctx: &Ctx) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let plan = resolve_plan(args, &corpus, ctx)?;
    let scored = evaluate_folds(&corpus, &plan, &args.models, args.or_delta)?;
    let label = args
        .models
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let (report, scored) = build_report(label, &corpus, args.or_delta, scored);

    write_json_pretty(&args.out, &report)?;
    if let Some(dir) = &args.predictions_out {
        ensure_dir(dir)?;
        let mut seen = HashSet::new();
        for video in &scored {
            if seen.insert(video.video_id.as_str()) {
                write_prediction_csv(&dir.join(format!("{}.csv", video.video_id)), &video.pred)?;
            }
        }
    }
    print!("{}", render_table(std::slice::from_ref(&report)));
    Ok(())
}
