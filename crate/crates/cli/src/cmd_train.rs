//! `train`: fit one model per cross-validation fold.
//!
//! The output directory receives the split plan and one weight file per
//! trained fold (`fold_NNN.model.json`), each carrying full provenance.
//! Folds train with seeds derived from the master seed and the fold index,
//! so every fold is independently reproducible — and, because the files are
//! keyed by fold index, reproducible independently of scheduling order.

use std::path::{Path, PathBuf};

use clap::Args;
use qoe_lstm_core::numerics::derive_seed;
use rayon::prelude::*;

use qoe_lstm_core::{
    fit, split, verify_no_leakage, Corpus, Error, FeatureMode, Fold, NetworkConfig, Result,
    SplitPlan, TrainConfig,
};

use crate::common::{
    ensure_dir, model_file_name, now_rfc3339, parse_features, parse_net, parse_protocol,
    split_plan_path, warn,
};
use crate::Ctx;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory (manifest + trace CSVs).
    #[arg(long)]
    pub corpus: PathBuf,

    /// Split protocol: netflix, lfovia, leave-p-out, random, fixed-80-20.
    #[arg(long)]
    pub protocol: String,

    /// Patterns held out per fold (leave-p-out only).
    #[arg(long, default_value_t = 5)]
    pub p: usize,

    /// Training fraction (random protocol only).
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,

    /// Fold index to train, or `all`.
    #[arg(long, default_value = "all")]
    pub fold: String,

    /// Architecture as `layers,units`.
    #[arg(long, default_value = "2,22")]
    pub net: String,

    /// Feature mode: full, stsq-only, or ablation:SET (e.g. ablation:stsq+pi).
    #[arg(long, default_value = "full")]
    pub features: String,

    /// Optimizer config JSON; missing fields take defaults.
    #[arg(long)]
    pub train_config: Option<PathBuf>,

    /// Directory to write the split plan and weight files into.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_fold(text: &str) -> Result<Option<usize>> {
    if text == "all" {
        return Ok(None);
    }
    text.parse::<usize>().map(Some).map_err(|_| {
        Error::InvalidConfig(format!("--fold expects an index or 'all', got '{text}'"))
    })
}

/// Outcome summary of one trained fold, for progress lines.
struct FoldSummary {
    idx: usize,
    train_videos: usize,
    epochs_run: usize,
    final_loss: f64,
}

/// Fit the selected folds of `plan` and write one weight file each.
///
/// Shared by `train` (serial) and `sweep` (fold-parallel). `only` restricts
/// training to a single fold index; otherwise every non-degenerate fold
/// trains, and degenerate ones are skipped with a warning. Each fold's seed
/// derives from the base seed and the fold index, so outputs do not depend
/// on scheduling.
pub fn train_folds(
    corpus: &Corpus,
    plan: &SplitPlan,
    only: Option<usize>,
    net_config: &NetworkConfig,
    base_config: &TrainConfig,
    mode: FeatureMode,
    out_dir: &Path,
    deterministic: bool,
    parallel: bool,
    quiet: bool,
) -> Result<Vec<usize>> {
    let mut selected: Vec<(usize, &Fold)> = Vec::new();
    for (idx, fold) in plan.folds.iter().enumerate() {
        if let Some(one) = only {
            if idx != one {
                continue;
            }
            if fold.degenerate {
                return Err(Error::InvalidConfig(format!(
                    "fold {idx} is degenerate (empty train or test side)"
                )));
            }
        } else if fold.degenerate {
            warn(
                "degenerate_fold",
                &format!("fold {idx} has an empty side; skipped"),
            );
            continue;
        }
        selected.push((idx, fold));
    }
    if selected.is_empty() {
        return Err(Error::InvalidConfig(match only {
            Some(idx) => format!("fold {idx} does not exist in the split plan"),
            None => "every fold in the split plan is degenerate".into(),
        }));
    }

    let train_one = |&(idx, fold): &(usize, &Fold)| -> Result<FoldSummary> {
        let train_traces = corpus.select(&fold.train)?;
        let mut config = *base_config;
        config.seed = derive_seed(base_config.seed, &[idx as u64]);
        let outcome = fit(&train_traces, net_config, &config, mode)?;
        let mut model = outcome.model;
        model.provenance.corpus = corpus.name.clone();
        model.provenance.fold = Some(idx);
        if !deterministic {
            model.provenance.created_at = Some(now_rfc3339());
        }
        model.save(&out_dir.join(model_file_name(idx)))?;
        Ok(FoldSummary {
            idx,
            train_videos: fold.train.len(),
            epochs_run: model.provenance.epochs_run,
            final_loss: model.provenance.final_loss,
        })
    };

    let summaries: Vec<FoldSummary> = if parallel {
        selected.par_iter().map(train_one).collect::<Result<_>>()?
    } else {
        selected.iter().map(train_one).collect::<Result<_>>()?
    };
    if !quiet {
        for s in &summaries {
            println!(
                "fold {}: {} training videos, {} epochs, final loss {:.6}",
                s.idx, s.train_videos, s.epochs_run, s.final_loss
            );
        }
    }
    Ok(summaries.iter().map(|s| s.idx).collect())
}

/// Split a corpus under a protocol and refuse plans with train/test leakage.
pub fn split_checked(corpus: &Corpus, protocol: &qoe_lstm_core::Protocol) -> Result<SplitPlan> {
    let plan = split(corpus, protocol)?;
    let violations = verify_no_leakage(corpus, &plan)?;
    if !violations.is_empty() {
        return Err(Error::InconsistentCorpus(format!(
            "split plan leaks {} train/test pairs; first: {}",
            violations.len(),
            violations[0]
        )));
    }
    Ok(plan)
}

pub fn run(args: &TrainArgs, ctx: &Ctx) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let protocol = parse_protocol(&args.protocol, args.p, args.fraction, ctx.seed_or_default())?;
    let plan = split_checked(&corpus, &protocol)?;

    let (layers, units) = parse_net(&args.net)?;
    let mode = parse_features(&args.features)?;
    let net_config = NetworkConfig {
        layers,
        units,
        input_dim: mode.dim(),
    };
    let mut base_config = match &args.train_config {
        Some(path) => TrainConfig::from_json_file(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        base_config.seed = seed;
    }
    let only = parse_fold(&args.fold)?;

    ensure_dir(&args.out)?;
    plan.save(&split_plan_path(&args.out))?;
    let trained = train_folds(
        &corpus,
        &plan,
        only,
        &net_config,
        &base_config,
        mode,
        &args.out,
        ctx.deterministic,
        false,
        false,
    )?;
    println!(
        "trained {} fold(s) into {}",
        trained.len(),
        args.out.display()
    );
    Ok(())
}
