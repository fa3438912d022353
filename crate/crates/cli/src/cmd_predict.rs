//! `predict`: per-second QoE series for one trace, from one weight file.
//!
//! Point `--trace` at a trace CSV (corpus traces are plain CSVs, so any
//! file from a corpus directory works too). A bare CSV carries no manifest
//! metadata, so the video id comes from the file name and the score scale
//! from the model — which is the scale its outputs live on anyway.

use std::path::PathBuf;

use clap::Args;
use qoe_lstm_core::{predict, Result, TrainedModel};

use crate::common::{read_bare_trace, write_prediction_csv};
use crate::Ctx;

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Weight file written by `train`.
    #[arg(long)]
    pub model: PathBuf,

    /// Trace CSV (`t,stsq,playing[,qoe]`).
    #[arg(long)]
    pub trace: PathBuf,

    /// Output CSV (`t,qoe_pred`).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &PredictArgs, _ctx: &Ctx) -> Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let trace = read_bare_trace(&args.trace, &model)?;
    let preds = predict(&model, &trace)?;
    write_prediction_csv(&args.out, &preds)?;
    println!(
        "wrote {} predictions for {} to {}",
        preds.len(),
        trace.meta.video_id,
        args.out.display()
    );
    Ok(())
}
