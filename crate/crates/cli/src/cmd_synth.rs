//! `synth`: generate a synthetic corpus with known ground-truth QoE.
//!
//! The output directory receives the standard corpus layout (manifest plus
//! one trace CSV per video), the effective generator config for replay, and
//! an `overall.csv` giving each video's overall QoE — defined as the mean of
//! its ground-truth series — for pooling studies.

use std::path::PathBuf;

use clap::Args;
use qoe_lstm_core::{gen_corpus, Result, SynthConfig};

use crate::common::{ensure_dir, read_json, write_json_pretty, write_overall_csv};
use crate::Ctx;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config JSON; missing fields take defaults. Omit the flag
    /// for the default 14x8x120s corpus.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Directory to write the corpus into (created if absent).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs, ctx: &Ctx) -> Result<()> {
    let mut config: SynthConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    config.validate()?;

    let corpus = gen_corpus(&config)?;
    ensure_dir(&args.out)?;
    corpus.save(&args.out)?;
    write_json_pretty(&args.out.join("synth_config.json"), &config)?;

    let overall: Vec<(String, f64)> = corpus
        .traces
        .iter()
        .map(|trace| {
            let truth = trace
                .ground_truth_qoe
                .as_ref()
                .expect("generated traces always carry ground truth");
            let mean = truth.iter().sum::<f64>() / truth.len() as f64;
            (trace.meta.video_id.clone(), mean)
        })
        .collect();
    write_overall_csv(&args.out.join("overall.csv"), &overall)?;

    println!(
        "wrote {} traces ({}s each) to {}",
        corpus.traces.len(),
        config.duration,
        args.out.display()
    );
    Ok(())
}
