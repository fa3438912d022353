//! `sweep`: train and evaluate a grid of layer/unit architectures.
//!
//! For each grid point the command trains every fold (folds in parallel),
//! evaluates, and writes `models_lL_dD/` plus `report_lL_dD.json`. A final
//! `sweep.csv` tabulates the mean and median of each measure per point, and
//! the combined table prints to stdout. Grid points run sequentially so
//! progress is legible; parallelism lives inside each point.

use std::path::PathBuf;

use clap::Args;
use qoe_lstm_core::metrics::render_table;
use qoe_lstm_core::{Corpus, Error, MetricsReport, NetworkConfig, Result, TrainConfig};

use crate::cmd_evaluate::{build_report, evaluate_folds};
use crate::cmd_train::{split_checked, train_folds};
use crate::common::{
    ensure_dir, parse_features, parse_protocol, parse_usize_list, split_plan_path,
    write_json_pretty,
};
use crate::Ctx;

#[derive(Debug, Args)]
pub struct SweepArgs {
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

    /// Comma-separated layer counts to try.
    #[arg(long, default_value = "1,2,3")]
    pub layers: String,

    /// Comma-separated unit counts to try.
    #[arg(long, default_value = "1,4,10,22,30")]
    pub units: String,

    /// Feature mode: full, stsq-only, or ablation:SET.
    #[arg(long, default_value = "full")]
    pub features: String,

    /// Optimizer config JSON; missing fields take defaults.
    #[arg(long)]
    pub train_config: Option<PathBuf>,

    /// Outage threshold as a fraction of the QoE range.
    #[arg(long, default_value_t = 0.10)]
    pub or_delta: f64,

    /// Directory for per-point models, reports, and sweep.csv.
    #[arg(long)]
    pub out: PathBuf,
}

fn csv_cell(agg: Option<&qoe_lstm_core::metrics::Aggregate>, pick: fn(f64, f64) -> f64) -> String {
    match agg {
        Some(a) => format!("{:.6}", pick(a.mean, a.median)),
        None => String::new(),
    }
}

/// One sweep.csv row per grid point: the mean and median of each measure.
fn sweep_csv(rows: &[(usize, usize, &MetricsReport)]) -> String {
    let mut out = String::from(
        "layers,units,lcc_mean,lcc_median,srocc_mean,srocc_median,\
         rmse_n_mean,rmse_n_median,or_mean,or_median\n",
    );
    let mean = |m: f64, _md: f64| m;
    let median = |_m: f64, md: f64| md;
    for &(l, d, report) in rows {
        out.push_str(&format!(
            "{l},{d},{},{},{},{},{},{},{},{}\n",
            csv_cell(report.lcc.as_ref(), mean),
            csv_cell(report.lcc.as_ref(), median),
            csv_cell(report.srocc.as_ref(), mean),
            csv_cell(report.srocc.as_ref(), median),
            csv_cell(report.rmse_n_percent.as_ref(), mean),
            csv_cell(report.rmse_n_percent.as_ref(), median),
            csv_cell(report.or_percent.as_ref(), mean),
            csv_cell(report.or_percent.as_ref(), median),
        ));
    }
    out
}

pub fn run(args: &SweepArgs, ctx: &Ctx) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let protocol = parse_protocol(&args.protocol, args.p, args.fraction, ctx.seed_or_default())?;
    let plan = split_checked(&corpus, &protocol)?;
    let layers = parse_usize_list("--layers", &args.layers)?;
    let units = parse_usize_list("--units", &args.units)?;
    let mode = parse_features(&args.features)?;
    let mut base_config = match &args.train_config {
        Some(path) => TrainConfig::from_json_file(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = ctx.seed {
        base_config.seed = seed;
    }

    ensure_dir(&args.out)?;
    plan.save(&split_plan_path(&args.out))?;

    let mut reports: Vec<(usize, usize, MetricsReport)> = Vec::new();
    for &l in &layers {
        for &d in &units {
            let label = format!("l{l}-d{d}");
            let models_dir = args.out.join(format!("models_l{l}_d{d}"));
            ensure_dir(&models_dir)?;
            let net_config = NetworkConfig {
                layers: l,
                units: d,
                input_dim: mode.dim(),
            };
            train_folds(
                &corpus,
                &plan,
                None,
                &net_config,
                &base_config,
                mode,
                &models_dir,
                ctx.deterministic,
                true,
                true,
            )?;
            let scored = evaluate_folds(&corpus, &plan, &models_dir, args.or_delta)?;
            let (report, _) = build_report(label.clone(), &corpus, args.or_delta, scored);
            write_json_pretty(&args.out.join(format!("report_l{l}_d{d}.json")), &report)?;
            let mean_lcc = report
                .lcc
                .as_ref()
                .map(|a| format!("{:.4}", a.mean))
                .unwrap_or_else(|| "undef".into());
            println!("swept {label}: mean LCC {mean_lcc}");
            reports.push((l, d, report));
        }
    }

    let rows: Vec<(usize, usize, &MetricsReport)> =
        reports.iter().map(|(l, d, r)| (*l, *d, r)).collect();
    let csv_path = args.out.join("sweep.csv");
    std::fs::write(&csv_path, sweep_csv(&rows)).map_err(|source| Error::Io {
        path: csv_path.display().to_string(),
        source,
    })?;

    let table: Vec<MetricsReport> = reports.into_iter().map(|(_, _, r)| r).collect();
    print!("{}", render_table(&table));
    Ok(())
}
