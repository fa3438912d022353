//! scratch: corpus-space map for the synthetic benchmark (E15).

use qoe_lstm_core::features::featurize;
use qoe_lstm_core::metrics::{lcc, outage_rate};
use qoe_lstm_core::synth::{OracleParams, StallParams, StsqProcess};
use qoe_lstm_core::{
    fit, gen_corpus, predict, split, Corpus, FeatureMode, NetworkConfig, Protocol, SessionTrace,
    SynthConfig, TrainConfig, TrainedModel,
};

fn corpus_cfg(alpha: f64, switch: usize, levels: usize, duration: usize) -> SynthConfig {
    SynthConfig {
        n_contents: 14,
        n_patterns: 8,
        duration,
        stalls: StallParams {
            min_per_video: 1,
            max_per_video: 1,
            min_duration: 2,
            max_duration: 3,
        },
        stsq: StsqProcess {
            levels,
            switch_period: switch,
        },
        oracle: OracleParams {
            smoothing: alpha,
            ..OracleParams::default()
        },
        seed: 0,
    }
}

fn affine_baseline(train: &[&SessionTrace], test: &[&SessionTrace]) -> f64 {
    let mut ata = [[0.0f64; 4]; 4];
    let mut atb = [0.0f64; 4];
    for trace in train {
        let truth = trace.ground_truth_qoe.as_ref().unwrap();
        let tr = qoe_lstm_core::features::compute_tr(&trace.playing);
        for t in 0..trace.stsq.len() {
            let row = [
                trace.stsq[t],
                if trace.playing[t] { 1.0 } else { 0.0 },
                tr[t],
                1.0,
            ];
            for i in 0..4 {
                for j in 0..4 {
                    ata[i][j] += row[i] * row[j];
                }
                atb[i] += row[i] * truth[t];
            }
        }
    }
    let mut a = ata;
    let mut b = atb;
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let k = a[row][col] / a[col][col];
            for j in col..4 {
                a[row][j] -= k * a[col][j];
            }
            b[row] -= k * b[col];
        }
    }
    let mut w = [0.0f64; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for j in row + 1..4 {
            s -= a[row][j] * w[j];
        }
        w[row] = s / a[row][row];
    }
    let mut lccs = Vec::new();
    for trace in test {
        let truth = trace.ground_truth_qoe.as_ref().unwrap();
        let tr = qoe_lstm_core::features::compute_tr(&trace.playing);
        let preds: Vec<f64> = (0..trace.stsq.len())
            .map(|t| {
                let pi = if trace.playing[t] { 1.0 } else { 0.0 };
                (w[0] * trace.stsq[t] + w[1] * pi + w[2] * tr[t] + w[3]).clamp(0.0, 100.0)
            })
            .collect();
        if let Ok(v) = lcc(&preds, truth) {
            lccs.push(v);
        }
    }
    lccs.iter().sum::<f64>() / lccs.len() as f64
}

fn score_set(model: &TrainedModel, corpus: &Corpus, ids: &[String]) -> (f64, f64) {
    let mut lccs = Vec::new();
    let mut ors = Vec::new();
    for id in ids {
        let trace = corpus.trace(id).unwrap();
        let truth = trace.ground_truth_qoe.as_ref().unwrap();
        let preds = predict(model, trace).unwrap();
        if let Ok(v) = lcc(&preds, truth) {
            lccs.push(v);
        }
        ors.push(outage_rate(&preds, truth, (0.0, 100.0), 0.10).unwrap());
    }
    (
        lccs.iter().sum::<f64>() / lccs.len() as f64,
        ors.iter().sum::<f64>() / ors.len() as f64,
    )
}

fn windowed_scores(model: &TrainedModel, corpus: &Corpus, ids: &[String]) -> (f64, f64) {
    let mut lccs = Vec::new();
    let mut ors = Vec::new();
    for id in ids {
        let trace = corpus.trace(id).unwrap();
        let truth = trace.ground_truth_qoe.as_ref().unwrap();
        let feats = featurize(trace, &model.norm, model.feature_mode).unwrap();
        let preds: Vec<f64> = (0..feats.x.len())
            .map(|t| {
                let start = t.saturating_sub(3);
                let (ys, _) = model
                    .network
                    .run_sequence(&feats.x[start..=t], None)
                    .unwrap();
                model
                    .norm
                    .denormalize_qoe(*ys.last().unwrap())
                    .clamp(0.0, 100.0)
            })
            .collect();
        lccs.push(lcc(&preds, truth).unwrap());
        ors.push(outage_rate(&preds, truth, (0.0, 100.0), 0.10).unwrap());
    }
    (
        lccs.iter().sum::<f64>() / lccs.len() as f64,
        ors.iter().sum::<f64>() / ors.len() as f64,
    )
}

#[test]
fn map_corpora() {
    let start = std::time::Instant::now();
    let grid: &[(f64, usize, usize, usize)] = &[
        (0.05, 12, 4, 60),
        (0.1, 12, 4, 60),
        (0.05, 16, 4, 60),
    ];
    for &(alpha, switch, levels, duration) in grid {
        let config = corpus_cfg(alpha, switch, levels, duration);
        let corpus = gen_corpus(&config).unwrap();
        let plan = split(&corpus, &Protocol::FixedFraction8020 { seed: 0 }).unwrap();
        let fold = &plan.folds[0];
        let train = corpus.select(&fold.train).unwrap();
        let test = corpus.select(&fold.test).unwrap();
        let base = affine_baseline(&train, &test);

        let mut best: Option<(u64, f64)> = None;
        let mut lines = Vec::new();
        for seed in 0..6u64 {
            let tc = TrainConfig {
                learning_rate: 3e-3,
                epochs: 120,
                patience: Some(30),
                seed,
                ..TrainConfig::default()
            };
            let outcome = fit(&train, &NetworkConfig::default(), &tc, FeatureMode::Full).unwrap();
            let (sel_lcc, sel_or) = score_set(&outcome.model, &corpus, &fold.train);
            let (t_lcc, t_or) = score_set(&outcome.model, &corpus, &fold.test);
            lines.push(format!(
                "    seed {seed}: train {sel_lcc:.3}/{sel_or:.0}% test {t_lcc:.3}/{t_or:.0}%"
            ));
            let score = sel_lcc - sel_or / 100.0;
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((seed, score));
            }
        }
        let (best_seed, _) = best.unwrap();
        let tc = TrainConfig {
            learning_rate: 3e-3,
            epochs: 120,
            patience: Some(30),
            seed: best_seed,
            ..TrainConfig::default()
        };
        let outcome = fit(&train, &NetworkConfig::default(), &tc, FeatureMode::Full).unwrap();
        let (t_lcc, t_or) = score_set(&outcome.model, &corpus, &fold.test);
        let (w_lcc, w_or) = windowed_scores(&outcome.model, &corpus, &fold.test);
        println!(
            "alpha {alpha} switch {switch}: base {base:.3} | SEL seed {best_seed} test {t_lcc:.3}/{t_or:.0}% | windowed {w_lcc:.3}/{w_or:.0}% | {:?}",
            start.elapsed()
        );
        for line in lines {
            println!("{line}");
        }
    }
}
