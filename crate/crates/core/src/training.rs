//! Fitting a network to training traces, and the trained-model artifact.
//!
//! Training is windowed and stateless: each trace becomes overlapping
//! windows of `timestep` seconds (stride 1), every window starts from
//! the all-zero cell state, and the optimizer minimizes mean-squared
//! error on [0, 1]-normalized QoE targets with Adam. Inference is
//! stateful: [`predict`] runs the whole trace through one continuous
//! state thread and maps outputs back to the corpus score scale.
//!
//! Everything here is deterministic given the seed: weight init and the
//! per-epoch window shuffle draw from streams derived from
//! `TrainConfig::seed`, batches accumulate gradients in a fixed order,
//! and saved model files round-trip every `f64` bit-exactly — two runs
//! with equal inputs produce byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{featurize, FeatureMode, FeatureSeries, NormSpec, SessionTrace};
use crate::lstm::{LstmNetwork, NetworkConfig};
use crate::numerics::{derive_seed, Rng};

/// Stream tags for the two independent random streams training uses.
const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// Optimization hyperparameters. All fields have defaults, so a JSON
/// config file may set only what it overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Window length in seconds (the temporal-dependency order plus
    /// one); training truth windows slide by one second.
    pub timestep: usize,
    /// Upper bound on training epochs.
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds weight init and the epoch shuffle.
    pub seed: u64,
    /// Reshuffle window order every epoch.
    pub shuffle: bool,
    /// Stop after this many epochs without the training loss improving
    /// (by more than 1e-9). `None` disables early stopping.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            timestep: 4,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            shuffle: true,
            patience: Some(20),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timestep == 0 {
            return Err(Error::InvalidConfig("timestep must be >= 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Read a config from a JSON file; missing fields take defaults.
    pub fn from_json_file(path: &Path) -> Result<TrainConfig> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: TrainConfig =
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.display().to_string(),
                source,
            })?;
        config.validate()?;
        Ok(config)
    }
}

/// One training window: `timestep` feature vectors and their normalized
/// targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

/// Cut one trace's features and normalized targets into sliding windows
/// of `timestep` seconds, stride 1. Each window trains from a zero
/// state, so windows are independent samples.
pub fn make_windows(
    features: &FeatureSeries,
    targets_norm: &[f64],
    timestep: usize,
    video_id: &str,
) -> Result<Vec<Window>> {
    if timestep == 0 {
        return Err(Error::InvalidConfig("timestep must be >= 1".into()));
    }
    if features.x.len() != targets_norm.len() {
        return Err(Error::LengthMismatch {
            left: features.x.len(),
            right: targets_norm.len(),
        });
    }
    let len = features.x.len();
    if len < timestep {
        return Err(Error::TraceTooShort {
            video_id: video_id.to_string(),
            len,
            timestep,
        });
    }
    Ok((0..=len - timestep)
        .map(|start| Window {
            xs: features.x[start..start + timestep].to_vec(),
            ys: targets_norm[start..start + timestep].to_vec(),
        })
        .collect())
}

/// Adam state over the flat parameter vector.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Adam {
    fn new(len: usize) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: 0,
        }
    }

    fn step(&mut self, config: &TrainConfig, params: &mut [f64], grads: &[f64]) {
        self.steps += 1;
        let bias1 = 1.0 - config.beta1.powi(self.steps as i32);
        let bias2 = 1.0 - config.beta2.powi(self.steps as i32);
        for i in 0..params.len() {
            self.m[i] = config.beta1 * self.m[i] + (1.0 - config.beta1) * grads[i];
            self.v[i] = config.beta2 * self.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
}

/// Where a model came from: enough to re-run the exact training job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Corpus name (filled by the caller that owns the corpus).
    pub corpus: String,
    /// Fold index within the split plan, when trained per-fold.
    pub fold: Option<usize>,
    /// The training videos, for audit.
    pub train_videos: Vec<String>,
    pub network_config: NetworkConfig,
    pub train_config: TrainConfig,
    /// Training loss of the last epoch (MSE on normalized targets).
    pub final_loss: f64,
    /// Epochs actually run (early stopping may cut `epochs` short).
    pub epochs_run: usize,
    /// RFC 3339 timestamp; omitted entirely for reproducible output.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub created_at: Option<String>,
}

/// A fitted network plus everything needed to apply it: the
/// normalization derived from its training fold and the feature mode it
/// was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub network: LstmNetwork,
    pub norm: NormSpec,
    pub feature_mode: FeatureMode,
    pub provenance: Provenance,
}

/// Model files this build writes and reads.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

impl TrainedModel {
    /// Write the model as JSON. Floats survive the round trip
    /// bit-exactly, so equal models produce equal files.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedFormatVersion {
                found: file.format_version,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        Ok(file.model)
    }
}

/// A finished fit: the model and its per-epoch training-loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: TrainedModel,
    /// Mean training loss per epoch (MSE on normalized targets).
    pub loss_curve: Vec<f64>,
}

/// Fit a network to a training fold.
///
/// Derives normalization from the fold only, cuts every trace into
/// windows, and runs mini-batch Adam. Deterministic given
/// `train_config.seed`; aborts with the failing epoch and batch if the
/// loss leaves the finite range.
pub fn fit(
    fold: &[&SessionTrace],
    net_config: &NetworkConfig,
    train_config: &TrainConfig,
    mode: FeatureMode,
) -> Result<FitOutcome> {
    net_config.validate()?;
    train_config.validate()?;
    mode.validate()?;
    if fold.is_empty() {
        return Err(Error::InvalidConfig(
            "training fold contains no videos".into(),
        ));
    }
    if net_config.input_dim != mode.dim() {
        return Err(Error::DimensionMismatch {
            what: "network input vs feature mode",
            expected: mode.dim(),
            got: net_config.input_dim,
        });
    }

    let norm = NormSpec::derive(fold)?;
    let mut windows: Vec<Window> = Vec::new();
    for trace in fold {
        let truth = trace.ground_truth_qoe.as_ref().ok_or_else(|| {
            Error::InconsistentCorpus(format!(
                "video {} has no ground-truth QoE; it cannot train a model",
                trace.meta.video_id
            ))
        })?;
        let features = featurize(trace, &norm, mode)?;
        let targets: Vec<f64> = truth.iter().map(|&q| norm.normalize_qoe(q)).collect();
        windows.extend(make_windows(
            &features,
            &targets,
            train_config.timestep,
            &trace.meta.video_id,
        )?);
    }

    let mut init_rng = Rng::new(derive_seed(train_config.seed, &[INIT_STREAM]));
    let mut shuffle_rng = Rng::new(derive_seed(train_config.seed, &[SHUFFLE_STREAM]));
    let network = LstmNetwork::init(*net_config, &mut init_rng)?;
    let mut params = network.flatten();
    let mut net = network;
    let mut adam = Adam::new(params.len());

    let mut loss_curve = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut epochs_since_best = 0usize;
    let mut order: Vec<usize> = (0..windows.len()).collect();

    for epoch in 0..train_config.epochs {
        if train_config.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        let mut epoch_loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(train_config.batch_size).enumerate() {
            let mut grad_sum = vec![0.0; params.len()];
            let mut batch_loss_sum = 0.0;
            for &window_idx in batch {
                let window = &windows[window_idx];
                let (loss, grads) = net.backward(&window.xs, &window.ys)?;
                batch_loss_sum += loss;
                for (acc, g) in grad_sum.iter_mut().zip(grads.flatten()) {
                    *acc += g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let batch_loss = batch_loss_sum * scale;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            for g in grad_sum.iter_mut() {
                *g *= scale;
            }
            adam.step(train_config, &mut params, &grad_sum);
            net.for_each_param_mut(|i, p| *p = params[i]);
            epoch_loss_sum += batch_loss_sum;
        }
        let epoch_loss = epoch_loss_sum / windows.len() as f64;
        loss_curve.push(epoch_loss);

        if epoch_loss + 1e-9 < best_loss {
            best_loss = epoch_loss;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if let Some(patience) = train_config.patience {
                if epochs_since_best >= patience {
                    break;
                }
            }
        }
    }

    let final_loss = *loss_curve.last().expect("epochs >= 1 guarantees one entry");
    let model = TrainedModel {
        network: net,
        norm,
        feature_mode: mode,
        provenance: Provenance {
            corpus: String::new(),
            fold: None,
            train_videos: fold.iter().map(|t| t.meta.video_id.clone()).collect(),
            network_config: *net_config,
            train_config: *train_config,
            final_loss,
            epochs_run: loss_curve.len(),
            created_at: None,
        },
    };
    Ok(FitOutcome { model, loss_curve })
}

/// Per-second QoE prediction for one trace, on the model's score scale.
///
/// Features are extracted under the *model's* normalization (never the
/// trace's own extrema), the network runs statefully from the zero
/// state, and outputs are denormalized and clamped to the score scale.
pub fn predict(model: &TrainedModel, trace: &SessionTrace) -> Result<Vec<f64>> {
    let features = featurize(trace, &model.norm, model.feature_mode)?;
    if features.dim != model.network.config.input_dim {
        return Err(Error::DimensionMismatch {
            what: "trace features vs model input",
            expected: model.network.config.input_dim,
            got: features.dim,
        });
    }
    let (ys, _final_state) = model.network.run_sequence(&features.x, None)?;
    Ok(ys
        .into_iter()
        .map(|y| {
            model
                .norm
                .denormalize_qoe(y)
                .clamp(model.norm.qoe_lo, model.norm.qoe_hi)
        })
        .collect())
}
