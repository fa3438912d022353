//! Session traces and per-second feature extraction.
//!
//! A trace records, at one-second resolution, the short-time video
//! quality (STSQ) of the segment being rendered, whether playback was
//! running or stalled, and optionally a subjective QoE ground truth.
//! The model consumes three derived features per second:
//!
//! * `stsq_norm` — STSQ min-max normalized into [0, 1], flipped for
//!   distance-like metrics where lower raw values mean better quality
//! * `pi` — playback indicator: 1 while playing, 0 while stalled
//! * `tr_norm` — seconds since the most recent rebuffering event,
//!   normalized by the longest training-session duration
//!
//! Normalization bounds always come from declared metric ranges or from
//! the *training* traces alone, never from test data; the resulting
//! [`NormSpec`] travels with the trained model so inference applies the
//! identical affine maps.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether larger raw VQA values mean better or worse pictures.
/// Distance-like metrics (e.g. STRRED, NIQE) are `LowerBetter` and get
/// flipped during normalization so that 1 is always "best".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

/// Per-video metadata carried by the corpus manifest alongside each
/// trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Unique id of this session within its corpus.
    pub video_id: String,
    /// Id of the source content; videos cut from the same content share it.
    pub content_id: String,
    /// Id of the playout pattern (quality/stall schedule).
    pub pattern_id: String,
    /// Name of the VQA metric behind the `stsq` column.
    pub vqa_metric: String,
    /// Declared (lo, hi) range of that metric, when the metric defines one.
    pub vqa_range: Option<(f64, f64)>,
    /// Orientation of the metric's scale.
    pub vqa_orientation: Orientation,
    /// (min, max) of the QoE scale predictions live on.
    pub qoe_scale: (f64, f64),
}

/// One playback session at one-second resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub meta: TraceMeta,
    /// Short-time video quality of the rendered segment, per second.
    pub stsq: Vec<f64>,
    /// Play (true) / stall (false) indicator, per second.
    pub playing: Vec<bool>,
    /// Subjective QoE ground truth, per second, when the corpus has one.
    pub ground_truth_qoe: Option<Vec<f64>>,
}

impl SessionTrace {
    /// Session length in seconds.
    pub fn duration(&self) -> usize {
        self.stsq.len()
    }

    /// Check the internal consistency documented on each field.
    pub fn validate(&self) -> Result<()> {
        let path = || self.meta.video_id.clone();
        if self.meta.video_id.is_empty() {
            return Err(Error::BadTrace {
                path: String::from("<unnamed>"),
                reason: "empty video_id".into(),
            });
        }
        if self.stsq.is_empty() {
            return Err(Error::BadTrace {
                path: path(),
                reason: "trace has no samples".into(),
            });
        }
        if self.playing.len() != self.stsq.len() {
            return Err(Error::BadTrace {
                path: path(),
                reason: format!(
                    "playing column has {} samples, stsq has {}",
                    self.playing.len(),
                    self.stsq.len()
                ),
            });
        }
        if let Some(qoe) = &self.ground_truth_qoe {
            if qoe.len() != self.stsq.len() {
                return Err(Error::BadTrace {
                    path: path(),
                    reason: format!(
                        "qoe column has {} samples, stsq has {}",
                        qoe.len(),
                        self.stsq.len()
                    ),
                });
            }
            if qoe.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "ground-truth qoe" });
            }
        }
        if self.stsq.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "stsq" });
        }
        let (lo, hi) = self.meta.qoe_scale;
        if !(lo < hi) {
            return Err(Error::BadTrace {
                path: path(),
                reason: format!("qoe_scale ({lo}, {hi}) is not an increasing range"),
            });
        }
        if let Some((rlo, rhi)) = self.meta.vqa_range {
            if !(rlo < rhi) {
                return Err(Error::BadTrace {
                    path: path(),
                    reason: format!("vqa_range ({rlo}, {rhi}) is not an increasing range"),
                });
            }
        }
        Ok(())
    }
}

/// Playback indicator: 1.0 while playing, 0.0 while stalled.
pub fn compute_pi(playing: &[bool]) -> Vec<f64> {
    playing.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect()
}

/// Seconds since the most recent rebuffering event.
///
/// Zero during a stall. While playing, counts up from the end of the
/// last stall; before any stall it counts from session start, treating
/// the start as the reference event — so an all-playing prefix reads
/// `1, 2, 3, ...`.
pub fn compute_tr(playing: &[bool]) -> Vec<f64> {
    let mut out = Vec::with_capacity(playing.len());
    let mut since = 0.0;
    for &p in playing {
        since = if p { since + 1.0 } else { 0.0 };
        out.push(since);
    }
    out
}

/// Where the STSQ normalization bounds came from — a declared metric
/// range, or minima/maxima measured on the training traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormSource {
    DeclaredRange,
    TrainingData,
}

/// Affine normalization spec, derived from training data (or declared
/// ranges) and stored with the model so inference inverts it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    /// STSQ bounds: raw values map lo -> 0, hi -> 1.
    pub stsq_lo: f64,
    pub stsq_hi: f64,
    /// Flip after scaling (for lower-is-better metrics): x -> 1 - x.
    pub stsq_flip: bool,
    /// Where the STSQ bounds came from.
    pub stsq_source: NormSource,
    /// Longest training-session duration; divides the rebuffering clock.
    pub t_max: f64,
    /// QoE target bounds: the training scale maps onto [0, 1].
    pub qoe_lo: f64,
    pub qoe_hi: f64,
}

impl NormSpec {
    /// Derive a spec from training traces only.
    ///
    /// STSQ bounds come from the declared `vqa_range` when every trace
    /// declares the same one; otherwise from the training minima/maxima
    /// (keeping test data out of the bounds). The QoE scale and metric
    /// orientation must agree across the traces.
    pub fn derive(traces: &[&SessionTrace]) -> Result<NormSpec> {
        if traces.is_empty() {
            return Err(Error::InvalidConfig(
                "cannot derive normalization from an empty training set".into(),
            ));
        }
        let first = &traces[0].meta;
        for t in traces {
            if t.meta.vqa_orientation != first.vqa_orientation {
                return Err(Error::InconsistentCorpus(
                    "traces mix VQA orientations".into(),
                ));
            }
            if t.meta.qoe_scale != first.qoe_scale {
                return Err(Error::InconsistentCorpus(format!(
                    "traces mix qoe scales: {:?} vs {:?}",
                    t.meta.qoe_scale, first.qoe_scale
                )));
            }
        }

        let all_declared = traces.iter().all(|t| t.meta.vqa_range.is_some());
        let (stsq_lo, stsq_hi, source) = if all_declared {
            let range = first.vqa_range.expect("checked above");
            for t in traces {
                if t.meta.vqa_range != Some(range) {
                    return Err(Error::InconsistentCorpus(format!(
                        "traces declare different vqa ranges: {:?} vs {:?}",
                        t.meta.vqa_range, range
                    )));
                }
            }
            (range.0, range.1, NormSource::DeclaredRange)
        } else {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for t in traces {
                for &v in &t.stsq {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            (lo, hi, NormSource::TrainingData)
        };
        if !(stsq_lo < stsq_hi) {
            return Err(Error::DegenerateNormalization {
                what: "stsq",
                lo: stsq_lo,
                hi: stsq_hi,
            });
        }

        let t_max = traces.iter().map(|t| t.duration()).max().unwrap_or(0) as f64;
        Ok(NormSpec {
            stsq_lo,
            stsq_hi,
            stsq_flip: first.vqa_orientation == Orientation::LowerBetter,
            stsq_source: source,
            t_max,
            qoe_lo: first.qoe_scale.0,
            qoe_hi: first.qoe_scale.1,
        })
    }

    /// Raw STSQ -> [0, 1] (for in-range input), orientation-corrected so
    /// 1 is always best.
    #[inline]
    pub fn normalize_stsq(&self, v: f64) -> f64 {
        let scaled = (v - self.stsq_lo) / (self.stsq_hi - self.stsq_lo);
        if self.stsq_flip {
            1.0 - scaled
        } else {
            scaled
        }
    }

    /// Inverse of [`NormSpec::normalize_stsq`].
    #[inline]
    pub fn denormalize_stsq(&self, n: f64) -> f64 {
        let scaled = if self.stsq_flip { 1.0 - n } else { n };
        self.stsq_lo + scaled * (self.stsq_hi - self.stsq_lo)
    }

    /// Rebuffering clock -> [0, 1]. Sessions longer than any training
    /// session saturate at 1 rather than leaving the feature range.
    #[inline]
    pub fn normalize_tr(&self, seconds: f64) -> f64 {
        (seconds / self.t_max).min(1.0)
    }

    /// QoE on the corpus scale -> [0, 1] training target.
    #[inline]
    pub fn normalize_qoe(&self, q: f64) -> f64 {
        (q - self.qoe_lo) / (self.qoe_hi - self.qoe_lo)
    }

    /// Inverse of [`NormSpec::normalize_qoe`], without clamping.
    #[inline]
    pub fn denormalize_qoe(&self, n: f64) -> f64 {
        self.qoe_lo + n * (self.qoe_hi - self.qoe_lo)
    }
}

/// Which feature columns the model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FeatureMode {
    /// The standard three-feature input: [stsq_norm, pi, tr_norm].
    Full,
    /// Quality-only corpora (no reliable stall data): STSQ as usual, the
    /// playback indicator pinned to 1, and the rebuffering clock replaced
    /// by its no-stall ramp (t+1)/t_max. Still three-dimensional.
    StsqOnly,
    /// An ablation subset; dimensionality equals the number of selected
    /// features, keeping the canonical [stsq, pi, tr] order.
    Subset(FeatureSet),
}

/// Selection of feature columns for ablation runs. At least one must be
/// set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub stsq: bool,
    pub pi: bool,
    pub tr: bool,
}

impl FeatureSet {
    /// Number of selected features.
    pub fn len(&self) -> usize {
        self.stsq as usize + self.pi as usize + self.tr as usize
    }

    /// True when no feature is selected (an invalid state).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FeatureMode {
    /// Input dimension a network must have to consume this mode.
    pub fn dim(&self) -> usize {
        match self {
            FeatureMode::Full | FeatureMode::StsqOnly => 3,
            FeatureMode::Subset(set) => set.len(),
        }
    }

    /// Validate the documented constraints (subsets must be non-empty).
    pub fn validate(&self) -> Result<()> {
        if let FeatureMode::Subset(set) = self {
            if set.is_empty() {
                return Err(Error::InvalidConfig(
                    "feature subset selects no features".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-second feature vectors for one trace, plus the normalization that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    /// One feature vector per second, `dim` wide.
    pub x: Vec<Vec<f64>>,
    /// Feature dimension (matches the mode that produced the series).
    pub dim: usize,
    /// The normalization used, for inversion and audit.
    pub norm: NormSpec,
}

/// Extract the model's input features for one trace under a fixed
/// normalization. Deterministic: equal inputs give equal output.
pub fn featurize(trace: &SessionTrace, norm: &NormSpec, mode: FeatureMode) -> Result<FeatureSeries> {
    trace.validate()?;
    mode.validate()?;
    if !(norm.t_max > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "normalization t_max must be positive, got {}",
            norm.t_max
        )));
    }
    if !(norm.stsq_lo < norm.stsq_hi) {
        return Err(Error::DegenerateNormalization {
            what: "stsq",
            lo: norm.stsq_lo,
            hi: norm.stsq_hi,
        });
    }

    let duration = trace.duration();
    let stsq_norm: Vec<f64> = trace.stsq.iter().map(|&v| norm.normalize_stsq(v)).collect();
    let (pi, tr_norm): (Vec<f64>, Vec<f64>) = match mode {
        FeatureMode::StsqOnly => {
            // Treat the whole session as uninterrupted playback.
            let all_playing = vec![true; duration];
            let ramp = compute_tr(&all_playing)
                .into_iter()
                .map(|s| norm.normalize_tr(s))
                .collect();
            (vec![1.0; duration], ramp)
        }
        _ => {
            let tr = compute_tr(&trace.playing)
                .into_iter()
                .map(|s| norm.normalize_tr(s))
                .collect();
            (compute_pi(&trace.playing), tr)
        }
    };

    let set = match mode {
        FeatureMode::Full | FeatureMode::StsqOnly => FeatureSet {
            stsq: true,
            pi: true,
            tr: true,
        },
        FeatureMode::Subset(set) => set,
    };
    let dim = set.len();
    let mut x = Vec::with_capacity(duration);
    for t in 0..duration {
        let mut row = Vec::with_capacity(dim);
        if set.stsq {
            row.push(stsq_norm[t]);
        }
        if set.pi {
            row.push(pi[t]);
        }
        if set.tr {
            row.push(tr_norm[t]);
        }
        x.push(row);
    }
    Ok(FeatureSeries { x, dim, norm: *norm })
}

/// Read one trace from `t,stsq,playing[,qoe]` CSV, attaching the given
/// manifest metadata.
pub fn read_trace_csv(path: &Path, meta: TraceMeta) -> Result<SessionTrace> {
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path_str.clone(),
        source: e,
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (t_col, stsq_col, playing_col) = match (col("t"), col("stsq"), col("playing")) {
        (Some(t), Some(s), Some(p)) => (t, s, p),
        _ => {
            return Err(Error::BadTrace {
                path: path_str,
                reason: format!(
                    "header must contain t, stsq, playing (got: {})",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            })
        }
    };
    let qoe_col = col("qoe");

    let bad = |reason: String| Error::BadTrace {
        path: path_str.clone(),
        reason,
    };

    let mut stsq = Vec::new();
    let mut playing = Vec::new();
    let mut qoe = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let t: usize = field(t_col)
            .parse()
            .map_err(|_| bad(format!("row {row_idx}: bad t value '{}'", field(t_col))))?;
        if t != row_idx {
            return Err(bad(format!(
                "row {row_idx}: t must be contiguous from 0, got {t}"
            )));
        }
        let s: f64 = field(stsq_col)
            .parse()
            .map_err(|_| bad(format!("row {row_idx}: bad stsq value '{}'", field(stsq_col))))?;
        let p = match field(playing_col) {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad(format!("row {row_idx}: bad playing value '{other}'"))),
        };
        stsq.push(s);
        playing.push(p);
        if let Some(qc) = qoe_col {
            let raw = field(qc);
            if !raw.is_empty() {
                let q: f64 = raw
                    .parse()
                    .map_err(|_| bad(format!("row {row_idx}: bad qoe value '{raw}'")))?;
                qoe.push(q);
            }
        }
    }

    let ground_truth_qoe = if qoe.is_empty() {
        None
    } else if qoe.len() == stsq.len() {
        Some(qoe)
    } else {
        return Err(bad(format!(
            "qoe column is partial: {} of {} rows",
            qoe.len(),
            stsq.len()
        )));
    };

    let trace = SessionTrace {
        meta,
        stsq,
        playing,
        ground_truth_qoe,
    };
    trace.validate()?;
    Ok(trace)
}

/// Write one trace as `t,stsq,playing[,qoe]` CSV. The qoe column is
/// present exactly when the trace carries ground truth.
pub fn write_trace_csv(path: &Path, trace: &SessionTrace) -> Result<()> {
    trace.validate()?;
    let path_str = path.display().to_string();
    let mut out = String::new();
    let with_qoe = trace.ground_truth_qoe.is_some();
    out.push_str(if with_qoe { "t,stsq,playing,qoe\n" } else { "t,stsq,playing\n" });
    for t in 0..trace.duration() {
        let playing = if trace.playing[t] { 1 } else { 0 };
        match &trace.ground_truth_qoe {
            Some(qoe) => {
                out.push_str(&format!("{t},{},{playing},{}\n", trace.stsq[t], qoe[t]));
            }
            None => {
                out.push_str(&format!("{t},{},{playing}\n", trace.stsq[t]));
            }
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path_str.clone(),
        source: e,
    })?;
    file.write_all(out.as_bytes()).map_err(|e| Error::Io {
        path: path_str,
        source: e,
    })
}
