//! Synthetic playback corpora with a known QoE ground truth.
//!
//! Real subjective-score databases cannot ship with a code repository,
//! so end-to-end checks run against generated traces whose ground-truth
//! QoE comes from a fixed oracle. The oracle is deliberately
//! *non-Markovian in the instantaneous features*: the score at second
//! `t` depends on the minimum quality over the last `memory_depth`
//! seconds and on how recently playback resumed, so any model that looks
//! only at the current feature vector cannot reproduce it — which is
//! exactly the property a recurrent QoE model is supposed to exploit.
//!
//! Oracle dynamics on a 0-100 scale, with `s(t)` the normalized quality
//! of the rendered segment:
//!
//! * `q(0) = 100 * s(0)`
//! * stalled seconds: `q(t) = max(0, q(t-1) - stall_drop_per_sec)`
//! * playing seconds: `q(t)` moves toward
//!   `smoothing * q(t-1) + (1 - smoothing) * 100 * min(s over last memory_depth seconds)`;
//!   for the first `memory_depth` seconds after a stall ends the move is
//!   damped to `recovery_damping` of its full size (slow trust recovery)
//!
//! Every draw is keyed off `(seed, content index, pattern index)`, so a
//! trace is a pure function of the config: contents own the quality-level
//! palette, patterns own the switching and stall schedules. Two videos
//! with the same pattern index stall and switch at the same seconds even
//! though their absolute quality levels differ.

use serde::{Deserialize, Serialize};

use crate::datasets::Corpus;
use crate::error::{Error, Result};
use crate::features::{compute_tr, Orientation, SessionTrace, TraceMeta};
use crate::numerics::{derive_seed, Rng};

/// Constants of the ground-truth QoE process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    /// Weight of the previous score in the playback update (0, 1).
    pub smoothing: f64,
    /// Score lost per stalled second, on the 0-100 scale.
    pub stall_drop_per_sec: f64,
    /// Length in seconds of the quality-memory window (>= 1).
    pub memory_depth: usize,
    /// Fraction of a playback update applied while recovering from a
    /// stall (0, 1].
    pub recovery_damping: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            smoothing: 0.7,
            stall_drop_per_sec: 4.0,
            memory_depth: 5,
            recovery_damping: 0.5,
        }
    }
}

impl OracleParams {
    fn validate(&self) -> Result<()> {
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "oracle smoothing must be in (0, 1), got {}",
                self.smoothing
            )));
        }
        if !(self.stall_drop_per_sec >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "oracle stall_drop_per_sec must be >= 0, got {}",
                self.stall_drop_per_sec
            )));
        }
        if self.memory_depth == 0 {
            return Err(Error::InvalidConfig(
                "oracle memory_depth must be >= 1".into(),
            ));
        }
        if !(self.recovery_damping > 0.0 && self.recovery_damping <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "oracle recovery_damping must be in (0, 1], got {}",
                self.recovery_damping
            )));
        }
        Ok(())
    }
}

/// Stall-schedule generation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StallParams {
    /// Lower bound on rebuffering events per video (before placement
    /// drops events that no longer fit).
    pub min_per_video: usize,
    /// Upper bound on rebuffering events per video (inclusive).
    pub max_per_video: usize,
    /// Shortest stall in seconds (>= 1).
    pub min_duration: usize,
    /// Longest stall in seconds (>= min_duration).
    pub max_duration: usize,
}

impl Default for StallParams {
    fn default() -> Self {
        StallParams {
            min_per_video: 1,
            max_per_video: 2,
            min_duration: 2,
            max_duration: 8,
        }
    }
}

/// Piecewise-constant quality process parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StsqProcess {
    /// Number of discrete quality levels in each content's palette.
    pub levels: usize,
    /// Seconds between level switches (>= 1).
    pub switch_period: usize,
}

impl Default for StsqProcess {
    fn default() -> Self {
        StsqProcess {
            levels: 4,
            switch_period: 6,
        }
    }
}

/// Full description of a synthetic corpus. A config plus nothing else
/// determines every byte of the generated traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Number of distinct source contents.
    pub n_contents: usize,
    /// Number of distinct playout patterns per content.
    pub n_patterns: usize,
    /// Trace length in seconds.
    pub duration: usize,
    pub stalls: StallParams,
    pub stsq: StsqProcess,
    pub oracle: OracleParams,
    /// Master seed; all per-content and per-pattern streams derive from it.
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_contents: 14,
            n_patterns: 8,
            duration: 120,
            stalls: StallParams::default(),
            stsq: StsqProcess::default(),
            oracle: OracleParams::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Validate the documented ranges.
    pub fn validate(&self) -> Result<()> {
        if self.n_contents == 0 || self.n_patterns == 0 {
            return Err(Error::InvalidConfig(
                "corpus shape must be at least 1x1".into(),
            ));
        }
        if self.duration == 0 {
            return Err(Error::InvalidConfig("duration must be >= 1".into()));
        }
        if self.stsq.levels == 0 || self.stsq.switch_period == 0 {
            return Err(Error::InvalidConfig(
                "stsq process needs levels >= 1 and switch_period >= 1".into(),
            ));
        }
        if self.stalls.min_duration == 0 || self.stalls.max_duration < self.stalls.min_duration {
            return Err(Error::InvalidConfig(format!(
                "stall durations must satisfy 1 <= min <= max, got {}..{}",
                self.stalls.min_duration, self.stalls.max_duration
            )));
        }
        if self.stalls.max_per_video < self.stalls.min_per_video {
            return Err(Error::InvalidConfig(format!(
                "stall counts must satisfy min <= max, got {}..{}",
                self.stalls.min_per_video, self.stalls.max_per_video
            )));
        }
        self.oracle.validate()
    }
}

/// Ground-truth QoE for a session, given normalized per-second quality
/// and the play/stall indicator. See the module docs for the dynamics.
pub fn oracle_qoe(stsq_norm: &[f64], playing: &[bool], params: &OracleParams) -> Result<Vec<f64>> {
    params.validate()?;
    if stsq_norm.len() != playing.len() {
        return Err(Error::LengthMismatch {
            left: stsq_norm.len(),
            right: playing.len(),
        });
    }
    if stsq_norm.is_empty() {
        return Ok(Vec::new());
    }
    if stsq_norm.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what: "stsq_norm" });
    }

    let k = params.memory_depth;
    let tr = compute_tr(playing);
    let mut seen_stall = !playing[0];
    let mut q = Vec::with_capacity(stsq_norm.len());
    q.push((100.0 * stsq_norm[0]).clamp(0.0, 100.0));
    for t in 1..stsq_norm.len() {
        let prev = q[t - 1];
        let next = if !playing[t] {
            seen_stall = true;
            (prev - params.stall_drop_per_sec).max(0.0)
        } else {
            let window_start = t + 1 - k.min(t + 1);
            let min_quality = stsq_norm[window_start..=t]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            let target = params.smoothing * prev + (1.0 - params.smoothing) * 100.0 * min_quality;
            if seen_stall && tr[t] <= k as f64 {
                // Fresh out of a stall: move only part of the way.
                prev + params.recovery_damping * (target - prev)
            } else {
                target
            }
        };
        q.push(next.clamp(0.0, 100.0));
    }
    Ok(q)
}

/// Sorted, non-overlapping stall intervals `[start, start+len)` for one
/// pattern, drawn from its dedicated stream.
fn draw_stalls(rng: &mut Rng, config: &SynthConfig) -> Vec<(usize, usize)> {
    let duration = config.duration;
    let span = (config.stalls.max_per_video - config.stalls.min_per_video) as u64;
    let n = config.stalls.min_per_video + rng.next_below(span + 1) as usize;
    let mut stalls: Vec<(usize, usize)> = Vec::new();
    for _ in 0..n {
        let span = config.stalls.max_duration - config.stalls.min_duration;
        let len = config.stalls.min_duration + rng.next_below(span as u64 + 1) as usize;
        // Keep a playing margin at both ends so every stall has a
        // resume second inside the trace.
        if duration < len + 6 {
            continue;
        }
        let latest_start = duration - len - 3;
        let mut placed = false;
        for _ in 0..30 {
            let start = 3 + rng.next_below((latest_start - 3 + 1) as u64) as usize;
            let overlaps = stalls
                .iter()
                .any(|&(s, l)| start < s + l + 2 && s < start + len + 2);
            if !overlaps {
                stalls.push((start, len));
                placed = true;
                break;
            }
        }
        if !placed {
            // No room left; deterministic schedules simply drop the stall.
            continue;
        }
    }
    stalls.sort_unstable();
    stalls
}

/// Generate one trace. Pure in `(config, content_idx, pattern_idx)`.
pub fn gen_trace(config: &SynthConfig, content_idx: usize, pattern_idx: usize) -> Result<SessionTrace> {
    config.validate()?;
    if content_idx >= config.n_contents || pattern_idx >= config.n_patterns {
        return Err(Error::InvalidConfig(format!(
            "trace index ({content_idx}, {pattern_idx}) outside corpus shape {}x{}",
            config.n_contents, config.n_patterns
        )));
    }

    // Contents own quality values; patterns own schedules. Stream tags
    // keep the two families of draws independent.
    let mut content_rng = Rng::new(derive_seed(config.seed, &[1, content_idx as u64]));
    let mut pattern_rng = Rng::new(derive_seed(config.seed, &[2, pattern_idx as u64]));

    // Evenly spread quality ladder with a small per-content jitter, so
    // palettes differ across contents but cover a similar span.
    let levels = config.stsq.levels;
    let palette: Vec<f64> = (0..levels)
        .map(|j| {
            let base = if levels == 1 {
                0.6
            } else {
                0.2 + 0.75 * j as f64 / (levels - 1) as f64
            };
            (base + content_rng.uniform(-0.04, 0.04)).clamp(0.05, 1.0)
        })
        .collect();

    // Pattern: a level index per segment, plus the stall schedule.
    let n_segments = config.duration.div_ceil(config.stsq.switch_period);
    let schedule: Vec<usize> = (0..n_segments)
        .map(|_| pattern_rng.next_below(levels as u64) as usize)
        .collect();
    let stalls = draw_stalls(&mut pattern_rng, config);

    let mut playing = vec![true; config.duration];
    for &(start, len) in &stalls {
        for slot in playing.iter_mut().skip(start).take(len) {
            *slot = false;
        }
    }
    let stsq: Vec<f64> = (0..config.duration)
        .map(|t| palette[schedule[t / config.stsq.switch_period]])
        .collect();

    // The declared metric range is [0, 1], so normalized quality equals
    // the raw value here.
    let qoe = oracle_qoe(&stsq, &playing, &config.oracle)?;

    Ok(SessionTrace {
        meta: TraceMeta {
            video_id: format!("c{content_idx:02}_p{pattern_idx:02}"),
            content_id: format!("content{content_idx:02}"),
            pattern_id: format!("pattern{pattern_idx:02}"),
            vqa_metric: "synthetic-quality".into(),
            vqa_range: Some((0.0, 1.0)),
            vqa_orientation: Orientation::HigherBetter,
            qoe_scale: (0.0, 100.0),
        },
        stsq,
        playing,
        ground_truth_qoe: Some(qoe),
    })
}

/// Generate the full `n_contents x n_patterns` corpus.
pub fn gen_corpus(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let mut traces = Vec::with_capacity(config.n_contents * config.n_patterns);
    for c in 0..config.n_contents {
        for p in 0..config.n_patterns {
            traces.push(gen_trace(config, c, p)?);
        }
    }
    Corpus::new(format!("synth-{}x{}", config.n_contents, config.n_patterns), traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steady(params: &OracleParams, level: f64, len: usize) -> Vec<f64> {
        oracle_qoe(&vec![level; len], &vec![true; len], params).unwrap()
    }

    #[test]
    fn constant_top_quality_without_stalls_stays_at_100() {
        let params = OracleParams {
            smoothing: 0.5,
            memory_depth: 3,
            ..OracleParams::default()
        };
        let q = steady(&params, 1.0, 50);
        assert!(q.iter().all(|&v| v == 100.0), "got {q:?}");
    }

    #[test]
    fn constant_quality_is_a_fixed_point() {
        let q = steady(&OracleParams::default(), 0.6, 30);
        assert!(q.iter().all(|&v| (v - 60.0).abs() < 1e-12), "got {q:?}");
    }

    #[test]
    fn stall_drops_score_linearly_to_closed_form() {
        // Steady 60, then a 5-second stall: the score loses
        // stall_drop_per_sec per stalled second -> 60 - 4*5 = 40.
        let params = OracleParams::default();
        let mut playing = vec![true; 20];
        for slot in playing.iter_mut().skip(10).take(5) {
            *slot = false;
        }
        let q = oracle_qoe(&vec![0.6; 20], &playing, &params).unwrap();
        assert!((q[9] - 60.0).abs() < 1e-12);
        for s in 1..=5 {
            assert!(
                (q[9 + s] - (60.0 - 4.0 * s as f64)).abs() < 1e-12,
                "after {s} stalled seconds: {}",
                q[9 + s]
            );
        }
        assert!((q[14] - 40.0).abs() < 1e-12);
    }

    #[test]
    fn deep_stall_floors_at_zero() {
        let params = OracleParams::default();
        let mut playing = vec![true; 40];
        for slot in playing.iter_mut().skip(5).take(30) {
            *slot = false;
        }
        let q = oracle_qoe(&vec![0.5; 40], &playing, &params).unwrap();
        assert_eq!(q[34], 0.0, "50 - 4*30 clamps to zero");
        // Monotone non-increasing over the stall.
        for t in 6..=34 {
            assert!(q[t] <= q[t - 1]);
        }
    }

    #[test]
    fn recovery_after_a_stall_is_damped() {
        // Resume at t=15 from q=40 with steady quality 0.6: the full
        // update would be 0.7*40 + 0.3*60 = 46, damping 0.5 gives 43.
        let params = OracleParams::default();
        let mut playing = vec![true; 30];
        for slot in playing.iter_mut().skip(10).take(5) {
            *slot = false;
        }
        let q = oracle_qoe(&vec![0.6; 30], &playing, &params).unwrap();
        assert!((q[14] - 40.0).abs() < 1e-12);
        assert!((q[15] - 43.0).abs() < 1e-12, "damped first update, got {}", q[15]);
        // Second recovering second: target 0.7*43 + 18 = 48.1, damped
        // halfway from 43 -> 45.55.
        assert!((q[16] - 45.55).abs() < 1e-12, "got {}", q[16]);
    }

    #[test]
    fn playback_update_uses_window_minimum_not_current_level() {
        // One low-quality second inside the memory window keeps pulling
        // the target down even after quality recovers.
        let params = OracleParams::default(); // memory_depth 5
        let mut stsq = vec![0.8; 20];
        stsq[6] = 0.2;
        let q = oracle_qoe(&stsq, &vec![true; 20], &params).unwrap();
        // At t=8 the window covers t=4..=8 and still contains the dip,
        // so the target uses 0.2 although the current level is 0.8.
        let expected = 0.7 * q[7] + 0.3 * 20.0;
        assert!((q[8] - expected).abs() < 1e-12, "got {}, want {expected}", q[8]);
        // Once the dip leaves the window (t >= 12), targets use 0.8 again.
        let expected12 = 0.7 * q[11] + 0.3 * 80.0;
        assert!((q[12] - expected12).abs() < 1e-12);
    }

    #[test]
    fn oracle_scores_stay_inside_scale_bounds() {
        let mut rng = Rng::new(17);
        for _ in 0..50 {
            let len = 30 + rng.next_below(60) as usize;
            let stsq: Vec<f64> = (0..len).map(|_| rng.uniform(0.0, 1.0)).collect();
            let playing: Vec<bool> = (0..len).map(|_| rng.next_f64() > 0.3).collect();
            let q = oracle_qoe(&stsq, &playing, &OracleParams::default()).unwrap();
            assert!(q.iter().all(|&v| (0.0..=100.0).contains(&v)));
        }
    }

    #[test]
    fn traces_are_pure_functions_of_config_and_indices() {
        let config = SynthConfig {
            n_contents: 3,
            n_patterns: 2,
            duration: 40,
            seed: 9,
            ..SynthConfig::default()
        };
        let a = gen_trace(&config, 1, 1).unwrap();
        let b = gen_trace(&config, 1, 1).unwrap();
        assert_eq!(a, b);
        let other_seed = SynthConfig { seed: 10, ..config };
        let c = gen_trace(&other_seed, 1, 1).unwrap();
        assert_ne!(a.stsq, c.stsq, "different seeds must change the quality track");
    }

    #[test]
    fn same_pattern_shares_schedules_across_contents() {
        let config = SynthConfig {
            n_contents: 3,
            n_patterns: 2,
            duration: 60,
            seed: 4,
            ..SynthConfig::default()
        };
        let a = gen_trace(&config, 0, 1).unwrap();
        let b = gen_trace(&config, 2, 1).unwrap();
        assert_eq!(a.playing, b.playing, "same pattern must stall at the same seconds");
        // Level switches happen at the same seconds even though the
        // palette values differ.
        let switches = |t: &SessionTrace| -> Vec<usize> {
            (1..t.stsq.len()).filter(|&i| t.stsq[i] != t.stsq[i - 1]).collect()
        };
        assert_eq!(switches(&a), switches(&b));
        assert_ne!(a.stsq, b.stsq, "different contents draw different palettes");
    }

    #[test]
    fn corpus_has_expected_shape_and_unique_ids() {
        let config = SynthConfig {
            n_contents: 3,
            n_patterns: 2,
            duration: 20,
            seed: 1,
            ..SynthConfig::default()
        };
        let corpus = gen_corpus(&config).unwrap();
        assert_eq!(corpus.traces.len(), 6);
        let mut ids: Vec<&str> = corpus.traces.iter().map(|t| t.meta.video_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 6, "video ids must be unique");
        for t in &corpus.traces {
            assert_eq!(t.duration(), 20);
            assert!(t.ground_truth_qoe.is_some());
            t.validate().unwrap();
        }
    }

    #[test]
    fn ground_truth_is_not_a_function_of_current_features_alone() {
        // Search the corpus for two positions with bit-identical
        // (previous score, current features) but different next scores —
        // the witness that the oracle needs memory beyond the current
        // feature vector. Long stalls make exact matches findable: the
        // score floors at exactly 0.0, levels repeat exactly, and the
        // post-stall clock matches across resume points.
        let config = SynthConfig {
            n_contents: 2,
            n_patterns: 10,
            duration: 100,
            stalls: StallParams {
                min_per_video: 1,
                max_per_video: 2,
                min_duration: 15,
                max_duration: 25,
            },
            stsq: StsqProcess {
                levels: 3,
                switch_period: 4,
            },
            oracle: OracleParams::default(),
            seed: 13,
        };
        let corpus = gen_corpus(&config).unwrap();
        use std::collections::HashMap;
        let mut seen: HashMap<(u64, u64, bool, u64), f64> = HashMap::new();
        let mut witness = None;
        'outer: for trace in &corpus.traces {
            let q = trace.ground_truth_qoe.as_ref().unwrap();
            let tr = compute_tr(&trace.playing);
            for t in 1..trace.duration() {
                let key = (
                    q[t - 1].to_bits(),
                    trace.stsq[t].to_bits(),
                    trace.playing[t],
                    tr[t].to_bits(),
                );
                if let Some(&prior) = seen.get(&key) {
                    if (prior - q[t]).abs() > 1e-9 {
                        witness = Some((key, prior, q[t]));
                        break 'outer;
                    }
                } else {
                    seen.insert(key, q[t]);
                }
            }
        }
        assert!(
            witness.is_some(),
            "expected two equal (q(t-1), x(t)) states with different q(t)"
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = SynthConfig::default();
        config.oracle.smoothing = 1.5;
        assert!(gen_corpus(&config).is_err());
        let mut config = SynthConfig::default();
        config.stalls.max_duration = 1; // < min_duration 2
        assert!(config.validate().is_err());
        let config = SynthConfig {
            n_contents: 0,
            ..SynthConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn trace_indices_outside_shape_are_rejected() {
        let config = SynthConfig {
            n_contents: 2,
            n_patterns: 2,
            ..SynthConfig::default()
        };
        assert!(gen_trace(&config, 2, 0).is_err());
        assert!(gen_trace(&config, 0, 2).is_err());
    }
}
