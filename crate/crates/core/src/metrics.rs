//! Performance measures for continuous QoE prediction.
//!
//! Four per-session measures — [`lcc`], [`srocc`], [`rmse_n`],
//! [`outage_rate`] — plus overall-QoE pooling ([`pool_overall`]) and the
//! [`MetricsReport`] aggregation used by the evaluation pipeline.
//!
//! Conventions this module commits to (they vary across the QoE
//! literature, so reports always carry them):
//!
//! * `rmse_n` divides the raw RMSE by the declared score-range width and
//!   reports percent.
//! * `outage_rate` counts seconds whose absolute error *strictly
//!   exceeds* a fixed fraction of the score range (default 0.10); the
//!   fraction is a mandatory field of every report.
//! * Correlation on a constant series is *undefined*, not zero:
//!   [`lcc`]/[`srocc`] return an error, and report aggregation skips the
//!   session while counting the skip.
//!
//! Exactly linearly dependent inputs (in particular `a == b` and
//! `a == -b`) produce correlations of exactly `±1.0`, not merely close:
//! the Cauchy-Schwarz inequality can only be met with equality by exact
//! linear dependence, so that branch short-circuits before any square
//! root can shave an ulp.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mean. The single definition shared by pooling, report
/// aggregation, and the synthetic corpus's overall scores, so "pool the
/// truth and compare" checks can demand bitwise equality.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median with the usual midpoint convention for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median input must be finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "first series" });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "second series",
        });
    }
    Ok(())
}

/// Pearson linear correlation coefficient.
///
/// Requires equal lengths of at least two and non-constant inputs; a
/// constant series makes the coefficient undefined and is reported as
/// an error, never coerced to a number.
pub fn lcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len();
    if n < 2 {
        return Err(Error::ConstantSeries {
            which: "length-one (or empty)",
        });
    }
    let mean_a = mean(a);
    let mean_b = mean(b);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let da = a[i] - mean_a;
        let db = b[i] - mean_b;
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantSeries { which: "first" });
    }
    if syy == 0.0 {
        return Err(Error::ConstantSeries { which: "second" });
    }
    // Cauchy-Schwarz: |sxy| <= sqrt(sxx*syy), with equality only for
    // exactly linearly dependent series. Short-circuit that case so
    // perfect correlation is exactly +/-1.0 rather than 1-ulp off.
    if sxy * sxy >= sxx * syy {
        return Ok(if sxy >= 0.0 { 1.0 } else { -1.0 });
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Fractional (average) ranks: ties share the mean of the positions
/// they occupy, so `[1, 2, 2, 3]` ranks as `[1, 2.5, 2.5, 4]`.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("ranks need finite input"));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // Positions are 1-based; a tied run start..end shares the mean
        // position (start+1 + end) / 2.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson over fractional ranks.
pub fn srocc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    lcc(&fractional_ranks(a), &fractional_ranks(b))
}

fn check_scale(scale: (f64, f64)) -> Result<f64> {
    let (lo, hi) = scale;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateNormalization {
            what: "score scale",
            lo,
            hi,
        });
    }
    Ok(hi - lo)
}

/// Root-mean-squared error normalized by the score-range width, in
/// percent: `100 * sqrt(mean((pred - truth)^2)) / (hi - lo)`.
pub fn rmse_n(pred: &[f64], truth: &[f64], scale: (f64, f64)) -> Result<f64> {
    check_pair(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::LengthMismatch { left: 0, right: 0 });
    }
    let range = check_scale(scale)?;
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(100.0 * mse.sqrt() / range)
}

/// Outage rate in percent: the share of seconds whose absolute error
/// strictly exceeds `delta_fraction` of the score-range width.
pub fn outage_rate(
    pred: &[f64],
    truth: &[f64],
    scale: (f64, f64),
    delta_fraction: f64,
) -> Result<f64> {
    check_pair(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::LengthMismatch { left: 0, right: 0 });
    }
    if !(delta_fraction > 0.0) {
        return Err(Error::InvalidThreshold(delta_fraction));
    }
    let range = check_scale(scale)?;
    let threshold = delta_fraction * range;
    let outages = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| (*p - *t).abs() > threshold)
        .count();
    Ok(100.0 * outages as f64 / pred.len() as f64)
}

/// How a continuous series collapses to one overall score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMethod {
    Mean,
    Median,
}

impl PoolMethod {
    pub fn apply(self, series: &[f64]) -> f64 {
        match self {
            PoolMethod::Mean => mean(series),
            PoolMethod::Median => median(series),
        }
    }
}

/// Correlations between pooled per-video scores and overall truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolResult {
    pub method: PoolMethod,
    pub lcc: f64,
    pub srocc: f64,
    /// The pooled scalar per video, in input order, for auditing.
    pub pooled: Vec<f64>,
}

/// Pool each video's continuous series to one scalar and correlate the
/// pooled scores with the per-video overall truth.
pub fn pool_overall(
    series_per_video: &[Vec<f64>],
    overall_truth: &[f64],
    method: PoolMethod,
) -> Result<PoolResult> {
    if series_per_video.len() != overall_truth.len() {
        return Err(Error::LengthMismatch {
            left: series_per_video.len(),
            right: overall_truth.len(),
        });
    }
    for series in series_per_video {
        if series.is_empty() {
            return Err(Error::LengthMismatch { left: 0, right: 0 });
        }
    }
    let pooled: Vec<f64> = series_per_video.iter().map(|s| method.apply(s)).collect();
    Ok(PoolResult {
        method,
        lcc: lcc(&pooled, overall_truth)?,
        srocc: srocc(&pooled, overall_truth)?,
        pooled,
    })
}

/// The four measures for one evaluated session. Undefined correlations
/// (constant series) are `None`, with the reason preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScores {
    pub video_id: String,
    pub lcc: Option<f64>,
    pub srocc: Option<f64>,
    pub rmse_n_percent: f64,
    pub or_percent: f64,
    /// Why a correlation is missing, when one is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undefined_reason: Option<String>,
}

impl SessionScores {
    /// Score one session. RMSE and outage always exist; correlations may
    /// be undefined on constant series, which is recorded, not fatal.
    pub fn compute(
        video_id: impl Into<String>,
        pred: &[f64],
        truth: &[f64],
        scale: (f64, f64),
        delta_fraction: f64,
    ) -> Result<SessionScores> {
        let rmse = rmse_n(pred, truth, scale)?;
        let or = outage_rate(pred, truth, scale, delta_fraction)?;
        let (lcc_v, srocc_v, reason) = match (lcc(pred, truth), srocc(pred, truth)) {
            (Ok(l), Ok(s)) => (Some(l), Some(s), None),
            (l, s) => {
                let why = l
                    .as_ref()
                    .err()
                    .or(s.as_ref().err())
                    .map(|e| e.to_string());
                (l.ok(), s.ok(), why)
            }
        };
        Ok(SessionScores {
            video_id: video_id.into(),
            lcc: lcc_v,
            srocc: srocc_v,
            rmse_n_percent: rmse,
            or_percent: or,
            undefined_reason: reason,
        })
    }
}

/// Mean and median of one measure across sessions, with the number of
/// sessions skipped because the measure was undefined for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
    pub defined: usize,
    pub skipped: usize,
}

impl Aggregate {
    fn over(values: &[Option<f64>]) -> Option<Aggregate> {
        let defined: Vec<f64> = values.iter().filter_map(|v| *v).collect();
        if defined.is_empty() {
            return None;
        }
        Some(Aggregate {
            mean: mean(&defined),
            median: median(&defined),
            defined: defined.len(),
            skipped: values.len() - defined.len(),
        })
    }
}

/// Full evaluation output: per-session scores, their aggregates, and
/// (when overall truth exists) pooled-overall correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Label of the evaluated model (row name in the text table).
    pub model: String,
    /// Name of the quality metric driving the first feature.
    pub vqa_metric: String,
    /// The outage threshold used, as a fraction of the score range.
    /// Always present: outage numbers mean nothing without it.
    pub or_delta_fraction: f64,
    pub sessions: Vec<SessionScores>,
    pub lcc: Option<Aggregate>,
    pub srocc: Option<Aggregate>,
    pub rmse_n_percent: Option<Aggregate>,
    pub or_percent: Option<Aggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooling: Option<Vec<PoolResult>>,
}

impl MetricsReport {
    /// Aggregate per-session scores into a report.
    pub fn from_sessions(
        model: impl Into<String>,
        vqa_metric: impl Into<String>,
        or_delta_fraction: f64,
        sessions: Vec<SessionScores>,
        pooling: Option<Vec<PoolResult>>,
    ) -> MetricsReport {
        let lcc = Aggregate::over(&sessions.iter().map(|s| s.lcc).collect::<Vec<_>>());
        let srocc = Aggregate::over(&sessions.iter().map(|s| s.srocc).collect::<Vec<_>>());
        let rmse =
            Aggregate::over(&sessions.iter().map(|s| Some(s.rmse_n_percent)).collect::<Vec<_>>());
        let or =
            Aggregate::over(&sessions.iter().map(|s| Some(s.or_percent)).collect::<Vec<_>>());
        MetricsReport {
            model: model.into(),
            vqa_metric: vqa_metric.into(),
            or_delta_fraction,
            sessions,
            lcc,
            srocc,
            rmse_n_percent: rmse,
            or_percent: or,
            pooling,
        }
    }
}

fn fmt_corr(v: Option<&Aggregate>, pick: impl Fn(&Aggregate) -> f64) -> String {
    v.map_or_else(|| "undef".into(), |a| format!("{:.3}", pick(a)))
}

/// Render reports as an aligned-column text table (one row per report):
/// model, quality metric, then mean LCC / SROCC / RMSE_n% / OR% across
/// sessions, with the outage threshold and any skipped sessions noted
/// under the table.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let header = ["Model", "VQA metric", "LCC", "SROCC", "RMSE_n%", "OR%"];
    let rows: Vec<[String; 6]> = reports
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.vqa_metric.clone(),
                fmt_corr(r.lcc.as_ref(), |a| a.mean),
                fmt_corr(r.srocc.as_ref(), |a| a.mean),
                fmt_corr(r.rmse_n_percent.as_ref(), |a| a.mean),
                fmt_corr(r.or_percent.as_ref(), |a| a.mean),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let write_row = |out: &mut String, cells: &[String]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i < 2 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "{cell:>w$}");
            }
        }
        out.push('\n');
    };
    let header_cells: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_row(&mut out, &header_cells);
    let rule_len = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    for row in &rows {
        write_row(&mut out, row);
    }
    for report in reports {
        let _ = writeln!(
            out,
            "[{}] outage threshold: {:.0}% of score range",
            report.model,
            report.or_delta_fraction * 100.0
        );
        if let Some(agg) = &report.lcc {
            if agg.skipped > 0 {
                let _ = writeln!(
                    out,
                    "[{}] {} session(s) skipped for correlation (constant series)",
                    report.model, agg.skipped
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    /// Textbook raw-moment Pearson, kept deliberately different in
    /// structure from the implementation above.
    fn pearson_bruteforce(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (sx, sy): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let sxx: f64 = a.iter().map(|x| x * x).sum();
        let syy: f64 = b.iter().map(|y| y * y).sum();
        let sxy: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    /// O(n^2) counting definition of fractional ranks.
    fn ranks_bruteforce(xs: &[f64]) -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                let less = xs.iter().filter(|&&y| y < x).count() as f64;
                let equal = xs.iter().filter(|&&y| y == x).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn identical_series_correlate_to_exactly_one() {
        let a = vec![3.0, 1.0, 4.0, 1.5, 9.2, 2.6];
        assert_eq!(lcc(&a, &a).unwrap(), 1.0);
        assert_eq!(srocc(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn negated_series_correlate_to_exactly_minus_one() {
        let a = vec![3.0, 1.0, 4.0, 1.5, 9.2, 2.6];
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(lcc(&a, &b).unwrap(), -1.0);
        assert_eq!(srocc(&a, &b).unwrap(), -1.0);
    }

    #[test]
    fn lcc_matches_closed_form_example() {
        let r = lcc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!(
            (r - 0.981_980_506_061_965_9).abs() < 1e-12,
            "got {r}"
        );
    }

    #[test]
    fn lcc_rejects_constant_and_short_series() {
        let err = lcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::ConstantSeries { which: "first" }), "got {err:?}");
        let err = lcc(&[1.0, 2.0], &[5.0, 5.0]).unwrap_err();
        assert!(matches!(err, Error::ConstantSeries { which: "second" }), "got {err:?}");
        assert!(lcc(&[1.0], &[2.0]).is_err());
        assert!(lcc(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn fractional_ranks_average_ties() {
        assert_eq!(fractional_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(fractional_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(fractional_ranks(&[30.0, 10.0, 20.0]), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn srocc_handles_ties_by_average_rank() {
        // Ranks [1, 2.5, 2.5, 4] vs [1, 2, 3, 4]: Pearson sqrt(0.9).
        let r = srocc(&[1.0, 2.0, 2.0, 3.0], &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert!(
            (r - 0.948_683_298_050_513_8).abs() < 1e-12,
            "got {r}"
        );
    }

    #[test]
    fn srocc_is_exactly_one_under_monotone_transforms() {
        let a = vec![3.0, 1.0, 4.0, 1.5, 9.2];
        let b: Vec<f64> = a.iter().map(|&x: &f64| x.exp() + x).collect();
        assert_eq!(srocc(&a, &b).unwrap(), 1.0);
        let c: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_eq!(srocc(&a, &c).unwrap(), -1.0);
    }

    #[test]
    fn srocc_with_all_tied_values_is_undefined() {
        let err = srocc(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::ConstantSeries { .. }), "got {err:?}");
    }

    #[test]
    fn rmse_n_matches_worked_examples() {
        let truth = vec![10.0, 20.0, 30.0];
        assert_eq!(rmse_n(&truth, &truth, (0.0, 100.0)).unwrap(), 0.0);
        let offset: Vec<f64> = truth.iter().map(|x| x + 10.0).collect();
        assert_eq!(rmse_n(&offset, &truth, (0.0, 100.0)).unwrap(), 10.0);
        let r = rmse_n(&[3.0, 4.0], &[0.0, 0.0], (0.0, 100.0)).unwrap();
        assert!((r - 3.535_533_905_932_737_6).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn rmse_n_rejects_degenerate_scales() {
        let err = rmse_n(&[1.0], &[2.0], (5.0, 5.0)).unwrap_err();
        assert!(matches!(err, Error::DegenerateNormalization { .. }), "got {err:?}");
        assert!(rmse_n(&[1.0], &[2.0], (7.0, 3.0)).is_err());
    }

    #[test]
    fn outage_rate_counts_strict_exceedances() {
        let truth = vec![0.0; 4];
        // Errors as fractions of a [0,100] range: 0.05, 0.15, 0.11, 0.02.
        let pred = vec![5.0, 15.0, 11.0, 2.0];
        assert_eq!(outage_rate(&pred, &truth, (0.0, 100.0), 0.10).unwrap(), 50.0);
        assert_eq!(outage_rate(&truth, &truth, (0.0, 100.0), 0.10).unwrap(), 0.0);
        let all_out = vec![20.0; 4];
        assert_eq!(outage_rate(&all_out, &truth, (0.0, 100.0), 0.10).unwrap(), 100.0);
        // Exactly at the threshold is not an outage.
        let boundary = vec![10.0; 4];
        assert_eq!(outage_rate(&boundary, &truth, (0.0, 100.0), 0.10).unwrap(), 0.0);
    }

    #[test]
    fn outage_rate_rejects_nonpositive_thresholds() {
        for bad in [0.0, -0.1] {
            let err = outage_rate(&[1.0], &[1.0], (0.0, 100.0), bad).unwrap_err();
            assert!(matches!(err, Error::InvalidThreshold(_)), "got {err:?}");
        }
    }

    #[test]
    fn correlations_match_bruteforce_on_random_pairs() {
        let mut rng = Rng::new(2024);
        for round in 0..300 {
            let n = 2 + rng.next_below(40) as usize;
            let mut a: Vec<f64> = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
            // A third of the rounds get quantized values so ties occur.
            if round % 3 == 0 {
                for v in a.iter_mut().chain(b.iter_mut()) {
                    *v = (*v * 2.0).round() / 2.0;
                }
            }
            let (Ok(fast_l), Ok(fast_s)) = (lcc(&a, &b), srocc(&a, &b)) else {
                continue; // constant after quantization; covered elsewhere
            };
            let slow_l = pearson_bruteforce(&a, &b);
            assert!(
                (fast_l - slow_l).abs() < 1e-10,
                "lcc {fast_l} vs brute force {slow_l} on {a:?} / {b:?}"
            );
            let slow_s = pearson_bruteforce(&ranks_bruteforce(&a), &ranks_bruteforce(&b));
            assert!(
                (fast_s - slow_s).abs() < 1e-10,
                "srocc {fast_s} vs brute force {slow_s} on {a:?} / {b:?}"
            );
        }
    }

    #[test]
    fn pooling_arithmetic_matches_worked_examples() {
        assert_eq!(median(&[1.0, 2.0, 100.0]), 2.0);
        assert_eq!(mean(&[1.0, 2.0, 100.0]), 103.0 / 3.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 100.0]), 2.5);
    }

    #[test]
    fn pooling_ground_truth_against_its_own_means_is_exactly_one() {
        let series = vec![
            vec![10.0, 20.0, 30.0],
            vec![50.0, 60.0, 70.0],
            vec![5.0, 5.0, 8.0],
        ];
        let truth: Vec<f64> = series.iter().map(|s| mean(s)).collect();
        let result = pool_overall(&series, &truth, PoolMethod::Mean).unwrap();
        assert_eq!(result.lcc, 1.0);
        assert_eq!(result.srocc, 1.0);
        assert_eq!(result.pooled, truth);
    }

    #[test]
    fn pool_overall_validates_input_shapes() {
        let err = pool_overall(&[vec![1.0]], &[1.0, 2.0], PoolMethod::Mean).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }), "got {err:?}");
        let err = pool_overall(&[vec![]], &[1.0], PoolMethod::Median).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }), "got {err:?}");
    }

    #[test]
    fn session_scores_keep_undefined_correlations_as_missing() {
        let scores = SessionScores::compute(
            "flat",
            &[5.0, 5.0, 5.0],
            &[1.0, 2.0, 3.0],
            (0.0, 100.0),
            0.10,
        )
        .unwrap();
        assert!(scores.lcc.is_none());
        assert!(scores.srocc.is_none());
        assert!(scores.undefined_reason.as_deref().unwrap().contains("constant"));
        assert!(scores.rmse_n_percent > 0.0, "rmse still defined");
    }

    #[test]
    fn report_aggregates_skip_and_count_undefined_sessions() {
        let good = SessionScores::compute(
            "a",
            &[1.0, 2.0, 3.0],
            &[1.0, 2.0, 4.0],
            (0.0, 100.0),
            0.10,
        )
        .unwrap();
        let flat = SessionScores::compute(
            "b",
            &[5.0, 5.0, 5.0],
            &[1.0, 2.0, 3.0],
            (0.0, 100.0),
            0.10,
        )
        .unwrap();
        let report =
            MetricsReport::from_sessions("lstm", "ssim", 0.10, vec![good.clone(), flat], None);
        let lcc_agg = report.lcc.as_ref().unwrap();
        assert_eq!(lcc_agg.defined, 1);
        assert_eq!(lcc_agg.skipped, 1);
        assert_eq!(lcc_agg.mean, good.lcc.unwrap());
        let rmse_agg = report.rmse_n_percent.as_ref().unwrap();
        assert_eq!(rmse_agg.defined, 2);
        assert_eq!(rmse_agg.skipped, 0);
    }

    #[test]
    fn report_round_trips_through_json() {
        let scores = SessionScores::compute(
            "v1",
            &[1.0, 2.0, 3.0],
            &[1.1, 2.2, 2.9],
            (0.0, 100.0),
            0.10,
        )
        .unwrap();
        let report = MetricsReport::from_sessions("lstm", "strred", 0.10, vec![scores], None);
        let text = serde_json::to_string(&report).unwrap();
        let back: MetricsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn table_renders_aligned_columns_and_threshold_note() {
        let scores = SessionScores::compute(
            "v1",
            &[1.0, 2.0, 3.0],
            &[1.0, 2.0, 4.0],
            (0.0, 100.0),
            0.10,
        )
        .unwrap();
        let report = MetricsReport::from_sessions("lstm-qoe", "ssim", 0.10, vec![scores], None);
        let table = render_table(&[report]);
        assert!(table.contains("Model"), "missing header:\n{table}");
        assert!(table.contains("RMSE_n%"), "missing rmse column:\n{table}");
        assert!(table.contains("lstm-qoe"), "missing row:\n{table}");
        assert!(table.contains("0.982"), "missing lcc value:\n{table}");
        assert!(
            table.contains("outage threshold: 10% of score range"),
            "missing threshold note:\n{table}"
        );
        let header_line = table.lines().next().unwrap();
        let rule_line = table.lines().nth(1).unwrap();
        assert_eq!(header_line.len(), rule_line.len(), "rule should span the header");
    }
}
