//! Flag parsing and file helpers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use qoe_lstm_core::features::{read_trace_csv, Orientation};
use qoe_lstm_core::{
    Error, FeatureMode, FeatureSet, Protocol, Result, SessionTrace, TraceMeta, TrainedModel,
};

/// Current wall-clock time as an RFC 3339 string (second resolution).
pub fn now_rfc3339() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

/// One machine-parsable warning line on stderr, mirroring the error format.
pub fn warn(kind: &str, message: &str) {
    let line = serde_json::json!({ "warning": kind, "message": message });
    eprintln!("{line}");
}

/// Parse a `--protocol` name into a split protocol. `p`, `fraction`, and
/// `seed` feed the protocols that need them.
pub fn parse_protocol(name: &str, p: usize, fraction: f64, seed: u64) -> Result<Protocol> {
    match name {
        "netflix" => Ok(Protocol::NetflixStyle),
        "lfovia" => Ok(Protocol::LfoviaStyle),
        "leave-p-out" => Ok(Protocol::LeavePOut { p }),
        "random" => Ok(Protocol::RandomFraction { fraction, seed }),
        "fixed-80-20" => Ok(Protocol::FixedFraction8020 { seed }),
        other => Err(Error::InvalidConfig(format!(
            "unknown protocol '{other}'; expected netflix, lfovia, leave-p-out, random, \
             or fixed-80-20"
        ))),
    }
}

/// Parse `--net l,d` into (layers, units).
pub fn parse_net(text: &str) -> Result<(usize, usize)> {
    let bad = || {
        Error::InvalidConfig(format!(
            "--net expects 'layers,units' (e.g. 2,22), got '{text}'"
        ))
    };
    let (l, d) = text.split_once(',').ok_or_else(bad)?;
    let layers = l.trim().parse::<usize>().map_err(|_| bad())?;
    let units = d.trim().parse::<usize>().map_err(|_| bad())?;
    Ok((layers, units))
}

/// Parse `--features`: `full`, `stsq-only`, or `ablation:SET` where SET
/// joins any of `stsq`, `pi`, `tr` with `+` (for example `ablation:stsq+pi`).
pub fn parse_features(text: &str) -> Result<FeatureMode> {
    match text {
        "full" => return Ok(FeatureMode::Full),
        "stsq-only" => return Ok(FeatureMode::StsqOnly),
        _ => {}
    }
    let set_text = text.strip_prefix("ablation:").ok_or_else(|| {
        Error::InvalidConfig(format!(
            "--features expects full, stsq-only, or ablation:SET, got '{text}'"
        ))
    })?;
    let mut set = FeatureSet {
        stsq: false,
        pi: false,
        tr: false,
    };
    for token in set_text.split(['+', ',']) {
        match token.trim() {
            "stsq" => set.stsq = true,
            "pi" => set.pi = true,
            "tr" => set.tr = true,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown feature '{other}' in '{text}'; expected stsq, pi, tr"
                )))
            }
        }
    }
    if set.is_empty() {
        return Err(Error::InvalidConfig(
            "ablation feature set must name at least one feature".into(),
        ));
    }
    Ok(FeatureMode::Subset(set))
}

/// Parse a comma-separated list of positive integers (sweep grids).
pub fn parse_usize_list(flag: &str, text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for token in text.split(',') {
        let value = token.trim().parse::<usize>().map_err(|_| {
            Error::InvalidConfig(format!(
                "{flag} expects comma-separated integers, got '{text}'"
            ))
        })?;
        if value == 0 {
            return Err(Error::InvalidConfig(format!("{flag} entries must be >= 1")));
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("{flag} must not be empty")));
    }
    Ok(out)
}

/// Canonical weight-file name for one fold.
pub fn model_file_name(fold: usize) -> String {
    format!("fold_{fold:03}.model.json")
}

/// Name of the split-plan file written next to per-fold models.
pub const SPLIT_PLAN_FILE: &str = "split_plan.json";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        source,
    }
}

/// Serialize `value` as pretty JSON with a trailing newline.
pub fn write_json_pretty<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|source| io_err(path, source))
}

/// Read a JSON file into any deserializable config type.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Write one predicted QoE series as `t,qoe_pred` CSV. Floats print in
/// shortest round-trip form, so equal series produce equal files.
pub fn write_prediction_csv(path: &Path, preds: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| csv_err(path, source))?;
    writer
        .write_record(["t", "qoe_pred"])
        .map_err(|source| csv_err(path, source))?;
    for (t, pred) in preds.iter().enumerate() {
        writer
            .write_record([t.to_string(), pred.to_string()])
            .map_err(|source| csv_err(path, source))?;
    }
    writer.flush().map_err(|source| io_err(path, source))
}

/// Read a `t,qoe_pred` CSV back into the prediction series.
pub fn read_prediction_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| csv_err(path, source))?;
    let mut preds = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| csv_err(path, source))?;
        let field = record.get(1).ok_or_else(|| Error::BadTrace {
            path: path.display().to_string(),
            reason: "prediction rows need columns t,qoe_pred".into(),
        })?;
        let value = field.trim().parse::<f64>().map_err(|_| Error::BadTrace {
            path: path.display().to_string(),
            reason: format!("qoe_pred value '{field}' is not a number"),
        })?;
        preds.push(value);
    }
    if preds.is_empty() {
        return Err(Error::BadTrace {
            path: path.display().to_string(),
            reason: "prediction file has no rows".into(),
        });
    }
    Ok(preds)
}

/// Write per-video overall scores as `video_id,overall_qoe` CSV.
pub fn write_overall_csv(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| csv_err(path, source))?;
    writer
        .write_record(["video_id", "overall_qoe"])
        .map_err(|source| csv_err(path, source))?;
    for (id, overall) in rows {
        writer
            .write_record([id.as_str(), &overall.to_string()])
            .map_err(|source| csv_err(path, source))?;
    }
    writer.flush().map_err(|source| io_err(path, source))
}

/// Read a `video_id,overall_qoe` CSV, preserving row order.
pub fn read_overall_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| csv_err(path, source))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| csv_err(path, source))?;
        let (id, field) = match (record.get(0), record.get(1)) {
            (Some(id), Some(field)) => (id.to_string(), field),
            _ => {
                return Err(Error::BadTrace {
                    path: path.display().to_string(),
                    reason: "overall rows need columns video_id,overall_qoe".into(),
                })
            }
        };
        let value = field.trim().parse::<f64>().map_err(|_| Error::BadTrace {
            path: path.display().to_string(),
            reason: format!("overall_qoe value '{field}' is not a number"),
        })?;
        rows.push((id, value));
    }
    if rows.is_empty() {
        return Err(Error::BadTrace {
            path: path.display().to_string(),
            reason: "overall file has no rows".into(),
        });
    }
    Ok(rows)
}

/// Load a bare trace CSV for prediction. Without a manifest, metadata is
/// reconstructed from the model: the id from the file stem and the score
/// scale from the model's training normalization, which is the scale its
/// outputs live on anyway.
pub fn read_bare_trace(path: &Path, model: &TrainedModel) -> Result<SessionTrace> {
    let video_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let meta = TraceMeta {
        video_id,
        content_id: String::new(),
        pattern_id: String::new(),
        vqa_metric: "unspecified".into(),
        vqa_range: None,
        vqa_orientation: Orientation::HigherBetter,
        qoe_scale: (model.norm.qoe_lo, model.norm.qoe_hi),
    };
    read_trace_csv(path, meta)
}

/// Ensure a directory exists before writing into it.
pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| io_err(path, source))
}

/// The split-plan path inside a models directory.
pub fn split_plan_path(models_dir: &Path) -> PathBuf {
    models_dir.join(SPLIT_PLAN_FILE)
}
