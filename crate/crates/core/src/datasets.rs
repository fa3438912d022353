//! Corpus storage and train/test split protocols.
//!
//! A corpus is a named set of session traces with unique video ids,
//! stored on disk as a `manifest.json` plus one CSV per trace. Split
//! protocols turn a corpus into a [`SplitPlan`]: an explicit list of
//! folds, each naming its train and test videos, so every evaluation is
//! auditable after the fact. Folds whose train or test side came out
//! empty are flagged `degenerate` rather than silently dropped; callers
//! skip them with a warning.
//!
//! The cross-validation protocols differ in what they hold out:
//!
//! * [`split_netflix`] — one fold per video; training excludes every
//!   video sharing *either* the source content *or* the playout pattern
//!   with the test video.
//! * [`split_lfovia`] — one fold per video; training excludes videos
//!   sharing the playout pattern.
//! * [`split_leave_p_out`] — one fold per source content (each content
//!   must have exactly `p` videos); training is every other content's
//!   videos, so no test content is ever seen in training.
//! * [`split_random`] — per-video folds with a seeded random train
//!   subset of the other videos, or a single seeded fixed split.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{read_trace_csv, write_trace_csv, SessionTrace, TraceMeta};
use crate::numerics::Rng;

/// A named collection of traces with unique video ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub traces: Vec<SessionTrace>,
}

/// One manifest row: trace metadata plus the CSV it lives in.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    #[serde(flatten)]
    meta: TraceMeta,
    csv: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    name: String,
    videos: Vec<ManifestEntry>,
}

impl Corpus {
    /// Build a corpus, rejecting duplicate or empty video ids.
    pub fn new(name: impl Into<String>, traces: Vec<SessionTrace>) -> Result<Corpus> {
        let mut seen = BTreeSet::new();
        for trace in &traces {
            trace.validate()?;
            if !seen.insert(trace.meta.video_id.clone()) {
                return Err(Error::DuplicateVideoId(trace.meta.video_id.clone()));
            }
        }
        Ok(Corpus {
            name: name.into(),
            traces,
        })
    }

    /// Look a trace up by video id.
    pub fn trace(&self, video_id: &str) -> Option<&SessionTrace> {
        self.traces.iter().find(|t| t.meta.video_id == video_id)
    }

    /// Resolve a list of ids to traces, erroring on unknown ids.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&SessionTrace>> {
        ids.iter()
            .map(|id| {
                self.trace(id)
                    .ok_or_else(|| Error::UnknownVideoId(id.clone()))
            })
            .collect()
    }

    /// Write `manifest.json` and one `traces/<video_id>.csv` per trace.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let traces_dir = dir.join("traces");
        fs::create_dir_all(&traces_dir).map_err(|source| Error::Io {
            path: traces_dir.display().to_string(),
            source,
        })?;
        let mut videos = Vec::with_capacity(self.traces.len());
        for trace in &self.traces {
            let rel = format!("traces/{}.csv", trace.meta.video_id);
            write_trace_csv(&dir.join(&rel), trace)?;
            videos.push(ManifestEntry {
                meta: trace.meta.clone(),
                csv: rel,
            });
        }
        let manifest = Manifest {
            name: self.name.clone(),
            videos,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        fs::write(&path, text + "\n").map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Load a corpus saved by [`Corpus::save`] (or hand-written in the
    /// same layout). CSV paths in the manifest are relative to `dir`.
    pub fn load(dir: &Path) -> Result<Corpus> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.display().to_string(),
                source,
            })?;
        let traces = manifest
            .videos
            .into_iter()
            .map(|entry| read_trace_csv(&dir.join(&entry.csv), entry.meta))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(manifest.name, traces)
    }
}

/// Which protocol produced a plan, with its parameters. Serialized into
/// the plan so results stay auditable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Protocol {
    NetflixStyle,
    LfoviaStyle,
    LeavePOut { p: usize },
    RandomFraction { fraction: f64, seed: u64 },
    FixedFraction8020 { seed: u64 },
}

/// One train/test fold, by video id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub test: Vec<String>,
    pub train: Vec<String>,
    /// True when either side is empty; such folds are reported but
    /// skipped by evaluation.
    pub degenerate: bool,
}

impl Fold {
    fn new(test: Vec<String>, train: Vec<String>) -> Fold {
        let degenerate = test.is_empty() || train.is_empty();
        Fold {
            test,
            train,
            degenerate,
        }
    }
}

/// A complete, explicit split of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub protocol: Protocol,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    /// Folds usable for evaluation.
    pub fn active_folds(&self) -> impl Iterator<Item = &Fold> {
        self.folds.iter().filter(|f| !f.degenerate)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<SplitPlan> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Dispatch a protocol to its split function.
pub fn split(corpus: &Corpus, protocol: &Protocol) -> Result<SplitPlan> {
    match *protocol {
        Protocol::NetflixStyle => split_netflix(corpus),
        Protocol::LfoviaStyle => split_lfovia(corpus),
        Protocol::LeavePOut { p } => split_leave_p_out(corpus, p),
        Protocol::RandomFraction { fraction, seed } => {
            let mut rng = Rng::new(seed);
            split_random(corpus, fraction, &mut rng, RandomMode::PerVideo)
                .map(|folds| SplitPlan {
                    protocol: *protocol,
                    folds,
                })
        }
        Protocol::FixedFraction8020 { seed } => {
            let mut rng = Rng::new(seed);
            split_random(corpus, 0.8, &mut rng, RandomMode::Fixed).map(|folds| SplitPlan {
                protocol: *protocol,
                folds,
            })
        }
    }
}

fn require_grouping_ids(corpus: &Corpus, need_pattern: bool) -> Result<()> {
    for trace in &corpus.traces {
        if trace.meta.content_id.is_empty() {
            return Err(Error::InconsistentCorpus(format!(
                "video {} has no content_id; content-aware splits need one",
                trace.meta.video_id
            )));
        }
        if need_pattern && trace.meta.pattern_id.is_empty() {
            return Err(Error::InconsistentCorpus(format!(
                "video {} has no pattern_id; pattern-aware splits need one",
                trace.meta.video_id
            )));
        }
    }
    Ok(())
}

/// One fold per video; train on every video differing in *both* source
/// content and playout pattern from the test video.
pub fn split_netflix(corpus: &Corpus) -> Result<SplitPlan> {
    require_grouping_ids(corpus, true)?;
    let folds = corpus
        .traces
        .iter()
        .map(|held| {
            let train = corpus
                .traces
                .iter()
                .filter(|other| {
                    other.meta.content_id != held.meta.content_id
                        && other.meta.pattern_id != held.meta.pattern_id
                })
                .map(|other| other.meta.video_id.clone())
                .collect();
            Fold::new(vec![held.meta.video_id.clone()], train)
        })
        .collect();
    Ok(SplitPlan {
        protocol: Protocol::NetflixStyle,
        folds,
    })
}

/// One fold per video; train on every video with a different playout
/// pattern.
pub fn split_lfovia(corpus: &Corpus) -> Result<SplitPlan> {
    require_grouping_ids(corpus, true)?;
    let folds = corpus
        .traces
        .iter()
        .map(|held| {
            let train = corpus
                .traces
                .iter()
                .filter(|other| other.meta.pattern_id != held.meta.pattern_id)
                .map(|other| other.meta.video_id.clone())
                .collect();
            Fold::new(vec![held.meta.video_id.clone()], train)
        })
        .collect();
    Ok(SplitPlan {
        protocol: Protocol::LfoviaStyle,
        folds,
    })
}

/// Hold out whole source contents, `p` videos at a time. Every content
/// must carry exactly `p` videos (one fold per content, training on the
/// rest); as a limiting case, `p` equal to the corpus size yields the
/// single degenerate everything-held-out fold.
pub fn split_leave_p_out(corpus: &Corpus, p: usize) -> Result<SplitPlan> {
    require_grouping_ids(corpus, false)?;
    if p == 0 {
        return Err(Error::BadLeaveOut {
            p,
            reason: "p must be >= 1".into(),
        });
    }
    if p == corpus.traces.len() {
        let all: Vec<String> = corpus
            .traces
            .iter()
            .map(|t| t.meta.video_id.clone())
            .collect();
        return Ok(SplitPlan {
            protocol: Protocol::LeavePOut { p },
            folds: vec![Fold::new(all, Vec::new())],
        });
    }

    // Group videos by content, preserving first-appearance order.
    let mut groups: Vec<(&str, Vec<&SessionTrace>)> = Vec::new();
    for trace in &corpus.traces {
        match groups
            .iter_mut()
            .find(|(content, _)| *content == trace.meta.content_id)
        {
            Some((_, members)) => members.push(trace),
            None => groups.push((trace.meta.content_id.as_str(), vec![trace])),
        }
    }
    for (content, members) in &groups {
        if members.len() != p {
            return Err(Error::BadLeaveOut {
                p,
                reason: format!(
                    "content {content} has {} videos; holding out whole contents needs exactly p per content",
                    members.len()
                ),
            });
        }
    }
    let folds = groups
        .iter()
        .map(|(content, members)| {
            let test = members.iter().map(|t| t.meta.video_id.clone()).collect();
            let train = corpus
                .traces
                .iter()
                .filter(|t| t.meta.content_id != *content)
                .map(|t| t.meta.video_id.clone())
                .collect();
            Fold::new(test, train)
        })
        .collect();
    Ok(SplitPlan {
        protocol: Protocol::LeavePOut { p },
        folds,
    })
}

/// Shape of a random split: one fold per held-out video, or a single
/// fixed partition of the whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomMode {
    PerVideo,
    Fixed,
}

/// Seeded random splits. `fraction` is the train share, rounded to the
/// nearest whole video (halves away from zero). In `PerVideo` mode each
/// video becomes a test fold with a fresh random subset of the *other*
/// videos as train; in `Fixed` mode the corpus is shuffled once and cut.
pub fn split_random(
    corpus: &Corpus,
    fraction: f64,
    rng: &mut Rng,
    mode: RandomMode,
) -> Result<Vec<Fold>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    let ids: Vec<String> = corpus
        .traces
        .iter()
        .map(|t| t.meta.video_id.clone())
        .collect();
    match mode {
        RandomMode::PerVideo => {
            let folds = (0..ids.len())
                .map(|held| {
                    let mut others: Vec<usize> =
                        (0..ids.len()).filter(|&i| i != held).collect();
                    let k = (fraction * others.len() as f64).round() as usize;
                    rng.shuffle(&mut others);
                    let mut picked = others[..k].to_vec();
                    picked.sort_unstable();
                    let train = picked.into_iter().map(|i| ids[i].clone()).collect();
                    Fold::new(vec![ids[held].clone()], train)
                })
                .collect();
            Ok(folds)
        }
        RandomMode::Fixed => {
            let mut order: Vec<usize> = (0..ids.len()).collect();
            rng.shuffle(&mut order);
            let k = (fraction * ids.len() as f64).round() as usize;
            let mut train: Vec<usize> = order[..k].to_vec();
            let mut test: Vec<usize> = order[k..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Ok(vec![Fold::new(
                test.into_iter().map(|i| ids[i].clone()).collect(),
                train.into_iter().map(|i| ids[i].clone()).collect(),
            )])
        }
    }
}

/// Audit a plan against the protocol's exclusion rule. Returns one
/// human-readable line per violation (empty means the plan is clean).
pub fn verify_no_leakage(corpus: &Corpus, plan: &SplitPlan) -> Result<Vec<String>> {
    let mut violations = Vec::new();
    for (fold_idx, fold) in plan.folds.iter().enumerate() {
        let test = corpus.select(&fold.test)?;
        let train = corpus.select(&fold.train)?;
        for tr in &train {
            if fold.test.contains(&tr.meta.video_id) {
                violations.push(format!(
                    "fold {fold_idx}: video {} appears in both train and test",
                    tr.meta.video_id
                ));
            }
            for te in &test {
                let clash = match plan.protocol {
                    Protocol::NetflixStyle => {
                        if tr.meta.content_id == te.meta.content_id {
                            Some("content")
                        } else if tr.meta.pattern_id == te.meta.pattern_id {
                            Some("pattern")
                        } else {
                            None
                        }
                    }
                    Protocol::LfoviaStyle => {
                        (tr.meta.pattern_id == te.meta.pattern_id).then_some("pattern")
                    }
                    Protocol::LeavePOut { .. } => {
                        (tr.meta.content_id == te.meta.content_id).then_some("content")
                    }
                    Protocol::RandomFraction { .. } | Protocol::FixedFraction8020 { .. } => None,
                };
                if let Some(what) = clash {
                    violations.push(format!(
                        "fold {fold_idx}: train video {} shares {what} with test video {}",
                        tr.meta.video_id, te.meta.video_id
                    ));
                }
            }
        }
    }
    Ok(violations)
}
