//! Run store: an append-only JSON-lines transcript log plus plan, summary
//! and export files under one root directory.
//!
//! ```text
//! <root>/plan.json          plan fingerprint and the resolved plan
//! <root>/transcripts.jsonl  one TranscriptRecord per line, plan order
//! <root>/summary.json       RunSummary of the last run/resume
//! <root>/quarantine.jsonl   torn trailing lines found on open (if any)
//! <root>/exports/*.csv      analysis tables
//! ```

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::debate::{DebateStatus, ToxicityLevel, Transcript};
use crate::stats::OutcomeRecord;

pub mod export;

pub use export::{export_report, format_p_value, ExportedFiles};

pub const PLAN_FILE: &str = "plan.json";
pub const LOG_FILE: &str = "transcripts.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const QUARANTINE_FILE: &str = "quarantine.jsonl";
pub const EXPORTS_DIR: &str = "exports";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record at {path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("trial {trial_index} of condition {condition} is already stored")]
    DuplicateTrial { condition: ToxicityLevel, trial_index: u64 },
    #[error("store holds plan {stored}, refusing to mix it with plan {requested}")]
    PlanMismatch { stored: String, requested: String },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One line of the transcript log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// 0-based index within the record's condition.
    pub trial_index: u64,
    pub transcript: Transcript,
}

impl TranscriptRecord {
    pub fn key(&self) -> (ToxicityLevel, u64) {
        (self.transcript.config.level, self.trial_index)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredPlan {
    fingerprint: String,
    plan: serde_json::Value,
}

/// Status counts over stored transcripts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub converged: usize,
    pub capped: usize,
    pub refused: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomeSet {
    pub records: Vec<OutcomeRecord>,
    pub counts: StatusCounts,
}

pub struct RunStore {
    root: PathBuf,
    log: File,
    keys: HashSet<(ToxicityLevel, u64)>,
    quarantined: Vec<String>,
    sync: bool,
}

impl RunStore {
    /// Opens or creates a store. A torn trailing line left by a crash is
    /// moved to the quarantine file and cut from the log.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        std::fs::create_dir_all(&root).map_err(io_err(&root))?;
        let log_path = root.join(LOG_FILE);
        let mut log = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;

        let mut bytes = Vec::new();
        log.read_to_end(&mut bytes).map_err(io_err(&log_path))?;
        let mut quarantined = Vec::new();
        let complete = match bytes.iter().rposition(|&b| b == b'\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < bytes.len() {
            let fragment = String::from_utf8_lossy(&bytes[complete..]).into_owned();
            warn!(path = %log_path.display(), bytes = bytes.len() - complete, "quarantining torn trailing record");
            let q_path = root.join(QUARANTINE_FILE);
            let mut q = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&q_path)
                .map_err(io_err(&q_path))?;
            writeln!(q, "{fragment}").map_err(io_err(&q_path))?;
            q.sync_all().map_err(io_err(&q_path))?;
            log.set_len(complete as u64).map_err(io_err(&log_path))?;
            log.sync_all().map_err(io_err(&log_path))?;
            quarantined.push(fragment);
        }

        let mut keys = HashSet::new();
        for (line_no, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let record: TranscriptRecord = serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
                path: log_path.clone(),
                line: line_no + 1,
                message: e.to_string(),
            })?;
            keys.insert(record.key());
        }

        Ok(RunStore {
            root,
            log,
            keys,
            quarantined,
            sync: true,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Whether each append is fsynced before it is acknowledged (default on).
    pub fn set_sync(&mut self, sync: bool) {
        self.sync = sync;
    }

    /// Fragments quarantined when this handle was opened.
    pub fn quarantined(&self) -> &[String] {
        &self.quarantined
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, condition: ToxicityLevel, trial_index: u64) -> bool {
        self.keys.contains(&(condition, trial_index))
    }

    /// Fingerprint of the plan bound to this store, if any.
    pub fn fingerprint(&self) -> Result<Option<String>, StoreError> {
        let path = self.root.join(PLAN_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let stored: StoredPlan = read_json(&path)?;
        Ok(Some(stored.fingerprint))
    }

    /// The plan recorded by [`RunStore::bind_plan`], if any.
    pub fn stored_plan<P: DeserializeOwned>(&self) -> Result<Option<P>, StoreError> {
        let path = self.root.join(PLAN_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let stored: StoredPlan = read_json(&path)?;
        serde_json::from_value(stored.plan)
            .map(Some)
            .map_err(|e| StoreError::Corrupt {
                path,
                line: 0,
                message: e.to_string(),
            })
    }

    /// Records the plan on first use; afterwards only the same fingerprint
    /// is accepted.
    pub fn bind_plan<P: Serialize>(&mut self, fingerprint: &str, plan: &P) -> Result<(), StoreError> {
        match self.fingerprint()? {
            Some(stored) if stored == fingerprint => Ok(()),
            Some(stored) => Err(StoreError::PlanMismatch {
                stored,
                requested: fingerprint.to_string(),
            }),
            None => {
                let stored = StoredPlan {
                    fingerprint: fingerprint.to_string(),
                    plan: serde_json::to_value(plan)?,
                };
                write_json(&self.root.join(PLAN_FILE), &stored)
            }
        }
    }

    /// Appends one record; it is on disk when this returns.
    pub fn append_transcript(&mut self, record: &TranscriptRecord) -> Result<(), StoreError> {
        let key = record.key();
        if self.keys.contains(&key) {
            return Err(StoreError::DuplicateTrial {
                condition: key.0,
                trial_index: key.1,
            });
        }
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let path = self.root.join(LOG_FILE);
        self.log.write_all(line.as_bytes()).map_err(io_err(&path))?;
        self.log.flush().map_err(io_err(&path))?;
        if self.sync {
            self.log.sync_data().map_err(io_err(&path))?;
        }
        self.keys.insert(key);
        Ok(())
    }

    pub fn load_transcripts(&self) -> Result<Vec<TranscriptRecord>, StoreError> {
        let path = self.root.join(LOG_FILE);
        let file = File::open(&path).map_err(io_err(&path))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(records)
    }

    /// One outcome per converged transcript; capped and refused ones are
    /// only counted.
    pub fn load_outcomes(&self) -> Result<OutcomeSet, StoreError> {
        let mut set = OutcomeSet::default();
        for record in self.load_transcripts()? {
            let t = &record.transcript;
            match t.status {
                DebateStatus::Converged => set.counts.converged += 1,
                DebateStatus::Capped => set.counts.capped += 1,
                DebateStatus::Refused => set.counts.refused += 1,
            }
            set.records.extend(OutcomeRecord::from_transcript(t));
        }
        Ok(set)
    }

    pub fn write_summary<T: Serialize>(&self, summary: &T) -> Result<(), StoreError> {
        write_json(&self.root.join(SUMMARY_FILE), summary)
    }

    pub fn read_summary<T: DeserializeOwned>(&self) -> Result<Option<T>, StoreError> {
        let path = self.root.join(SUMMARY_FILE);
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn exports_dir(&self) -> PathBuf {
        self.root.join(EXPORTS_DIR)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes via a temporary file and rename so readers never see half a file.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
