//! Question log (JSON Lines) and feedback files.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sparqlgen_core::generation::{Reference, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionEntry {
    pub timestamp: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

/// Appends one JSON object per line. Lines are written whole under a lock so
/// concurrent requests never interleave.
#[derive(Debug)]
pub struct QuestionLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl QuestionLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(QuestionLog {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, entry: &QuestionEntry) -> std::io::Result<()> {
        let mut line = serde_json::to_string(entry).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}

/// Read a question log, skipping lines that do not parse.
pub fn read_questions(path: &Path) -> std::io::Result<Vec<QuestionEntry>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rating {
    Like,
    Dislike,
}

impl Rating {
    pub fn as_str(self) -> &'static str {
        match self {
            Rating::Like => "like",
            Rating::Dislike => "dislike",
        }
    }
}

/// One message of a rated conversation, with what the service returned
/// alongside assistant answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<Reference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub timestamp: String,
    pub rating: Rating,
    pub conversation: Vec<ConversationMessage>,
}

/// One file per feedback event, written to a temp file and renamed.
#[derive(Debug)]
pub struct FeedbackStore {
    dir: PathBuf,
    seq: AtomicU64,
}

pub fn iso_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl FeedbackStore {
    pub fn new(dir: &Path) -> Self {
        FeedbackStore {
            dir: dir.to_path_buf(),
            seq: AtomicU64::new(0),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Store the record; returns the file name.
    pub fn store(&self, record: &FeedbackRecord, at: DateTime<Utc>) -> std::io::Result<String> {
        std::fs::create_dir_all(&self.dir)?;
        let seq = self.seq.fetch_add(1, Ordering::SeqCst);
        let name = format!(
            "{}-{}-{:06}-{}.json",
            at.format("%Y%m%dT%H%M%S%.3fZ"),
            std::process::id(),
            seq,
            record.rating.as_str()
        );
        let path = self.dir.join(&name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let body = serde_json::to_string_pretty(record).map_err(std::io::Error::other)? + "\n";
        let mut f = File::create(&tmp)?;
        f.write_all(body.as_bytes())?;
        f.sync_all()?;
        drop(f);
        std::fs::rename(&tmp, &path)?;
        Ok(name)
    }
}

/// All feedback records in a directory, ordered by file name.
pub fn read_feedback(dir: &Path) -> std::io::Result<Vec<(String, FeedbackRecord)>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json") && !n.starts_with('.'))
        .collect();
    names.sort();
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let text = std::fs::read_to_string(dir.join(&n))?;
        match serde_json::from_str(&text) {
            Ok(r) => out.push((n, r)),
            Err(e) => tracing::warn!("skipping feedback file {n}: {e}"),
        }
    }
    Ok(out)
}
