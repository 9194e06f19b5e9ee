//! Append-only event log: one JSON record per line in a single file.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use loopinv_core::engine::Characterization;
use loopinv_core::solver::SolverVerdict;
use serde::{Deserialize, Serialize};

pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedQuery {
    pub key: String,
    pub verdict: SolverVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Record {
    Session {
        session: String,
        at: u64,
    },
    Proposal {
        session: String,
        level: String,
        expr: String,
        kind: Characterization,
        /// Seeded from the loop annotation rather than submitted.
        seeded: bool,
        at: u64,
        queries: Vec<RecordedQuery>,
    },
}

/// Single-writer log. Without a file it only discards records.
pub struct EventLog {
    file: Option<Mutex<File>>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog { file: None }
    }

    /// Opens (creating if needed) the log in `dir` and returns the records
    /// already in it. A torn final line is ignored.
    pub fn open(dir: &Path) -> std::io::Result<(EventLog, Vec<Record>)> {
        std::fs::create_dir_all(dir)?;
        let path = log_path(dir);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e),
        };
        let mut records = Vec::new();
        let mut good = 0;
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        for (i, line) in lines.iter().enumerate() {
            let complete = line.ends_with('\n');
            if line.trim().is_empty() {
                good += line.len();
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) if complete => {
                    records.push(r);
                    good += line.len();
                }
                Ok(_) | Err(_) if i == lines.len() - 1 => {
                    tracing::warn!(line = i + 1, "dropping torn log record");
                }
                Ok(_) | Err(_) => {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("{}:{}: malformed record", path.display(), i + 1),
                    ))
                }
            }
        }
        if good < text.len() {
            OpenOptions::new()
                .write(true)
                .open(&path)?
                .set_len(good as u64)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((
            EventLog {
                file: Some(Mutex::new(file)),
            },
            records,
        ))
    }

    pub fn append(&self, record: &Record) -> std::io::Result<()> {
        let Some(file) = &self.file else {
            return Ok(());
        };
        let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut f = file.lock().expect("log lock");
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}

pub fn log_path(dir: &Path) -> PathBuf {
    dir.join(LOG_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            Record::Session {
                session: "s".into(),
                at: 1,
            },
            Record::Proposal {
                session: "s".into(),
                level: "isqrt".into(),
                expr: "odd >= 1".into(),
                kind: Characterization::Inductive,
                seeded: false,
                at: 2,
                queries: vec![RecordedQuery {
                    key: "k".into(),
                    verdict: SolverVerdict::Proved,
                }],
            },
        ];
        {
            let (log, old) = EventLog::open(dir.path()).unwrap();
            assert!(old.is_empty());
            for r in &records {
                log.append(r).unwrap();
            }
        }
        let mut f = OpenOptions::new()
            .append(true)
            .open(log_path(dir.path()))
            .unwrap();
        f.write_all(b"{\"type\":\"sess").unwrap();
        let (log, back) = EventLog::open(dir.path()).unwrap();
        assert_eq!(back, records);
        log.append(&records[0]).unwrap();
        let (_, again) = EventLog::open(dir.path()).unwrap();
        assert_eq!(again.len(), 3);
    }
}
