//! Durable participant records.
//!
//! Only positions and variables are stored; suspended pages never are.
//! After a restart the engine rebuilds the current page by walking the
//! study tree to the stored position.
//!
//! The file backend keeps one file per participant:
//!
//! ```text
//! <data-dir>/
//!   participants/
//!     <study-id>/
//!       <participant-id>.json    # ParticipantRecord, pretty JSON
//! ```
//!
//! Writes go to a temporary file in the same directory which is then
//! renamed over the record, so a reader sees either the old or the new
//! record and never a torn one.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use dashmap::DashMap;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::id::{random_token, ParticipantId, SessionId, StudyId};
use crate::state::{DecodeError, StateRecord};

pub const PARTICIPANT_RECORD_VERSION: u32 = 1;

/// Everything needed to resume a participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub version: u32,
    pub study: StudyId,
    pub session: SessionId,
    /// SHA-256 of the session cookie token, hex.
    pub token_sha256: String,
    pub completed: bool,
    /// Unix milliseconds.
    pub enrolled_at: u64,
    /// Unix milliseconds; never decreases for a given participant.
    pub updated_at: u64,
    pub state: StateRecord,
}

impl ParticipantRecord {
    pub fn participant(&self) -> &ParticipantId {
        &self.state.participant
    }

    pub fn encode(&self) -> String {
        serde_json::to_string_pretty(self).expect("participant records are always encodable")
    }

    pub fn decode(text: &str) -> Result<Self, DecodeError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != PARTICIPANT_RECORD_VERSION {
            return Err(DecodeError::Version { found: header.version });
        }
        let record: Self = serde_json::from_str(text)?;
        if record.state.version != crate::state::STATE_RECORD_VERSION {
            return Err(DecodeError::Version {
                found: record.state.version,
            });
        }
        Ok(record)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no record for participant {participant} in study {study}")]
    NotFound { study: StudyId, participant: ParticipantId },
    #[error("storage unavailable: {0}")]
    Unavailable(#[from] io::Error),
    #[error("corrupt record {key}: {source}")]
    Decode {
        key: String,
        #[source]
        source: DecodeError,
    },
    #[error("participant id {0:?} cannot be used as a storage key")]
    InvalidKey(String),
}

/// Storage backend for participant records.
pub trait RecordStore: Send + Sync {
    /// Atomically replaces the record for `(record.study, record.participant())`.
    fn put(&self, record: &ParticipantRecord) -> Result<(), StoreError>;

    fn get(&self, study: &StudyId, participant: &ParticipantId) -> Result<ParticipantRecord, StoreError>;

    /// Every record of `study`. Corrupt records appear as `Err` entries.
    fn list(&self, study: &StudyId) -> Result<Vec<Result<ParticipantRecord, StoreError>>, StoreError>;
}

fn check_key(participant: &ParticipantId) -> Result<(), StoreError> {
    let raw = participant.as_str();
    let ok = !raw.is_empty()
        && raw.len() <= 128
        && raw
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidKey(raw.to_owned()))
    }
}

/// One file per participant under a data directory.
pub struct FileStore {
    root: PathBuf,
    sync: bool,
    locks: DashMap<(StudyId, ParticipantId), Arc<Mutex<()>>>,
}

impl FileStore {
    /// Opens (creating if needed) a store rooted at `dir`. Writes are
    /// fsynced.
    pub fn open(dir: impl AsRef<FsPath>) -> Result<Self, StoreError> {
        let root = dir.as_ref().join("participants");
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            sync: true,
            locks: DashMap::new(),
        })
    }

    /// Skips fsync. Renames stay atomic, but the latest writes may be lost
    /// on power failure.
    pub fn without_sync(mut self) -> Self {
        self.sync = false;
        self
    }

    fn record_path(&self, study: &StudyId, participant: &ParticipantId) -> PathBuf {
        self.root
            .join(study.as_str())
            .join(format!("{}.json", participant.as_str()))
    }

    fn lock(&self, study: &StudyId, participant: &ParticipantId) -> Arc<Mutex<()>> {
        self.locks
            .entry((study.clone(), participant.clone()))
            .or_default()
            .clone()
    }
}

impl RecordStore for FileStore {
    fn put(&self, record: &ParticipantRecord) -> Result<(), StoreError> {
        check_key(record.participant())?;
        let lock = self.lock(&record.study, record.participant());
        let _guard = lock.lock();
        let target = self.record_path(&record.study, record.participant());
        let dir = target.parent().expect("record path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}.{}.tmp", record.participant(), random_token()));
        let result = (|| -> io::Result<()> {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(record.encode().as_bytes())?;
            if self.sync {
                file.sync_all()?;
            }
            drop(file);
            fs::rename(&tmp, &target)?;
            if self.sync {
                fs::File::open(dir)?.sync_all()?;
            }
            Ok(())
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        Ok(result?)
    }

    fn get(&self, study: &StudyId, participant: &ParticipantId) -> Result<ParticipantRecord, StoreError> {
        check_key(participant)?;
        let path = self.record_path(study, participant);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound {
                    study: study.clone(),
                    participant: participant.clone(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        ParticipantRecord::decode(&text).map_err(|source| StoreError::Decode {
            key: path.display().to_string(),
            source,
        })
    }

    fn list(&self, study: &StudyId) -> Result<Vec<Result<ParticipantRecord, StoreError>>, StoreError> {
        let dir = self.root.join(study.as_str());
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p
                        .file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with('.'))
            })
            .collect();
        paths.sort();
        Ok(paths
            .into_iter()
            .map(|path| {
                let text = fs::read_to_string(&path)?;
                ParticipantRecord::decode(&text).map_err(|source| StoreError::Decode {
                    key: path.display().to_string(),
                    source,
                })
            })
            .collect())
    }
}

/// Process-local store, for tests and load runs.
#[derive(Default)]
pub struct MemoryStore {
    records: Mutex<HashMap<(StudyId, ParticipantId), String>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RecordStore for MemoryStore {
    fn put(&self, record: &ParticipantRecord) -> Result<(), StoreError> {
        check_key(record.participant())?;
        self.records
            .lock()
            .insert((record.study.clone(), record.participant().clone()), record.encode());
        Ok(())
    }

    fn get(&self, study: &StudyId, participant: &ParticipantId) -> Result<ParticipantRecord, StoreError> {
        let text = self
            .records
            .lock()
            .get(&(study.clone(), participant.clone()))
            .cloned()
            .ok_or_else(|| StoreError::NotFound {
                study: study.clone(),
                participant: participant.clone(),
            })?;
        ParticipantRecord::decode(&text).map_err(|source| StoreError::Decode {
            key: participant.to_string(),
            source,
        })
    }

    fn list(&self, study: &StudyId) -> Result<Vec<Result<ParticipantRecord, StoreError>>, StoreError> {
        let records = self.records.lock();
        let mut keys: Vec<_> = records.keys().filter(|(s, _)| s == study).cloned().collect();
        keys.sort();
        Ok(keys
            .into_iter()
            .map(|k| {
                ParticipantRecord::decode(&records[&k]).map_err(|source| StoreError::Decode {
                    key: k.1.to_string(),
                    source,
                })
            })
            .collect())
    }
}
