use serde::{Deserialize, Serialize};

use super::{Bindings, Env, Parameterization, Path, VarStore};
use crate::id::ParticipantId;

/// Current version of the text encoding.
pub const STATE_RECORD_VERSION: u32 = 1;

/// Serializable snapshot of a participant's state: position, dynamic
/// bindings and variables.
///
/// Encoded as pretty-printed JSON with a fixed field order, so two
/// snapshots can be diffed line by line:
///
/// ```text
/// {
///   "version": 1,
///   "participant": "p-1",
///   "path": ["example", "choices", "heads-or-tails"],
///   "parameterization": [ { "name": {"text": "value"} } ],
///   "vars": [ { "scope": "global", "name": "ok?", "value": {"bool": true} } ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub version: u32,
    pub participant: ParticipantId,
    pub path: Path,
    /// Frames outermost first.
    pub parameterization: Vec<Bindings>,
    pub vars: VarStore,
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed state record: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported state record version {found} (expected {STATE_RECORD_VERSION})")]
    Version { found: u32 },
}

impl StateRecord {
    pub fn capture(env: &Env) -> Self {
        Self {
            version: STATE_RECORD_VERSION,
            participant: env.participant().clone(),
            path: env.path().clone(),
            parameterization: env.params().frames(),
            vars: env.vars().clone(),
        }
    }

    pub fn restore(self) -> Env {
        Env::new(
            self.participant,
            self.path,
            Parameterization::from_frames(self.parameterization),
            self.vars,
        )
    }

    pub fn encode(&self) -> String {
        // Values are checked for encodability on write, so this cannot fail.
        serde_json::to_string_pretty(self).expect("state records are always encodable")
    }

    pub fn decode(text: &str) -> Result<Self, DecodeError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != STATE_RECORD_VERSION {
            return Err(DecodeError::Version { found: header.version });
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Captures the state visible through `env`.
pub fn snapshot_state(env: &Env) -> StateRecord {
    StateRecord::capture(env)
}

/// Rebuilds an [`Env`] from a snapshot.
pub fn restore_state(record: StateRecord) -> Env {
    record.restore()
}
