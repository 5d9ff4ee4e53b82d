//! Participant state: values, positions, explicitly threaded dynamic
//! bindings and durable variables.

mod env;
mod params;
mod path;
mod record;
mod value;
mod vars;

pub use env::{Draws, Env, FieldErrors, Var};
pub use params::{bindings, Bindings, Parameterization};
pub use path::Path;
pub use record::{restore_state, snapshot_state, DecodeError, StateRecord, STATE_RECORD_VERSION};
pub use value::{truthy, Value};
pub use vars::{Scope, ScopeKey, VarEntry, VarStore};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("value for {name:?} has no text encoding (non-finite float)")]
    Serialization { name: String },
}
