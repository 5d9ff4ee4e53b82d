use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{Mutex, RwLock};

use crate::id::{ParticipantId, SessionId};
use crate::model::Study;
use crate::state::{Draws, FieldErrors, Parameterization, Path, VarStore};
use crate::widgets::Page;

/// The stored resume state of a session waiting for input.
#[derive(Debug)]
pub struct Suspension {
    pub page: Page,
    /// Position of the suspended step.
    pub cursor: Path,
    pub params: Parameterization,
    pub created_at: Instant,
    pub(crate) touched_at: Instant,
    pub(crate) bytes: usize,
}

impl Suspension {
    pub(crate) fn new(page: Page, cursor: Path, params: Parameterization) -> Self {
        let bytes = 96 + page.estimated_bytes() + cursor.estimated_bytes() + params.estimated_bytes();
        let now = Instant::now();
        Self {
            page,
            cursor,
            params,
            created_at: now,
            touched_at: now,
            bytes,
        }
    }

    pub fn estimated_bytes(&self) -> usize {
        self.bytes
    }
}

pub(crate) struct SessionState {
    pub id: SessionId,
    pub participant: ParticipantId,
    pub study: Arc<Study>,
    pub token_sha256: String,
    pub path: Path,
    pub completed: bool,
    pub vars: VarStore,
    pub draws: Draws,
    pub field_errors: FieldErrors,
    pub enrolled_at: u64,
    pub updated_at: u64,
    pub suspension: Option<Suspension>,
    /// Consumed suspensions kept alive when forgetting is disabled.
    pub retained: Vec<Suspension>,
    /// Dynamic studies generated for this session, by path.
    pub resolved: BTreeMap<Path, Arc<Study>>,
}

pub(crate) struct SessionCell {
    pub delivering: AtomicBool,
    pub state: Mutex<SessionState>,
    /// Published copy for operator reads; never blocks on a delivery.
    pub summary: RwLock<(ParticipantId, Path, u64)>,
}

impl SessionCell {
    pub fn new(state: SessionState) -> Self {
        let summary = (state.participant.clone(), state.path.clone(), state.enrolled_at);
        Self {
            delivering: AtomicBool::new(false),
            state: Mutex::new(state),
            summary: RwLock::new(summary),
        }
    }

    pub fn publish(&self, state: &SessionState) {
        *self.summary.write() = (state.participant.clone(), state.path.clone(), state.enrolled_at);
    }

    /// Claims the single delivery slot; `None` if another delivery holds it.
    pub fn claim(&self) -> Option<DeliveryClaim<'_>> {
        self.delivering
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| DeliveryClaim(self))
    }
}

pub(crate) struct DeliveryClaim<'a>(&'a SessionCell);

impl Drop for DeliveryClaim<'_> {
    fn drop(&mut self) {
        self.0.delivering.store(false, Ordering::Release);
    }
}
