//! The session engine: enrollment, delivery of one-shot actions, and
//! resumption.
//!
//! Each session has at most one live [`Suspension`]. Delivering one of its
//! embeds consumes the suspension, runs the action, walks to the next step
//! and suspends again. Pages and embeds of consumed suspensions are
//! forgotten at once.

mod metrics;
mod session;
mod walk;

use std::collections::BTreeMap;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use dashmap::mapref::entry::Entry;
use dashmap::DashMap;
use sha2::{Digest, Sha256};

pub use metrics::{MetricsSnapshot, SessionSummary};
pub use session::Suspension;

use self::metrics::Metrics;
use self::session::{SessionCell, SessionState};
use self::walk::{Mode, Settled, WalkError};
use crate::id::{random_token, EmbedId, ParticipantId, PageId, SessionId, StudyId};
use crate::model::{validate_study, Diagnostic, ModelError, StepError, StepResult, Study, StudyNode};
use crate::persistence::{MemoryStore, ParticipantRecord, RecordStore, StoreError, PARTICIPANT_RECORD_VERSION};
use crate::state::{Draws, Env, Parameterization, Path, StateRecord, STATE_RECORD_VERSION};
use crate::widgets::{html, render_document, render_html, Markup, Page, PageBuilder, Payload};

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Idle suspensions older than this are dropped by [`Engine::sweep_expired`].
    pub suspension_ttl: Duration,
    /// Test hook. When false, consumed suspensions are kept in memory
    /// (still unusable), which makes the engine leak.
    pub forget_consumed_pages: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            suspension_ttl: Duration::from_secs(24 * 60 * 60),
            forget_consumed_pages: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("unknown study {0}")]
    UnknownStudy(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("study {study} failed validation: {}", join(diagnostics))]
    InvalidStudy { study: StudyId, diagnostics: Vec<Diagnostic> },
    #[error("participant {participant} is already enrolled in {study}")]
    AlreadyEnrolled { study: StudyId, participant: ParticipantId },
    /// The embed belongs to a consumed, expired or unknown page.
    #[error("embed is no longer live")]
    GoneEmbed { study: Option<StudyId> },
    #[error("another delivery for this session is in progress")]
    SessionBusy,
    /// The stored position no longer exists. The session was moved back to
    /// the study entry before this was returned.
    #[error("stored position {path} does not exist; session reset to entry")]
    StalePosition { path: Path },
    #[error("dynamic study at {path} is invalid: {reason}")]
    InvalidDynamicStudy { path: Path, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step failed: {0}")]
    Handler(#[from] StepError),
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error("walk did not settle on a step")]
    Runaway,
}

fn join(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl From<WalkError> for EngineError {
    fn from(e: WalkError) -> Self {
        match e {
            WalkError::Stale(path) => EngineError::StalePosition { path },
            WalkError::InvalidDynamic { path, reason } => EngineError::InvalidDynamicStudy { path, reason },
            WalkError::Model(e) => EngineError::Model(e),
            WalkError::Runaway => EngineError::Runaway,
        }
    }
}

/// Result of a successful enrollment, resume or delivery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    PageReady(PageId),
    /// The page has no actions; the walk is over.
    StudyComplete(PageId),
}

impl Outcome {
    pub fn page(&self) -> &PageId {
        match self {
            Outcome::PageReady(p) | Outcome::StudyComplete(p) => p,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Outcome::StudyComplete(_))
    }

    fn of(page: &Page) -> Self {
        if page.is_terminal() {
            Outcome::StudyComplete(page.id.clone())
        } else {
            Outcome::PageReady(page.id.clone())
        }
    }
}

/// Handed to a new participant. `token` goes into their cookie and is only
/// stored hashed.
#[derive(Debug, Clone)]
pub struct SessionTicket {
    pub session: SessionId,
    pub token: String,
}

#[derive(Debug)]
pub enum PageLookup {
    Live(Vec<u8>),
    /// The page id is well formed but its page is gone.
    Forgotten { study: StudyId },
    Unknown,
}

/// What a participant sees on a live page, without HTML.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageInfo {
    pub id: PageId,
    /// Page text outside links and forms.
    pub prose: String,
    /// Link and submit labels with their embeds, in document order.
    pub actions: Vec<(String, EmbedId)>,
}

impl PageInfo {
    pub fn action(&self, label: &str) -> Option<&EmbedId> {
        self.actions.iter().find(|(l, _)| l == label).map(|(_, e)| e)
    }
}

#[derive(Debug, Default)]
pub struct RecoveryReport {
    pub restored: usize,
    /// Records that could not be read, with the reason.
    pub corrupt: Vec<String>,
}

pub struct Engine {
    config: EngineConfig,
    store: Arc<dyn RecordStore>,
    studies: DashMap<StudyId, Arc<Study>>,
    sessions: DashMap<SessionId, Arc<SessionCell>>,
    tokens: DashMap<(StudyId, String), SessionId>,
    enrollments: DashMap<(StudyId, ParticipantId), SessionId>,
    embeds: DashMap<EmbedId, SessionId>,
    pages: DashMap<PageId, SessionId>,
    metrics: Metrics,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn completion_page(st: &SessionState) -> Suspension {
    let body = html::section([
        html::h1("Study complete"),
        html::p("Thank you. You can close this page."),
    ]);
    let page = Page::assemble(&st.study.id, body, BTreeMap::new()).expect("completion page has no embeds");
    Suspension::new(page, Path::root(st.study.id.clone()), Parameterization::empty())
}

impl Engine {
    pub fn new(store: Arc<dyn RecordStore>, config: EngineConfig) -> Self {
        Self {
            config,
            store,
            studies: DashMap::new(),
            sessions: DashMap::new(),
            tokens: DashMap::new(),
            enrollments: DashMap::new(),
            embeds: DashMap::new(),
            pages: DashMap::new(),
            metrics: Metrics::default(),
        }
    }

    pub fn in_memory() -> Self {
        Self::new(Arc::new(MemoryStore::new()), EngineConfig::default())
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Validates and registers a study, replacing any study with the same id.
    pub fn register(&self, study: Study) -> Result<Arc<Study>, EngineError> {
        let diagnostics = validate_study(&study);
        if !diagnostics.is_empty() {
            return Err(EngineError::InvalidStudy {
                study: study.id.clone(),
                diagnostics,
            });
        }
        let study = Arc::new(study);
        self.studies.insert(study.id.clone(), study.clone());
        Ok(study)
    }

    pub fn study(&self, id: &str) -> Option<Arc<Study>> {
        self.studies.get(id).map(|s| s.clone())
    }

    pub fn study_ids(&self) -> Vec<StudyId> {
        let mut ids: Vec<_> = self.studies.iter().map(|e| e.key().clone()).collect();
        ids.sort();
        ids
    }

    /// Loads stored participants of every registered study. Sessions come
    /// back without suspensions; their pages are rebuilt on the next resume.
    pub fn recover(&self) -> Result<RecoveryReport, EngineError> {
        let mut report = RecoveryReport::default();
        for study in self.studies.iter().map(|e| e.value().clone()).collect::<Vec<_>>() {
            for entry in self.store.list(&study.id)? {
                let record = match entry {
                    Ok(r) => r,
                    Err(e) => {
                        tracing::warn!(study = %study.id, error = %e, "skipping unreadable participant record");
                        report.corrupt.push(e.to_string());
                        continue;
                    }
                };
                let key = (study.id.clone(), record.participant().clone());
                if self.enrollments.contains_key(&key) {
                    continue;
                }
                let st = SessionState {
                    id: record.session.clone(),
                    participant: record.state.participant,
                    study: study.clone(),
                    token_sha256: record.token_sha256,
                    path: record.state.path,
                    completed: record.completed,
                    vars: record.state.vars,
                    draws: Draws::from_entropy(),
                    field_errors: Default::default(),
                    enrolled_at: record.enrolled_at,
                    updated_at: record.updated_at,
                    suspension: None,
                    retained: Vec::new(),
                    resolved: BTreeMap::new(),
                };
                self.enrollments.insert(key, st.id.clone());
                self.tokens.insert((study.id.clone(), st.token_sha256.clone()), st.id.clone());
                self.sessions.insert(st.id.clone(), Arc::new(SessionCell::new(st)));
                report.restored += 1;
            }
        }
        Ok(report)
    }

    pub fn start_session(&self, study: &str, participant: ParticipantId) -> Result<(SessionTicket, Outcome), EngineError> {
        self.start_session_with(study, participant, Draws::from_entropy())
    }

    /// Enrolls a participant and renders their first page.
    pub fn start_session_with(
        &self,
        study: &str,
        participant: ParticipantId,
        draws: Draws,
    ) -> Result<(SessionTicket, Outcome), EngineError> {
        let study = self.study(study).ok_or_else(|| EngineError::UnknownStudy(study.to_owned()))?;
        let id = SessionId::generate();
        let key = (study.id.clone(), participant.clone());
        match self.enrollments.entry(key.clone()) {
            Entry::Occupied(_) => {
                return Err(EngineError::AlreadyEnrolled {
                    study: study.id.clone(),
                    participant,
                })
            }
            Entry::Vacant(slot) => {
                slot.insert(id.clone());
            }
        }
        match self.store.get(&study.id, &participant) {
            Err(StoreError::NotFound { .. }) => {}
            Ok(_) => {
                self.enrollments.remove(&key);
                return Err(EngineError::AlreadyEnrolled {
                    study: study.id.clone(),
                    participant,
                });
            }
            Err(e) => {
                self.enrollments.remove(&key);
                return Err(e.into());
            }
        }

        let token = random_token();
        let now = now_ms();
        let mut st = SessionState {
            id: id.clone(),
            participant,
            study: study.clone(),
            token_sha256: hash_token(&token),
            path: Path::root(study.id.clone()),
            completed: false,
            vars: Default::default(),
            draws,
            field_errors: Default::default(),
            enrolled_at: now,
            updated_at: now,
            suspension: None,
            retained: Vec::new(),
            resolved: BTreeMap::new(),
        };
        let outcome = self.present(&mut st, Path::root(study.id.clone()), Mode::Enter);
        let persisted = self.persist(&mut st);
        self.tokens.insert((study.id.clone(), st.token_sha256.clone()), id.clone());
        self.sessions.insert(id.clone(), Arc::new(SessionCell::new(st)));
        persisted?;
        Ok((SessionTicket { session: id, token }, outcome?))
    }

    /// The session owning a cookie token.
    pub fn session_for_token(&self, study: &str, token: &str) -> Option<SessionId> {
        let study = StudyId::new(study).ok()?;
        self.tokens.get(&(study, hash_token(token))).map(|s| s.clone())
    }

    pub fn session_for_embed(&self, embed: &EmbedId) -> Option<SessionId> {
        self.embeds.get(embed).map(|s| s.clone())
    }

    pub fn session_for_participant(&self, study: &str, participant: &ParticipantId) -> Option<SessionId> {
        let study = StudyId::new(study).ok()?;
        self.enrollments.get(&(study, participant.clone())).map(|s| s.clone())
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        let mut ids: Vec<_> = self.sessions.iter().map(|e| e.key().clone()).collect();
        ids.sort();
        ids
    }

    fn cell(&self, session: &SessionId) -> Result<Arc<SessionCell>, EngineError> {
        self.sessions
            .get(session)
            .map(|c| c.clone())
            .ok_or_else(|| EngineError::UnknownSession(session.to_string()))
    }

    /// Delivers one embed. The embed's page is consumed whatever the action
    /// returns. An embed that is not in a live suspension changes nothing.
    pub fn deliver(&self, embed: &EmbedId, payload: &Payload) -> Result<Outcome, EngineError> {
        let gone = || {
            self.metrics.gone_embed_total.fetch_add(1, Ordering::Relaxed);
            EngineError::GoneEmbed {
                study: StudyId::new(embed.study()).ok().filter(|s| self.studies.contains_key(s)),
            }
        };
        let Some(session) = self.embeds.get(embed).map(|s| s.clone()) else {
            return Err(gone());
        };
        let cell = self.cell(&session)?;
        let _claim = cell.claim().ok_or(EngineError::SessionBusy)?;
        let mut st = cell.state.lock();
        let live = st
            .suspension
            .as_ref()
            .is_some_and(|s| s.page.actions.contains_key(embed));
        if !live {
            return Err(gone());
        }
        let mut suspension = st.suspension.take().expect("checked live");
        let action = suspension.page.actions.remove(embed).expect("checked live");
        let cursor = suspension.cursor.clone();
        let params = suspension.params.clone();
        self.metrics.deliveries_total.fetch_add(1, Ordering::Relaxed);

        // Siblings stay indexed while the action runs so that a concurrent
        // delivery sees SessionBusy rather than GoneEmbed.
        let saved = st.vars.clone();
        let result = walk::with_env(&mut st, &cursor, &params, |env| action(env, payload));
        self.embeds.remove(embed);
        self.retire(&mut st, suspension);
        let mode = match result {
            Ok(StepResult::Continue) => Mode::Advance,
            Ok(StepResult::Retry) => Mode::Enter,
            Err(e) => {
                tracing::warn!(session = %st.id, path = %cursor, error = %e, "action failed; re-rendering step");
                st.vars = saved;
                Mode::Enter
            }
        };
        let outcome = self.present(&mut st, cursor, mode);
        let persisted = self.persist(&mut st);
        cell.publish(&st);
        persisted?;
        outcome
    }

    /// Current page of the session, rebuilding it from the stored position
    /// if there is no live suspension.
    pub fn fast_forward(&self, session: &SessionId) -> Result<Outcome, EngineError> {
        let cell = self.cell(session)?;
        let _claim = cell.claim().ok_or(EngineError::SessionBusy)?;
        let mut st = cell.state.lock();
        if let Some(s) = st.suspension.as_mut() {
            s.touched_at = Instant::now();
            return Ok(Outcome::of(&s.page));
        }
        let path = st.path.clone();
        let mode = if st.completed && path.len() <= 1 { Mode::Advance } else { Mode::Enter };
        let outcome = match self.present(&mut st, path, mode) {
            Err(EngineError::StalePosition { path }) => {
                tracing::warn!(session = %st.id, %path, "stored position is stale; resetting to entry");
                st.path = Path::root(st.study.id.clone());
                st.completed = false;
                st.resolved.clear();
                Err(EngineError::StalePosition { path })
            }
            other => other,
        };
        let persisted = self.persist(&mut st);
        cell.publish(&st);
        persisted?;
        outcome
    }

    /// [`fast_forward`](Self::fast_forward), retrying once after a stale
    /// position has been reset.
    pub fn resume(&self, session: &SessionId) -> Result<Outcome, EngineError> {
        match self.fast_forward(session) {
            Err(EngineError::StalePosition { .. }) => self.fast_forward(session),
            other => other,
        }
    }

    /// Drops the live suspension. The next resume rebuilds it from the
    /// stored position. Returns whether there was one.
    pub fn expire_suspension(&self, session: &SessionId) -> Result<bool, EngineError> {
        let cell = self.cell(session)?;
        let _claim = cell.claim().ok_or(EngineError::SessionBusy)?;
        let mut st = cell.state.lock();
        Ok(self.drop_suspension(&mut st))
    }

    /// Moves the session back to the study entry. Variables are kept.
    pub fn reset_session(&self, session: &SessionId) -> Result<(), EngineError> {
        let cell = self.cell(session)?;
        let _claim = cell.claim().ok_or(EngineError::SessionBusy)?;
        let mut st = cell.state.lock();
        self.drop_suspension(&mut st);
        st.completed = false;
        st.resolved.clear();
        let root = Path::root(st.study.id.clone());
        st.path = match walk::settle(&mut st, root.clone(), Mode::Enter) {
            Ok((path, Settled::Step { .. })) => path,
            _ => root,
        };
        let persisted = self.persist(&mut st);
        cell.publish(&st);
        persisted.map_err(Into::into)
    }

    /// Drops suspensions idle for longer than the configured TTL.
    pub fn sweep_expired(&self) -> usize {
        let ttl = self.config.suspension_ttl;
        let cells: Vec<_> = self.sessions.iter().map(|e| e.value().clone()).collect();
        let mut dropped = 0;
        for cell in cells {
            let Some(_claim) = cell.claim() else { continue };
            let mut st = cell.state.lock();
            let idle = st.suspension.as_ref().is_some_and(|s| s.touched_at.elapsed() > ttl);
            if idle && self.drop_suspension(&mut st) {
                dropped += 1;
            }
        }
        dropped
    }

    /// Renders a live page. `url_for` maps embeds to their URLs.
    pub fn render_page(&self, page: &PageId, url_for: impl Fn(&EmbedId) -> String) -> PageLookup {
        let forgotten = || {
            match StudyId::new(page.study()).ok().filter(|s| self.studies.contains_key(s)) {
                Some(study) => PageLookup::Forgotten { study },
                None => PageLookup::Unknown,
            }
        };
        let Some(session) = self.pages.get(page).map(|s| s.clone()) else {
            return forgotten();
        };
        let Ok(cell) = self.cell(&session) else {
            return forgotten();
        };
        let mut st = cell.state.lock();
        match st.suspension.as_mut() {
            Some(s) if &s.page.id == page => {
                s.touched_at = Instant::now();
                PageLookup::Live(render_html(&s.page, url_for))
            }
            _ => forgotten(),
        }
    }

    /// The live page of a session, if any.
    pub fn inspect(&self, session: &SessionId) -> Result<Option<PageInfo>, EngineError> {
        let cell = self.cell(session)?;
        let st = cell.state.lock();
        Ok(st.suspension.as_ref().map(|s| PageInfo {
            id: s.page.id.clone(),
            prose: s.page.body.prose(),
            actions: s
                .page
                .body
                .labeled_embeds()
                .into_iter()
                .map(|(e, l)| (l.to_owned(), e.clone()))
                .collect(),
        }))
    }

    /// Renders a named view. With a session, the view of its current step
    /// is preferred; otherwise the first step in the study declaring it.
    /// Views cannot register actions.
    pub fn render_view(
        &self,
        study: &str,
        name: &str,
        session: Option<&SessionId>,
        url_for: impl Fn(&EmbedId) -> String,
    ) -> Result<Option<Vec<u8>>, EngineError> {
        let study = self.study(study).ok_or_else(|| EngineError::UnknownStudy(study.to_owned()))?;
        let run = |env: &mut Env, handler: &crate::model::Handler| -> Result<Markup, StepError> {
            let mut builder = PageBuilder::without_registrar(env, study.id.clone());
            handler(&mut builder)
        };
        if let Some(session) = session {
            let cell = self.cell(session)?;
            let mut st = cell.state.lock();
            let path = st.path.clone();
            let located = walk::locate(&mut st, &path);
            let (handler, params) = match located {
                Ok(walk::Located::Step { parent, index, params }) => match &parent.children[index] {
                    StudyNode::Step(step) => (step.views.get(name).cloned(), params),
                    _ => (None, params),
                },
                _ => (None, Parameterization::empty()),
            };
            let handler = handler.or_else(|| find_view(&st.study, name));
            let Some(handler) = handler else { return Ok(None) };
            let body = walk::with_env(&mut st, &path, &params, |env| run(env, &handler))?;
            return Ok(Some(render_document(&body, &url_for).into_bytes()));
        }
        let Some(handler) = find_view(&study, name) else { return Ok(None) };
        let mut env = Env::blank("anonymous");
        let body = run(&mut env, &handler)?;
        Ok(Some(render_document(&body, &url_for).into_bytes()))
    }

    /// Test hook for randomness. A seed reseeds the session's generator only
    /// when it differs from the last one applied; forced draws always apply.
    pub fn configure_draws(
        &self,
        session: &SessionId,
        seed: Option<u64>,
        forced: &BTreeMap<String, String>,
    ) -> Result<(), EngineError> {
        let cell = self.cell(session)?;
        let mut st = cell.state.lock();
        if let Some(seed) = seed {
            if st.draws.seed() != Some(seed) {
                let forced = st.draws.forced().clone();
                st.draws = Draws::seeded(seed);
                for (label, value) in forced {
                    st.draws.force(label, value);
                }
            }
        }
        for (label, value) in forced {
            st.draws.force(label.clone(), value.clone());
        }
        Ok(())
    }

    /// The session's durable state as it would be stored.
    pub fn snapshot_state(&self, session: &SessionId) -> Result<StateRecord, EngineError> {
        let cell = self.cell(session)?;
        let st = cell.state.lock();
        Ok(state_record(&st))
    }

    /// Position and completion flag.
    pub fn position(&self, session: &SessionId) -> Result<(Path, bool), EngineError> {
        let cell = self.cell(session)?;
        let st = cell.state.lock();
        Ok((st.path.clone(), st.completed))
    }

    /// Cursor of the live suspension, if any.
    pub fn suspension_cursor(&self, session: &SessionId) -> Result<Option<Path>, EngineError> {
        let cell = self.cell(session)?;
        let st = cell.state.lock();
        Ok(st.suspension.as_ref().map(|s| s.cursor.clone()))
    }

    /// Deterministic text covering every session's state, live page and
    /// embeds. Equal fingerprints mean nothing observable changed.
    pub fn fingerprint(&self) -> String {
        let mut out = String::new();
        for id in self.session_ids() {
            let Ok(cell) = self.cell(&id) else { continue };
            let st = cell.state.lock();
            out.push_str(&record_of(&st).encode());
            match &st.suspension {
                Some(s) => {
                    out.push_str(&format!("\npage {} at {}\n", s.page.id, s.cursor));
                    for embed in s.page.embed_ids() {
                        out.push_str(&format!("embed {embed}\n"));
                    }
                }
                None => out.push_str("\nno page\n"),
            }
            out.push_str(&format!("retained {}\n", st.retained.len()));
        }
        out
    }

    /// Number of entries in the page and embed indexes.
    pub fn index_sizes(&self) -> (usize, usize) {
        (self.pages.len(), self.embeds.len())
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        let now = now_ms();
        let mut sessions: Vec<SessionSummary> = self
            .sessions
            .iter()
            .map(|e| {
                let (participant, path, enrolled_at) = e.value().summary.read().clone();
                SessionSummary {
                    id: e.key().to_string(),
                    participant: participant.to_string(),
                    path: path.to_strings(),
                    age_seconds: now.saturating_sub(enrolled_at) / 1000,
                }
            })
            .collect();
        sessions.sort_by(|a, b| a.id.cmp(&b.id));
        MetricsSnapshot {
            live_sessions: sessions.len(),
            live_suspensions: self.metrics.live_suspensions.load(Ordering::Relaxed),
            suspension_bytes_estimate: self.metrics.suspension_bytes.load(Ordering::Relaxed),
            deliveries_total: self.metrics.deliveries_total.load(Ordering::Relaxed),
            gone_embed_total: self.metrics.gone_embed_total.load(Ordering::Relaxed),
            sessions,
        }
    }

    /// Walks from `from` to the next step, renders and installs it.
    fn present(&self, st: &mut SessionState, from: Path, mode: Mode) -> Result<Outcome, EngineError> {
        let (_, settled) = walk::settle(st, from, mode)?;
        let suspension = match settled {
            Settled::Step {
                path,
                parent,
                index,
                params,
            } => walk::render_step(st, &path, &parent, index, params)?,
            Settled::Exhausted => completion_page(st),
        };
        st.path = suspension.cursor.clone();
        if suspension.page.is_terminal() {
            st.completed = true;
        }
        let outcome = Outcome::of(&suspension.page);
        self.install(st, suspension);
        Ok(outcome)
    }

    fn install(&self, st: &mut SessionState, suspension: Suspension) {
        self.drop_suspension(st);
        self.pages.insert(suspension.page.id.clone(), st.id.clone());
        for embed in suspension.page.embed_ids() {
            self.embeds.insert(embed.clone(), st.id.clone());
        }
        self.metrics.add_suspension(suspension.estimated_bytes());
        st.suspension = Some(suspension);
    }

    fn drop_suspension(&self, st: &mut SessionState) -> bool {
        match st.suspension.take() {
            Some(s) => {
                self.retire(st, s);
                true
            }
            None => false,
        }
    }

    fn retire(&self, st: &mut SessionState, suspension: Suspension) {
        if !self.config.forget_consumed_pages {
            st.retained.push(suspension);
            return;
        }
        self.pages.remove(&suspension.page.id);
        for embed in suspension.page.embed_ids() {
            self.embeds.remove(embed);
        }
        self.metrics.remove_suspension(suspension.estimated_bytes());
    }

    fn persist(&self, st: &mut SessionState) -> Result<(), StoreError> {
        st.updated_at = st.updated_at.max(now_ms());
        self.store.put(&record_of(st))
    }
}

fn find_view(study: &Study, name: &str) -> Option<crate::model::Handler> {
    study
        .flatten_steps()
        .into_iter()
        .find_map(|step| step.views.get(name).cloned())
}

fn state_record(st: &SessionState) -> StateRecord {
    StateRecord {
        version: STATE_RECORD_VERSION,
        participant: st.participant.clone(),
        path: st.path.clone(),
        parameterization: st.suspension.as_ref().map(|s| s.params.frames()).unwrap_or_default(),
        vars: st.vars.clone(),
    }
}

fn record_of(st: &SessionState) -> ParticipantRecord {
    ParticipantRecord {
        version: PARTICIPANT_RECORD_VERSION,
        study: st.study.id.clone(),
        session: st.id.clone(),
        token_sha256: st.token_sha256.clone(),
        completed: st.completed,
        enrolled_at: st.enrolled_at,
        updated_at: st.updated_at,
        state: state_record(st),
    }
}
