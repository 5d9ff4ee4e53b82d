//! HTTP surface.
//!
//! Participant routes:
//!
//! | Route | Behaviour |
//! |---|---|
//! | `GET /study/{study}` | enroll (sets the session cookie) or resume; 303 to the current page |
//! | `GET /p/{page}` | the live page; 303 to `/study/{study}` once it is forgotten; 404 if unknown |
//! | `GET\|POST /k/{embed}` | deliver the action; 303 to the next page; 410 if the embed is gone |
//! | `GET /study/{study}/view/{name}` | a named view page |
//!
//! Admin routes require `Authorization: Bearer <token>`:
//! `GET /admin/api/metrics`, `GET /admin/api/sessions`,
//! `POST /admin/api/sessions/{id}/expire`, `POST /admin/api/sessions/{id}/reset`.
//!
//! In test mode, `X-Studyflow-Seed: <u64>` seeds the session's draws and
//! `X-Studyflow-Force: toss=h, other=x` forces named draws.

mod config;

pub use config::{ConfigError, ServerConfig};

use std::collections::BTreeMap;
use std::future::IntoFuture;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Form, Json, Router};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::engine::{Engine, EngineConfig, EngineError, Outcome, PageLookup};
use crate::fixtures;
use crate::id::{EmbedId, PageId, ParticipantId, SessionId};
use crate::persistence::{FileStore, MemoryStore, RecordStore, StoreError};
use crate::state::Draws;
use crate::widgets::{html, render_document, Markup, Payload};

pub const SEED_HEADER: &str = "x-studyflow-seed";
pub const FORCE_HEADER: &str = "x-studyflow-force";

#[derive(Debug, Clone, Default)]
pub struct HttpOptions {
    pub admin_token: Option<String>,
    pub test_mode: bool,
}

#[derive(Clone)]
struct App {
    engine: Arc<Engine>,
    options: Arc<HttpOptions>,
}

pub fn cookie_name(study: &str) -> String {
    format!("studyflow-{study}")
}

pub fn router(engine: Arc<Engine>, options: HttpOptions) -> Router {
    let app = App {
        engine,
        options: Arc::new(options),
    };
    Router::new()
        .route("/study/{study}", get(enter_study))
        .route("/study/{study}/view/{name}", get(view))
        .route("/p/{page}", get(show_page))
        .route("/k/{embed}", get(follow_link).post(submit_form))
        .route("/admin/api/metrics", get(admin_metrics))
        .route("/admin/api/sessions", get(admin_sessions))
        .route("/admin/api/sessions/{id}/expire", post(admin_expire))
        .route("/admin/api/sessions/{id}/reset", post(admin_reset))
        .with_state(app)
}

async fn blocking<T: Send + 'static>(app: &App, f: impl FnOnce(&Engine) -> T + Send + 'static) -> T {
    let engine = app.engine.clone();
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .expect("engine call panicked")
}

fn page_url(page: &PageId) -> String {
    format!("/p/{page}")
}

fn embed_url(embed: &EmbedId) -> String {
    format!("/k/{embed}")
}

fn see_other(outcome: &Outcome) -> Response {
    Redirect::to(&page_url(outcome.page())).into_response()
}

fn document(status: StatusCode, body: Markup) -> Response {
    let mut response = (status, Html(render_document(&body, &embed_url))).into_response();
    response
        .headers_mut()
        .insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    response
}

fn plain(status: StatusCode, message: impl Into<String>) -> Response {
    (status, message.into()).into_response()
}

fn anchor(href: String, label: &str) -> Markup {
    Markup::element("a", vec![html::text(label)]).attr("href", href)
}

fn error_response(error: EngineError) -> Response {
    match error {
        EngineError::UnknownStudy(_) | EngineError::UnknownSession(_) => plain(StatusCode::NOT_FOUND, error.to_string()),
        EngineError::GoneEmbed { study } => {
            let mut children = vec![
                html::h1("This page has expired"),
                html::p("The action you followed was already used or is no longer available."),
            ];
            if let Some(study) = study {
                children.push(html::div([anchor(format!("/study/{study}"), "Continue where you left off")]));
            }
            document(StatusCode::GONE, html::section(children))
        }
        EngineError::SessionBusy | EngineError::AlreadyEnrolled { .. } => plain(StatusCode::CONFLICT, error.to_string()),
        EngineError::Storage(StoreError::Unavailable(_)) => {
            tracing::error!(%error, "storage unavailable");
            plain(StatusCode::SERVICE_UNAVAILABLE, "storage unavailable")
        }
        other => {
            tracing::error!(error = %other, "request failed");
            plain(StatusCode::INTERNAL_SERVER_ERROR, other.to_string())
        }
    }
}

fn cookie(headers: &HeaderMap, name: &str) -> Option<String> {
    headers
        .get_all(header::COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .find(|(k, _)| *k == name)
        .map(|(_, v)| v.to_owned())
}

/// Seed and forced draws from the test headers. Empty outside test mode.
fn test_draws(app: &App, headers: &HeaderMap) -> (Option<u64>, BTreeMap<String, String>) {
    if !app.options.test_mode {
        return (None, BTreeMap::new());
    }
    let seed = headers
        .get(SEED_HEADER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok());
    let forced = headers
        .get_all(FORCE_HEADER)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(','))
        .filter_map(|pair| pair.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect();
    (seed, forced)
}

fn session_for_cookie(app: &App, study: &str, headers: &HeaderMap) -> Option<SessionId> {
    let token = cookie(headers, &cookie_name(study))?;
    app.engine.session_for_token(study, &token)
}

async fn enter_study(State(app): State<App>, Path(study): Path<String>, headers: HeaderMap) -> Response {
    if app.engine.study(&study).is_none() {
        return plain(StatusCode::NOT_FOUND, format!("unknown study {study}"));
    }
    let (seed, forced) = test_draws(&app, &headers);
    if let Some(session) = session_for_cookie(&app, &study, &headers) {
        let result = blocking(&app, move |engine| {
            engine.configure_draws(&session, seed, &forced)?;
            engine.resume(&session)
        })
        .await;
        return match result {
            Ok(outcome) => see_other(&outcome),
            Err(e) => error_response(e),
        };
    }
    let mut draws = seed.map_or_else(Draws::from_entropy, Draws::seeded);
    for (label, value) in forced {
        draws.force(label, value);
    }
    let study_id = study.clone();
    let result = blocking(&app, move |engine| {
        engine.start_session_with(&study_id, ParticipantId::generate(), draws)
    })
    .await;
    match result {
        Ok((ticket, outcome)) => {
            let mut response = see_other(&outcome);
            let cookie = format!(
                "{}={}; HttpOnly; SameSite=Lax; Path=/",
                cookie_name(&study),
                ticket.token
            );
            response
                .headers_mut()
                .insert(header::SET_COOKIE, HeaderValue::from_str(&cookie).expect("token is header-safe"));
            response
        }
        Err(e) => error_response(e),
    }
}

async fn show_page(State(app): State<App>, Path(page): Path<String>) -> Response {
    let Some(page) = PageId::parse(&page) else {
        return plain(StatusCode::NOT_FOUND, "unknown page");
    };
    match app.engine.render_page(&page, embed_url) {
        PageLookup::Live(bytes) => {
            let mut response = Html(bytes).into_response();
            response
                .headers_mut()
                .insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
            response
        }
        PageLookup::Forgotten { study } => Redirect::to(&format!("/study/{study}")).into_response(),
        PageLookup::Unknown => plain(StatusCode::NOT_FOUND, "unknown page"),
    }
}

async fn deliver(app: App, embed: String, headers: HeaderMap, payload: Payload) -> Response {
    let Some(embed) = EmbedId::parse(&embed) else {
        return plain(StatusCode::NOT_FOUND, "unknown action");
    };
    let (seed, forced) = test_draws(&app, &headers);
    let result = blocking(&app, move |engine| {
        if seed.is_some() || !forced.is_empty() {
            if let Some(session) = engine.session_for_embed(&embed) {
                engine.configure_draws(&session, seed, &forced)?;
            }
        }
        engine.deliver(&embed, &payload)
    })
    .await;
    match result {
        Ok(outcome) => see_other(&outcome),
        Err(e) => error_response(e),
    }
}

async fn follow_link(
    State(app): State<App>,
    Path(embed): Path<String>,
    headers: HeaderMap,
    Query(payload): Query<Payload>,
) -> Response {
    deliver(app, embed, headers, payload).await
}

async fn submit_form(
    State(app): State<App>,
    Path(embed): Path<String>,
    headers: HeaderMap,
    Form(payload): Form<Payload>,
) -> Response {
    deliver(app, embed, headers, payload).await
}

async fn view(State(app): State<App>, Path((study, name)): Path<(String, String)>, headers: HeaderMap) -> Response {
    let session = session_for_cookie(&app, &study, &headers);
    match app.engine.render_view(&study, &name, session.as_ref(), embed_url) {
        Ok(Some(bytes)) => Html(bytes).into_response(),
        Ok(None) => plain(StatusCode::NOT_FOUND, format!("no view {name}")),
        Err(e) => error_response(e),
    }
}

fn authorized(app: &App, headers: &HeaderMap) -> bool {
    let Some(token) = app.options.admin_token.as_deref() else {
        return false;
    };
    let Some(given) = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
    else {
        return false;
    };
    given.len() == token.len() && given.bytes().zip(token.bytes()).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

fn unauthorized() -> Response {
    let mut response = plain(StatusCode::UNAUTHORIZED, "admin token required");
    response
        .headers_mut()
        .insert(header::WWW_AUTHENTICATE, HeaderValue::from_static("Bearer"));
    response
}

async fn admin_metrics(State(app): State<App>, headers: HeaderMap) -> Response {
    if !authorized(&app, &headers) {
        return unauthorized();
    }
    Json(app.engine.metrics()).into_response()
}

async fn admin_sessions(State(app): State<App>, headers: HeaderMap) -> Response {
    if !authorized(&app, &headers) {
        return unauthorized();
    }
    Json(app.engine.metrics().sessions).into_response()
}

async fn admin_mutation(
    app: App,
    headers: HeaderMap,
    id: String,
    f: fn(&Engine, &SessionId) -> Result<(), EngineError>,
) -> Response {
    if !authorized(&app, &headers) {
        return unauthorized();
    }
    let session = SessionId::from_raw(id);
    match blocking(&app, move |engine| f(engine, &session)).await {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => error_response(e),
    }
}

async fn admin_expire(State(app): State<App>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    admin_mutation(app, headers, id, |engine, session| engine.expire_suspension(session).map(|_| ())).await
}

async fn admin_reset(State(app): State<App>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    admin_mutation(app, headers, id, |engine, session| engine.reset_session(session)).await
}

/// A server running on a background task.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.map_err(std::io::Error::other)?
    }
}

/// Binds `addr` and serves `engine` until stopped.
pub async fn spawn(engine: Arc<Engine>, options: HttpOptions, addr: SocketAddr) -> std::io::Result<RunningServer> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(engine, options);
    let task = tokio::spawn(
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .into_future(),
    );
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        task,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Builds the engine a config describes: store, fixtures, and recovered
/// participants.
pub fn build_engine(config: &ServerConfig) -> Result<Arc<Engine>, ServeError> {
    config.check_fixtures()?;
    let store: Arc<dyn RecordStore> = match &config.data_dir {
        Some(dir) => Arc::new(FileStore::open(dir)?),
        None => Arc::new(MemoryStore::new()),
    };
    let engine = Engine::new(
        store,
        EngineConfig {
            suspension_ttl: config.suspension_ttl(),
            ..EngineConfig::default()
        },
    );
    for name in &config.fixtures {
        let study = fixtures::by_name(name).ok_or_else(|| ConfigError::UnknownFixture(name.clone()))?;
        engine.register(study)?;
    }
    let report = engine.recover()?;
    tracing::info!(restored = report.restored, corrupt = report.corrupt.len(), "recovered participants");
    Ok(Arc::new(engine))
}

/// Runs the server until Ctrl-C, sweeping idle suspensions in the
/// background. Prints the bound address on stdout once listening.
pub async fn serve(config: ServerConfig) -> Result<(), ServeError> {
    let engine = build_engine(&config)?;
    let options = HttpOptions {
        admin_token: config.admin_token.clone(),
        test_mode: config.test_mode,
    };
    let server = spawn(engine.clone(), options, config.address).await?;
    println!("listening on {}", server.base_url());
    tracing::info!(addr = %server.addr, "serving");

    let period = (config.suspension_ttl() / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    let sweeper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let dropped = engine.sweep_expired();
            if dropped > 0 {
                tracing::info!(dropped, "expired idle suspensions");
            }
        }
    });
    tokio::signal::ctrl_c().await?;
    sweeper.abort();
    server.stop().await?;
    Ok(())
}
