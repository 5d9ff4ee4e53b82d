//! A headless participant.
//!
//! [`Client`] speaks to a running server the way a browser would: it keeps
//! the session cookie, never follows redirects on its own, and scrapes the
//! returned pages. [`walk`] drives one participant through a study with a
//! [`Policy`]; [`leakcheck`] drives many at once and checks that the
//! server's suspension store stays bounded.

mod leak;
mod scrape;

pub use leak::{leakcheck, leakcheck_in_process, LeakConfig, LeakError, LeakReport, Sample};
pub use scrape::{scrape, FormInput, InputKind, PageAction, ScrapedPage};

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use reqwest::header::{HeaderMap, HeaderName, HeaderValue, COOKIE, LOCATION, SET_COOKIE};
use reqwest::redirect;

use crate::engine::MetricsSnapshot;

/// Redirect chains longer than this are treated as a loop.
const MAX_REDIRECTS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{method} {url} answered {status}")]
    Status { method: &'static str, url: String, status: u16 },
    #[error("{url} redirected without a Location header")]
    MissingLocation { url: String },
    #[error("redirect loop starting at {url}")]
    RedirectLoop { url: String },
    #[error("no action labelled {label:?} on the page")]
    NoSuchAction { label: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
}

/// One request and its response.
#[derive(Debug, Clone)]
pub struct Visit {
    pub method: &'static str,
    pub url: String,
    pub status: u16,
    pub location: Option<String>,
    /// Scraped body of 200 and 410 responses.
    pub page: Option<ScrapedPage>,
}

pub struct Client {
    http: reqwest::Client,
    base: String,
    cookies: BTreeMap<String, String>,
    headers: HeaderMap,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        let http = reqwest::Client::builder()
            .redirect(redirect::Policy::none())
            .build()
            .expect("client without TLS always builds");
        Self {
            http,
            base: base.into().trim_end_matches('/').to_owned(),
            cookies: BTreeMap::new(),
            headers: HeaderMap::new(),
        }
    }

    /// Sends `name: value` with every request.
    pub fn set_header(&mut self, name: &'static str, value: &str) {
        self.headers.insert(
            HeaderName::from_static(name),
            HeaderValue::from_str(value).expect("header value is visible ASCII"),
        );
    }

    /// Points the client at another server, keeping cookies and headers.
    pub fn set_base(&mut self, base: impl Into<String>) {
        self.base = base.into();
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn absolute(&self, url: &str) -> String {
        if url.starts_with("http://") || url.starts_with("https://") {
            url.to_owned()
        } else {
            format!("{}{}", self.base, url)
        }
    }

    /// One request, no redirect following. Statuses other than 200, 303
    /// and 410 are errors.
    pub async fn request(&mut self, url: &str, form: Option<&[(String, String)]>) -> Result<Visit, TraceError> {
        let method = if form.is_some() { "POST" } else { "GET" };
        let mut request = match form {
            Some(fields) => self.http.post(self.absolute(url)).form(fields),
            None => self.http.get(self.absolute(url)),
        };
        request = request.headers(self.headers.clone());
        if !self.cookies.is_empty() {
            let jar = self
                .cookies
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("; ");
            request = request.header(COOKIE, jar);
        }
        let response = request.send().await?;
        for value in response.headers().get_all(SET_COOKIE) {
            let Ok(value) = value.to_str() else { continue };
            let pair = value.split(';').next().unwrap_or_default();
            if let Some((k, v)) = pair.split_once('=') {
                self.cookies.insert(k.trim().to_owned(), v.trim().to_owned());
            }
        }
        let status = response.status().as_u16();
        let location = response
            .headers()
            .get(LOCATION)
            .and_then(|v| v.to_str().ok())
            .map(str::to_owned);
        if !matches!(status, 200 | 303 | 410) {
            return Err(TraceError::Status {
                method,
                url: url.to_owned(),
                status,
            });
        }
        let body = response.text().await?;
        let page = (status != 303).then(|| scrape(&body));
        Ok(Visit {
            method,
            url: url.to_owned(),
            status,
            location,
            page,
        })
    }

    /// Requests `url` and follows 303s until a page is returned.
    pub async fn open(&mut self, url: &str, form: Option<&[(String, String)]>) -> Result<Vec<Visit>, TraceError> {
        let mut visits = vec![self.request(url, form).await?];
        while visits.last().is_some_and(|v| v.status == 303) {
            if visits.len() > MAX_REDIRECTS {
                return Err(TraceError::RedirectLoop { url: url.to_owned() });
            }
            let last = visits.last().expect("non-empty");
            let next = last.location.clone().ok_or_else(|| TraceError::MissingLocation { url: last.url.clone() })?;
            visits.push(self.request(&next, None).await?);
        }
        Ok(visits)
    }

    /// Follows a link or submits a form with `values`.
    pub async fn act(&mut self, action: &PageAction, values: &[(String, String)]) -> Result<Vec<Visit>, TraceError> {
        if action.is_form {
            self.open(&action.url, Some(values)).await
        } else {
            self.open(&action.url, None).await
        }
    }

    /// `GET /admin/api/metrics`.
    pub async fn metrics(&self, admin_token: &str) -> Result<MetricsSnapshot, TraceError> {
        let url = self.absolute("/admin/api/metrics");
        let response = self.http.get(&url).bearer_auth(admin_token).send().await?;
        if !response.status().is_success() {
            return Err(TraceError::Status {
                method: "GET",
                url,
                status: response.status().as_u16(),
            });
        }
        Ok(response.json().await?)
    }
}

/// Which action a simulated participant takes on each page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy {
    FirstAction,
    Random(u64),
    /// Action labels, in order.
    Scripted(Vec<String>),
}

impl std::str::FromStr for Policy {
    type Err = String;

    /// `first`, `random:<seed>` or `scripted:<label>,<label>,...`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "first" => Ok(Policy::FirstAction),
            Some(("random", seed)) => seed
                .parse()
                .map(Policy::Random)
                .map_err(|_| format!("bad seed {seed:?}")),
            Some(("scripted", labels)) => Ok(Policy::Scripted(labels.split(',').map(str::to_owned).collect())),
            _ => Err(format!("unknown policy {s:?}; expected first, random:<seed> or scripted:<labels>")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkEnd {
    /// Reached a page with no actions.
    Complete,
    StepLimit,
    ScriptExhausted,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub visits: Vec<Visit>,
    pub end: WalkEnd,
    /// Metrics polled after each step when an admin token was given.
    pub samples: Vec<MetricsSnapshot>,
}

impl Trace {
    /// Prose of every page shown, in order.
    pub fn page_texts(&self) -> Vec<String> {
        self.visits
            .iter()
            .filter(|v| v.status == 200)
            .filter_map(|v| v.page.as_ref().map(|p| p.prose.clone()))
            .collect()
    }

    pub fn last_page(&self) -> Option<&ScrapedPage> {
        self.visits.iter().rev().find_map(|v| v.page.as_ref())
    }
}

#[derive(Debug, Clone, Default)]
pub struct WalkOptions {
    /// Maximum number of actions taken.
    pub step_limit: usize,
    /// Sent with every request, e.g. the test-mode seed header.
    pub headers: Vec<(&'static str, String)>,
    /// Poll metrics after each step.
    pub admin_token: Option<String>,
}

/// Values a participant enters into a form.
pub fn fill_form(fields: &[FormInput], rng: Option<&mut StdRng>) -> Vec<(String, String)> {
    let mut rng = rng;
    fields
        .iter()
        .map(|f| {
            let value = match (&f.kind, rng.as_deref_mut()) {
                (InputKind::Choice(options), Some(rng)) if !options.is_empty() => {
                    options[rng.random_range(0..options.len())].clone()
                }
                (InputKind::Choice(options), _) => options.first().cloned().unwrap_or_default(),
                (InputKind::Number, Some(rng)) => rng.random_range(18..80).to_string(),
                (InputKind::Number, None) => "30".to_owned(),
                (InputKind::Text, _) => "answer".to_owned(),
            };
            (f.name.clone(), value)
        })
        .collect()
}

/// Walks `study` as one new participant.
pub async fn walk(base: &str, study: &str, policy: &Policy, options: &WalkOptions) -> Result<Trace, TraceError> {
    let mut trace = Trace {
        visits: Vec::new(),
        end: WalkEnd::StepLimit,
        samples: Vec::new(),
    };
    if options.step_limit == 0 {
        return Ok(trace);
    }
    let mut client = Client::new(base);
    for (name, value) in &options.headers {
        client.set_header(name, value);
    }
    let mut rng = match policy {
        Policy::Random(seed) => Some(StdRng::seed_from_u64(*seed)),
        _ => None,
    };
    let mut script = match policy {
        Policy::Scripted(labels) => labels.clone().into_iter(),
        _ => Vec::new().into_iter(),
    };
    trace.visits.extend(client.open(&format!("/study/{study}"), None).await?);
    let mut steps = 0;
    loop {
        let page = trace
            .last_page()
            .cloned()
            .expect("open ends on a 200 or 410 page");
        if page.actions.is_empty() {
            trace.end = WalkEnd::Complete;
            break;
        }
        if steps >= options.step_limit {
            trace.end = WalkEnd::StepLimit;
            break;
        }
        let action = match policy {
            Policy::FirstAction => page.actions[0].clone(),
            Policy::Random(_) => {
                let rng = rng.as_mut().expect("random policy has a generator");
                page.actions[rng.random_range(0..page.actions.len())].clone()
            }
            Policy::Scripted(_) => {
                let Some(label) = script.next() else {
                    trace.end = WalkEnd::ScriptExhausted;
                    break;
                };
                page.actions
                    .iter()
                    .find(|a| a.label == label)
                    .cloned()
                    .ok_or(TraceError::NoSuchAction { label })?
            }
        };
        let values = fill_form(&action.fields, rng.as_mut());
        trace.visits.extend(client.act(&action, &values).await?);
        steps += 1;
        if let Some(token) = &options.admin_token {
            trace.samples.push(client.metrics(token).await?);
        }
    }
    Ok(trace)
}

/// Runs `sessions` participants concurrently. Participant `i` sends
/// `seed + i` as the test-mode seed, and a random policy is reseeded the
/// same way.
pub async fn simulate(
    base: &str,
    study: &str,
    sessions: usize,
    steps: usize,
    seed: u64,
    policy: &Policy,
) -> Result<Vec<Trace>, TraceError> {
    let mut walkers = tokio::task::JoinSet::new();
    for i in 0..sessions {
        let seed = seed.wrapping_add(i as u64);
        let policy = match policy {
            Policy::Random(_) => Policy::Random(seed),
            other => other.clone(),
        };
        let options = WalkOptions {
            step_limit: steps,
            headers: vec![(crate::http::SEED_HEADER, seed.to_string())],
            admin_token: None,
        };
        let (base, study) = (base.to_owned(), study.to_owned());
        walkers.spawn(async move { (i, walk(&base, &study, &policy, &options).await) });
    }
    let mut traces: Vec<Option<Trace>> = vec![None; sessions];
    while let Some(joined) = walkers.join_next().await {
        let (i, trace) = joined.expect("walker panicked");
        traces[i] = Some(trace?);
    }
    Ok(traces.into_iter().flatten().collect())
}
