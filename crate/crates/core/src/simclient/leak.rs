use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use tokio::task::JoinSet;

use super::{walk, Client, Policy, TraceError, WalkOptions};
use crate::engine::{Engine, EngineConfig, MetricsSnapshot};
use crate::fixtures;
use crate::http::{self, HttpOptions};
use crate::persistence::MemoryStore;

#[derive(Debug, Clone)]
pub struct LeakConfig {
    pub sessions: usize,
    pub steps: usize,
    /// Participant `i` uses the random policy with seed `seed + i`.
    pub seed: u64,
    pub study: String,
    pub sample_interval: Duration,
    /// Allowed relative growth of the byte estimate over the run.
    pub tolerance: f64,
}

impl Default for LeakConfig {
    fn default() -> Self {
        Self {
            sessions: 50,
            steps: 200,
            seed: 1,
            study: "nested-loop".into(),
            sample_interval: Duration::from_millis(10),
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub elapsed_ms: u64,
    pub live_sessions: usize,
    pub live_suspensions: usize,
    pub suspension_bytes: u64,
    pub deliveries: u64,
}

impl Sample {
    fn new(start: Instant, m: &MetricsSnapshot) -> Self {
        Self {
            elapsed_ms: start.elapsed().as_millis() as u64,
            live_sessions: m.live_sessions,
            live_suspensions: m.live_suspensions,
            suspension_bytes: m.suspension_bytes_estimate,
            deliveries: m.deliveries_total,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LeakReport {
    pub sessions: usize,
    pub depth: usize,
    pub max_live_suspensions: usize,
    pub max_suspension_bytes: u64,
    /// Fitted constant `c` in `bytes <= c * sessions * depth`.
    pub bytes_per_session_level: f64,
    /// Least-squares slope over the steady window, times the window
    /// length, over the window mean.
    pub relative_trend: f64,
    pub first_half_max: u64,
    pub second_half_max: u64,
    pub samples: Vec<Sample>,
}

#[derive(Debug, thiserror::Error)]
pub enum LeakError {
    #[error("leak detected: {reason}")]
    LeakDetected { reason: String, series: Vec<Sample> },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("unknown study {0}")]
    UnknownStudy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        num += dx * (y - mean_y);
        den += dx * dx;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Checks a metrics series. The steady window starts at the first sample
/// where every session is enrolled.
pub fn analyze(samples: Vec<Sample>, sessions: usize, depth: usize, tolerance: f64) -> Result<LeakReport, LeakError> {
    let detected = |reason: String, samples: &[Sample]| LeakError::LeakDetected {
        reason,
        series: samples.to_vec(),
    };
    let max_live = samples.iter().map(|s| s.live_suspensions).max().unwrap_or(0);
    if max_live > sessions {
        return Err(detected(
            format!("{max_live} live suspensions for {sessions} sessions"),
            &samples,
        ));
    }
    let max_bytes = samples.iter().map(|s| s.suspension_bytes).max().unwrap_or(0);
    let start = samples
        .iter()
        .position(|s| s.live_sessions >= sessions)
        .unwrap_or(samples.len());
    let window: Vec<f64> = samples[start..].iter().map(|s| s.suspension_bytes as f64).collect();
    let (mut trend, mut first_half_max, mut second_half_max) = (0.0, 0, 0);
    if window.len() >= 4 {
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        if mean > 0.0 {
            trend = slope(&window) * (window.len() - 1) as f64 / mean;
        }
        let half = window.len() / 2;
        first_half_max = window[..half].iter().cloned().fold(0.0, f64::max) as u64;
        second_half_max = window[half..].iter().cloned().fold(0.0, f64::max) as u64;
        if trend > tolerance {
            return Err(detected(
                format!("suspension bytes trend upward by {:.1}% over the run", trend * 100.0),
                &samples,
            ));
        }
        if second_half_max as f64 > first_half_max as f64 * (1.0 + tolerance) {
            return Err(detected(
                format!("suspension bytes peaked at {second_half_max} after {first_half_max} in the first half"),
                &samples,
            ));
        }
    }
    Ok(LeakReport {
        sessions,
        depth,
        max_live_suspensions: max_live,
        max_suspension_bytes: max_bytes,
        bytes_per_session_level: max_bytes as f64 / (sessions.max(1) * depth.max(1)) as f64,
        relative_trend: trend,
        first_half_max,
        second_half_max,
        samples,
    })
}

/// Runs `config.sessions` random walkers against a server and samples its
/// metrics throughout.
pub async fn leakcheck(base: &str, admin_token: &str, depth: usize, config: &LeakConfig) -> Result<LeakReport, LeakError> {
    let start = Instant::now();
    let sampler_client = Client::new(base);
    let done = Arc::new(AtomicBool::new(false));
    let sampler = {
        let done = done.clone();
        let token = admin_token.to_owned();
        let interval = config.sample_interval;
        tokio::spawn(async move {
            let mut samples = Vec::new();
            while !done.load(Ordering::Relaxed) {
                samples.push(Sample::new(start, &sampler_client.metrics(&token).await?));
                tokio::time::sleep(interval).await;
            }
            samples.push(Sample::new(start, &sampler_client.metrics(&token).await?));
            Ok::<_, TraceError>(samples)
        })
    };

    let mut walkers = JoinSet::new();
    for i in 0..config.sessions {
        let base = base.to_owned();
        let study = config.study.clone();
        let policy = Policy::Random(config.seed.wrapping_add(i as u64));
        let options = WalkOptions {
            step_limit: config.steps,
            ..WalkOptions::default()
        };
        walkers.spawn(async move { walk(&base, &study, &policy, &options).await.map(|_| ()) });
    }
    let mut failure = None;
    while let Some(result) = walkers.join_next().await {
        if let Err(e) = result.expect("walker panicked") {
            failure.get_or_insert(e);
        }
    }
    done.store(true, Ordering::Relaxed);
    let samples = sampler.await.expect("sampler panicked")?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    analyze(samples, config.sessions, depth, config.tolerance)
}

/// [`leakcheck`] against a fresh in-memory server on a local port.
/// `forget_consumed_pages = false` seeds the leak the check must catch.
pub async fn leakcheck_in_process(config: &LeakConfig, forget_consumed_pages: bool) -> Result<LeakReport, LeakError> {
    let study = fixtures::by_name(&config.study).ok_or_else(|| LeakError::UnknownStudy(config.study.clone()))?;
    let depth = study.depth();
    let engine = Engine::new(
        Arc::new(MemoryStore::new()),
        EngineConfig {
            forget_consumed_pages,
            ..EngineConfig::default()
        },
    );
    engine
        .register(study)
        .map_err(|_| LeakError::UnknownStudy(config.study.clone()))?;
    let token = "leakcheck";
    let options = HttpOptions {
        admin_token: Some(token.into()),
        test_mode: true,
    };
    let server = http::spawn(Arc::new(engine), options, SocketAddr::from(([127, 0, 0, 1], 0))).await?;
    let result = leakcheck(&server.base_url(), token, depth, config).await;
    server.stop().await?;
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(bytes: &[u64], live: usize) -> Vec<Sample> {
        bytes
            .iter()
            .enumerate()
            .map(|(i, &b)| Sample {
                elapsed_ms: i as u64,
                live_sessions: live,
                live_suspensions: live,
                suspension_bytes: b,
                deliveries: i as u64,
            })
            .collect()
    }

    #[test]
    fn flat_series_passes() {
        let report = analyze(series(&[1000, 1010, 990, 1005, 1000, 995], 2), 2, 3, 0.05).unwrap();
        assert!(report.relative_trend.abs() < 0.05);
        assert!((report.bytes_per_session_level - 1010.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn linear_growth_is_detected() {
        let bytes: Vec<u64> = (0..20).map(|i| 1000 + 100 * i).collect();
        assert!(matches!(analyze(series(&bytes, 2), 2, 3, 0.05), Err(LeakError::LeakDetected { .. })));
    }

    #[test]
    fn too_many_suspensions_is_detected() {
        assert!(matches!(analyze(series(&[1, 1], 3), 2, 3, 0.05), Err(LeakError::LeakDetected { .. })));
    }

    #[test]
    fn slope_of_a_line() {
        assert!((slope(&[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-12);
        assert_eq!(slope(&[4.0]), 0.0);
    }
}
