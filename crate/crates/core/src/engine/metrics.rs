use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

/// Lock-free counters and gauges.
#[derive(Debug, Default)]
pub(crate) struct Metrics {
    pub live_suspensions: AtomicUsize,
    pub suspension_bytes: AtomicU64,
    pub deliveries_total: AtomicU64,
    pub gone_embed_total: AtomicU64,
}

impl Metrics {
    pub fn add_suspension(&self, bytes: usize) {
        self.live_suspensions.fetch_add(1, Ordering::Relaxed);
        self.suspension_bytes.fetch_add(bytes as u64, Ordering::Relaxed);
    }

    pub fn remove_suspension(&self, bytes: usize) {
        self.live_suspensions.fetch_sub(1, Ordering::Relaxed);
        self.suspension_bytes.fetch_sub(bytes as u64, Ordering::Relaxed);
    }
}

/// One row of the operator session table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSummary {
    pub id: String,
    pub participant: String,
    pub path: Vec<String>,
    pub age_seconds: u64,
}

/// Point-in-time view served at `/admin/api/metrics`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsSnapshot {
    pub live_sessions: usize,
    pub live_suspensions: usize,
    pub suspension_bytes_estimate: u64,
    pub deliveries_total: u64,
    pub gone_embed_total: u64,
    pub sessions: Vec<SessionSummary>,
}
