// Load a looping three-level study and watch the suspension store. With
// page forgetting disabled the same run is reported as a leak.

use studyflow::simclient::{leakcheck_in_process, LeakConfig, LeakError};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    tokio::runtime::Runtime::new()?.block_on(async {
        let config = LeakConfig {
            sessions: 5,
            steps: 30,
            ..LeakConfig::default()
        };
        let report = leakcheck_in_process(&config, true).await?;
        println!(
            "bounded: {} live suspensions at most, {:.1} bytes per session level, trend {:+.2}%",
            report.max_live_suspensions,
            report.bytes_per_session_level,
            report.relative_trend * 100.0
        );

        match leakcheck_in_process(&config, false).await {
            Err(LeakError::LeakDetected { reason, .. }) => println!("without forgetting: {reason}"),
            other => return Err(format!("expected a leak, got {other:?}").into()),
        }
        Ok(())
    })
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
