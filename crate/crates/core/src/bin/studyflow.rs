use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use studyflow::engine::Engine;
use studyflow::http::{self, HttpOptions, ServerConfig};
use studyflow::model::{validate_study, StudyDescription};
use studyflow::simclient::{self, LeakConfig, LeakError, Policy};
use studyflow::fixtures;

#[derive(Parser)]
#[command(name = "studyflow", version, about = "Serve and exercise study flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a study manifest and print its diagnostics.
    Validate { manifest: PathBuf },
    /// Walk simulated participants through a study on an in-process server.
    Simulate {
        #[arg(long, default_value_t = 1)]
        sessions: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// first, random:<seed> or scripted:<label>,<label>,...
        #[arg(long, default_value = "first")]
        policy: Policy,
        #[arg(long, default_value = "example")]
        study: String,
    },
    /// Check that suspension memory stays bounded under load.
    Leakcheck {
        #[arg(long, default_value_t = 50)]
        sessions: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Keep consumed pages in memory (the check should then fail).
        #[arg(long, hide = true)]
        keep_consumed_pages: bool,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

async fn run(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Serve { config } => {
            http::serve(ServerConfig::load(&config)?).await?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { manifest } => {
            let text = std::fs::read_to_string(&manifest)?;
            let study = StudyDescription::from_toml(&text)?.assemble()?;
            let diagnostics = validate_study(&study);
            for d in &diagnostics {
                println!("{d}");
            }
            if diagnostics.is_empty() {
                println!("{}: ok", manifest.display());
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Simulate {
            sessions,
            steps,
            seed,
            policy,
            study,
        } => {
            let engine = Engine::in_memory();
            for s in fixtures::all() {
                engine.register(s)?;
            }
            let options = HttpOptions {
                admin_token: None,
                test_mode: true,
            };
            let server = http::spawn(Arc::new(engine), options, SocketAddr::from(([127, 0, 0, 1], 0))).await?;
            let traces = simclient::simulate(&server.base_url(), &study, sessions, steps, seed, &policy).await;
            server.stop().await?;
            for (i, trace) in traces?.iter().enumerate() {
                let summary = serde_json::json!({
                    "participant": i,
                    "end": format!("{:?}", trace.end),
                    "pages": trace.page_texts(),
                });
                println!("{summary}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Leakcheck {
            sessions,
            steps,
            seed,
            keep_consumed_pages,
        } => {
            let config = LeakConfig {
                sessions,
                steps,
                seed,
                ..LeakConfig::default()
            };
            match simclient::leakcheck_in_process(&config, !keep_consumed_pages).await {
                Ok(report) => {
                    println!(
                        "ok: {} samples, max {} live suspensions, {} bytes max, trend {:+.2}%, c = {:.1} bytes per session level",
                        report.samples.len(),
                        report.max_live_suspensions,
                        report.max_suspension_bytes,
                        report.relative_trend * 100.0,
                        report.bytes_per_session_level
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(LeakError::LeakDetected { reason, series }) => {
                    println!("LeakDetected: {reason}");
                    println!("{}", serde_json::to_string(&series)?);
                    Ok(ExitCode::FAILURE)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}
