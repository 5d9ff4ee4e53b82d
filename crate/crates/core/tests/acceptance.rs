//! End-to-end acceptance checks. Prints one PASS or FAIL line per
//! criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::Path as FsPath;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{assignment_events, binding_extent_events, engine_reading, Reference, Run};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use studyflow::engine::Engine;
use studyflow::fixtures;
use studyflow::http::{self, HttpOptions, RunningServer, FORCE_HEADER, SEED_HEADER};
use studyflow::id::{NodeId, SessionId};
use studyflow::model::validate_study;
use studyflow::persistence::{FileStore, RecordStore};
use studyflow::simclient::{leakcheck_in_process, LeakConfig, LeakError};
use studyflow::simclient::{fill_form, walk, Client, Policy, ScrapedPage, WalkEnd, WalkOptions};
use studyflow::state::Value;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

async fn in_process() -> (Arc<Engine>, RunningServer) {
    let engine = Arc::new(Engine::in_memory());
    for study in fixtures::all() {
        engine.register(study).expect("fixtures are valid");
    }
    let options = HttpOptions {
        admin_token: Some("acceptance".into()),
        test_mode: true,
    };
    let addr: SocketAddr = "127.0.0.1:0".parse().unwrap();
    let server = http::spawn(engine.clone(), options, addr).await.expect("bind");
    (engine, server)
}

fn page(visits: &[studyflow::simclient::Visit]) -> Result<ScrapedPage, String> {
    visits.last().and_then(|v| v.page.clone()).ok_or_else(|| "no page".to_owned())
}

async fn two_page_walk() -> Check {
    let (_engine, server) = in_process().await;
    let options = WalkOptions {
        step_limit: 10,
        ..WalkOptions::default()
    };
    let start = Instant::now();
    let trace = walk(&server.base_url(), "example-study", &Policy::FirstAction, &options).await.map_err(err)?;
    let elapsed = start.elapsed();
    server.stop().await.map_err(err)?;
    let texts = trace.page_texts();
    ensure!(texts == ["Welcome to the study.", "Thank you for participating."], "pages {texts:?}");
    ensure!(trace.end == WalkEnd::Complete, "walk ended with {:?}", trace.end);
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{} pages in {elapsed:.2?}", texts.len()))
}

async fn coin_toss_oracle() -> Check {
    let (engine, server) = in_process().await;
    let start = Instant::now();
    let mut seen: BTreeSet<SessionId> = BTreeSet::new();
    for toss in ["h", "t"] {
        for guess in ["Heads", "Tails"] {
            let options = WalkOptions {
                step_limit: 10,
                headers: vec![(FORCE_HEADER, format!("toss={toss}"))],
                admin_token: None,
            };
            let policy = Policy::Scripted(vec!["Start".into(), guess.into()]);
            let trace = walk(&server.base_url(), "example", &policy, &options).await.map_err(err)?;
            let right = (toss == "h") == (guess == "Heads");
            let expected = if right { "You guessed right." } else { "You guessed wrong." };
            let last = trace.page_texts().pop().unwrap_or_default();
            ensure!(last == expected, "toss {toss}, {guess}: final page {last:?}");
            let session = engine
                .session_ids()
                .into_iter()
                .find(|s| !seen.contains(s))
                .ok_or("no new session")?;
            seen.insert(session.clone());
            let record = engine.snapshot_state(&session).map_err(err)?;
            let ok = record.vars.get_global("ok?").cloned();
            ensure!(ok == Some(Value::Bool(right)), "toss {toss}, {guess}: ok? = {ok:?}");
        }
    }
    let elapsed = start.elapsed();
    server.stop().await.map_err(err)?;
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("4 cases in {elapsed:.2?}"))
}

/// Random walks that replay every consumed action and refresh every
/// landing page. Returns (deliveries, 303 answers, replays).
async fn random_traces(traces: u64) -> Result<(usize, usize, usize), String> {
    const STUDIES: [&str; 4] = ["example-study", "example", "nested-loop", "survey"];
    let (engine, server) = in_process().await;
    let (mut deliveries, mut see_other, mut replays) = (0, 0, 0);
    for seed in 0..traces {
        let study = STUDIES[seed as usize % STUDIES.len()];
        let mut rng = StdRng::seed_from_u64(seed);
        let mut client = Client::new(server.base_url());
        client.set_header(SEED_HEADER, &seed.to_string());
        let mut visits = client.open(&format!("/study/{study}"), None).await.map_err(err)?;
        for _ in 0..25 {
            let shown = page(&visits)?;
            if shown.actions.is_empty() {
                break;
            }
            let pick = rng.random_range(0..shown.actions.len());
            let action = shown.actions[pick].clone();
            let values = if action.is_form { fill_form(&action.fields, Some(&mut rng)) } else { Vec::new() };
            let step = client.act(&action, &values).await.map_err(err)?;
            deliveries += 1;
            if step[0].status == 303 {
                see_other += 1;
            }

            let landing = step.last().ok_or("empty step")?.url.clone();
            let before = engine.fingerprint();
            for _ in 0..5 {
                let again = client.request(&landing, None).await.map_err(err)?;
                ensure!(again.status == 200, "refresh of {landing} gave {}", again.status);
            }
            ensure!(engine.fingerprint() == before, "refreshing {landing} changed state (seed {seed})");

            for consumed in &shown.actions {
                let form = consumed.is_form.then_some(values.as_slice());
                let before = engine.fingerprint();
                let replay = client.request(&consumed.url, form).await.map_err(err)?;
                ensure!(replay.status == 410, "replay of {} gave {} (seed {seed})", consumed.url, replay.status);
                ensure!(engine.fingerprint() == before, "replay changed state (seed {seed})");
                replays += 1;
            }
            visits = step;
        }
    }
    server.stop().await.map_err(err)?;
    Ok((deliveries, see_other, replays))
}

async fn one_shot() -> Check {
    let (deliveries, _, replays) = random_traces(100).await?;
    Ok(format!("100 traces, {deliveries} deliveries, {replays} replays all 410 with identical state"))
}

async fn post_redirect_get() -> Check {
    let (deliveries, see_other, _) = random_traces(100).await?;
    ensure!(deliveries > 0 && see_other == deliveries, "{see_other}/{deliveries} deliveries answered 303");
    Ok(format!("{see_other}/{deliveries} deliveries answered 303; landing pages refreshed 5x without effect"))
}

struct Binary {
    child: Child,
    base: String,
}

impl Binary {
    fn start(config: &FsPath) -> Result<Self, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_studyflow"))
            .args(["serve", "--config"])
            .arg(config)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(err)?;
        let mut stdout = BufReader::new(child.stdout.take().ok_or("no stdout")?);
        let mut line = String::new();
        stdout.read_line(&mut line).map_err(err)?;
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .ok_or_else(|| format!("unexpected first line {line:?}"))?
            .to_owned();
        std::thread::spawn(move || {
            let mut sink = String::new();
            while stdout.read_line(&mut sink).is_ok_and(|n| n > 0) {
                sink.clear();
            }
        });
        Ok(Self { child, base })
    }

    fn kill(mut self) -> Result<(), String> {
        self.child.kill().map_err(err)?;
        self.child.wait().map_err(err)?;
        Ok(())
    }
}

impl Drop for Binary {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn write_config(dir: &FsPath) -> Result<std::path::PathBuf, String> {
    let config = dir.join("studyflow.toml");
    let text = format!(
        "address = \"127.0.0.1:0\"\ndata_dir = {:?}\nfixtures = [\"example\"]\ntest_mode = true\n",
        dir.join("data").display().to_string()
    );
    std::fs::write(&config, text).map_err(err)?;
    Ok(config)
}

/// Final durable state with identifiers and timestamps left out.
fn final_state(dir: &FsPath) -> Result<String, String> {
    let store = FileStore::open(dir.join("data")).map_err(err)?;
    let records = store.list(&NodeId::new("example").unwrap()).map_err(err)?;
    ensure!(records.len() == 1, "{} records", records.len());
    let r = records.into_iter().next().unwrap().map_err(err)?;
    Ok(format!(
        "completed={} path={} params={:?} vars={:?}",
        r.completed, r.state.path, r.state.parameterization, r.state.vars
    ))
}

const FORCE: &str = "toss=h";

async fn resume_after_kill() -> Check {
    let interrupted = tempfile::tempdir().map_err(err)?;
    let config = write_config(interrupted.path())?;
    let server = Binary::start(&config)?;
    let mut client = Client::new(server.base.clone());
    client.set_header(FORCE_HEADER, FORCE);
    let intro = page(&client.open("/study/example", None).await.map_err(err)?)?;
    let start = intro.actions.iter().find(|a| a.label == "Start").ok_or("no Start")?.clone();
    let before = page(&client.act(&start, &[]).await.map_err(err)?)?;
    server.kill()?;

    let server = Binary::start(&config)?;
    client.set_base(server.base.clone());
    let after = page(&client.open("/study/example", None).await.map_err(err)?)?;
    let labels = |p: &ScrapedPage| p.actions.iter().map(|a| a.label.clone()).collect::<Vec<_>>();
    ensure!(after.prose == before.prose && labels(&after) == labels(&before), "resumed {after:?}, expected {before:?}");
    ensure!(labels(&after) == ["Heads", "Tails"], "resumed page has {:?}", labels(&after));
    let heads = after.actions[0].clone();
    let done = page(&client.act(&heads, &[]).await.map_err(err)?)?;
    drop(server);

    let control_dir = tempfile::tempdir().map_err(err)?;
    let control = Binary::start(&write_config(control_dir.path())?)?;
    let mut control_client = Client::new(control.base.clone());
    control_client.set_header(FORCE_HEADER, FORCE);
    let mut shown = page(&control_client.open("/study/example", None).await.map_err(err)?)?;
    for label in ["Start", "Heads"] {
        let action = shown.actions.iter().find(|a| a.label == label).ok_or(label)?.clone();
        shown = page(&control_client.act(&action, &[]).await.map_err(err)?)?;
    }
    drop(control);

    ensure!(done.prose == shown.prose, "final page {:?} vs control {:?}", done.prose, shown.prose);
    let (a, b) = (final_state(interrupted.path())?, final_state(control_dir.path())?);
    ensure!(a == b, "final state differs:\n  resumed {a}\n  control {b}");
    Ok(format!("killed at heads-or-tails, resumed the same step, final state matches control ({})", done.prose))
}

async fn boundedness() -> Check {
    let config = LeakConfig::default();
    let start = Instant::now();
    let report = leakcheck_in_process(&config, true).await.map_err(err)?;
    let elapsed = start.elapsed();
    ensure!(report.max_live_suspensions <= config.sessions, "{} live", report.max_live_suspensions);
    if report.relative_trend > config.tolerance || report.relative_trend.is_nan() {
        return Err(format!("trend {:.4}", report.relative_trend));
    }
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    let mutant = leakcheck_in_process(&config, false).await;
    let flagged = match mutant {
        Err(LeakError::LeakDetected { reason, .. }) => reason,
        other => return Err(format!("mutation not flagged: {:?}", other.map(|r| r.max_live_suspensions))),
    };
    Ok(format!(
        "S={} N={} depth={}: max live {}, trend {:.4}, c={:.1} bytes, {} samples, {elapsed:.1?}; mutant flagged: {flagged}",
        config.sessions,
        config.steps,
        report.depth,
        report.max_live_suspensions,
        report.relative_trend,
        report.bytes_per_session_level,
        report.samples.len()
    ))
}

fn scoping() -> Check {
    let mut readings = Vec::new();
    for run in [Run::Plain, Run::Expire, Run::Restart] {
        let interrupted = !matches!(run, Run::Plain);
        let expected = Reference::run(&binding_extent_events(interrupted)).join(" ");
        let got = engine_reading(fixtures::binding_extent, "binding-extent", run);
        ensure!(got == expected, "binding extent ({run:?}): {got:?}, reference {expected:?}");
        let expected = Reference::run(&assignment_events(interrupted)).join(" ");
        let got_p = engine_reading(fixtures::assignment_durability, "assignment-durability", run);
        ensure!(got_p == expected, "assignment ({run:?}): {got_p:?}, reference {expected:?}");
        readings.push(format!("{got:?}/{got_p:?}"));
    }
    Ok(format!("readings match the reference evaluator: {}", readings.join(", ")))
}

fn validation() -> Check {
    let dir = FsPath::new(env!("CARGO_MANIFEST_DIR")).join("manifests");
    let cases = [
        ("duplicate-id.toml", Some("duplicate child id a")),
        ("dangling-target.toml", Some("transition a -> z names no child")),
        ("end-unreachable.toml", Some("end is unreachable")),
        ("example-study.toml", None),
        ("example.toml", None),
    ];
    for (file, expected) in cases {
        let out = Command::new(env!("CARGO_BIN_EXE_studyflow"))
            .arg("validate")
            .arg(dir.join(file))
            .output()
            .map_err(err)?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        let lines: Vec<&str> = stdout.lines().collect();
        match expected {
            Some(fragment) => {
                ensure!(out.status.code() == Some(1), "{file}: exit {:?}", out.status.code());
                ensure!(lines.len() == 1 && lines[0].contains(fragment), "{file}: {lines:?}");
            }
            None => {
                ensure!(out.status.success(), "{file}: exit {:?}", out.status.code());
                ensure!(lines.len() == 1 && lines[0].ends_with(": ok"), "{file}: {lines:?}");
            }
        }
    }
    for study in [fixtures::example_study(), fixtures::coin_toss()] {
        let d = validate_study(&study);
        ensure!(d.is_empty(), "{}: {d:?}", study.id);
    }
    Ok("three invalid manifests give exactly their diagnostic; both fixtures are clean".into())
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let results: Vec<(&str, Check)> = vec![
        ("two-page walk", rt.block_on(two_page_walk())),
        ("coin-toss oracle", rt.block_on(coin_toss_oracle())),
        ("one-shot actions", rt.block_on(one_shot())),
        ("post/redirect/get", rt.block_on(post_redirect_get())),
        ("resume after kill", rt.block_on(resume_after_kill())),
        ("bounded suspensions", rt.block_on(boundedness())),
        ("scoping semantics", scoping()),
        ("validation", validation()),
    ];
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
