// Serve the fixtures on a local port and walk them with the simulated
// participant.

use std::net::SocketAddr;
use std::sync::Arc;

use studyflow::engine::Engine;
use studyflow::fixtures;
use studyflow::http::{self, HttpOptions, FORCE_HEADER};
use studyflow::simclient::{walk, Policy, WalkOptions};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    tokio::runtime::Runtime::new()?.block_on(async {
        let engine = Engine::in_memory();
        for study in fixtures::all() {
            engine.register(study)?;
        }
        let options = HttpOptions {
            admin_token: Some("secret".into()),
            test_mode: true,
        };
        let server = http::spawn(Arc::new(engine), options, SocketAddr::from(([127, 0, 0, 1], 0))).await?;
        let base = server.base_url();

        let trace = walk(&base, "example-study", &Policy::FirstAction, &WalkOptions {
            step_limit: 10,
            ..WalkOptions::default()
        })
        .await?;
        println!("{:?}", trace.page_texts());

        let script = Policy::Scripted(vec!["Start".into(), "Heads".into()]);
        let trace = walk(&base, "example", &script, &WalkOptions {
            step_limit: 10,
            headers: vec![(FORCE_HEADER, "toss=h".into())],
            admin_token: Some("secret".into()),
        })
        .await?;
        for visit in &trace.visits {
            println!("{} {} -> {}", visit.method, visit.url, visit.status);
        }
        assert_eq!(trace.last_page().map(|p| p.prose.as_str()), Some("You guessed right."));
        println!("live suspensions: {}", trace.samples.last().map_or(0, |m| m.live_suspensions));

        server.stop().await?;
        Ok(())
    })
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
