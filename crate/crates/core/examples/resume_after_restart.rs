// A participant's position survives a restart: only the path and the
// variables are stored, and the page is rebuilt from them.

use std::sync::Arc;

use studyflow::engine::{Engine, EngineConfig};
use studyflow::fixtures;
use studyflow::id::ParticipantId;
use studyflow::persistence::FileStore;
use studyflow::state::Draws;
use studyflow::widgets::Payload;

fn engine(dir: &std::path::Path) -> Result<Engine, Box<dyn std::error::Error>> {
    let engine = Engine::new(Arc::new(FileStore::open(dir)?), EngineConfig::default());
    engine.register(fixtures::coin_toss())?;
    let report = engine.recover()?;
    println!("recovered {} participants", report.restored);
    Ok(engine)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let participant = ParticipantId::from("p-bob");

    let first = engine(dir.path())?;
    let mut draws = Draws::seeded(0);
    draws.force("toss", "t");
    let (ticket, _) = first.start_session_with("example", participant.clone(), draws)?;
    let intro = first.inspect(&ticket.session)?.expect("intro");
    first.deliver(intro.action("Start").expect("Start"), &Payload::new())?;
    println!("before restart: {}", first.position(&ticket.session)?.0);
    drop(first);

    let second = engine(dir.path())?;
    let session = second.session_for_participant("example", &participant).expect("restored");
    second.configure_draws(&session, None, &[("toss".to_owned(), "t".to_owned())].into())?;
    second.resume(&session)?;
    println!("after restart: {}", second.position(&session)?.0);
    let choice = second.inspect(&session)?.expect("choice page rebuilt");
    second.deliver(choice.action("Tails").expect("Tails"), &Payload::new())?;
    let result = second.inspect(&session)?.expect("result");
    println!("{}", result.prose);
    assert_eq!(result.prose, "You guessed right.");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
