// Dynamic bindings only reach an action through its step's resume state,
// and variable assignments are durable.

use studyflow::engine::Engine;
use studyflow::fixtures::{self, READING};
use studyflow::state::Value;
use studyflow::widgets::Payload;

fn run(engine: &Engine, study: &str) -> Result<Option<Value>, Box<dyn std::error::Error>> {
    let (ticket, _) = engine.start_session(study, "p-carol".into())?;
    // Expire the page so the click happens on a page rebuilt from storage.
    engine.expire_suspension(&ticket.session)?;
    engine.resume(&ticket.session)?;
    let page = engine.inspect(&ticket.session)?.expect("page");
    engine.deliver(page.action("Resume").expect("Resume"), &Payload::new())?;
    Ok(engine.snapshot_state(&ticket.session)?.vars.get_global(READING.name).cloned())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::in_memory();
    engine.register(fixtures::binding_extent())?;
    engine.register(fixtures::assignment_durability())?;

    let extent = run(&engine, "binding-extent")?;
    println!("a and b after resume: {extent:?}");
    assert_eq!(extent, Some(Value::from("undefined b")));

    let assigned = run(&engine, "assignment-durability")?;
    println!("p after resume: {assigned:?}");
    assert_eq!(assigned, Some(Value::from("p2")));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
