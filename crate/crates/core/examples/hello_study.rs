// The two-page study, driven directly through the engine.

use studyflow::engine::Engine;
use studyflow::fixtures;
use studyflow::widgets::Payload;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::in_memory();
    engine.register(fixtures::example_study())?;

    let (ticket, _) = engine.start_session("example-study", "p-alice".into())?;
    let page = engine.inspect(&ticket.session)?.expect("a live page");
    println!("{}", page.prose);
    assert_eq!(page.prose, "Welcome to the study.");

    let outcome = engine.deliver(page.action("Continue").expect("a Continue button"), &Payload::new())?;
    let page = engine.inspect(&ticket.session)?.expect("a live page");
    println!("{}", page.prose);
    assert_eq!(page.prose, "Thank you for participating.");
    assert!(outcome.is_complete());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
