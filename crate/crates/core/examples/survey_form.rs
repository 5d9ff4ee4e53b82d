// Forms, field errors, a generated question block and a view page.

use studyflow::engine::{Engine, PageLookup};
use studyflow::fixtures;
use studyflow::id::SessionId;
use studyflow::widgets::Payload;

fn submit(engine: &Engine, session: &SessionId, label: &str, fields: &[(&str, &str)]) -> Result<(), Box<dyn std::error::Error>> {
    let page = engine.inspect(session)?.expect("page");
    let payload: Payload = fields.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    engine.deliver(page.action(label).expect("action"), &payload)?;
    println!("-> {}", engine.position(session)?.0);
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::in_memory();
    engine.register(fixtures::survey())?;
    let (ticket, _) = engine.start_session("survey", "p-dana".into())?;
    let s = &ticket.session;

    let about = engine.render_view("survey", "about", Some(s), |_| String::new())?.expect("view");
    println!("view: {} bytes", about.len());

    submit(&engine, s, "I agree", &[])?;
    // Missing age: the same step comes back with a message.
    submit(&engine, s, "Next", &[("hand", "left")])?;
    let page = engine.inspect(s)?.expect("page");
    if let PageLookup::Live(html) = engine.render_page(&page.id, |e| format!("/k/{e}")) {
        let html = String::from_utf8(html)?;
        assert!(html.contains("This field is required."));
        println!("age flagged as required");
    }
    submit(&engine, s, "Next", &[("age", "34"), ("hand", "left")])?;
    for _ in 0..3 {
        submit(&engine, s, "Next", &[("answer", "yes")])?;
    }
    let last = engine.inspect(s)?.expect("page");
    println!("{}", last.prose);
    assert_eq!(last.prose, "Thank you! Recorded writing hand: left.");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
