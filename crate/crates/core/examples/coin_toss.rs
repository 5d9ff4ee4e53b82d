// The coin-toss study with the toss forced, for every toss and guess.

use studyflow::engine::Engine;
use studyflow::fixtures;
use studyflow::id::ParticipantId;
use studyflow::state::{Draws, Value};
use studyflow::widgets::Payload;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::in_memory();
    engine.register(fixtures::coin_toss())?;

    for toss in ["h", "t"] {
        for guess in ["Heads", "Tails"] {
            let mut draws = Draws::seeded(0);
            draws.force("toss", toss);
            let participant = ParticipantId::generate();
            let (ticket, _) = engine.start_session_with("example", participant, draws)?;

            let intro = engine.inspect(&ticket.session)?.expect("intro page");
            engine.deliver(intro.action("Start").expect("Start"), &Payload::new())?;
            let choice = engine.inspect(&ticket.session)?.expect("choice page");
            engine.deliver(choice.action(guess).expect("guess button"), &Payload::new())?;

            let result = engine.inspect(&ticket.session)?.expect("result page");
            let ok = engine.snapshot_state(&ticket.session)?.vars.get_global("ok?").cloned();
            println!("toss {toss}, guess {guess}: {} (ok? = {:?})", result.prose, ok);
            let right = (toss == "h") == (guess == "Heads");
            assert_eq!(ok, Some(Value::Bool(right)));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
