// Writing a study: nested studies, a chain, a dynamic transition, scoped
// and global variables, and a generated sub-study.

use studyflow::engine::Engine;
use studyflow::model::{DynamicStudy, Step, StepResult, Study, Target, Transition};
use studyflow::state::{Scope, Value, Var};
use studyflow::widgets::{html, Payload};

const SCORE: Var = Var::global("score");

fn quiz_question(id: &'static str, right: &'static str) -> Step {
    Step::new(id, move |b| {
        let yes = b.button_with("yes", move |env| {
            let score = SCORE.get(env).and_then(Value::as_int).unwrap_or(0);
            SCORE.set(env, score + i64::from(right == "yes"))?;
            Ok(())
        })?;
        let no = b.button_with("no", move |env| {
            let score = SCORE.get(env).and_then(Value::as_int).unwrap_or(0);
            SCORE.set(env, score + i64::from(right == "no"))?;
            Ok(())
        })?;
        Ok(html::div([html::p(format!("Question {id}")), yes, no]))
    })
}

fn build() -> Result<Study, Box<dyn std::error::Error>> {
    let quiz = Study::builder("quiz")
        .step(quiz_question("q1", "yes"))
        .step(quiz_question("q2", "no"))
        .build()?;
    // Participants who got both right get a bonus block.
    let bonus = DynamicStudy::new("bonus", |env| {
        let level = env.lookup("level").and_then(Value::as_int).unwrap_or(1);
        Study::builder("bonus")
            .step(Step::new("extra", move |b| {
                b.env_mut().set_var("seen", Scope::Scoped, true)?;
                Ok(html::div([html::p(format!("Bonus round at level {level}")), b.button("Done")?]))
            }))
            .build()
            .expect("valid")
    });
    let outro = Step::new("outro", |b| {
        let score = SCORE.get(b.env()).cloned().unwrap_or(Value::Int(0));
        Ok(html::p(format!("Your score: {score}")))
    });
    let again = Step::new("again", |b| {
        let retry = b.link("Once more", |_, _| Ok(StepResult::Retry))?;
        Ok(html::div([html::p("Ready?"), retry, b.button("Go")?]))
    });
    Ok(Study::builder("custom")
        .bind(studyflow::state::bindings([("level", 2i64)]))
        .step(again)
        .study(quiz)
        .dynamic(bonus)
        .step(outro)
        .chain(["again", "quiz"])
        .transition(
            "quiz",
            Transition::dynamic(|env| {
                if SCORE.get(env).and_then(Value::as_int) == Some(2) {
                    Target::named("bonus")
                } else {
                    Target::named("outro")
                }
            }),
        )
        .build()?)
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let engine = Engine::in_memory();
    engine.register(build()?)?;
    let (ticket, _) = engine.start_session("custom", "p-erin".into())?;
    for label in ["Once more", "Go", "yes", "no", "Done"] {
        let page = engine.inspect(&ticket.session)?.expect("page");
        println!("{:<28} [{}]", page.prose, label);
        engine.deliver(page.action(label).expect("action"), &Payload::new())?;
    }
    let last = engine.inspect(&ticket.session)?.expect("page");
    println!("{}", last.prose);
    assert_eq!(last.prose, "Your score: 2");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
