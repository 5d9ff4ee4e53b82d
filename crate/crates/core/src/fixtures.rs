//! Studies shipped with the library.
//!
//! `example-study` and `example` are the two introductory studies: a
//! two-page walk and the coin-toss guessing game. The rest exercise the
//! engine: a looping three-level study for load checks, a survey with a
//! form, a view and a generated block, and two scenarios for the scoping
//! rules. [`invalid`] holds studies that fail validation on purpose.

use crate::model::{DynamicStudy, Step, StepResult, Study, Target, Transition};
use crate::state::{bindings, truthy, Scope, Value, Var};
use crate::widgets::{html, FormField};

/// Set by the coin-toss buttons: whether the guess matched the toss.
pub const OK: Var = Var::global("ok?");

/// Fixture names accepted by [`by_name`].
pub const NAMES: &[&str] = &[
    "example-study",
    "example",
    "nested-loop",
    "survey",
    "binding-extent",
    "assignment-durability",
];

pub fn by_name(name: &str) -> Option<Study> {
    Some(match name {
        "example-study" => example_study(),
        "example" => coin_toss(),
        "nested-loop" => nested_loop(),
        "survey" => survey(),
        "binding-extent" => binding_extent(),
        "assignment-durability" => assignment_durability(),
        _ => return None,
    })
}

pub fn all() -> Vec<Study> {
    NAMES.iter().filter_map(|n| by_name(n)).collect()
}

/// Two pages: a welcome with a Continue button, then a thank-you page.
pub fn example_study() -> Study {
    Study::builder("example-study")
        .step(Step::new("hello", |b| {
            Ok(html::div([html::p("Welcome to the study."), b.button("Continue")?]))
        }))
        .step(Step::new("done", |_| Ok(html::p("Thank you for participating."))))
        .build()
        .expect("fixture is valid")
}

/// The coin-toss study. The toss is drawn under the label `toss`, which
/// test mode can force.
pub fn coin_toss() -> Study {
    let intro = Step::new("intro", |b| {
        Ok(html::div([html::h1("Welcome to the study!"), b.button("Start")?]))
    });
    let heads_or_tails = Step::new("heads-or-tails", |b| {
        let toss = *b.env_mut().random_choice("toss", &["h", "t"]);
        let heads = b.button_with("Heads", move |env| Ok(OK.set(env, toss == "h")?))?;
        let tails = b.button_with("Tails", move |env| Ok(OK.set(env, toss == "t")?))?;
        Ok(html::div([heads, html::text(" or "), tails]))
    });
    let result = Step::new("result", |b| {
        Ok(if truthy(OK.get(b.env())) {
            html::p("You guessed right.")
        } else {
            html::p("You guessed wrong.")
        })
    });
    let choices = Study::builder("choices")
        .step(heads_or_tails)
        .chain(["heads-or-tails", "end"])
        .build()
        .expect("fixture is valid");
    Study::builder("example")
        .step(intro)
        .study(choices)
        .step(result)
        .chain(["intro", "choices", "result", "end"])
        .build()
        .expect("fixture is valid")
}

const ROUNDS: Var = Var::global("rounds");

/// Rounds of [`nested_loop`] before it ends.
pub const NESTED_LOOP_ROUNDS: i64 = 1_000_000;

fn loop_step(id: &'static str, last: bool) -> Step {
    Step::new(id, move |b| {
        let round = ROUNDS.get(b.env()).and_then(Value::as_int).unwrap_or(0);
        let next = b.button_with("Next", move |env| {
            if last {
                ROUNDS.set(env, round + 1)?;
            }
            Ok(())
        })?;
        let again = b.link("Again", |_, _| Ok(StepResult::Retry))?;
        Ok(html::div([
            html::p(format!("Round {round}, step {id}.")),
            next,
            html::text(" "),
            again,
        ]))
    })
}

/// Three levels of studies around two-step leaves, looping for
/// [`NESTED_LOOP_ROUNDS`] rounds. Every page offers Next and Again (retry).
pub fn nested_loop() -> Study {
    let inner = Study::builder("inner")
        .step(loop_step("a", false))
        .step(loop_step("b", false))
        .build()
        .expect("fixture is valid");
    let outer = Study::builder("outer")
        .study(inner)
        .step(loop_step("c", true))
        .build()
        .expect("fixture is valid");
    Study::builder("nested-loop")
        .study(outer)
        .transition(
            "outer",
            Transition::dynamic(|env| {
                let round = ROUNDS.get(env).and_then(Value::as_int).unwrap_or(0);
                if round >= NESTED_LOOP_ROUNDS {
                    Target::End
                } else {
                    Target::named("outer")
                }
            }),
        )
        .build()
        .expect("fixture is valid")
}

const AGE: Var = Var::scoped("age");
const HAND: Var = Var::scoped("hand");

/// Consent, a demographics form, a generated question block and a
/// closing page. The consent step has an `about` view.
pub fn survey() -> Study {
    let consent = Step::new("consent", |b| {
        Ok(html::div([
            html::h1("A short survey"),
            html::p("Your answers are stored under a random participant id."),
            b.button("I agree")?,
        ]))
    })
    .view("about", |_| {
        Ok(html::div([
            html::h1("About this survey"),
            html::p("Three to four questions. It takes about a minute."),
        ]))
    });
    let demographics = Step::new("demographics", |b| {
        let fields = vec![
            FormField::number("age").label("Age").required(),
            FormField::choice("hand", ["left", "right"]).label("Writing hand").required(),
        ];
        let form = b.form(fields, "Next", |env, values| {
            AGE.set(env, values["age"].clone())?;
            HAND.set(env, values["hand"].clone())?;
            Ok(StepResult::Continue)
        })?;
        Ok(html::div([html::h2("About you"), form]))
    });
    let block = DynamicStudy::new("block", |env| {
        let age = AGE.get(env).and_then(Value::as_int).unwrap_or(0);
        let mut questions = vec![("q-sleep", "Did you sleep at least seven hours last night?")];
        if age >= 30 {
            questions.push(("q-coffee", "Do you drink coffee most days?"));
        }
        questions.push(("q-sport", "Did you exercise this week?"));
        let mut builder = Study::builder("block");
        for (id, text) in questions {
            builder = builder.step(question(id, text));
        }
        builder.build().expect("generated block is valid")
    });
    let thanks = Step::new("thanks", |b| {
        let hand = HAND.get(b.env()).map(ToString::to_string).unwrap_or_default();
        Ok(html::div([
            html::h1("Thank you!"),
            html::p(format!("Recorded writing hand: {hand}.")),
        ]))
    });
    Study::builder("survey")
        .step(consent)
        .step(demographics)
        .dynamic(block)
        .step(thanks)
        .build()
        .expect("fixture is valid")
}

fn question(id: &'static str, text: &'static str) -> Step {
    Step::new(id, move |b| {
        let field = FormField::choice("answer", ["yes", "no"]).label(text).required();
        let form = b.form(vec![field], "Next", move |env, values| {
            env.set_var(id, Scope::Scoped, values["answer"].clone())?;
            Ok(StepResult::Continue)
        })?;
        Ok(form)
    })
}

/// Read by the scoping scenarios' resume actions and shown on the report
/// page.
pub const READING: Var = Var::global("reading");

fn show(value: Option<&Value>) -> String {
    value.map_or_else(|| "undefined".to_owned(), ToString::to_string)
}

fn report() -> Step {
    Step::new("report", |b| {
        let reading = READING.get(b.env()).map(ToString::to_string).unwrap_or_default();
        Ok(html::p(format!("Reading: {reading}")))
    })
}

/// `a` is bound while the capture page is built, `b` by the enclosing
/// study. The Resume action reads both; only `b` is part of its resume
/// state, so the reading is `a` undefined and `b` = "b".
pub fn binding_extent() -> Study {
    let capture = Step::new("capture", |b| {
        b.with_binding(bindings([("a", "a")]), |b| {
            let resume = b.button_with("Resume", |env| {
                let reading = format!("{} {}", show(env.param("a")), show(env.param("b")));
                Ok(READING.set(env, reading)?)
            })?;
            Ok(html::div([html::p("Suspended inside both bindings."), resume]))
        })
    });
    let extent = Study::builder("extent")
        .bind(bindings([("b", "b")]))
        .step(capture)
        .build()
        .expect("fixture is valid");
    Study::builder("binding-extent")
        .study(extent)
        .step(report())
        .build()
        .expect("fixture is valid")
}

/// The enclosing study binds `p` to "p1"; the assign page's handler then
/// assigns `p` = "p2" before suspending. The Resume action reads `p`,
/// which is "p2" however the session was resumed.
pub fn assignment_durability() -> Study {
    let assign = Step::new("assign", |b| {
        b.env_mut().set_var("p", Scope::Scoped, "p2")?;
        let resume = b.button_with("Resume", |env| {
            let reading = show(env.lookup("p"));
            Ok(READING.set(env, reading)?)
        })?;
        Ok(html::div([html::p("Assigned p inside its binding."), resume]))
    });
    let extent = Study::builder("extent")
        .bind(bindings([("p", "p1")]))
        .step(assign)
        .build()
        .expect("fixture is valid");
    Study::builder("assignment-durability")
        .study(extent)
        .step(report())
        .build()
        .expect("fixture is valid")
}

/// Studies that fail validation with exactly one diagnostic each.
pub mod invalid {
    use std::collections::BTreeMap;

    use super::*;
    use crate::id::NodeId;

    fn leaf(id: &str) -> Step {
        Step::new(id, |b| b.button("Continue"))
    }

    fn id(s: &str) -> NodeId {
        NodeId::new(s).expect("valid id")
    }

    /// Two children named `a`.
    pub fn duplicate_id() -> Study {
        Study::from_parts(
            id("dup"),
            vec![leaf("a").into(), leaf("a").into(), leaf("b").into()],
            BTreeMap::new(),
        )
    }

    /// `a` jumps to a child that does not exist.
    pub fn dangling_target() -> Study {
        Study::from_parts(
            id("dangling"),
            vec![leaf("a").into(), leaf("b").into()],
            BTreeMap::from([(id("a"), Transition::Goto(id("z")))]),
        )
    }

    /// `a` loops to itself forever.
    pub fn end_unreachable() -> Study {
        Study::from_parts(
            id("self-loop"),
            vec![leaf("a").into()],
            BTreeMap::from([(id("a"), Transition::Goto(id("a")))]),
        )
    }
}
