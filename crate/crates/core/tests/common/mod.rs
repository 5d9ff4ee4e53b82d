//! Reference evaluator for the scoping rules, shared by the scoping and
//! acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use studyflow::engine::{Engine, EngineConfig};
use studyflow::fixtures::READING;
use studyflow::id::SessionId;
use studyflow::model::Study;
use studyflow::persistence::FileStore;

/// Events of a single participant thread, as the scoping rules see them.
#[derive(Debug, Clone)]
pub enum Event {
    /// Enter a study that binds these names for its whole extent.
    Enter(Vec<(&'static str, &'static str)>),
    /// Start and end of an explicit binding block.
    Bind(Vec<(&'static str, &'static str)>),
    Unbind,
    /// Durable assignment.
    Assign(&'static str, &'static str),
    /// The page is sent: the resume state is captured.
    Suspend,
    /// The live page is dropped or the server restarts. Only durable
    /// state survives, which includes the captured position and bindings.
    Interrupt,
    Resume,
    Read(&'static str),
}

/// Single-threaded reference evaluator of the scoping rules.
#[derive(Default)]
pub struct Reference {
    frames: Vec<BTreeMap<&'static str, &'static str>>,
    assigned: BTreeMap<&'static str, &'static str>,
    captured: Option<Vec<BTreeMap<&'static str, &'static str>>>,
    readings: Vec<String>,
}

impl Reference {
    pub fn run(events: &[Event]) -> Vec<String> {
        let mut r = Reference::default();
        for e in events {
            match e {
                Event::Enter(b) | Event::Bind(b) => r.frames.push(b.iter().copied().collect()),
                Event::Unbind => {
                    r.frames.pop();
                }
                Event::Assign(name, value) => {
                    r.assigned.insert(name, value);
                }
                Event::Suspend => r.captured = Some(r.frames.clone()),
                Event::Interrupt => r.frames.clear(),
                Event::Resume => r.frames = r.captured.take().expect("resume without suspension"),
                Event::Read(name) => {
                    let value = r
                        .assigned
                        .get(name)
                        .or_else(|| r.frames.iter().rev().find_map(|f| f.get(name)))
                        .map_or("undefined", |v| v);
                    r.readings.push(value.to_owned());
                }
            }
        }
        r.readings
    }
}

/// The binding-extent scenario: `b` bound by the enclosing study, `a` bound
/// only while the page with the Resume button is being built.
pub fn binding_extent_events(interrupt: bool) -> Vec<Event> {
    let mut events = vec![Event::Enter(vec![("b", "b")]), Event::Bind(vec![("a", "a")]), Event::Unbind, Event::Suspend];
    if interrupt {
        events.push(Event::Interrupt);
    }
    events.extend([Event::Resume, Event::Read("a"), Event::Read("b")]);
    events
}

/// The assignment-durability scenario: `p` bound to p1 by the study, then
/// assigned p2 before the page is sent.
pub fn assignment_events(interrupt: bool) -> Vec<Event> {
    let mut events = vec![Event::Enter(vec![("p", "p1")]), Event::Assign("p", "p2"), Event::Suspend];
    if interrupt {
        events.push(Event::Interrupt);
    }
    events.extend([Event::Resume, Event::Read("p")]);
    events
}

#[derive(Debug, Clone, Copy)]
pub enum Run {
    Plain,
    Expire,
    Restart,
}

/// Runs a scoping fixture through the engine and returns its reading.
pub fn engine_reading(study: fn() -> Study, id: &str, run: Run) -> String {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(FileStore::open(dir.path()).unwrap().without_sync());
    let mut engine = Engine::new(store.clone(), EngineConfig::default());
    engine.register(study()).unwrap();
    let (ticket, _) = engine.start_session(id, "p-1".into()).unwrap();
    let session: SessionId = ticket.session;
    match run {
        Run::Plain => {}
        Run::Expire => {
            engine.expire_suspension(&session).unwrap();
            engine.resume(&session).unwrap();
        }
        Run::Restart => {
            drop(engine);
            engine = Engine::new(store, EngineConfig::default());
            engine.register(study()).unwrap();
            engine.recover().unwrap();
            engine.resume(&session).unwrap();
        }
    }
    let page = engine.inspect(&session).unwrap().unwrap();
    assert!(engine.deliver(page.action("Resume").unwrap(), &Default::default()).unwrap().is_complete());
    let record = engine.snapshot_state(&session).unwrap();
    let reading = record.vars.get_global(READING.name).cloned().unwrap();
    let shown = engine.inspect(&session).unwrap().unwrap().prose;
    assert_eq!(shown, format!("Reading: {reading}"));
    reading.to_string()
}
