
mod common;

use common::{assignment_events, binding_extent_events, engine_reading, Reference, Run};
use proptest::prelude::*;
use studyflow::engine::Engine;
use studyflow::fixtures;
use studyflow::id::NodeId;
use studyflow::state::{bindings, restore_state, snapshot_state, Env, Parameterization, Path, Scope, Value, VarStore};

#[test]
fn binding_is_invisible_after_its_extent() {
    for run in [Run::Plain, Run::Expire, Run::Restart] {
        let interrupted = !matches!(run, Run::Plain);
        let expected = Reference::run(&binding_extent_events(interrupted)).join(" ");
        assert_eq!(expected, "undefined b");
        assert_eq!(engine_reading(fixtures::binding_extent, "binding-extent", run), expected, "{run:?}");
    }
}

#[test]
fn assignment_survives_resume() {
    for run in [Run::Plain, Run::Expire, Run::Restart] {
        let interrupted = !matches!(run, Run::Plain);
        let expected = Reference::run(&assignment_events(interrupted)).join(" ");
        assert_eq!(expected, "p2");
        assert_eq!(engine_reading(fixtures::assignment_durability, "assignment-durability", run), expected, "{run:?}");
    }
}

#[test]
fn suspension_captures_only_enclosing_bindings() {
    let engine = Engine::in_memory();
    engine.register(fixtures::binding_extent()).unwrap();
    let (ticket, _) = engine.start_session("binding-extent", "p-1".into()).unwrap();
    let record = engine.snapshot_state(&ticket.session).unwrap();
    let names: Vec<&String> = record.parameterization.iter().flat_map(|f| f.keys()).collect();
    assert_eq!(names, ["b"]);
}

fn p(s: &str) -> Path {
    Path::parse(s.split('/')).unwrap()
}

fn env_at(path: &Path, vars: VarStore) -> Env {
    Env::new("p-1".into(), path.clone(), Parameterization::empty(), vars)
}

#[test]
fn coin_toss_tree_prefix_pairs() {
    // Every node of the coin-toss tree writes a scoped variable; every
    // node reads it.
    let nodes = [
        "example",
        "example/intro",
        "example/choices",
        "example/choices/heads-or-tails",
        "example/result",
    ]
    .map(p);
    for w in &nodes {
        for r in &nodes {
            let mut env = env_at(w, VarStore::new());
            env.set_var("x", Scope::Scoped, "v").unwrap();
            env.set_var("g", Scope::Global, "v").unwrap();
            let reader = env_at(r, env.vars().clone());
            let visible = is_prefix(&declaration(w), r);
            assert_eq!(reader.lookup("x").is_some(), visible, "write at {w}, read at {r}");
            assert!(reader.lookup("g").is_some());
        }
    }
    let mut env = env_at(&p("example/choices/heads-or-tails"), VarStore::new());
    env.set_var("x", Scope::Scoped, "v").unwrap();
    assert!(env_at(&p("example/result"), env.vars().clone()).lookup("x").is_none());
}

/// Where a scoped write lands: the study enclosing the writing node.
fn declaration(at: &Path) -> Vec<String> {
    let segs = at.to_strings();
    if segs.len() <= 1 {
        segs
    } else {
        segs[..segs.len() - 1].to_vec()
    }
}

fn is_prefix(prefix: &[String], of: &Path) -> bool {
    let of = of.to_strings();
    prefix.len() <= of.len() && prefix.iter().zip(&of).all(|(a, b)| a == b)
}

/// All node paths of a random tree of depth at most 4, root included.
fn tree() -> impl Strategy<Value = Vec<Path>> {
    prop::collection::vec(prop::collection::vec(0u8..3, 0..4), 1..20).prop_map(|shapes| {
        let mut paths = vec![p("r")];
        for s in shapes {
            let mut path = p("r");
            for i in s {
                path = path.child(NodeId::new(format!("n{i}")).unwrap());
                if !paths.contains(&path) {
                    paths.push(path.clone());
                }
            }
        }
        paths
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Writes at a sequence of nodes, then reads at every node: the visible
    /// value is the one written last at the longest enclosing prefix.
    #[test]
    fn innermost_prefix_wins(nodes in tree(), writes in prop::collection::vec(0usize..64, 0..12)) {
        let mut vars = VarStore::new();
        let mut log: Vec<(Vec<String>, String)> = Vec::new();
        for (n, w) in writes.iter().enumerate() {
            let at = &nodes[w % nodes.len()];
            let mut env = env_at(at, vars);
            env.set_var("x", Scope::Scoped, format!("w{n}")).unwrap();
            vars = env.vars().clone();
            log.push((declaration(at), format!("w{n}")));
        }
        for r in &nodes {
            let expected = log
                .iter()
                .enumerate()
                .filter(|(_, (prefix, _))| is_prefix(prefix, r))
                .max_by_key(|(i, (prefix, _))| (prefix.len(), *i))
                .map(|(_, (_, v))| Value::from(v.as_str()));
            prop_assert_eq!(env_at(r, vars.clone()).lookup("x").cloned(), expected, "read at {}", r);
        }
    }

    /// Bindings are readable exactly inside their extent, with snapshot and
    /// restore placed anywhere.
    #[test]
    fn bindings_never_escape(program in program()) {
        let mut env = env_at(&p("r"), VarStore::new());
        let mut stack: Vec<(String, i64)> = Vec::new();
        run(&program, &mut env, &mut stack)?;
        for name in ["a", "b", "c"] {
            prop_assert!(env.param(name).is_none());
        }
    }

    #[test]
    fn shared_parents_agree(parent in prop::collection::btree_map("[a-c]", any::<i64>(), 0..3),
                            left in prop::collection::btree_map("[a-e]", any::<i64>(), 0..3),
                            right in prop::collection::btree_map("[a-e]", any::<i64>(), 0..3)) {
        let base = Parameterization::empty().extend(parent.iter().map(|(k, v)| (k.clone(), Value::Int(*v))).collect());
        let l = base.extend(left.iter().map(|(k, v)| (k.clone(), Value::Int(*v))).collect());
        let r = base.extend(right.iter().map(|(k, v)| (k.clone(), Value::Int(*v))).collect());
        for name in parent.keys() {
            if !left.contains_key(name) && !right.contains_key(name) {
                prop_assert_eq!(l.get(name), r.get(name));
                prop_assert_eq!(l.get(name), base.get(name));
            }
        }
        prop_assert_eq!(base.extend(Default::default()).entries(), base.entries());
    }
}

#[derive(Debug, Clone)]
enum Op {
    Bind(String, i64, Vec<Op>),
    Read(String),
    /// Snapshot the env and continue from the restored copy.
    Suspend,
}

fn program() -> impl Strategy<Value = Vec<Op>> {
    let leaf = prop_oneof![
        "[a-c]".prop_map(Op::Read),
        Just(Op::Suspend),
    ];
    let op = leaf.prop_recursive(4, 32, 4, |inner| {
        ("[a-c]", any::<i64>(), prop::collection::vec(inner, 0..4)).prop_map(|(n, v, body)| Op::Bind(n, v, body))
    });
    prop::collection::vec(op, 0..6)
}

fn run(program: &[Op], env: &mut Env, stack: &mut Vec<(String, i64)>) -> Result<(), TestCaseError> {
    for op in program {
        match op {
            Op::Read(name) => {
                let expected = stack.iter().rev().find(|(n, _)| n == name).map(|(_, v)| Value::Int(*v));
                prop_assert_eq!(env.param(name).cloned(), expected);
            }
            Op::Suspend => *env = restore_state(snapshot_state(env)),
            Op::Bind(name, value, body) => {
                stack.push((name.clone(), *value));
                env.with_binding(bindings([(name.clone(), *value)]), |env| run(body, env, stack))?;
                stack.pop();
            }
        }
    }
    Ok(())
}
