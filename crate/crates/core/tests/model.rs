use std::collections::BTreeMap;

use proptest::prelude::*;
use studyflow::fixtures;
use studyflow::id::NodeId;
use studyflow::model::{
    build_study, describe, resolve_next, validate_study, BuildError, Diagnostic, NodeKind, Step, Study,
    StudyDescription, StudyNode, Target, Transition, TransitionKind,
};
use studyflow::state::Env;
use studyflow::widgets::html;

fn id(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

fn leaf(name: &str) -> StudyNode {
    Step::new(name, |_| Ok(html::p("x"))).into()
}

/// Edge choice for one child of a random study.
#[derive(Debug, Clone)]
enum Edge {
    Next,
    Goto(usize),
    End,
    Dynamic,
}

fn edges(max: usize) -> impl Strategy<Value = Vec<Edge>> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(
            prop_oneof![
                3 => Just(Edge::Next),
                3 => (0..n).prop_map(Edge::Goto),
                1 => Just(Edge::End),
                1 => Just(Edge::Dynamic),
            ],
            n,
        )
    })
}

fn flat_study(edges: &[Edge]) -> Study {
    let names: Vec<String> = (0..edges.len()).map(|i| format!("c{i}")).collect();
    let children = names.iter().map(|n| leaf(n)).collect();
    let mut transitions = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        let t = match e {
            Edge::Next => continue,
            Edge::Goto(j) => Transition::Goto(id(&names[*j])),
            Edge::End => Transition::End,
            Edge::Dynamic => Transition::dynamic(|_| Target::End),
        };
        transitions.insert(id(&names[i]), t);
    }
    Study::from_parts(id("s"), children, transitions)
}

/// Reachability by repeated relaxation of the explicit edge relation
/// until nothing changes. Node `n` stands for End.
fn end_reachable_oracle(edges: &[Edge]) -> bool {
    let n = edges.len();
    let succ = |i: usize| -> Vec<usize> {
        match edges[i] {
            Edge::Next => vec![i + 1],
            Edge::Goto(j) => vec![j],
            Edge::End => vec![n],
            Edge::Dynamic => (0..=n).collect(),
        }
    };
    let mut reach = vec![false; n + 1];
    reach[0] = true;
    loop {
        let mut changed = false;
        for i in 0..n {
            if reach[i] {
                for j in succ(i) {
                    if !reach[j] {
                        reach[j] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return reach[n];
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn reachability_matches_brute_force(edges in edges(7)) {
        let diagnostics = validate_study(&flat_study(&edges));
        let expected = if end_reachable_oracle(&edges) { vec![] } else { vec![Diagnostic::Unreachable { study: "s".parse_path() }] };
        prop_assert_eq!(diagnostics, expected);
    }

    /// Static walks of a validated study end within one pass of its children.
    #[test]
    fn static_walks_terminate(edges in edges(7)) {
        let edges: Vec<Edge> = edges.into_iter().map(|e| if matches!(e, Edge::Dynamic) { Edge::Next } else { e }).collect();
        let study = flat_study(&edges);
        prop_assume!(validate_study(&study).is_empty());
        let env = Env::blank("p");
        let mut at = study.entry.clone().unwrap();
        let mut steps = 0;
        loop {
            steps += 1;
            prop_assert!(steps <= study.children.len(), "walk did not end");
            match resolve_next(&study, &at, &env).unwrap() {
                Target::End => break,
                Target::Node(next) => at = next,
            }
        }
    }

    #[test]
    fn describe_then_build_is_identity(desc in description(2)) {
        let study = build_study(&desc).unwrap();
        let again = build_study(&describe(&study)).unwrap();
        prop_assert_eq!(shape(&study), shape(&again));
        prop_assert_eq!(describe(&study), describe(&again));
        let structural = validate_study(&study).into_iter().filter(|d| !matches!(d, Diagnostic::Unreachable { .. })).count();
        prop_assert_eq!(structural, 0);
    }
}

trait ParsePath {
    fn parse_path(&self) -> studyflow::state::Path;
}

impl ParsePath for str {
    fn parse_path(&self) -> studyflow::state::Path {
        studyflow::state::Path::parse(self.split('/')).unwrap()
    }
}

/// Ids, kinds and transitions of the whole tree.
fn shape(study: &Study) -> Vec<(String, String, TransitionKind)> {
    let mut out = Vec::new();
    fn walk(study: &Study, prefix: &str, out: &mut Vec<(String, String, TransitionKind)>) {
        for child in &study.children {
            let path = format!("{prefix}/{}", child.id());
            let kind = match child {
                StudyNode::Step(_) => "step",
                StudyNode::Study(_) => "study",
                StudyNode::Dynamic(_) => "dynamic",
            };
            out.push((path.clone(), kind.to_owned(), study.transition(child.id()).kind()));
            if let StudyNode::Study(s) = child {
                walk(s, &path, out);
            }
        }
    }
    walk(study, study.id.as_str(), &mut out);
    out
}

/// A random declarative study: children are steps or nested studies, and
/// one chain visits a random subset of them in random order.
fn description(levels: u32) -> BoxedStrategy<StudyDescription> {
    let node = if levels == 0 {
        Just(None).boxed()
    } else {
        prop_oneof![3 => Just(None), 1 => description(levels - 1).prop_map(Some)].boxed()
    };
    (prop::collection::vec(node, 1..5), any::<prop::sample::Index>(), any::<bool>(), prop::collection::vec(any::<bool>(), 5))
        .prop_map(move |(kinds, pick, end, dynamic)| {
            let nodes: Vec<_> = kinds
                .into_iter()
                .enumerate()
                .map(|(i, sub)| {
                    let node_id = format!("l{levels}-n{i}");
                    match sub {
                        None => studyflow::model::NodeDescription {
                            id: node_id,
                            kind: NodeKind::Step,
                            views: vec![],
                            entry: None,
                            chains: vec![],
                            dynamic: vec![],
                            nodes: vec![],
                        },
                        Some(d) => studyflow::model::NodeDescription {
                            id: node_id,
                            kind: NodeKind::Study,
                            views: vec![],
                            entry: d.entry,
                            chains: d.chains,
                            dynamic: d.dynamic,
                            nodes: d.nodes,
                        },
                    }
                })
                .collect();
            let mut order: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();
            let k = pick.index(order.len()) + 1;
            let len = order.len();
            order.rotate_left(k % len);
            order.truncate(k);
            let dynamic_ids: Vec<String> = order
                .iter()
                .zip(&dynamic)
                .filter(|(_, d)| **d)
                .map(|(n, _)| n.clone())
                .filter(|n| Some(n) != order.last())
                .collect();
            // Chain sources must not also be dynamic.
            let mut chain: Vec<String> = order.iter().filter(|n| !dynamic_ids.contains(n)).cloned().collect();
            if end {
                chain.push("end".into());
            }
            let chains = if chain.len() >= 2 { vec![chain] } else { vec![] };
            let dynamic_ids = dynamic_ids.into_iter().filter(|n| chains.iter().flatten().all(|c| c != n)).collect();
            StudyDescription {
                id: format!("d{levels}"),
                entry: None,
                chains,
                dynamic: dynamic_ids,
                nodes,
            }
        })
        .boxed()
}

#[test]
fn three_level_study_with_dynamic_transition_is_valid() {
    let inner = Study::builder("inner")
        .step(Step::new("x", |b| b.button("Next")))
        .step(Step::new("y", |b| b.button("Next")))
        .transition("y", Transition::dynamic(|_| Target::named("x")))
        .build()
        .unwrap();
    let middle = Study::builder("middle").study(inner).step(Step::new("m", |b| b.button("Next"))).build().unwrap();
    let outer = Study::builder("outer")
        .study(middle)
        .step(Step::new("o", |b| b.button("Next")))
        .transition("middle", Transition::dynamic(|_| Target::named("middle")))
        .build()
        .unwrap();
    assert_eq!(outer.depth(), 4);
    assert_eq!(validate_study(&outer), []);
}

#[test]
fn fixtures_validate_clean() {
    for study in fixtures::all() {
        assert_eq!(validate_study(&study), [], "{}", study.id);
    }
}

#[test]
fn invalid_fixtures_report_exactly_their_problem() {
    let dup = validate_study(&fixtures::invalid::duplicate_id());
    assert!(matches!(dup.as_slice(), [Diagnostic::DuplicateId { id, .. }] if id.as_str() == "a"), "{dup:?}");
    let dangling = validate_study(&fixtures::invalid::dangling_target());
    assert!(
        matches!(dangling.as_slice(), [Diagnostic::DanglingTarget { source, target, .. }] if source.as_str() == "a" && target.as_str() == "z"),
        "{dangling:?}"
    );
    let looping = validate_study(&fixtures::invalid::end_unreachable());
    assert!(matches!(looping.as_slice(), [Diagnostic::Unreachable { .. }]), "{looping:?}");
}

#[test]
fn coin_toss_chains_expand() {
    let study = fixtures::coin_toss();
    let kinds: Vec<_> = study.children.iter().map(|c| (c.id().to_string(), study.transition(c.id()).kind())).collect();
    assert_eq!(
        kinds,
        [
            ("intro".to_owned(), TransitionKind::Goto(id("choices"))),
            ("choices".to_owned(), TransitionKind::Goto(id("result"))),
            ("result".to_owned(), TransitionKind::End),
        ]
    );
    let StudyNode::Study(choices) = study.child("choices").unwrap() else { panic!("choices is a study") };
    assert_eq!(choices.transition(&id("heads-or-tails")).kind(), TransitionKind::End);
    let env = Env::blank("p");
    assert_eq!(resolve_next(choices, &id("heads-or-tails"), &env).unwrap(), Target::End);
}

#[test]
fn builder_rejects_what_validation_would_flag() {
    assert!(matches!(
        Study::builder("s").step(Step::new("a", |b| b.button("x"))).chain(["a", "z"]).build(),
        Err(BuildError::DanglingTarget { .. })
    ));
    assert!(matches!(
        Study::builder("s").step(Step::new("a", |b| b.button("x"))).step(Step::new("a", |b| b.button("x"))).build(),
        Err(BuildError::DuplicateId { .. })
    ));
}

#[test]
fn manifests_match_their_fixtures() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/manifests");
    for (file, fixture) in [("example-study.toml", "example-study"), ("example.toml", "example"), ("nested-loop.toml", "nested-loop")] {
        let text = std::fs::read_to_string(format!("{dir}/{file}")).unwrap();
        let desc = StudyDescription::from_toml(&text).unwrap();
        let built = build_study(&desc).unwrap();
        let fixture = fixtures::by_name(fixture).unwrap();
        assert_eq!(shape(&built), shape(&fixture), "{file}");
    }
}
