use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use super::{Study, StudyNode, Transition};
use crate::id::NodeId;
use crate::state::Path;

/// A problem found by [`validate_study`]. `study` is the path of the study
/// the problem is in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateId { study: Path, id: NodeId },
    DanglingTarget { study: Path, source: NodeId, target: NodeId },
    UnknownSource { study: Path, source: NodeId },
    MissingEntry { study: Path, entry: NodeId },
    /// End cannot be reached from the entry over the static edges.
    Unreachable { study: Path },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateId { study, id } => write!(f, "{study}: duplicate child id {id}"),
            Diagnostic::DanglingTarget { study, source, target } => {
                write!(f, "{study}: transition {source} -> {target} names no child")
            }
            Diagnostic::UnknownSource { study, source } => {
                write!(f, "{study}: transition source {source} is not a child")
            }
            Diagnostic::MissingEntry { study, entry } => write!(f, "{study}: entry {entry} is not a child"),
            Diagnostic::Unreachable { study } => write!(f, "{study}: end is unreachable from the entry"),
        }
    }
}

/// Checks every study in the tree. An empty result means the tree can be
/// served. Dynamic transitions count as reaching every sibling and End;
/// dynamic studies are checked when they are generated.
pub fn validate_study(study: &Study) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check(study, &Path::root(study.id.clone()), &mut out);
    out
}

fn check(study: &Study, path: &Path, out: &mut Vec<Diagnostic>) {
    let before = out.len();
    let mut seen = BTreeSet::new();
    for child in &study.children {
        if !seen.insert(child.id()) {
            out.push(Diagnostic::DuplicateId {
                study: path.clone(),
                id: child.id().clone(),
            });
        }
    }
    let index_of = |id: &NodeId| study.children.iter().position(|c| c.id() == id);

    for (source, t) in &study.transitions {
        if index_of(source).is_none() {
            out.push(Diagnostic::UnknownSource {
                study: path.clone(),
                source: source.clone(),
            });
        }
        if let Transition::Goto(target) = t {
            if index_of(target).is_none() {
                out.push(Diagnostic::DanglingTarget {
                    study: path.clone(),
                    source: source.clone(),
                    target: target.clone(),
                });
            }
        }
    }

    let entry = match (&study.entry, study.children.first()) {
        (Some(e), _) => Some(e),
        (None, Some(first)) => Some(first.id()),
        (None, None) => None,
    };
    let entry_index = match entry {
        Some(e) => match index_of(e) {
            Some(i) => Some(i),
            None => {
                out.push(Diagnostic::MissingEntry {
                    study: path.clone(),
                    entry: e.clone(),
                });
                None
            }
        },
        None => None,
    };

    // Reachability is only meaningful over a well-formed edge set.
    let structural_errors = out[before..]
        .iter()
        .any(|d| !matches!(d, Diagnostic::DuplicateId { .. }));
    if let (Some(start), false) = (entry_index, structural_errors) {
        if !end_reachable(study, start) {
            out.push(Diagnostic::Unreachable { study: path.clone() });
        }
    }

    for child in &study.children {
        if let StudyNode::Study(sub) = child {
            check(sub, &path.child(sub.id.clone()), out);
        }
    }
}

fn end_reachable(study: &Study, start: usize) -> bool {
    let n = study.children.len();
    let end = n;
    let mut visited = vec![false; n + 1];
    let mut queue = VecDeque::from([start]);
    visited[start] = true;
    while let Some(i) = queue.pop_front() {
        if i == end {
            return true;
        }
        let id = study.children[i].id();
        let next: Vec<usize> = match study.transition(id) {
            Transition::NextSibling => vec![i + 1],
            Transition::End => vec![end],
            Transition::Goto(t) => study
                .children
                .iter()
                .position(|c| c.id() == t)
                .into_iter()
                .collect(),
            Transition::Dynamic(_) => (0..=n).collect(),
        };
        for j in next {
            if !visited[j] {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    false
}
