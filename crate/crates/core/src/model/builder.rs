use std::collections::{BTreeMap, BTreeSet};

use super::{DynamicStudy, Step, Study, StudyNode, Transition};
use crate::id::{InvalidId, NodeId, StudyId};
use crate::state::Bindings;

/// Chain keyword for the end of a study.
pub const END: &str = "end";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    InvalidId(#[from] InvalidId),
    #[error("study {study}: duplicate child id {id}")]
    DuplicateId { study: StudyId, id: NodeId },
    #[error("study {study}: chain names unknown node {name:?}")]
    DanglingTarget { study: StudyId, name: String },
    #[error("study {study}: {id} has conflicting transitions")]
    ConflictingTransition { study: StudyId, id: NodeId },
    #[error("study {study}: `end` has no successor")]
    EndHasSuccessor { study: StudyId },
    #[error("study {study}: {END:?} is reserved and cannot name a child")]
    ReservedId { study: StudyId },
}

/// Declarative construction of a [`Study`].
///
/// Children are listed in order. Chains such as
/// `["intro", "choices", "result", "end"]` expand to `Goto`/`End` entries;
/// children not mentioned as a chain source advance to their next sibling.
pub struct StudyBuilder {
    id: Result<StudyId, InvalidId>,
    children: Vec<StudyNode>,
    chains: Vec<Vec<String>>,
    explicit: Vec<(String, Transition)>,
    entry: Option<String>,
    bindings: Bindings,
}

impl StudyBuilder {
    pub(crate) fn new(id: &str) -> Self {
        Self {
            id: NodeId::new(id),
            children: Vec::new(),
            chains: Vec::new(),
            explicit: Vec::new(),
            entry: None,
            bindings: Bindings::new(),
        }
    }

    pub fn node(mut self, node: impl Into<StudyNode>) -> Self {
        self.children.push(node.into());
        self
    }

    pub fn step(self, step: Step) -> Self {
        self.node(step)
    }

    pub fn study(self, study: Study) -> Self {
        self.node(study)
    }

    pub fn dynamic(self, dynamic: DynamicStudy) -> Self {
        self.node(dynamic)
    }

    pub fn chain<I, S>(mut self, chain: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.chains.push(chain.into_iter().map(Into::into).collect());
        self
    }

    pub fn transition(mut self, from: &str, transition: Transition) -> Self {
        self.explicit.push((from.to_owned(), transition));
        self
    }

    pub fn entry(mut self, id: &str) -> Self {
        self.entry = Some(id.to_owned());
        self
    }

    /// Dynamic bindings visible to every node below this study.
    pub fn bind(mut self, bindings: Bindings) -> Self {
        self.bindings.extend(bindings);
        self
    }

    pub fn build(self) -> Result<Study, BuildError> {
        let study = self.id?;
        let mut ids = BTreeSet::new();
        for child in &self.children {
            if child.id() == END {
                return Err(BuildError::ReservedId { study });
            }
            if !ids.insert(child.id().clone()) {
                return Err(BuildError::DuplicateId {
                    study,
                    id: child.id().clone(),
                });
            }
        }
        let lookup = |name: &str| -> Result<NodeId, BuildError> {
            ids.get(name).cloned().ok_or_else(|| BuildError::DanglingTarget {
                study: study.clone(),
                name: name.to_owned(),
            })
        };

        let mut transitions: BTreeMap<NodeId, Transition> = BTreeMap::new();
        let mut set = |from: NodeId, t: Transition| -> Result<(), BuildError> {
            if let Some(prev) = transitions.get(&from) {
                if prev.kind() != t.kind() {
                    return Err(BuildError::ConflictingTransition {
                        study: study.clone(),
                        id: from,
                    });
                }
            }
            transitions.insert(from, t);
            Ok(())
        };

        for chain in &self.chains {
            for pair in chain.windows(2) {
                if pair[0] == END {
                    return Err(BuildError::EndHasSuccessor { study });
                }
                let from = lookup(&pair[0])?;
                let t = if pair[1] == END {
                    Transition::End
                } else {
                    Transition::Goto(lookup(&pair[1])?)
                };
                set(from, t)?;
            }
            if let [only] = chain.as_slice() {
                if only != END {
                    lookup(only)?;
                }
            }
        }
        for (from, t) in self.explicit {
            let from = lookup(&from)?;
            if let Transition::Goto(target) = &t {
                lookup(target.as_str())?;
            }
            set(from, t)?;
        }
        for id in &ids {
            transitions
                .entry(id.clone())
                .or_insert(Transition::NextSibling);
        }
        let entry = match self.entry {
            Some(e) => Some(lookup(&e)?),
            None => self.children.first().map(|c| c.id().clone()),
        };
        Ok(Study {
            id: study,
            children: self.children,
            transitions,
            entry,
            bindings: self.bindings,
        })
    }
}
