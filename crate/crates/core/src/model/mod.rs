//! Study trees: steps, sub-studies, dynamically generated studies and the
//! transitions between siblings.

mod builder;
mod describe;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use builder::{BuildError, StudyBuilder, END};
pub use describe::{build_study, describe, NodeDescription, NodeKind, StudyDescription, TransitionKind};
pub use validate::{validate_study, Diagnostic};

use crate::id::{NodeId, StepId, StudyId};
use crate::state::{Bindings, Env, StateError};
use crate::widgets::{Markup, PageBuilder};

/// What an action hands back to the study loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepResult {
    /// Render the same step again.
    Retry,
    /// Move on according to the enclosing study's transitions.
    Continue,
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("widget used outside page construction")]
    NoRegistrar,
    #[error("page links to unregistered embed {0}")]
    OrphanEmbed(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("{0}")]
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("dynamic transition from {from} in study {study} returned unknown target {target:?}")]
    BadDynamicTarget {
        study: StudyId,
        from: NodeId,
        target: String,
    },
    #[error("{id} is not a child of study {study}")]
    NotAChild { study: StudyId, id: NodeId },
}

/// Renders a page for the current step.
pub type Handler = Arc<dyn Fn(&mut PageBuilder<'_>) -> Result<Markup, StepError> + Send + Sync>;

/// Chooses a successor at runtime.
pub type Chooser = Arc<dyn Fn(&Env) -> Target + Send + Sync>;

/// Produces a study from the participant's environment.
pub type Factory = Arc<dyn Fn(&Env) -> Study + Send + Sync>;

/// A page-producing leaf of the study tree.
#[derive(Clone)]
pub struct Step {
    pub id: StepId,
    pub handler: Handler,
    pub views: BTreeMap<String, Handler>,
}

impl Step {
    /// # Panics
    /// If `id` is not a valid node id. Use [`Step::try_new`] for untrusted ids.
    pub fn new<F>(id: &str, handler: F) -> Self
    where
        F: Fn(&mut PageBuilder<'_>) -> Result<Markup, StepError> + Send + Sync + 'static,
    {
        Self::try_new(id, handler).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn try_new<F>(id: &str, handler: F) -> Result<Self, crate::id::InvalidId>
    where
        F: Fn(&mut PageBuilder<'_>) -> Result<Markup, StepError> + Send + Sync + 'static,
    {
        Ok(Self {
            id: NodeId::new(id)?,
            handler: Arc::new(handler),
            views: BTreeMap::new(),
        })
    }

    /// Adds a named static page served alongside the step flow.
    pub fn view<F>(mut self, name: &str, handler: F) -> Self
    where
        F: Fn(&mut PageBuilder<'_>) -> Result<Markup, StepError> + Send + Sync + 'static,
    {
        self.views.insert(name.to_owned(), Arc::new(handler));
        self
    }
}

impl fmt::Debug for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Step")
            .field("id", &self.id)
            .field("views", &self.views.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// A study generated from the environment the first time a participant
/// reaches it.
#[derive(Clone)]
pub struct DynamicStudy {
    pub id: StudyId,
    pub factory: Factory,
}

impl DynamicStudy {
    pub fn new<F>(id: &str, factory: F) -> Self
    where
        F: Fn(&Env) -> Study + Send + Sync + 'static,
    {
        Self {
            id: NodeId::new(id).unwrap_or_else(|e| panic!("{e}")),
            factory: Arc::new(factory),
        }
    }
}

impl fmt::Debug for DynamicStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicStudy").field("id", &self.id).finish()
    }
}

#[derive(Debug, Clone)]
pub enum StudyNode {
    Step(Step),
    Study(Arc<Study>),
    Dynamic(DynamicStudy),
}

impl StudyNode {
    pub fn id(&self) -> &NodeId {
        match self {
            StudyNode::Step(s) => &s.id,
            StudyNode::Study(s) => &s.id,
            StudyNode::Dynamic(d) => &d.id,
        }
    }
}

impl From<Step> for StudyNode {
    fn from(value: Step) -> Self {
        StudyNode::Step(value)
    }
}

impl From<Study> for StudyNode {
    fn from(value: Study) -> Self {
        StudyNode::Study(Arc::new(value))
    }
}

impl From<Arc<Study>> for StudyNode {
    fn from(value: Arc<Study>) -> Self {
        StudyNode::Study(value)
    }
}

impl From<DynamicStudy> for StudyNode {
    fn from(value: DynamicStudy) -> Self {
        StudyNode::Dynamic(value)
    }
}

/// Successor of a node within its study.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Node(NodeId),
    End,
}

impl Target {
    /// Convenience for dynamic transitions: `"end"` maps to [`Target::End`];
    /// anything else is looked up among the siblings when applied.
    pub fn named(name: &str) -> Self {
        if name == END {
            return Target::End;
        }
        NodeId::new(name)
            .map(Target::Node)
            // An invalid id never matches a sibling, so resolve_next
            // reports it as BadDynamicTarget.
            .unwrap_or_else(|_| Target::Node(NodeId::unchecked(name)))
    }
}

#[derive(Clone)]
pub enum Transition {
    NextSibling,
    Goto(NodeId),
    End,
    Dynamic(Chooser),
}

impl Transition {
    pub fn dynamic<F>(choose: F) -> Self
    where
        F: Fn(&Env) -> Target + Send + Sync + 'static,
    {
        Transition::Dynamic(Arc::new(choose))
    }

    pub fn kind(&self) -> TransitionKind {
        match self {
            Transition::NextSibling => TransitionKind::Next,
            Transition::Goto(id) => TransitionKind::Goto(id.clone()),
            Transition::End => TransitionKind::End,
            Transition::Dynamic(_) => TransitionKind::Dynamic,
        }
    }
}

impl fmt::Debug for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind().fmt(f)
    }
}

static NEXT_SIBLING: Transition = Transition::NextSibling;

/// A tree of steps and sub-studies with transitions between siblings.
///
/// Built with [`Study::builder`], which checks ids and chain targets.
/// [`Study::from_parts`] skips those checks; run [`validate_study`] before
/// serving such a study.
#[derive(Debug, Clone)]
pub struct Study {
    pub id: StudyId,
    pub children: Vec<StudyNode>,
    pub transitions: BTreeMap<NodeId, Transition>,
    pub entry: Option<NodeId>,
    /// Dynamic bindings in effect for everything below this study.
    pub bindings: Bindings,
}

impl Study {
    pub fn builder(id: &str) -> StudyBuilder {
        StudyBuilder::new(id)
    }

    /// Unchecked constructor; entry defaults to the first child.
    pub fn from_parts(id: StudyId, children: Vec<StudyNode>, transitions: BTreeMap<NodeId, Transition>) -> Self {
        let entry = children.first().map(|c| c.id().clone());
        Self {
            id,
            children,
            transitions,
            entry,
            bindings: Bindings::new(),
        }
    }

    pub fn child(&self, id: &str) -> Option<&StudyNode> {
        self.children.iter().find(|c| c.id().as_str() == id)
    }

    pub(crate) fn position(&self, id: &str) -> Option<usize> {
        self.children.iter().position(|c| c.id().as_str() == id)
    }

    /// Transition for `id`; nodes without an entry advance to the next sibling.
    pub fn transition(&self, id: &NodeId) -> &Transition {
        self.transitions.get(id).unwrap_or(&NEXT_SIBLING)
    }

    /// Depth of the tree counting this study as 1. Dynamic children count
    /// as a single level since their shape is unknown until resolved.
    pub fn depth(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                StudyNode::Step(_) => 1,
                StudyNode::Study(s) => s.depth(),
                StudyNode::Dynamic(_) => 1,
            })
            .max()
            .unwrap_or(0)
    }

    /// Steps in depth-first, left-to-right order of the static tree.
    pub fn flatten_steps(&self) -> Vec<&Step> {
        let mut out = Vec::new();
        for child in &self.children {
            match child {
                StudyNode::Step(s) => out.push(s),
                StudyNode::Study(s) => out.extend(s.flatten_steps()),
                StudyNode::Dynamic(_) => {}
            }
        }
        out
    }
}

/// Applies the transition for `current` inside `study`.
pub fn resolve_next(study: &Study, current: &NodeId, env: &Env) -> Result<Target, ModelError> {
    let Some(index) = study.position(current.as_str()) else {
        return Err(ModelError::NotAChild {
            study: study.id.clone(),
            id: current.clone(),
        });
    };
    let target = match study.transition(current) {
        Transition::NextSibling => match study.children.get(index + 1) {
            Some(next) => Target::Node(next.id().clone()),
            None => Target::End,
        },
        Transition::Goto(id) => Target::Node(id.clone()),
        Transition::End => Target::End,
        Transition::Dynamic(choose) => choose(env),
    };
    if let Target::Node(id) = &target {
        if study.position(id.as_str()).is_none() {
            return Err(ModelError::BadDynamicTarget {
                study: study.id.clone(),
                from: current.clone(),
                target: id.to_string(),
            });
        }
    }
    Ok(target)
}
