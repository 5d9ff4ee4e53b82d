use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BuildError, DynamicStudy, Step, Study, StudyNode, Target, Transition, END};
use crate::id::NodeId;
use crate::widgets::html;

/// Kind of successor, without the runtime closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransitionKind {
    Next,
    Goto(NodeId),
    End,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Step,
    Study,
    Dynamic,
}

/// Declarative form of a study, as found in manifest files:
///
/// ```toml
/// id = "example"
/// chains = [["intro", "choices", "result", "end"]]
///
/// [[nodes]]
/// id = "intro"
/// kind = "step"
///
/// [[nodes]]
/// id = "choices"
/// kind = "study"
/// chains = [["heads-or-tails", "end"]]
///
///   [[nodes.nodes]]
///   id = "heads-or-tails"
///   kind = "step"
///
/// [[nodes]]
/// id = "result"
/// kind = "step"
/// ```
///
/// `dynamic` lists nodes whose successor is chosen at runtime.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyDescription {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chains: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dynamic: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDescription {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub views: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chains: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dynamic: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeDescription>,
}

impl NodeDescription {
    fn as_study(&self) -> StudyDescription {
        StudyDescription {
            id: self.id.clone(),
            entry: self.entry.clone(),
            chains: self.chains.clone(),
            dynamic: self.dynamic.clone(),
            nodes: self.nodes.clone(),
        }
    }
}

impl StudyDescription {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("descriptions are always serializable")
    }

    /// Builds the tree without structural checks, so that [`super::validate_study`]
    /// can report every problem. Only malformed ids fail here. Steps get
    /// placeholder pages.
    pub fn assemble(&self) -> Result<Study, BuildError> {
        let id = NodeId::new(&self.id)?;
        let children = self
            .nodes
            .iter()
            .map(placeholder_node)
            .collect::<Result<Vec<_>, _>>()?;
        let mut transitions = BTreeMap::new();
        for chain in &self.chains {
            for pair in chain.windows(2) {
                let from = NodeId::new(&pair[0])?;
                let t = if pair[1] == END {
                    Transition::End
                } else {
                    Transition::Goto(NodeId::new(&pair[1])?)
                };
                transitions.insert(from, t);
            }
        }
        for name in &self.dynamic {
            let from = NodeId::new(name)?;
            transitions.insert(from.clone(), placeholder_chooser(&self.nodes, &from));
        }
        let mut study = Study::from_parts(id, children, transitions);
        if let Some(entry) = &self.entry {
            study.entry = Some(NodeId::new(entry)?);
        }
        Ok(study)
    }
}

/// Builds a checked study from its description, with placeholder pages
/// for every step.
pub fn build_study(desc: &StudyDescription) -> Result<Study, BuildError> {
    let mut builder = Study::builder(&desc.id);
    for node in &desc.nodes {
        builder = builder.node(match node.kind {
            NodeKind::Step => placeholder_node(node)?,
            NodeKind::Study => build_study(&node.as_study())?.into(),
            NodeKind::Dynamic => {
                let inner = build_study(&node.as_study())?;
                StudyNode::Dynamic(DynamicStudy::new(&node.id, move |_| inner.clone()))
            }
        });
    }
    for chain in &desc.chains {
        builder = builder.chain(chain.iter().cloned());
    }
    for name in &desc.dynamic {
        let from = NodeId::new(name)?;
        builder = builder.transition(name, placeholder_chooser(&desc.nodes, &from));
    }
    if let Some(entry) = &desc.entry {
        builder = builder.entry(entry);
    }
    builder.build()
}

/// Inverse of [`build_study`] on ids, kinds and transitions.
pub fn describe(study: &Study) -> StudyDescription {
    let mut chains = Vec::new();
    let mut dynamic = Vec::new();
    for child in &study.children {
        match study.transition(child.id()) {
            Transition::NextSibling => {}
            Transition::Goto(t) => chains.push(vec![child.id().to_string(), t.to_string()]),
            Transition::End => chains.push(vec![child.id().to_string(), END.to_owned()]),
            Transition::Dynamic(_) => dynamic.push(child.id().to_string()),
        }
    }
    let entry = match (&study.entry, study.children.first()) {
        (Some(e), Some(first)) if e != first.id() => Some(e.to_string()),
        (Some(e), None) => Some(e.to_string()),
        _ => None,
    };
    StudyDescription {
        id: study.id.to_string(),
        entry,
        chains,
        dynamic,
        nodes: study.children.iter().map(describe_node).collect(),
    }
}

fn describe_node(node: &StudyNode) -> NodeDescription {
    match node {
        StudyNode::Step(step) => NodeDescription {
            id: step.id.to_string(),
            kind: NodeKind::Step,
            views: step.views.keys().cloned().collect(),
            entry: None,
            chains: vec![],
            dynamic: vec![],
            nodes: vec![],
        },
        StudyNode::Study(s) => {
            let d = describe(s);
            NodeDescription {
                id: d.id,
                kind: NodeKind::Study,
                views: vec![],
                entry: d.entry,
                chains: d.chains,
                dynamic: d.dynamic,
                nodes: d.nodes,
            }
        }
        StudyNode::Dynamic(dynamic) => NodeDescription {
            id: dynamic.id.to_string(),
            kind: NodeKind::Dynamic,
            views: vec![],
            entry: None,
            chains: vec![],
            dynamic: vec![],
            nodes: vec![],
        },
    }
}

fn placeholder_node(node: &NodeDescription) -> Result<StudyNode, BuildError> {
    Ok(match node.kind {
        NodeKind::Step => {
            let label = node.id.clone();
            let mut step = Step::try_new(&node.id, move |b| {
                let next = b.button("Continue")?;
                Ok(html::div([html::h1(label.clone()), next]))
            })?;
            for view in &node.views {
                let text = format!("{} / {view}", node.id);
                step = step.view(view, move |_| Ok(html::p(text.clone())));
            }
            StudyNode::Step(step)
        }
        NodeKind::Study => node.as_study().assemble()?.into(),
        NodeKind::Dynamic => {
            let inner = node.as_study().assemble()?;
            StudyNode::Dynamic(DynamicStudy::new(&node.id, move |_| inner.clone()))
        }
    })
}

/// Stand-in for a runtime choice: behaves like moving to the next sibling.
fn placeholder_chooser(nodes: &[NodeDescription], from: &NodeId) -> Transition {
    let next = nodes
        .iter()
        .position(|n| n.id == from.as_str())
        .and_then(|i| nodes.get(i + 1))
        .map(|n| n.id.clone());
    Transition::dynamic(move |_| match &next {
        Some(id) => Target::named(id),
        None => Target::End,
    })
}
