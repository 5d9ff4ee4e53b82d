use std::fmt;

use serde::{Deserialize, Serialize};

use crate::id::NodeId;

/// Fully-qualified position in a study tree: ids from the root study down
/// to the current node. Serializes as a flat list of strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(Vec<NodeId>);

impl Path {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn root(id: NodeId) -> Self {
        Self(vec![id])
    }

    /// Builds a path from string segments, failing on the first invalid id.
    pub fn parse<I, S>(segments: I) -> Result<Self, crate::id::InvalidId>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        segments
            .into_iter()
            .map(|s| NodeId::new(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }

    pub fn child(&self, id: NodeId) -> Self {
        let mut next = self.0.clone();
        next.push(id);
        Self(next)
    }

    pub fn push(&mut self, id: NodeId) {
        self.0.push(id);
    }

    pub fn pop(&mut self) -> Option<NodeId> {
        self.0.pop()
    }

    pub fn parent(&self) -> Option<Path> {
        (!self.0.is_empty()).then(|| Self(self.0[..self.0.len() - 1].to_vec()))
    }

    pub fn last(&self) -> Option<&NodeId> {
        self.0.last()
    }

    pub fn set_last(&mut self, id: NodeId) {
        if let Some(slot) = self.0.last_mut() {
            *slot = id;
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn segments(&self) -> &[NodeId] {
        &self.0
    }

    pub fn is_prefix_of(&self, other: &Path) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|id| id.to_string()).collect()
    }

    pub(crate) fn estimated_bytes(&self) -> usize {
        24 + self.0.iter().map(|id| 24 + id.as_str().len()).sum::<usize>()
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, id) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            f.write_str(id.as_str())?;
        }
        Ok(())
    }
}

impl FromIterator<NodeId> for Path {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_relation() {
        let choices = Path::parse(["example", "choices"]).unwrap();
        let inner = Path::parse(["example", "choices", "heads-or-tails"]).unwrap();
        let result = Path::parse(["example", "result"]).unwrap();
        assert!(choices.is_prefix_of(&inner));
        assert!(choices.is_prefix_of(&choices));
        assert!(!choices.is_prefix_of(&result));
        assert!(Path::empty().is_prefix_of(&result));
        assert_eq!(inner.parent(), Some(choices));
        assert_eq!(inner.to_string(), "example/choices/heads-or-tails");
    }

    #[test]
    fn serializes_flat() {
        let p = Path::parse(["example", "intro"]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"["example","intro"]"#);
    }
}
