use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Path, Value};

/// How a read or write chooses its binding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// Visible from every node of every study the participant is in.
    Global,
    /// Written at the enclosing study of the current node; readable only
    /// at nodes below that study.
    Scoped,
}

/// Storage key for a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeKey {
    Global,
    Prefix(Path),
}

/// A participant's durable variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<VarEntry>", into = "Vec<VarEntry>")]
pub struct VarStore {
    entries: BTreeMap<(ScopeKey, String), Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarEntry {
    pub scope: ScopeKey,
    pub name: String,
    pub value: Value,
}

impl VarStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_global(&self, name: &str) -> Option<&Value> {
        self.entries.get(&(ScopeKey::Global, name.to_owned()))
    }

    /// Nearest enclosing prefix binding of `name` as seen from `at`.
    pub fn get_scoped(&self, name: &str, at: &Path) -> Option<&Value> {
        // Longest prefix first.
        (0..=at.len()).rev().find_map(|n| {
            let prefix: Path = at.segments()[..n].iter().cloned().collect();
            self.entries.get(&(ScopeKey::Prefix(prefix), name.to_owned()))
        })
    }

    pub fn get(&self, key: &ScopeKey, name: &str) -> Option<&Value> {
        self.entries.get(&(key.clone(), name.to_owned()))
    }

    pub fn insert(&mut self, key: ScopeKey, name: impl Into<String>, value: Value) -> Option<Value> {
        self.entries.insert((key, name.into()), value)
    }

    pub fn remove(&mut self, key: &ScopeKey, name: &str) -> Option<Value> {
        self.entries.remove(&(key.clone(), name.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ScopeKey, &str, &Value)> {
        self.entries.iter().map(|((k, n), v)| (k, n.as_str(), v))
    }
}

impl From<Vec<VarEntry>> for VarStore {
    fn from(entries: Vec<VarEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| ((e.scope, e.name), e.value))
                .collect(),
        }
    }
}

impl From<VarStore> for Vec<VarEntry> {
    fn from(store: VarStore) -> Self {
        store
            .entries
            .into_iter()
            .map(|((scope, name), value)| VarEntry { scope, name, value })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &[&str]) -> Path {
        Path::parse(s.iter().copied()).unwrap()
    }

    #[test]
    fn innermost_prefix_wins() {
        let mut store = VarStore::new();
        store.insert(ScopeKey::Prefix(p(&["example"])), "x", 1.into());
        store.insert(ScopeKey::Prefix(p(&["example", "choices"])), "x", 2.into());
        assert_eq!(
            store.get_scoped("x", &p(&["example", "choices", "heads-or-tails"])),
            Some(&Value::Int(2))
        );
        assert_eq!(store.get_scoped("x", &p(&["example", "result"])), Some(&Value::Int(1)));
        assert_eq!(store.get_scoped("x", &p(&["other"])), None);
    }

    #[test]
    fn last_write_wins() {
        let mut store = VarStore::new();
        store.insert(ScopeKey::Global, "ok?", true.into());
        store.insert(ScopeKey::Global, "ok?", false.into());
        assert_eq!(store.get_global("ok?"), Some(&Value::Bool(false)));
        assert_eq!(store.len(), 1);
    }
}
