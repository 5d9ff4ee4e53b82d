use std::collections::BTreeMap;
use std::sync::Arc;

use super::Value;

/// Ordered set of name/value pairs used to extend a [`Parameterization`].
pub type Bindings = BTreeMap<String, Value>;

/// An immutable chain of dynamic bindings.
///
/// Extending returns a new parameterization that shares its parent; the
/// parent is never modified. Lookup walks from the innermost frame out.
/// There is no ambient parameterization anywhere in the crate: whoever
/// needs one is handed one explicitly.
#[derive(Debug, Clone, Default)]
pub struct Parameterization(Option<Arc<Frame>>);

#[derive(Debug)]
struct Frame {
    bindings: Bindings,
    parent: Parameterization,
}

impl Parameterization {
    pub fn empty() -> Self {
        Self(None)
    }

    /// Rebuilds a chain from frames listed outermost first.
    pub fn from_frames(frames: impl IntoIterator<Item = Bindings>) -> Self {
        frames
            .into_iter()
            .fold(Self::empty(), |acc, frame| acc.extend(frame))
    }

    /// An empty extension is the identity and allocates nothing.
    pub fn extend(&self, bindings: Bindings) -> Self {
        if bindings.is_empty() {
            return self.clone();
        }
        Self(Some(Arc::new(Frame {
            bindings,
            parent: self.clone(),
        })))
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        let mut cursor = self;
        while let Some(frame) = &cursor.0 {
            if let Some(v) = frame.bindings.get(name) {
                return Some(v);
            }
            cursor = &frame.parent;
        }
        None
    }

    /// Runs `body` under this parameterization extended by `bindings`.
    /// The extension exists only for the duration of the call.
    pub fn with_binding<R>(&self, bindings: Bindings, body: impl FnOnce(&Parameterization) -> R) -> R {
        body(&self.extend(bindings))
    }

    /// Frames outermost first.
    pub fn frames(&self) -> Vec<Bindings> {
        let mut out = Vec::new();
        let mut cursor = self;
        while let Some(frame) = &cursor.0 {
            out.push(frame.bindings.clone());
            cursor = &frame.parent;
        }
        out.reverse();
        out
    }

    /// Effective view: every visible name with its innermost value.
    pub fn entries(&self) -> Bindings {
        let mut out = Bindings::new();
        for frame in self.frames() {
            out.extend(frame);
        }
        out
    }

    pub fn depth(&self) -> usize {
        let mut n = 0;
        let mut cursor = self;
        while let Some(frame) = &cursor.0 {
            n += 1;
            cursor = &frame.parent;
        }
        n
    }

    pub(crate) fn estimated_bytes(&self) -> usize {
        let mut total = 8;
        let mut cursor = self;
        while let Some(frame) = &cursor.0 {
            total += 40
                + frame
                    .bindings
                    .iter()
                    .map(|(k, v)| k.len() + v.estimated_bytes())
                    .sum::<usize>();
            cursor = &frame.parent;
        }
        total
    }
}

impl PartialEq for Parameterization {
    fn eq(&self, other: &Self) -> bool {
        self.frames() == other.frames()
    }
}

/// Shorthand for building [`Bindings`] from pairs.
pub fn bindings<I, K, V>(pairs: I) -> Bindings
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<Value>,
{
    pairs
        .into_iter()
        .map(|(k, v)| (k.into(), v.into()))
        .collect()
}
