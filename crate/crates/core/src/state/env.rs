use std::collections::BTreeMap;
use std::fmt::Display;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{Bindings, Parameterization, Path, Scope, ScopeKey, StateError, Value, VarStore};
use crate::id::ParticipantId;

/// Source of step-local randomness for one session.
///
/// Named draws can be forced, which lets tests pin values such as a coin
/// toss without knowing anything about the generator.
#[derive(Debug, Clone)]
pub struct Draws {
    rng: StdRng,
    seed: Option<u64>,
    forced: BTreeMap<String, String>,
}

impl Draws {
    pub fn from_entropy() -> Self {
        Self {
            rng: StdRng::from_os_rng(),
            seed: None,
            forced: BTreeMap::new(),
        }
    }

    pub fn seeded(seed: u64) -> Self {
        Self {
            rng: StdRng::seed_from_u64(seed),
            seed: Some(seed),
            forced: BTreeMap::new(),
        }
    }

    /// The seed this generator started from, if it was seeded.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn force(&mut self, label: impl Into<String>, value: impl Into<String>) {
        self.forced.insert(label.into(), value.into());
    }

    pub fn forced(&self) -> &BTreeMap<String, String> {
        &self.forced
    }

    /// Picks one of `options`. A forced value for `label` selects the option
    /// whose display form matches it; otherwise the draw is uniform.
    pub fn choose<'o, T: Display>(&mut self, label: &str, options: &'o [T]) -> Option<&'o T> {
        if let Some(want) = self.forced.get(label) {
            if let Some(hit) = options.iter().find(|o| o.to_string() == *want) {
                return Some(hit);
            }
        }
        if options.is_empty() {
            return None;
        }
        let i = self.rng.random_range(0..options.len());
        options.get(i)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }
}

impl Default for Draws {
    fn default() -> Self {
        Self::from_entropy()
    }
}

/// Per-field messages attached to a form, carried from a failed submission
/// to the re-rendered page.
pub type FieldErrors = BTreeMap<String, String>;

/// Everything a handler, action, dynamic transition or study factory may
/// see or touch.
#[derive(Debug, Clone)]
pub struct Env {
    participant: ParticipantId,
    path: Path,
    params: Parameterization,
    vars: VarStore,
    draws: Draws,
    field_errors: FieldErrors,
}

impl Env {
    pub fn new(participant: ParticipantId, path: Path, params: Parameterization, vars: VarStore) -> Self {
        Self {
            participant,
            path,
            params,
            vars,
            draws: Draws::default(),
            field_errors: FieldErrors::new(),
        }
    }

    /// A throwaway environment for a participant with no state.
    pub fn blank(participant: impl Into<ParticipantId>) -> Self {
        Self::new(participant.into(), Path::empty(), Parameterization::empty(), VarStore::new())
    }

    pub fn participant(&self) -> &ParticipantId {
        &self.participant
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn params(&self) -> &Parameterization {
        &self.params
    }

    pub(crate) fn set_params(&mut self, params: Parameterization) {
        self.params = params;
    }

    pub fn vars(&self) -> &VarStore {
        &self.vars
    }

    #[cfg(test)]
    pub(crate) fn set_path(&mut self, path: Path) {
        self.path = path;
    }

    pub(crate) fn into_parts(self) -> (VarStore, Draws, FieldErrors) {
        (self.vars, self.draws, self.field_errors)
    }

    pub(crate) fn with_draws(mut self, draws: Draws) -> Self {
        self.draws = draws;
        self
    }

    pub fn draws(&mut self) -> &mut Draws {
        &mut self.draws
    }

    /// Uniform pick among `options`, or the forced value for `label`.
    ///
    /// # Panics
    /// If `options` is empty.
    pub fn random_choice<'o, T: Display>(&mut self, label: &str, options: &'o [T]) -> &'o T {
        self.draws
            .choose(label, options)
            .expect("random_choice needs at least one option")
    }

    /// Reads a variable. `None` is the unset value.
    pub fn var(&self, name: &str, scope: Scope) -> Option<&Value> {
        match scope {
            Scope::Global => self.vars.get_global(name),
            Scope::Scoped => self.vars.get_scoped(name, &self.path),
        }
    }

    /// Writes a variable. Scoped writes land on the enclosing study of the
    /// current node.
    pub fn set_var(&mut self, name: &str, scope: Scope, value: impl Into<Value>) -> Result<(), StateError> {
        let value = value.into();
        if !value.is_encodable() {
            return Err(StateError::Serialization { name: name.to_owned() });
        }
        let key = match scope {
            Scope::Global => ScopeKey::Global,
            Scope::Scoped => ScopeKey::Prefix(self.declaration_prefix()),
        };
        self.vars.insert(key, name, value);
        Ok(())
    }

    fn declaration_prefix(&self) -> Path {
        match self.path.len() {
            0 | 1 => self.path.clone(),
            _ => self.path.parent().unwrap_or_default(),
        }
    }

    /// Reads a dynamic binding from the threaded parameterization.
    pub fn param(&self, name: &str) -> Option<&Value> {
        self.params.get(name)
    }

    /// Unified lookup: a durable assignment (scoped, then global) shadows a
    /// dynamic binding of the same name.
    pub fn lookup(&self, name: &str) -> Option<&Value> {
        self.vars
            .get_scoped(name, &self.path)
            .or_else(|| self.vars.get_global(name))
            .or_else(|| self.params.get(name))
    }

    /// Runs `body` with the parameterization extended by `bindings`; the
    /// extension is discarded when `body` returns.
    pub fn with_binding<R>(&mut self, bindings: Bindings, body: impl FnOnce(&mut Env) -> R) -> R {
        let saved = self.params.clone();
        self.params = saved.extend(bindings);
        let out = body(self);
        self.params = saved;
        out
    }

    pub fn field_errors(&self) -> &FieldErrors {
        &self.field_errors
    }

    pub(crate) fn set_field_errors(&mut self, errors: FieldErrors) {
        self.field_errors = errors;
    }

}

/// A named variable declaration.
///
/// `Var::global` corresponds to a study-wide variable; `Var::scoped` to one
/// that lives in the study where it is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    pub name: &'static str,
    pub scope: Scope,
}

impl Var {
    pub const fn global(name: &'static str) -> Self {
        Self { name, scope: Scope::Global }
    }

    pub const fn scoped(name: &'static str) -> Self {
        Self { name, scope: Scope::Scoped }
    }

    pub fn get<'e>(&self, env: &'e Env) -> Option<&'e Value> {
        env.var(self.name, self.scope)
    }

    pub fn set(&self, env: &mut Env, value: impl Into<Value>) -> Result<(), StateError> {
        env.set_var(self.name, self.scope, value)
    }
}
