use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{FieldKind, FormField, Markup};
use crate::id::{EmbedId, NodeId, PageId};
use crate::model::{StepError, StepResult};
use crate::state::{Bindings, Env, FieldErrors, Value};

/// Request data delivered with an action: query or form fields.
pub type Payload = BTreeMap<String, String>;

/// Parsed form submission.
pub type FormValues = BTreeMap<String, Value>;

/// A one-shot action. Consumed by value, so it runs at most once.
pub type Action = Box<dyn FnOnce(&mut Env, &Payload) -> Result<StepResult, StepError> + Send>;

/// A rendered page and the actions it links to.
pub struct Page {
    pub id: PageId,
    pub body: Markup,
    pub actions: BTreeMap<EmbedId, Action>,
}

impl Page {
    /// Assembles a page, dropping registered actions that the body never
    /// links to.
    pub(crate) fn assemble(
        study: &NodeId,
        body: Markup,
        mut actions: BTreeMap<EmbedId, Action>,
    ) -> Result<Self, StepError> {
        let linked: BTreeSet<EmbedId> = body.embeds().into_iter().cloned().collect();
        if let Some(orphan) = linked.iter().find(|e| !actions.contains_key(*e)) {
            return Err(StepError::OrphanEmbed(orphan.to_string()));
        }
        actions.retain(|id, _| linked.contains(id));
        Ok(Self {
            id: PageId::generate(study),
            body,
            actions,
        })
    }

    /// A page without actions ends the participant's walk.
    pub fn is_terminal(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn embed_ids(&self) -> impl Iterator<Item = &EmbedId> {
        self.actions.keys()
    }

    pub fn text_content(&self) -> String {
        self.body.text_content()
    }

    pub(crate) fn estimated_bytes(&self) -> usize {
        64 + self.id.as_str().len()
            + self.body.estimated_bytes()
            + self.actions.keys().map(|k| 48 + k.as_str().len()).sum::<usize>()
    }
}

impl fmt::Debug for Page {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Page")
            .field("id", &self.id)
            .field("body", &self.body)
            .field("actions", &self.actions.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Construction context handed to step handlers.
///
/// Widgets register their actions here. A builder created for a view page
/// has no registrar, and every widget call on it fails with
/// [`StepError::NoRegistrar`].
pub struct PageBuilder<'e> {
    env: &'e mut Env,
    study: NodeId,
    actions: Option<BTreeMap<EmbedId, Action>>,
}

impl<'e> PageBuilder<'e> {
    pub(crate) fn new(env: &'e mut Env, study: NodeId) -> Self {
        Self {
            env,
            study,
            actions: Some(BTreeMap::new()),
        }
    }

    /// A builder whose widgets all fail; used for static view pages.
    pub(crate) fn without_registrar(env: &'e mut Env, study: NodeId) -> Self {
        Self {
            env,
            study,
            actions: None,
        }
    }

    pub fn env(&self) -> &Env {
        self.env
    }

    pub fn env_mut(&mut self) -> &mut Env {
        self.env
    }

    /// Runs `body` with the parameterization extended by `bindings`. The
    /// extension is not part of any action's resume state: actions see the
    /// parameterization of their step when they are delivered.
    pub fn with_binding<R>(&mut self, bindings: Bindings, body: impl FnOnce(&mut Self) -> R) -> R {
        let saved = self.env.params().clone();
        self.env.set_params(saved.extend(bindings));
        let out = body(self);
        self.env.set_params(saved);
        out
    }

    pub(crate) fn finish(self, body: Markup) -> Result<Page, StepError> {
        Page::assemble(&self.study, body, self.actions.unwrap_or_default())
    }

    /// Registers `action` under a fresh embed id.
    pub fn register(&mut self, action: Action) -> Result<EmbedId, StepError> {
        let actions = self.actions.as_mut().ok_or(StepError::NoRegistrar)?;
        let id = EmbedId::generate(&self.study);
        actions.insert(id.clone(), action);
        Ok(id)
    }

    /// A link that yields `Continue` when followed.
    pub fn button(&mut self, label: impl Into<String>) -> Result<Markup, StepError> {
        self.button_with(label, |_| Ok(()))
    }

    /// A link that runs `action` and then yields `Continue`.
    pub fn button_with<F>(&mut self, label: impl Into<String>, action: F) -> Result<Markup, StepError>
    where
        F: FnOnce(&mut Env) -> Result<(), StepError> + Send + 'static,
    {
        self.link(label, move |env, _| {
            action(env)?;
            Ok(StepResult::Continue)
        })
    }

    /// A link whose action decides between `Retry` and `Continue`.
    pub fn link<F>(&mut self, label: impl Into<String>, action: F) -> Result<Markup, StepError>
    where
        F: FnOnce(&mut Env, &Payload) -> Result<StepResult, StepError> + Send + 'static,
    {
        let embed = self.register(Box::new(action))?;
        Ok(Markup::EmbedLink {
            embed,
            label: label.into(),
        })
    }

    /// A form posting `fields`. Invalid submissions never reach
    /// `on_submit`; the step is retried with per-field messages.
    pub fn form<F>(
        &mut self,
        fields: Vec<FormField>,
        submit_label: impl Into<String>,
        on_submit: F,
    ) -> Result<Markup, StepError>
    where
        F: FnOnce(&mut Env, FormValues) -> Result<StepResult, StepError> + Send + 'static,
    {
        let mut seen = BTreeSet::new();
        if let Some(dup) = fields.iter().find(|f| !seen.insert(f.name.as_str())) {
            return Err(StepError::Failed(format!("duplicate form field {:?}", dup.name)));
        }
        let errors = self
            .env
            .field_errors()
            .iter()
            .filter(|(k, _)| fields.iter().any(|f| &f.name == *k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let spec = fields.clone();
        let embed = self.register(Box::new(move |env: &mut Env, payload: &Payload| {
            match parse_form(&spec, payload) {
                Ok(values) => on_submit(env, values),
                Err(errors) => {
                    env.set_field_errors(errors);
                    Ok(StepResult::Retry)
                }
            }
        }))?;
        Ok(Markup::EmbedForm {
            embed,
            fields,
            submit_label: submit_label.into(),
            errors,
        })
    }
}

/// Validates `payload` against `fields`.
pub fn parse_form(fields: &[FormField], payload: &Payload) -> Result<FormValues, FieldErrors> {
    let mut values = FormValues::new();
    let mut errors = FieldErrors::new();
    for field in fields {
        let raw = payload.get(&field.name).map(|s| s.trim()).unwrap_or("");
        if raw.is_empty() {
            if field.required {
                errors.insert(field.name.clone(), "This field is required.".into());
            }
            continue;
        }
        match &field.kind {
            FieldKind::Text => {
                values.insert(field.name.clone(), Value::Text(raw.to_owned()));
            }
            FieldKind::Number => match parse_number(raw) {
                Some(v) => {
                    values.insert(field.name.clone(), v);
                }
                None => {
                    errors.insert(field.name.clone(), "Enter a number.".into());
                }
            },
            FieldKind::Choice(options) => {
                if options.iter().any(|o| o == raw) {
                    values.insert(field.name.clone(), Value::Text(raw.to_owned()));
                } else {
                    errors.insert(
                        field.name.clone(),
                        format!("Choose one of: {}.", options.join(", ")),
                    );
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(values)
    } else {
        Err(errors)
    }
}

fn parse_number(raw: &str) -> Option<Value> {
    if let Ok(i) = raw.parse::<i64>() {
        return Some(Value::Int(i));
    }
    raw.parse::<f64>()
        .ok()
        .filter(|f| f.is_finite())
        .map(Value::Float)
}
