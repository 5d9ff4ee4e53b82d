//! Positioning within the study tree.
//!
//! A session's position is a [`Path`]. Moving means re-locating nodes from
//! the root each time; the walk keeps no stack of its own, so the resume
//! state is never larger than one path.

use std::mem;
use std::sync::Arc;

use super::session::{SessionState, Suspension};
use crate::model::{resolve_next, validate_study, Diagnostic, DynamicStudy, ModelError, StepError, Study, StudyNode, Target};
use crate::state::{Draws, Env, Parameterization, Path};
use crate::widgets::PageBuilder;

/// Moves allowed in one settle before the walk is declared runaway: a
/// dynamic transition can cycle through empty sub-studies forever.
const MAX_MOVES: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub(crate) enum WalkError {
    #[error("position {0} does not exist in the study")]
    Stale(Path),
    #[error("dynamic study at {path} is invalid: {reason}")]
    InvalidDynamic { path: Path, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("walk did not settle within {MAX_MOVES} moves")]
    Runaway,
}

pub(crate) enum Located {
    Step {
        parent: Arc<Study>,
        index: usize,
        params: Parameterization,
    },
    /// `params` includes the study's own bindings.
    Study {
        study: Arc<Study>,
        params: Parameterization,
    },
}

pub(crate) enum Settled {
    Step {
        path: Path,
        parent: Arc<Study>,
        index: usize,
        params: Parameterization,
    },
    /// The root study ran out of nodes.
    Exhausted,
}

#[derive(Clone, Copy)]
pub(crate) enum Mode {
    /// Descend into the node at the path until a step is reached.
    Enter,
    /// The node at the path finished; take its transition.
    Advance,
}

/// Runs `f` with an [`Env`] built from the session's state at `path`.
pub(crate) fn with_env<R>(
    st: &mut SessionState,
    path: &Path,
    params: &Parameterization,
    f: impl FnOnce(&mut Env) -> R,
) -> R {
    let vars = mem::take(&mut st.vars);
    let draws = mem::replace(&mut st.draws, Draws::seeded(0));
    let mut env = Env::new(st.participant.clone(), path.clone(), params.clone(), vars).with_draws(draws);
    env.set_field_errors(mem::take(&mut st.field_errors));
    let out = f(&mut env);
    let (vars, draws, errors) = env.into_parts();
    st.vars = vars;
    st.draws = draws;
    st.field_errors = errors;
    out
}

fn resolve_dynamic(
    st: &mut SessionState,
    path: &Path,
    dynamic: &DynamicStudy,
    params: &Parameterization,
) -> Result<Arc<Study>, WalkError> {
    if let Some(study) = st.resolved.get(path) {
        return Ok(study.clone());
    }
    let factory = dynamic.factory.clone();
    let study = with_env(st, path, params, |env| factory(env));
    if study.id != dynamic.id {
        return Err(WalkError::InvalidDynamic {
            path: path.clone(),
            reason: format!("factory produced study {} instead of {}", study.id, dynamic.id),
        });
    }
    let diagnostics: Vec<Diagnostic> = validate_study(&study);
    if !diagnostics.is_empty() {
        let reason = diagnostics
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        return Err(WalkError::InvalidDynamic {
            path: path.clone(),
            reason,
        });
    }
    let study = Arc::new(study);
    st.resolved.insert(path.clone(), study.clone());
    Ok(study)
}

pub(crate) fn locate(st: &mut SessionState, path: &Path) -> Result<Located, WalkError> {
    let segments = path.segments();
    let root = st.study.clone();
    if segments.first() != Some(&root.id) {
        return Err(WalkError::Stale(path.clone()));
    }
    let mut params = Parameterization::empty().extend(root.bindings.clone());
    let mut study = root;
    for (i, segment) in segments.iter().enumerate().skip(1) {
        let index = study
            .position(segment.as_str())
            .ok_or_else(|| WalkError::Stale(path.clone()))?;
        let last = i + 1 == segments.len();
        let child = study.children[index].clone();
        match child {
            StudyNode::Step(_) if last => {
                return Ok(Located::Step {
                    parent: study,
                    index,
                    params,
                })
            }
            StudyNode::Step(_) => return Err(WalkError::Stale(path.clone())),
            StudyNode::Study(sub) => {
                params = params.extend(sub.bindings.clone());
                study = sub;
            }
            StudyNode::Dynamic(dynamic) => {
                let prefix: Path = segments[..=i].iter().cloned().collect();
                let sub = resolve_dynamic(st, &prefix, &dynamic, &params)?;
                params = params.extend(sub.bindings.clone());
                study = sub;
            }
        }
    }
    Ok(Located::Study { study, params })
}

pub(crate) fn settle(st: &mut SessionState, mut path: Path, mut mode: Mode) -> Result<(Path, Settled), WalkError> {
    for _ in 0..MAX_MOVES {
        match mode {
            Mode::Enter => match locate(st, &path)? {
                Located::Step { parent, index, params } => {
                    return Ok((
                        path.clone(),
                        Settled::Step {
                            path,
                            parent,
                            index,
                            params,
                        },
                    ))
                }
                Located::Study { study, .. } => match &study.entry {
                    Some(entry) => path.push(entry.clone()),
                    None => mode = Mode::Advance,
                },
            },
            Mode::Advance => {
                if path.len() <= 1 {
                    return Ok((path, Settled::Exhausted));
                }
                let parent_path = path.parent().expect("path has at least two segments");
                let Located::Study { study: parent, params } = locate(st, &parent_path)? else {
                    return Err(WalkError::Stale(parent_path));
                };
                let current = path.last().expect("non-empty").clone();
                let target = with_env(st, &path, &params, |env| resolve_next(&parent, &current, env))?;
                match target {
                    Target::Node(next) => {
                        path.set_last(next);
                        mode = Mode::Enter;
                    }
                    Target::End => {
                        path.pop();
                    }
                }
            }
        }
    }
    Err(WalkError::Runaway)
}

pub(crate) fn render_step(
    st: &mut SessionState,
    path: &Path,
    parent: &Study,
    index: usize,
    params: Parameterization,
) -> Result<Suspension, StepError> {
    let StudyNode::Step(step) = &parent.children[index] else {
        unreachable!("settled on a non-step node");
    };
    let handler = step.handler.clone();
    let study_id = st.study.id.clone();
    let page = with_env(st, path, &params, |env| {
        let mut builder = PageBuilder::new(env, study_id);
        let body = handler(&mut builder)?;
        builder.finish(body)
    });
    // Form messages are shown once.
    st.field_errors.clear();
    Ok(Suspension::new(page?, path.clone(), params))
}
