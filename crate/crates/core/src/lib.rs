//! Continuation-style study flows over HTTP.
//!
//! A study is a tree of steps and sub-studies. Each step renders a page;
//! widgets on the page register one-shot actions. Delivering an action
//! resumes the participant's walk through the tree, and the page it came
//! from is forgotten so the browser's Back button cannot replay it.
//! Suspended walks are plain records (page, tree cursor, parameterization),
//! so only the participant's position and variables need to be stored to
//! resume after a restart.

pub mod engine;
pub mod fixtures;
pub mod http;
pub mod id;
pub mod model;
pub mod persistence;
pub mod simclient;
pub mod state;
pub mod widgets;
