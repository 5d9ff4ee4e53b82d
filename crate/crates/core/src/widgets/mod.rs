//! Page vocabulary: the markup tree, widgets that register one-shot
//! actions, and HTML rendering.

mod markup;
mod page;
mod render;

pub use markup::{html, FieldKind, FormField, Markup};
pub use page::{parse_form, Action, FormValues, Page, PageBuilder, Payload};
pub(crate) use render::render_document;
pub use render::render_html;
