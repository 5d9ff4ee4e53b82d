use crate::id::EmbedId;
use crate::state::FieldErrors;

/// A page body: a tagged tree of elements, text, and embedded actions.
#[derive(Debug, Clone, PartialEq)]
pub enum Markup {
    Element {
        tag: &'static str,
        attrs: Vec<(String, String)>,
        children: Vec<Markup>,
    },
    Text(String),
    /// Several nodes without a wrapping element.
    Fragment(Vec<Markup>),
    /// An anchor that delivers `embed` when followed.
    EmbedLink { embed: EmbedId, label: String },
    /// A form that posts its fields to `embed`.
    EmbedForm {
        embed: EmbedId,
        fields: Vec<FormField>,
        submit_label: String,
        errors: FieldErrors,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldKind {
    Text,
    Number,
    Choice(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormField {
    pub name: String,
    pub label: String,
    pub kind: FieldKind,
    pub required: bool,
}

impl FormField {
    pub fn text(name: impl Into<String>) -> Self {
        Self::new(name, FieldKind::Text)
    }

    pub fn number(name: impl Into<String>) -> Self {
        Self::new(name, FieldKind::Number)
    }

    pub fn choice<I, S>(name: impl Into<String>, options: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(name, FieldKind::Choice(options.into_iter().map(Into::into).collect()))
    }

    fn new(name: impl Into<String>, kind: FieldKind) -> Self {
        let name = name.into();
        Self {
            label: name.clone(),
            name,
            kind,
            required: false,
        }
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl Markup {
    pub fn element(tag: &'static str, children: Vec<Markup>) -> Self {
        debug_assert!(
            !tag.is_empty() && tag.bytes().all(|b| b.is_ascii_alphanumeric()),
            "invalid tag name {tag:?}"
        );
        Markup::Element {
            tag,
            attrs: Vec::new(),
            children,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Markup::Text(s.into())
    }

    /// Adds an attribute to an element; no-op on other nodes.
    pub fn attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        if let Markup::Element { attrs, .. } = &mut self {
            attrs.push((name.into(), value.into()));
        }
        self
    }

    /// Embeds referenced anywhere in the tree, in document order.
    pub fn embeds(&self) -> Vec<&EmbedId> {
        let mut out = Vec::new();
        self.collect_embeds(&mut out);
        out
    }

    /// Embeds with their link or submit labels, in document order.
    pub fn labeled_embeds(&self) -> Vec<(&EmbedId, &str)> {
        let mut out = Vec::new();
        self.collect_labeled(&mut out);
        out
    }

    fn collect_labeled<'a>(&'a self, out: &mut Vec<(&'a EmbedId, &'a str)>) {
        match self {
            Markup::Element { children, .. } | Markup::Fragment(children) => {
                children.iter().for_each(|c| c.collect_labeled(out))
            }
            Markup::EmbedLink { embed, label } => out.push((embed, label)),
            Markup::EmbedForm { embed, submit_label, .. } => out.push((embed, submit_label)),
            Markup::Text(_) => {}
        }
    }

    fn collect_embeds<'a>(&'a self, out: &mut Vec<&'a EmbedId>) {
        match self {
            Markup::Element { children, .. } | Markup::Fragment(children) => {
                children.iter().for_each(|c| c.collect_embeds(out))
            }
            Markup::EmbedLink { embed, .. } | Markup::EmbedForm { embed, .. } => out.push(embed),
            Markup::Text(_) => {}
        }
    }

    /// Concatenated text, whitespace-normalized.
    pub fn text_content(&self) -> String {
        let mut raw = String::new();
        self.collect_text(&mut raw, true);
        raw.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    /// Like [`text_content`](Self::text_content) without link and form
    /// text.
    pub fn prose(&self) -> String {
        let mut raw = String::new();
        self.collect_text(&mut raw, false);
        raw.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn collect_text(&self, out: &mut String, widgets: bool) {
        match self {
            Markup::Text(s) => {
                out.push_str(s);
            }
            Markup::Element { children, .. } | Markup::Fragment(children) => {
                for c in children {
                    c.collect_text(out, widgets);
                    out.push(' ');
                }
            }
            Markup::EmbedLink { label, .. } if widgets => out.push_str(label),
            Markup::EmbedForm { submit_label, .. } if widgets => out.push_str(submit_label),
            Markup::EmbedLink { .. } | Markup::EmbedForm { .. } => {}
        }
    }

    pub(crate) fn estimated_bytes(&self) -> usize {
        32 + match self {
            Markup::Element { tag, attrs, children } => {
                tag.len()
                    + attrs.iter().map(|(k, v)| k.len() + v.len() + 48).sum::<usize>()
                    + children.iter().map(Markup::estimated_bytes).sum::<usize>()
            }
            Markup::Fragment(children) => children.iter().map(Markup::estimated_bytes).sum(),
            Markup::Text(s) => s.len(),
            Markup::EmbedLink { embed, label } => embed.as_str().len() + label.len(),
            Markup::EmbedForm {
                embed,
                fields,
                submit_label,
                errors,
            } => {
                embed.as_str().len()
                    + submit_label.len()
                    + fields.iter().map(|f| 64 + f.name.len() + f.label.len()).sum::<usize>()
                    + errors.iter().map(|(k, v)| k.len() + v.len()).sum::<usize>()
            }
        }
    }
}

impl From<&str> for Markup {
    fn from(value: &str) -> Self {
        Markup::Text(value.to_owned())
    }
}

impl From<String> for Markup {
    fn from(value: String) -> Self {
        Markup::Text(value)
    }
}

/// Element constructors for common tags.
pub mod html {
    use super::Markup;

    macro_rules! tags {
        ($($name:ident),*) => {$(
            pub fn $name(children: impl IntoIterator<Item = Markup>) -> Markup {
                Markup::element(stringify!($name), children.into_iter().collect())
            }
        )*};
    }

    tags!(div, section, span, ul, ol, li, strong, em);

    macro_rules! text_tags {
        ($($name:ident),*) => {$(
            pub fn $name(text: impl Into<String>) -> Markup {
                Markup::element(stringify!($name), vec![Markup::Text(text.into())])
            }
        )*};
    }

    text_tags!(h1, h2, h3, p);

    pub fn text(s: impl Into<String>) -> Markup {
        Markup::Text(s.into())
    }

    /// Groups nodes without a wrapper element.
    pub fn fragment(children: impl IntoIterator<Item = Markup>) -> Markup {
        Markup::Fragment(children.into_iter().collect())
    }
}
