use std::fmt::Write as _;

use super::{FieldKind, FormField, Markup, Page};
use crate::id::EmbedId;
use crate::state::FieldErrors;

const VOID: &[&str] = &["br", "hr", "img", "input", "meta", "link", "wbr"];

/// Renders `page` as a complete HTML5 document. Output depends only on the
/// page and `url_for`.
pub fn render_html(page: &Page, url_for: impl Fn(&EmbedId) -> String) -> Vec<u8> {
    render_document(&page.body, &url_for).into_bytes()
}

pub(crate) fn render_document(body: &Markup, url_for: &dyn Fn(&EmbedId) -> String) -> String {
    let mut out = String::with_capacity(512);
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>studyflow</title></head><body>");
    write_node(&mut out, body, url_for);
    out.push_str("</body></html>\n");
    out
}

fn write_node(out: &mut String, node: &Markup, url_for: &dyn Fn(&EmbedId) -> String) {
    match node {
        Markup::Text(s) => escape_text(out, s),
        Markup::Fragment(children) => children.iter().for_each(|c| write_node(out, c, url_for)),
        Markup::Element { tag, attrs, children } => {
            out.push('<');
            out.push_str(tag);
            for (k, v) in attrs {
                write_attr(out, k, v);
            }
            out.push('>');
            if VOID.contains(tag) {
                return;
            }
            children.iter().for_each(|c| write_node(out, c, url_for));
            let _ = write!(out, "</{tag}>");
        }
        Markup::EmbedLink { embed, label } => {
            out.push_str("<a");
            write_attr(out, "href", &url_for(embed));
            out.push('>');
            escape_text(out, label);
            out.push_str("</a>");
        }
        Markup::EmbedForm {
            embed,
            fields,
            submit_label,
            errors,
        } => write_form(out, &url_for(embed), fields, submit_label, errors),
    }
}

fn write_form(out: &mut String, action: &str, fields: &[FormField], submit: &str, errors: &FieldErrors) {
    out.push_str("<form method=\"post\"");
    write_attr(out, "action", action);
    out.push('>');
    for field in fields {
        out.push_str("<div class=\"field\">");
        match &field.kind {
            FieldKind::Text | FieldKind::Number => {
                out.push_str("<label>");
                escape_text(out, &field.label);
                out.push_str(" <input");
                let ty = if field.kind == FieldKind::Number { "number" } else { "text" };
                write_attr(out, "type", ty);
                write_attr(out, "name", &field.name);
                if field.required {
                    out.push_str(" required");
                }
                out.push_str("></label>");
            }
            FieldKind::Choice(options) => {
                out.push_str("<fieldset><legend>");
                escape_text(out, &field.label);
                out.push_str("</legend>");
                for option in options {
                    out.push_str("<label><input type=\"radio\"");
                    write_attr(out, "name", &field.name);
                    write_attr(out, "value", option);
                    if field.required {
                        out.push_str(" required");
                    }
                    out.push_str("> ");
                    escape_text(out, option);
                    out.push_str("</label>");
                }
                out.push_str("</fieldset>");
            }
        }
        if let Some(message) = errors.get(&field.name) {
            out.push_str("<span class=\"field-error\"");
            write_attr(out, "data-field", &field.name);
            out.push('>');
            escape_text(out, message);
            out.push_str("</span>");
        }
        out.push_str("</div>");
    }
    out.push_str("<button type=\"submit\">");
    escape_text(out, submit);
    out.push_str("</button></form>");
}

fn write_attr(out: &mut String, name: &str, value: &str) {
    out.push(' ');
    out.push_str(name);
    out.push_str("=\"");
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out.push('"');
}

fn escape_text(out: &mut String, text: &str) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            _ => out.push(c),
        }
    }
}
