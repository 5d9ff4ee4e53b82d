use scraper::{ElementRef, Html, Node, Selector};

/// A participant page as the client sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScrapedPage {
    /// Text outside links and forms, whitespace-normalized.
    pub prose: String,
    pub actions: Vec<PageAction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageAction {
    pub label: String,
    pub url: String,
    /// Empty for links.
    pub fields: Vec<FormInput>,
    pub is_form: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormInput {
    pub name: String,
    pub kind: InputKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputKind {
    Text,
    Number,
    Choice(Vec<String>),
}

fn selector(s: &str) -> Selector {
    Selector::parse(s).expect("static selector")
}

fn text_of(el: ElementRef<'_>) -> String {
    el.text().collect::<Vec<_>>().join(" ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn collect_prose(el: ElementRef<'_>, out: &mut String) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) if matches!(e.name(), "a" | "form") => {}
            Node::Element(_) => {
                if let Some(child) = ElementRef::wrap(child) {
                    collect_prose(child, out);
                    out.push(' ');
                }
            }
            _ => {}
        }
    }
}

pub fn scrape(document: &str) -> ScrapedPage {
    let doc = Html::parse_document(document);
    let body = doc.select(&selector("body")).next();
    let mut raw = String::new();
    if let Some(body) = body {
        collect_prose(body, &mut raw);
    }
    let prose = raw.split_whitespace().collect::<Vec<_>>().join(" ");

    let mut actions = Vec::new();
    let links_and_forms = selector("a[href], form[action]");
    for el in doc.select(&links_and_forms) {
        if el.value().name() == "a" {
            actions.push(PageAction {
                label: text_of(el),
                url: el.value().attr("href").unwrap_or_default().to_owned(),
                fields: Vec::new(),
                is_form: false,
            });
        } else {
            actions.push(form_action(el));
        }
    }
    ScrapedPage { prose, actions }
}

fn form_action(form: ElementRef<'_>) -> PageAction {
    let mut fields: Vec<FormInput> = Vec::new();
    for input in form.select(&selector("input[name]")) {
        let name = input.value().attr("name").unwrap_or_default().to_owned();
        let kind = match input.value().attr("type").unwrap_or("text") {
            "number" => InputKind::Number,
            "radio" => InputKind::Choice(vec![input.value().attr("value").unwrap_or_default().to_owned()]),
            _ => InputKind::Text,
        };
        match (fields.iter_mut().find(|f| f.name == name), kind) {
            (Some(FormInput { kind: InputKind::Choice(options), .. }), InputKind::Choice(more)) => options.extend(more),
            (Some(_), _) => {}
            (None, kind) => fields.push(FormInput { name, kind }),
        }
    }
    let label = form
        .select(&selector("button"))
        .next()
        .map(text_of)
        .unwrap_or_default();
    PageAction {
        label,
        url: form.value().attr("action").unwrap_or_default().to_owned(),
        fields,
        is_form: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prose_skips_widgets() {
        let page = scrape(
            r#"<!DOCTYPE html><html><body><div><p>Hello.</p><a href="/k/x">Go</a>
<form method="post" action="/k/y"><fieldset><legend>Hand</legend>
<label><input type="radio" name="hand" value="left"> left</label>
<label><input type="radio" name="hand" value="right"> right</label></fieldset>
<input type="number" name="age"><button type="submit">Next</button></form></div></body></html>"#,
        );
        assert_eq!(page.prose, "Hello.");
        assert_eq!(page.actions.len(), 2);
        assert_eq!(page.actions[0].label, "Go");
        assert_eq!(page.actions[1].label, "Next");
        assert_eq!(
            page.actions[1].fields,
            vec![
                FormInput {
                    name: "hand".into(),
                    kind: InputKind::Choice(vec!["left".into(), "right".into()])
                },
                FormInput {
                    name: "age".into(),
                    kind: InputKind::Number
                },
            ]
        );
    }
}
