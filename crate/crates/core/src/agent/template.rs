//! `{{name}}` prompt templates.

use std::collections::BTreeSet;

use indexmap::IndexMap;

use super::AgentError;

/// Placeholder values keyed by name.
pub type Bindings = IndexMap<String, String>;

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits a template into literal text and placeholder names.
fn pieces(template: &str) -> Vec<Result<&str, &str>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) if is_name(&after[..close]) => {
                if open > 0 {
                    out.push(Ok(&rest[..open]));
                }
                out.push(Err(&after[..close]));
                rest = &after[close + 2..];
            }
            _ => {
                out.push(Ok(&rest[..open + 2]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push(Ok(rest));
    }
    out
}

/// Placeholder names in order of first appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    pieces(template)
        .into_iter()
        .filter_map(Result::err)
        .filter(|n| seen.insert(*n))
        .map(str::to_string)
        .collect()
}

/// Substitutes every placeholder in one pass; substituted values are not
/// scanned again.
pub fn render_template(template: &str, bindings: &Bindings) -> Result<String, AgentError> {
    let mut out = String::with_capacity(template.len());
    for piece in pieces(template) {
        match piece {
            Ok(text) => out.push_str(text),
            Err(name) => match bindings.get(name) {
                Some(v) => out.push_str(v),
                None => return Err(AgentError::UnboundPlaceholder(name.to_string())),
            },
        }
    }
    Ok(out)
}

/// Placeholders not written as `<name>{{name}}</name>`. Only wrapped
/// placeholders can be recovered from a logged prompt.
pub fn unwrapped_placeholders(template: &str) -> Vec<String> {
    placeholders(template)
        .into_iter()
        .filter(|n| {
            let wrapped = format!("<{n}>{{{{{n}}}}}</{n}>");
            template.matches(&format!("{{{{{n}}}}}")).count() != template.matches(&wrapped).count()
        })
        .collect()
}
