//! `{{name}}` placeholder substitution.
//!
//! The language is intentionally tiny: no expressions, loops, filters or
//! escaping. Whitespace inside the braces is ignored.

use std::collections::{BTreeMap, BTreeSet};

use super::AdapterError;
use crate::domain::Scalar;

enum Piece<'a> {
    Text(&'a str),
    Var(&'a str),
}

fn pieces(template: &str) -> Result<Vec<Piece<'_>>, AdapterError> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push(Piece::Text(&rest[..open]));
        let after = &rest[open + 2..];
        let close =
            after.find("}}").ok_or_else(|| AdapterError::MalformedTemplate("unterminated placeholder".into()))?;
        let name = after[..close].trim();
        let valid =
            !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'));
        if !valid {
            return Err(AdapterError::MalformedTemplate(format!("invalid placeholder name {:?}", &after[..close])));
        }
        out.push(Piece::Var(name));
        rest = &after[close + 2..];
    }
    out.push(Piece::Text(rest));
    Ok(out)
}

/// Names referenced by a template, deduplicated and sorted.
pub fn placeholders(template: &str) -> Result<BTreeSet<String>, AdapterError> {
    Ok(pieces(template)?
        .into_iter()
        .filter_map(|p| match p {
            Piece::Var(v) => Some(v.to_string()),
            Piece::Text(_) => None,
        })
        .collect())
}

/// Replaces every placeholder with its variable's display form. Unused
/// variables are ignored.
pub fn render_template(template: &str, vars: &BTreeMap<String, Scalar>) -> Result<String, AdapterError> {
    let mut out = String::with_capacity(template.len());
    for piece in pieces(template)? {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Var(name) => {
                let value = vars.get(name).ok_or_else(|| AdapterError::MissingVariable(name.to_string()))?;
                out.push_str(&value.to_string());
            }
        }
    }
    Ok(out)
}
