use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// A prompt body with `[lowercase name]` placeholders.
///
/// Only bracketed runs of lowercase ASCII letters, spaces and underscores
/// starting with a letter count as placeholders, so literal text such as
/// `[Selected action]` or `[State: ...]` passes through untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("no binding for placeholder [{0}]")]
    MissingBinding(String),
}

/// Rendered text plus the binding keys the template never used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    pub unused_bindings: Vec<String>,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            body: body.into(),
        }
    }

    /// Distinct placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (_, _, name) in scan(&self.body) {
            if seen.insert(name) {
                out.push(name.to_string());
            }
        }
        out
    }

    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        self.render_with_warnings(bindings).map(|r| r.text)
    }

    /// Substitutes every placeholder in a single pass; bound values are
    /// inserted verbatim and never rescanned.
    pub fn render_with_warnings(
        &self,
        bindings: &[(&str, &str)],
    ) -> Result<Rendered, TemplateError> {
        let lookup = |name: &str| bindings.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
        let mut text = String::with_capacity(self.body.len());
        let mut used = BTreeSet::new();
        let mut cursor = 0;
        for (start, end, name) in scan(&self.body) {
            let value =
                lookup(name).ok_or_else(|| TemplateError::MissingBinding(name.to_string()))?;
            used.insert(name);
            text.push_str(&self.body[cursor..start]);
            text.push_str(value);
            cursor = end;
        }
        text.push_str(&self.body[cursor..]);
        let unused_bindings = bindings
            .iter()
            .filter(|(k, _)| !used.contains(k))
            .map(|(k, _)| k.to_string())
            .collect();
        Ok(Rendered {
            text,
            unused_bindings,
        })
    }
}

/// Yields `(start, end, name)` byte spans of placeholders.
fn scan(body: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let bytes = body.as_bytes();
    let mut i = 0;
    core::iter::from_fn(move || {
        while i < bytes.len() {
            if bytes[i] == b'[' {
                let start = i;
                let mut j = i + 1;
                if j < bytes.len() && bytes[j].is_ascii_lowercase() {
                    while j < bytes.len()
                        && (bytes[j].is_ascii_lowercase() || bytes[j] == b' ' || bytes[j] == b'_')
                    {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j] == b']' {
                        i = j + 1;
                        return Some((start, j + 1, &body[start + 1..j]));
                    }
                }
            }
            i += 1;
        }
        None
    })
}
