//! Edits to cached responses that keep every untouched byte in place.
//!
//! A field path names one JSON value inside the response's JSON block:
//! `message`, `factors.0.risk`, `factors[name=Runtime].risk`. The value is
//! replaced by the JSON encoding of the replacement string, so applying the
//! same alteration twice gives the same bytes as applying it once.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::cache::CacheEntry;
use crate::llm::response::extract_json_block;
use crate::llm::CallKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alteration {
    /// A cache key, or a substring of the recorded request.
    #[serde(rename = "match")]
    pub matcher: String,
    /// Restricts the alteration to one kind of call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<CallKind>,
    pub field_path: String,
    pub replacement: String,
}

impl Alteration {
    pub fn matches(&self, entry: &CacheEntry) -> bool {
        if self.kind.is_some_and(|k| k != entry.kind) {
            return false;
        }
        entry.key.as_str() == self.matcher || entry.request_snapshot.contains(&self.matcher)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlterationError {
    #[error("invalid field path `{path}`: {reason}")]
    InvalidPath { path: String, reason: String },
    #[error("alteration target `{path}` not found in response {key}")]
    AlterationTargetMissing { path: String, key: String },
    #[error("response {key} is not valid JSON at byte {offset}")]
    MalformedResponse { key: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Field(String),
    Index(usize),
    Select { field: String, key: String, value: String },
}

fn parse_path(path: &str) -> Result<Vec<Segment>, AlterationError> {
    let invalid = |reason: &str| AlterationError::InvalidPath {
        path: path.to_string(),
        reason: reason.to_string(),
    };
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut in_bracket = false;
    for c in path.chars() {
        match c {
            '[' if !in_bracket => {
                in_bracket = true;
                current.push(c);
            }
            ']' if in_bracket => {
                in_bracket = false;
                current.push(c);
            }
            '.' if !in_bracket => parts.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    if in_bracket {
        return Err(invalid("unclosed `[`"));
    }
    parts.push(current);

    parts
        .into_iter()
        .map(|part| {
            if part.is_empty() {
                return Err(invalid("empty segment"));
            }
            if let Some(open) = part.find('[') {
                let field = &part[..open];
                let inner = part[open + 1..]
                    .strip_suffix(']')
                    .ok_or_else(|| invalid("text after `]`"))?;
                let (key, value) = inner.split_once('=').ok_or_else(|| invalid("selector needs `key=value`"))?;
                if field.is_empty() || key.is_empty() {
                    return Err(invalid("selector needs a field and a key"));
                }
                return Ok(Segment::Select {
                    field: field.to_string(),
                    key: key.to_string(),
                    value: value.to_string(),
                });
            }
            Ok(match part.parse::<usize>() {
                Ok(i) => Segment::Index(i),
                Err(_) => Segment::Field(part),
            })
        })
        .collect()
}

/// Rejects paths that rewrite their own selector key, which would stop a
/// second application from finding the target.
pub fn validate_path(path: &str) -> Result<(), AlterationError> {
    let segments = parse_path(path)?;
    for pair in segments.windows(2) {
        if let (Segment::Select { key, .. }, Segment::Field(next)) = (&pair[0], &pair[1]) {
            if key == next {
                return Err(AlterationError::InvalidPath {
                    path: path.to_string(),
                    reason: format!("cannot rewrite the selector key `{key}`"),
                });
            }
        }
    }
    Ok(())
}

/// A JSON value with its byte span in the source text.
#[derive(Debug)]
struct Node {
    span: Range<usize>,
    kind: Kind,
}

#[derive(Debug)]
enum Kind {
    Object(Vec<(String, Node)>),
    Array(Vec<Node>),
    /// Strings decoded, other scalars as written.
    Scalar(String),
}

struct Scanner<'a> {
    src: &'a str,
    pos: usize,
}

impl Scanner<'_> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start_matches([' ', '\t', '\n', '\r']).len();
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), usize> {
        self.skip_ws();
        if self.peek() != Some(b) {
            return Err(self.pos);
        }
        self.pos += 1;
        Ok(())
    }

    /// Calls `item` for each comma-separated entry until `close`.
    fn sequence(&mut self, close: u8, mut item: impl FnMut(&mut Self) -> Result<(), usize>) -> Result<(), usize> {
        self.pos += 1;
        self.skip_ws();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(());
        }
        loop {
            item(self)?;
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => return Err(self.pos),
            }
        }
    }

    fn value(&mut self) -> Result<Node, usize> {
        self.skip_ws();
        let start = self.pos;
        let kind = match self.peek().ok_or(self.pos)? {
            b'{' => {
                let mut fields = Vec::new();
                self.sequence(b'}', |s| {
                    s.skip_ws();
                    let key = s.string()?;
                    s.expect(b':')?;
                    fields.push((key, s.value()?));
                    Ok(())
                })?;
                Kind::Object(fields)
            }
            b'[' => {
                let mut items = Vec::new();
                self.sequence(b']', |s| {
                    items.push(s.value()?);
                    Ok(())
                })?;
                Kind::Array(items)
            }
            b'"' => Kind::Scalar(self.string()?),
            _ => {
                let rest = &self.src[self.pos..];
                let len = rest
                    .find(|c: char| matches!(c, ',' | '}' | ']') || c.is_whitespace())
                    .unwrap_or(rest.len());
                let token = &rest[..len];
                if len == 0 || serde_json::from_str::<serde_json::Value>(token).is_err() {
                    return Err(self.pos);
                }
                self.pos += len;
                Kind::Scalar(token.to_string())
            }
        };
        Ok(Node {
            span: start..self.pos,
            kind,
        })
    }

    fn string(&mut self) -> Result<String, usize> {
        let start = self.pos;
        if self.peek() != Some(b'"') {
            return Err(start);
        }
        let bytes = self.src.as_bytes();
        let mut i = start + 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'"' => {
                    self.pos = i + 1;
                    return serde_json::from_str(&self.src[start..self.pos]).map_err(|_| start);
                }
                _ => i += 1,
            }
        }
        Err(start)
    }
}

fn member<'n>(node: &'n Node, name: &str) -> Option<&'n Node> {
    match &node.kind {
        // Duplicate keys resolve to the last one, as serde_json does.
        Kind::Object(fields) => fields.iter().rev().find(|(k, _)| k == name).map(|(_, v)| v),
        _ => None,
    }
}

fn locate<'n>(root: &'n Node, segments: &[Segment]) -> Option<&'n Node> {
    segments.iter().try_fold(root, |node, seg| match seg {
        Segment::Field(name) => member(node, name),
        Segment::Index(i) => match &node.kind {
            Kind::Array(items) => items.get(*i),
            _ => None,
        },
        Segment::Select { field, key, value } => match &member(node, field)?.kind {
            Kind::Array(items) => items
                .iter()
                .find(|item| matches!(member(item, key), Some(Node { kind: Kind::Scalar(t), .. }) if t == value)),
            _ => None,
        },
    })
}

/// Replaces the value at `path` inside the JSON block of `response`.
pub fn alter_response(response: &str, path: &str, replacement: &str, key: &str) -> Result<String, AlterationError> {
    let segments = parse_path(path)?;
    let block = extract_json_block(response);
    let block_start = block.as_ptr() as usize - response.as_ptr() as usize;

    let mut scanner = Scanner { src: block, pos: 0 };
    let root = scanner.value().map_err(|offset| AlterationError::MalformedResponse {
        key: key.to_string(),
        offset: block_start + offset,
    })?;
    let span = locate(&root, &segments)
        .ok_or_else(|| AlterationError::AlterationTargetMissing {
            path: path.to_string(),
            key: key.to_string(),
        })?
        .span
        .clone();

    let encoded = serde_json::to_string(replacement).expect("strings serialize");
    let mut out = String::with_capacity(response.len() + encoded.len());
    out.push_str(&response[..block_start + span.start]);
    out.push_str(&encoded);
    out.push_str(&response[block_start + span.end..]);
    Ok(out)
}

/// Applies every matching alteration to the entry's response, in order.
pub fn apply_alterations(alterations: &[Alteration], entry: &CacheEntry) -> Result<String, AlterationError> {
    let mut response = entry.response.clone();
    for alt in alterations.iter().filter(|a| a.matches(entry)) {
        response = alter_response(&response, &alt.field_path, &alt.replacement, entry.key.as_str())?;
    }
    Ok(response)
}
