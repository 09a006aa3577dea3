//! The canonical `.case.json` document.
//!
//! Canonical form: UTF-8, object keys sorted, two-space indentation, integer
//! numbers only, ISO-8601 calendar dates, claims/evidence sorted by id, links
//! sorted by (claim, evidence), one trailing newline.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::model::{validate_case, CaseScope, Claim, ContentDigest, Evidence, EvidenceLink, SafetyCase, ValidationReport};

/// Mirror of the on-disk document. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    pub scope: CaseScope,
    pub claims: Vec<Claim>,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
    #[serde(default)]
    pub links: Vec<EvidenceLink>,
    pub version: u64,
}

impl From<&SafetyCase> for CaseDocument {
    fn from(case: &SafetyCase) -> Self {
        let mut links = case.links.clone();
        links.sort();
        CaseDocument {
            scope: case.scope.clone(),
            claims: case.claims.values().cloned().collect(),
            evidence: case.evidence.values().cloned().collect(),
            links,
            version: case.version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("input is not valid UTF-8 (byte {0})")]
    Encoding(usize),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("case violates structural rules:\n{0}")]
    Semantic(ValidationReport),
}

/// Parses and validates a canonical case document.
pub fn parse_case(bytes: &[u8]) -> Result<SafetyCase, ParseError> {
    let doc: CaseDocument = parse_document(bytes)?;
    let case = SafetyCase::from_parts(doc.scope, doc.claims, doc.evidence, doc.links, doc.version)
        .map_err(ParseError::Semantic)?;
    let report = validate_case(&case);
    if report.is_empty() {
        Ok(case)
    } else {
        Err(ParseError::Semantic(report))
    }
}

/// Deserializes any canonical JSON document with located errors.
pub fn parse_document<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ParseError> {
    if let Err(e) = std::str::from_utf8(bytes) {
        return Err(ParseError::Encoding(e.valid_up_to()));
    }
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        located_error(path, inner)
    })?;
    de.end().map_err(|e| located_error(String::new(), e))?;
    Ok(value)
}

fn located_error(path: String, err: serde_json::Error) -> ParseError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Syntax | Category::Eof | Category::Io => {
            ParseError::Syntax { line: err.line(), column: err.column(), message: strip_position(&err.to_string()) }
        }
        Category::Data => {
            let message = strip_position(&err.to_string());
            let mut path = if path == "." { String::new() } else { path };
            // A missing field is reported against its container; name the field itself.
            if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
                path = if path.is_empty() { field.to_string() } else { format!("{path}.{field}") };
            }
            ParseError::Schema { path, message }
        }
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(idx) => msg[..idx].to_string(),
        None => msg.to_string(),
    }
}

/// Byte-deterministic canonical serialization.
pub fn serialize_case(case: &SafetyCase) -> Vec<u8> {
    let doc = CaseDocument::from(case);
    to_canonical_json(&doc).into_bytes()
}

/// Pretty canonical JSON with sorted keys and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("document types always serialize");
    let mut out = String::new();
    write_value(&v, 0, true, &mut out);
    out.push('\n');
    out
}

/// Single-line canonical JSON with sorted keys, no trailing newline. Used
/// for JSON-lines logs.
pub fn to_canonical_line<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("log records always serialize");
    let mut out = String::new();
    write_value(&v, 0, false, &mut out);
    out
}

fn write_value(v: &serde_json::Value, depth: usize, pretty: bool, out: &mut String) {
    use serde_json::Value;
    let indent = |out: &mut String, d: usize| {
        if pretty {
            out.push('\n');
            for _ in 0..d {
                out.push_str("  ");
            }
        }
    };
    match v {
        Value::Null | Value::Bool(_) | Value::Number(_) | Value::String(_) => {
            out.push_str(&serde_json::to_string(v).expect("scalar"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                write_value(item, depth + 1, pretty, out);
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                out.push_str(&serde_json::to_string(key).expect("string"));
                out.push(':');
                if pretty {
                    out.push(' ');
                }
                write_value(&map[key], depth + 1, pretty, out);
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

impl SafetyCase {
    /// SHA-256 over the canonical serialization.
    pub fn canonical_hash(&self) -> ContentDigest {
        ContentDigest(hex::encode(Sha256::digest(serialize_case(self))))
    }
}
