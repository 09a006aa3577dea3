//! File formats: the canonical JSON document and the tabular CSV layout.

pub mod canonical;
pub mod tabular;

pub use canonical::{parse_case, parse_document, serialize_case, to_canonical_json, to_canonical_line, CaseDocument, ParseError};
pub use tabular::{export_tabular, import_tabular, read_csv, write_csv, TabularError, TabularRow, HEADERS};
