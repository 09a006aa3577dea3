//! Seven-column tabular layout (`.case.csv`).
//!
//! Hierarchy lives in dotted claim ids: `1.2.3` is a child of `1.2`, and the
//! single one-segment id is the root. Cell conventions:
//!
//! * **Context** holds `System:`, `Application:`, `Environment:` and any
//!   number of `Assumption:` lines. The first non-empty cell defines the scope.
//! * **Evidence** holds one item per line: `[id] (kind) title <uri>`. Only the
//!   title is mandatory; a missing id becomes `E-<claim>-<n>`, a missing kind
//!   is procedural.
//! * **Limitations/Scope** holds one limitation per line.
//! * **Counter Argument + Rejection** holds blank-line separated blocks. Each
//!   block is split at the first `Rejection:` marker into defeater and
//!   rejection; an optional `Rejection evidence: a, b` tail lists evidence ids.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    traverse, validate_case, CaseScope, Claim, ClaimId, ClaimStatus, CounterArgument, Evidence, EvidenceId,
    EvidenceKind, EvidenceLink, SafetyCase, TraversalOrder, ValidationReport,
};

/// Column headers, verbatim and in order.
pub const HEADERS: [&str; 7] = [
    "Context",
    "Claim ID",
    "Claim",
    "Evidence",
    "Limitations/Scope",
    "Counter Argument + Rejection",
    "Justification Narrative",
];

const REJECTION_MARKER: &str = "Rejection:";
const REJECTION_EVIDENCE_MARKER: &str = "Rejection evidence:";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularRow {
    pub context: String,
    pub claim_id: String,
    pub claim: String,
    pub evidence: String,
    pub limitations: String,
    pub counter_arguments: String,
    pub justification_narrative: String,
}

impl TabularRow {
    fn from_record(record: &csv::StringRecord) -> Self {
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        TabularRow {
            context: get(0),
            claim_id: get(1),
            claim: get(2),
            evidence: get(3),
            limitations: get(4),
            counter_arguments: get(5),
            justification_narrative: get(6),
        }
    }

    fn cells(&self) -> [&str; 7] {
        [
            &self.context,
            &self.claim_id,
            &self.claim,
            &self.evidence,
            &self.limitations,
            &self.counter_arguments,
            &self.justification_narrative,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TabularError {
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("header row does not match; expected {expected:?}, found {found:?}")]
    BadHeader { expected: Vec<String>, found: Vec<String> },
    #[error("row {row}: expected 7 cells, found {found}")]
    RowWidth { row: usize, found: usize },
    #[error("row {row}: empty claim id")]
    EmptyClaimId { row: usize },
    #[error("row {row}: duplicate claim id `{id}`")]
    DuplicateClaimId { row: usize, id: String },
    #[error("NON_CONTIGUOUS_HIERARCHY: row {row}: claim `{id}` has no parent row `{parent}`")]
    NonContiguousHierarchy { row: usize, id: String, parent: String },
    #[error("row {row}: malformed counter-argument cell: {reason}")]
    MalformedCounterArgument { row: usize, reason: String },
    #[error("row {row}: malformed evidence cell line `{line}`")]
    MalformedEvidence { row: usize, line: String },
    #[error("no row carries a Context cell")]
    MissingContext,
    #[error("context cell lacks `{0}`")]
    MalformedContext(&'static str),
    #[error("imported case is invalid:\n{0}")]
    Invalid(ValidationReport),
}

/// Reads RFC-4180 CSV. The header row is mandatory and must match verbatim.
pub fn read_csv(bytes: &[u8]) -> Result<Vec<TabularRow>, TabularError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| TabularError::Csv(e.to_string()))?.clone();
    let found: Vec<String> = header.iter().map(str::to_string).collect();
    if found.len() != HEADERS.len() || found.iter().zip(HEADERS).any(|(a, b)| a != b) {
        return Err(TabularError::BadHeader { expected: HEADERS.iter().map(|h| h.to_string()).collect(), found });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| TabularError::Csv(e.to_string()))?;
        if rec.len() != HEADERS.len() {
            return Err(TabularError::RowWidth { row: i + 1, found: rec.len() });
        }
        rows.push(TabularRow::from_record(&rec));
    }
    Ok(rows)
}

/// Writes RFC-4180 CSV (CRLF record terminators, minimal quoting).
pub fn write_csv(rows: &[TabularRow]) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    writer.write_record(HEADERS).expect("in-memory write");
    for row in rows {
        writer.write_record(row.cells()).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
}

fn parent_path(id: &str) -> Option<&str> {
    id.rfind('.').map(|i| &id[..i])
}

fn lines(cell: &str) -> impl Iterator<Item = &str> {
    cell.lines().map(str::trim).filter(|l| !l.is_empty())
}

fn non_empty(text: &str) -> Option<String> {
    let t = text.trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn parse_scope(cell: &str) -> Result<CaseScope, TabularError> {
    let (mut system, mut application, mut environment) = (None, None, None);
    let mut assumptions = Vec::new();
    for line in lines(cell) {
        if let Some(v) = line.strip_prefix("System:") {
            system = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("Application:") {
            application = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("Environment:") {
            environment = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("Assumption:") {
            assumptions.push(v.trim().to_string());
        }
    }
    Ok(CaseScope {
        system_description: system.ok_or(TabularError::MalformedContext("System:"))?,
        application: application.ok_or(TabularError::MalformedContext("Application:"))?,
        environment: environment.ok_or(TabularError::MalformedContext("Environment:"))?,
        assumptions,
    })
}

struct EvidenceItem {
    id: Option<String>,
    kind: EvidenceKind,
    title: String,
    uri: String,
}

fn parse_evidence_line(line: &str) -> Option<EvidenceItem> {
    let mut rest = line.trim();
    let mut id = None;
    if let Some(after) = rest.strip_prefix('[') {
        let end = after.find(']')?;
        id = Some(after[..end].trim().to_string()).filter(|s| !s.is_empty());
        id.as_ref()?;
        rest = after[end + 1..].trim_start();
    }
    let mut kind = EvidenceKind::Procedural;
    for (tag, k) in [("(procedural)", EvidenceKind::Procedural), ("(implementation)", EvidenceKind::Implementation)] {
        if let Some(after) = rest.strip_prefix(tag) {
            kind = k;
            rest = after.trim_start();
        }
    }
    let mut uri = String::new();
    if rest.ends_with('>') {
        if let Some(open) = rest.rfind('<') {
            uri = rest[open + 1..rest.len() - 1].trim().to_string();
            rest = rest[..open].trim_end();
        }
    }
    let title = rest.trim().to_string();
    if title.is_empty() {
        return None;
    }
    Some(EvidenceItem { id, kind, title, uri })
}

fn parse_counter_block(block: &str, row: usize) -> Result<CounterArgument, TabularError> {
    let malformed = |reason: &str| TabularError::MalformedCounterArgument { row, reason: reason.to_string() };
    let (defeater, tail) = match block.find(REJECTION_MARKER) {
        Some(idx) => (&block[..idx], Some(&block[idx + REJECTION_MARKER.len()..])),
        None => {
            if block.contains(REJECTION_EVIDENCE_MARKER) {
                return Err(malformed("rejection evidence without a `Rejection:` marker"));
            }
            (block, None)
        }
    };
    let text = defeater.trim();
    if text.is_empty() {
        return Err(malformed("counter-argument text before `Rejection:` is empty"));
    }
    let mut rejection = None;
    let mut rejection_evidence = Vec::new();
    if let Some(tail) = tail {
        let (rej, ev) = match tail.find(REJECTION_EVIDENCE_MARKER) {
            Some(idx) => (&tail[..idx], Some(&tail[idx + REJECTION_EVIDENCE_MARKER.len()..])),
            None => (tail, None),
        };
        if rej.contains(REJECTION_MARKER) {
            return Err(malformed("more than one `Rejection:` marker in a block"));
        }
        rejection = non_empty(rej);
        if let Some(ev) = ev {
            for id in ev.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                rejection_evidence.push(EvidenceId::from(id));
            }
            if rejection_evidence.is_empty() {
                return Err(malformed("`Rejection evidence:` lists no ids"));
            }
        }
    }
    Ok(CounterArgument { text: text.to_string(), rejection, rejection_evidence })
}

fn split_blocks(cell: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in cell.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                blocks.push(cur.join("\n"));
                cur.clear();
            }
        } else {
            cur.push(line.trim());
        }
    }
    if !cur.is_empty() {
        blocks.push(cur.join("\n"));
    }
    blocks
}

/// Builds a case from rows. Evidence cells become stub records with unknown
/// ownership and no review history, created on `evidence_created`.
pub fn import_tabular(rows: &[TabularRow], evidence_created: NaiveDate) -> Result<SafetyCase, TabularError> {
    let scope_cell = rows.iter().map(|r| r.context.trim()).find(|c| !c.is_empty()).ok_or(TabularError::MissingContext)?;
    let scope = parse_scope(scope_cell)?;

    let mut known = BTreeSet::new();
    for (i, row) in rows.iter().enumerate() {
        let id = row.claim_id.trim();
        if id.is_empty() {
            return Err(TabularError::EmptyClaimId { row: i + 1 });
        }
        if !known.insert(id.to_string()) {
            return Err(TabularError::DuplicateClaimId { row: i + 1, id: id.to_string() });
        }
    }

    let mut claims: Vec<Claim> = Vec::with_capacity(rows.len());
    let mut children: BTreeMap<String, Vec<ClaimId>> = BTreeMap::new();
    let mut evidence: BTreeMap<EvidenceId, Evidence> = BTreeMap::new();
    let mut links = Vec::new();

    for (i, row) in rows.iter().enumerate() {
        let row_no = i + 1;
        let id = row.claim_id.trim().to_string();
        let parent = match parent_path(&id) {
            Some(p) if known.contains(p) => Some(ClaimId::from(p)),
            Some(p) => {
                let parent = p.to_string();
                return Err(TabularError::NonContiguousHierarchy { row: row_no, id, parent });
            }
            None => None,
        };
        if let Some(p) = &parent {
            children.entry(p.0.clone()).or_default().push(ClaimId::from(id.as_str()));
        }

        let mut n = 0;
        for line in lines(&row.evidence) {
            let item = parse_evidence_line(line)
                .ok_or_else(|| TabularError::MalformedEvidence { row: row_no, line: line.to_string() })?;
            n += 1;
            let ev_id = EvidenceId::from(item.id.unwrap_or_else(|| format!("E-{id}-{n}")));
            evidence.entry(ev_id.clone()).or_insert_with(|| {
                let mut ev = Evidence::stub(ev_id.clone(), item.title, item.kind, evidence_created);
                ev.uri = item.uri;
                ev
            });
            links.push(EvidenceLink::new(id.as_str(), ev_id));
        }

        let counter_arguments = split_blocks(&row.counter_arguments)
            .iter()
            .map(|b| parse_counter_block(b, row_no))
            .collect::<Result<Vec<_>, _>>()?;

        claims.push(Claim {
            id: ClaimId::from(id.as_str()),
            text: row.claim.trim().to_string(),
            parent,
            children: Vec::new(),
            family: None,
            poc: None,
            counter_arguments,
            limitations: lines(&row.limitations).map(str::to_string).collect(),
            justification_narrative: non_empty(&row.justification_narrative),
            status: ClaimStatus::Drafted,
        });
    }
    for claim in &mut claims {
        if let Some(kids) = children.remove(claim.id.as_str()) {
            claim.children = kids;
        }
    }

    let case = SafetyCase::from_parts(scope, claims, evidence.into_values().collect(), links, 1)
        .map_err(TabularError::Invalid)?;
    let report = validate_case(&case);
    if report.is_empty() {
        Ok(case)
    } else {
        Err(TabularError::Invalid(report))
    }
}

/// True when every id already encodes its position: the root has a single
/// segment and each child is `<parent>.<segment>`.
fn ids_are_dotted_paths(case: &SafetyCase) -> bool {
    case.claims.values().all(|c| {
        let id = c.id.as_str();
        let seg_ok = |s: &str| !s.is_empty() && !s.chars().any(|ch| ch.is_whitespace());
        match &c.parent {
            None => !id.contains('.') && seg_ok(id),
            Some(p) => id
                .strip_prefix(p.as_str())
                .and_then(|rest| rest.strip_prefix('.'))
                .is_some_and(|seg| !seg.contains('.') && seg_ok(seg)),
        }
    })
}

/// Renders a valid case as rows in pre-order. Claim ids are kept when they
/// already are dotted paths; otherwise positional ids (`1`, `1.1`, ...) are
/// assigned.
pub fn export_tabular(case: &SafetyCase) -> Vec<TabularRow> {
    let order = traverse(case, TraversalOrder::Pre).expect("export requires a valid case");
    let mut row_ids: BTreeMap<&ClaimId, String> = BTreeMap::new();
    if ids_are_dotted_paths(case) {
        for id in &order {
            row_ids.insert(id, id.0.clone());
        }
    } else {
        for id in &order {
            let claim = &case.claims[id];
            let label = match &claim.parent {
                None => "1".to_string(),
                Some(p) => {
                    let pos = case.claims[p].children.iter().position(|c| c == id).expect("consistent tree") + 1;
                    format!("{}.{pos}", row_ids[p])
                }
            };
            row_ids.insert(id, label);
        }
    }

    let context = case.scope.summary();
    order
        .iter()
        .map(|id| {
            let claim = &case.claims[id];
            let evidence = case
                .linked_evidence(id.as_str())
                .into_iter()
                .filter_map(|ev| case.evidence.get(ev))
                .map(|ev| {
                    let mut line = format!("[{}] ({}) {}", ev.id, ev.kind, ev.title);
                    if !ev.uri.is_empty() {
                        line.push_str(&format!(" <{}>", ev.uri));
                    }
                    line
                })
                .collect::<Vec<_>>()
                .join("\n");
            let counters = claim
                .counter_arguments
                .iter()
                .map(|ca| {
                    let mut block = ca.text.clone();
                    if ca.rejection.is_some() || !ca.rejection_evidence.is_empty() {
                        block.push('\n');
                        block.push_str(REJECTION_MARKER);
                        if let Some(r) = &ca.rejection {
                            block.push(' ');
                            block.push_str(r);
                        }
                    }
                    if !ca.rejection_evidence.is_empty() {
                        let ids: Vec<&str> = ca.rejection_evidence.iter().map(|e| e.as_str()).collect();
                        block.push_str(&format!("\n{REJECTION_EVIDENCE_MARKER} {}", ids.join(", ")));
                    }
                    block
                })
                .collect::<Vec<_>>()
                .join("\n\n");
            TabularRow {
                context: context.clone(),
                claim_id: row_ids[id].clone(),
                claim: claim.text.clone(),
                evidence,
                limitations: claim.limitations.join("\n"),
                counter_arguments: counters,
                justification_narrative: claim.justification_narrative.clone().unwrap_or_default(),
            }
        })
        .collect()
}
