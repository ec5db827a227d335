//! Append-only decision-trace persistence and audit-slice extraction.
//!
//! One newline-delimited JSON file per battle, opened with a versioned
//! header line, then one object per decision row. Rows are validated on
//! the way in (a row without a normalized action is rejected) and ordered
//! by (hand, decision index); the writer flushes on hand boundaries so a
//! crash loses at most the hand in progress. Audit records live in a
//! sibling file joined by the decision key.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{FirstPersonAudit, ReferenceDirection, RuleAuditReport, SecondPersonAudit};
use crate::beliefs::OpponentProfile;
use crate::cards::Card;
use crate::engine::{Action, CoarseAction, LegalActionSet, Street};
use crate::features::{HandStrengthBucket, ReferenceFeatures};
use crate::protocol::first_person::{ExplanationSignature, FirstPersonArtifact};
use crate::protocol::DecisionPromptContext;

pub const SCHEMA_VERSION: u32 = 1;

/// First line of every trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub config_hash: String,
    pub template_hashes: BTreeMap<String, String>,
    pub seed: u64,
}

/// Stable join key for one decision row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DecisionKey {
    pub battle_id: u32,
    pub hand_id: u32,
    pub decision_index: u32,
    pub player_id: String,
}

/// What the acting seat could see when it decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSnapshot {
    pub hole: Vec<Card>,
    pub board: Vec<Card>,
    pub pot: u64,
    /// Stack per player at decision time, before this action.
    pub stacks: BTreeMap<String, u64>,
    pub position: String,
}

/// One decision row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub key: DecisionKey,
    pub street: Street,
    pub seat_index: usize,
    pub model_name: String,
    pub observation: ObservationSnapshot,
    pub legal: LegalActionSet,
    /// The raw proposal before normalization; None when parsing yielded no
    /// usable decision.
    pub proposed: Option<Action>,
    pub normalized: Action,
    pub artifact: FirstPersonArtifact,
    pub signature: ExplanationSignature,
    /// Opponent profiles exactly as rendered into the prompt.
    pub profiles: BTreeMap<String, OpponentProfile>,
    pub features: ReferenceFeatures,
    /// The prompt inputs as rendered, so a re-query can rebuild the exact
    /// prompt and verify it against `prompt_hash` before trusting it.
    pub prompt_context: DecisionPromptContext,
    pub prompt_hash: String,
    pub template_hash: String,
    /// True when the artifact came from the fallback path rather than a
    /// clean parse.
    pub parse_fallback: bool,
    pub parse_notes: Vec<String>,
    pub latency_ms: u64,
    pub timestamp_ms: u64,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: schema violation: {message}")]
    Schema { line: usize, message: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("row key {key:?} not after {previous:?}")]
    OutOfOrder { previous: String, key: String },
    #[error("row battle_id {found} does not match this file's battle {expected}")]
    WrongBattle { found: u32, expected: u32 },
    #[error("duplicate audit for key {key} by {auditor}")]
    DuplicateAudit { key: String, auditor: String },
}

/// Run directory for (config hash, seed); short hash keeps paths readable.
pub fn run_dir(out_root: &Path, config_hash: &str, seed: u64) -> PathBuf {
    let short = &config_hash[..config_hash.len().min(12)];
    out_root.join(format!("run-{short}-s{seed}"))
}

pub fn battle_path(run_dir: &Path, battle_id: u32) -> PathBuf {
    run_dir.join(format!("battle-{battle_id:04}.jsonl"))
}

pub fn audit_path(run_dir: &Path, battle_id: u32) -> PathBuf {
    run_dir.join(format!("battle-{battle_id:04}.audits.jsonl"))
}

/// Structural checks applied to every row on write and on read. The only
/// hard requirements are the fields downstream stages join and filter on.
fn validate_row_value(v: &serde_json::Value, line: usize) -> Result<(), TraceError> {
    let obj = v.as_object().ok_or(TraceError::Schema {
        line,
        message: "row is not a JSON object".to_string(),
    })?;
    for field in [
        "key",
        "street",
        "observation",
        "legal",
        "normalized",
        "artifact",
        "signature",
        "features",
    ] {
        let missing = match obj.get(field) {
            None => true,
            Some(serde_json::Value::Null) => true,
            Some(_) => false,
        };
        if missing {
            return Err(TraceError::Schema {
                line,
                message: format!("row missing required field {field:?}"),
            });
        }
    }
    Ok(())
}

/// Single-writer appender for one battle's trace file.
pub struct TraceWriter {
    out: BufWriter<File>,
    line: usize,
    battle_id: Option<u32>,
    last: Option<(u32, u32)>,
    last_hand: Option<u32>,
}

impl TraceWriter {
    pub fn create(path: &Path, header: &TraceHeader) -> Result<TraceWriter, TraceError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, header).map_err(|e| TraceError::Json {
            line: 1,
            message: e.to_string(),
        })?;
        out.write_all(b"\n")?;
        Ok(TraceWriter {
            out,
            line: 1,
            battle_id: None,
            last: None,
            last_hand: None,
        })
    }

    pub fn append(&mut self, row: &DecisionTrace) -> Result<(), TraceError> {
        let value = serde_json::to_value(row).map_err(|e| TraceError::Json {
            line: self.line + 1,
            message: e.to_string(),
        })?;
        self.append_value(&value)
    }

    /// Appends a pre-serialized row after schema validation. Exists so the
    /// validation path is exercisable with deliberately broken rows.
    pub fn append_value(&mut self, value: &serde_json::Value) -> Result<(), TraceError> {
        let line = self.line + 1;
        validate_row_value(value, line)?;
        let key = &value["key"];
        let battle_id = key["battle_id"].as_u64().unwrap_or(u64::MAX) as u32;
        let hand_id = key["hand_id"].as_u64().unwrap_or(u64::MAX) as u32;
        let decision_index = key["decision_index"].as_u64().unwrap_or(u64::MAX) as u32;
        match self.battle_id {
            None => self.battle_id = Some(battle_id),
            Some(expected) if expected != battle_id => {
                return Err(TraceError::WrongBattle {
                    found: battle_id,
                    expected,
                });
            }
            Some(_) => {}
        }
        let next = (hand_id, decision_index);
        if let Some(last) = self.last {
            if next <= last {
                return Err(TraceError::OutOfOrder {
                    previous: format!("{last:?}"),
                    key: format!("{next:?}"),
                });
            }
        }
        // Hand boundary: make the finished hand durable before moving on.
        if self.last_hand.is_some_and(|h| h != hand_id) {
            self.out.flush()?;
        }
        serde_json::to_writer(&mut self.out, value).map_err(|e| TraceError::Json {
            line,
            message: e.to_string(),
        })?;
        self.out.write_all(b"\n")?;
        self.line = line;
        self.last = Some(next);
        self.last_hand = Some(hand_id);
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), TraceError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Reads one battle file back: header first, then validated rows.
pub fn read_trace_file(path: &Path) -> Result<(TraceHeader, Vec<DecisionTrace>), TraceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or(TraceError::MissingHeader)??;
    let header: TraceHeader =
        serde_json::from_str(&header_line).map_err(|e| TraceError::Json {
            line: 1,
            message: e.to_string(),
        })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(TraceError::SchemaVersion {
            found: header.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TraceError::Json {
                line: line_no,
                message: e.to_string(),
            })?;
        validate_row_value(&value, line_no)?;
        let row: DecisionTrace =
            serde_json::from_value(value).map_err(|e| TraceError::Schema {
                line: line_no,
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Conjunctive row filter; None fields match everything.
#[derive(Debug, Clone, Default)]
pub struct SliceFilter {
    pub street: Option<Street>,
    pub player: Option<String>,
    pub bucket: Option<HandStrengthBucket>,
    pub action: Option<CoarseAction>,
    pub high_risk: Option<bool>,
    /// Inclusive hand-id range.
    pub window: Option<(u32, u32)>,
}

/// A slice plus the counts metrics denominators are audited against.
pub struct Slice<'a> {
    pub rows: Vec<&'a DecisionTrace>,
    pub matched: usize,
    pub total: usize,
}

pub fn slice<'a>(rows: &'a [DecisionTrace], filter: &SliceFilter) -> Slice<'a> {
    let selected: Vec<&DecisionTrace> = rows
        .iter()
        .filter(|r| {
            filter.street.is_none_or(|s| r.street == s)
                && filter
                    .player
                    .as_ref()
                    .is_none_or(|p| r.key.player_id == *p)
                && filter
                    .bucket
                    .is_none_or(|b| r.features.hand_strength_bucket == b)
                && filter
                    .action
                    .is_none_or(|a| r.normalized.coarse() == a)
                && filter.high_risk.is_none_or(|h| r.features.high_risk == h)
                && filter
                    .window
                    .is_none_or(|(lo, hi)| r.key.hand_id >= lo && r.key.hand_id <= hi)
        })
        .collect();
    let matched = selected.len();
    Slice {
        rows: selected,
        matched,
        total: rows.len(),
    }
}

/// Who produced an audit record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditorId {
    Rule,
    Oracle { model: String },
}

impl AuditorId {
    fn discriminant(&self) -> String {
        match self {
            AuditorId::Rule => "rule".to_string(),
            AuditorId::Oracle { model } => format!("oracle:{model}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditPayload {
    Rule(RuleAuditReport),
    OracleFirst(FirstPersonAudit),
    OracleSecond {
        audit: SecondPersonAudit,
        reference: Vec<ReferenceDirection>,
    },
    /// The audit was attempted but produced nothing usable.
    Missing { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub key: DecisionKey,
    pub auditor: AuditorId,
    pub payload: AuditPayload,
    pub timestamp_ms: u64,
}

/// Appender for a battle's audit file. Enforces at most one rule audit per
/// row and at most one record per (row, oracle model).
pub struct AuditWriter {
    out: BufWriter<File>,
    seen: BTreeSet<(DecisionKey, String)>,
}

impl AuditWriter {
    pub fn create(path: &Path) -> Result<AuditWriter, TraceError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(AuditWriter {
            out: BufWriter::new(File::create(path)?),
            seen: BTreeSet::new(),
        })
    }

    pub fn append(&mut self, record: &AuditRecord) -> Result<(), TraceError> {
        let tag = (record.key.clone(), record.auditor.discriminant());
        if !self.seen.insert(tag) {
            return Err(TraceError::DuplicateAudit {
                key: format!("{:?}", record.key),
                auditor: record.auditor.discriminant(),
            });
        }
        serde_json::to_writer(&mut self.out, record).map_err(|e| TraceError::Json {
            line: 0,
            message: e.to_string(),
        })?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), TraceError> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_audit_file(path: &Path) -> Result<Vec<AuditRecord>, TraceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: AuditRecord =
            serde_json::from_str(&text).map_err(|e| TraceError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}
