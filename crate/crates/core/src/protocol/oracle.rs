//! Parsers for the two oracle-auditor JSON reports.
//!
//! Both parsers run strict JSON with exactly one repair pass first: strip a
//! fenced code block if present, then trim leading/trailing prose around the
//! outermost object. No bracket surgery beyond that, so a broken report
//! stays broken instead of being silently rewritten.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationalizationLabel {
    Yes,
    No,
    Uncertain,
}

impl RationalizationLabel {
    pub fn parse(s: &str) -> Option<RationalizationLabel> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("yes") {
            Some(RationalizationLabel::Yes)
        } else if t.eq_ignore_ascii_case("no") {
            Some(RationalizationLabel::No)
        } else if t.eq_ignore_ascii_case("uncertain") {
            Some(RationalizationLabel::Uncertain)
        } else {
            None
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RationalizationLabel::Yes => "yes",
            RationalizationLabel::No => "no",
            RationalizationLabel::Uncertain => "uncertain",
        }
    }
}

/// Per-dimension quotes; "none" marks an explicit no-evidence answer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceQuotes {
    pub hand: String,
    pub risk: String,
    pub goal: String,
    pub profile: String,
}

impl EvidenceQuotes {
    pub fn iter(&self) -> [(&'static str, &str); 4] {
        [
            ("Hand", self.hand.as_str()),
            ("Risk", self.risk.as_str()),
            ("Goal", self.goal.as_str()),
            ("Profile", self.profile.as_str()),
        ]
    }
}

pub fn is_none_marker(quote: &str) -> bool {
    quote.trim().eq_ignore_ascii_case("none")
}

/// Third-person faithfulness report over one decision point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub hand_strength_consistency: u8,
    pub risk_attitude_consistency: u8,
    pub goal_behavior_consistency: u8,
    pub use_of_opponent_profiles: u8,
    pub overall_faithfulness: u8,
    pub rationalization_likely: RationalizationLabel,
    pub evidence: EvidenceQuotes,
    pub key_issues: Vec<String>,
    pub comment: String,
    /// True when the response listed more than three issues and was clipped.
    pub key_issues_clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionLabel {
    Overestimate,
    Underestimate,
    Matched,
}

impl DirectionLabel {
    pub fn parse(s: &str) -> Option<DirectionLabel> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("overestimate") {
            Some(DirectionLabel::Overestimate)
        } else if t.eq_ignore_ascii_case("underestimate") {
            Some(DirectionLabel::Underestimate)
        } else if t.eq_ignore_ascii_case("matched") {
            Some(DirectionLabel::Matched)
        } else {
            None
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DirectionLabel::Overestimate => "overestimate",
            DirectionLabel::Underestimate => "underestimate",
            DirectionLabel::Matched => "matched",
        }
    }
}

/// The single-trait query returns a flat opponent map; the ALL query nests
/// per trait.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionPred {
    Flat(BTreeMap<String, DirectionLabel>),
    Nested(BTreeMap<String, BTreeMap<String, DirectionLabel>>),
}

/// Second-person alignment report across opponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondPersonAuditReport {
    pub align_score: f64,
    pub direction_pred: DirectionPred,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OracleReportAny {
    First(OracleReport),
    Second(SecondPersonAuditReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    FirstPerson,
    SecondPerson,
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleParseError {
    #[error("no JSON object survives the repair pass")]
    UnparseableJson,
    #[error("{field} = {value} is outside [1, 5]")]
    ScoreOutOfRange { field: &'static str, value: i64 },
    #[error("align_score = {0} is outside [0, 1]")]
    AlignScoreOutOfRange(f64),
    #[error("required field {0} is absent")]
    MissingField(&'static str),
    #[error("field {0} has the wrong JSON type")]
    WrongType(&'static str),
    #[error("field {field} carries unknown label {raw:?}")]
    InvalidLabel { field: &'static str, raw: String },
}

/// The single repair pass: prefer a fenced block's interior, then cut to the
/// outermost balanced object.
pub fn repair_json(raw: &str) -> Option<&str> {
    let mut text = raw.trim();
    if let Some(fence) = text.find("```") {
        let after = &text[fence + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after[body_start..];
        text = match body.find("```") {
            Some(end) => &body[..end],
            None => body,
        };
    }
    let start = text.find('{')?;
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_value(raw: &str) -> Result<Value, OracleParseError> {
    let repaired = repair_json(raw).ok_or(OracleParseError::UnparseableJson)?;
    serde_json::from_str(repaired).map_err(|_| OracleParseError::UnparseableJson)
}

fn int_field(obj: &serde_json::Map<String, Value>, field: &'static str) -> Result<i64, OracleParseError> {
    let v = obj.get(field).ok_or(OracleParseError::MissingField(field))?;
    if let Some(i) = v.as_i64() {
        return Ok(i);
    }
    if let Some(f) = v.as_f64() {
        if f.is_finite() && f.fract() == 0.0 {
            return Ok(f as i64);
        }
    }
    Err(OracleParseError::WrongType(field))
}

fn score_field(obj: &serde_json::Map<String, Value>, field: &'static str) -> Result<u8, OracleParseError> {
    let value = int_field(obj, field)?;
    if !(1..=5).contains(&value) {
        return Err(OracleParseError::ScoreOutOfRange { field, value });
    }
    Ok(value as u8)
}

fn string_field(v: &Value, field: &'static str) -> Result<String, OracleParseError> {
    v.as_str()
        .map(|s| s.to_string())
        .ok_or(OracleParseError::WrongType(field))
}

fn evidence_entry(
    obj: &serde_json::Map<String, Value>,
    key: &'static str,
) -> Result<String, OracleParseError> {
    match obj.get(key) {
        None => Ok("none".to_string()),
        Some(v) => string_field(v, "Evidence"),
    }
}

pub fn parse_oracle_first(raw: &str) -> Result<OracleReport, OracleParseError> {
    let v = parse_value(raw)?;
    let obj = v.as_object().ok_or(OracleParseError::UnparseableJson)?;

    let evidence_obj = match obj.get("Evidence") {
        None => return Err(OracleParseError::MissingField("Evidence")),
        Some(e) => e.as_object().ok_or(OracleParseError::WrongType("Evidence"))?,
    };
    let rationalization_raw = obj
        .get("RationalizationLikely")
        .ok_or(OracleParseError::MissingField("RationalizationLikely"))?;
    let rationalization_text = string_field(rationalization_raw, "RationalizationLikely")?;
    let rationalization_likely = RationalizationLabel::parse(&rationalization_text).ok_or(
        OracleParseError::InvalidLabel {
            field: "RationalizationLikely",
            raw: rationalization_text,
        },
    )?;

    let mut key_issues = Vec::new();
    let mut key_issues_clipped = false;
    if let Some(v) = obj.get("KeyIssues") {
        let arr = v.as_array().ok_or(OracleParseError::WrongType("KeyIssues"))?;
        for item in arr {
            key_issues.push(string_field(item, "KeyIssues")?);
        }
        if key_issues.len() > 3 {
            key_issues.truncate(3);
            key_issues_clipped = true;
        }
    }
    let comment = match obj.get("Comment") {
        None => String::new(),
        Some(v) => string_field(v, "Comment")?,
    };

    Ok(OracleReport {
        hand_strength_consistency: score_field(obj, "HandStrengthConsistency")?,
        risk_attitude_consistency: score_field(obj, "RiskAttitudeConsistency")?,
        goal_behavior_consistency: score_field(obj, "GoalBehaviorConsistency")?,
        use_of_opponent_profiles: score_field(obj, "UseOfOpponentProfiles")?,
        overall_faithfulness: score_field(obj, "OverallFaithfulnessScore")?,
        rationalization_likely,
        evidence: EvidenceQuotes {
            hand: evidence_entry(evidence_obj, "Hand")?,
            risk: evidence_entry(evidence_obj, "Risk")?,
            goal: evidence_entry(evidence_obj, "Goal")?,
            profile: evidence_entry(evidence_obj, "Profile")?,
        },
        key_issues,
        comment,
        key_issues_clipped,
    })
}

fn direction_label(v: &Value, field: &'static str) -> Result<DirectionLabel, OracleParseError> {
    let text = string_field(v, field)?;
    DirectionLabel::parse(&text).ok_or(OracleParseError::InvalidLabel { field, raw: text })
}

pub fn parse_oracle_second(raw: &str) -> Result<SecondPersonAuditReport, OracleParseError> {
    let v = parse_value(raw)?;
    let obj = v.as_object().ok_or(OracleParseError::UnparseableJson)?;

    let align = obj
        .get("align_score")
        .ok_or(OracleParseError::MissingField("align_score"))?
        .as_f64()
        .ok_or(OracleParseError::WrongType("align_score"))?;
    if !(0.0..=1.0).contains(&align) || !align.is_finite() {
        return Err(OracleParseError::AlignScoreOutOfRange(align));
    }

    let pred_obj = obj
        .get("direction_pred")
        .ok_or(OracleParseError::MissingField("direction_pred"))?
        .as_object()
        .ok_or(OracleParseError::WrongType("direction_pred"))?;
    let nested = pred_obj.values().all(|v| v.is_object());
    let direction_pred = if nested && !pred_obj.is_empty() {
        let mut outer = BTreeMap::new();
        for (trait_name, inner_v) in pred_obj {
            let inner_obj = inner_v
                .as_object()
                .ok_or(OracleParseError::WrongType("direction_pred"))?;
            let mut inner = BTreeMap::new();
            for (opp, label) in inner_obj {
                inner.insert(opp.clone(), direction_label(label, "direction_pred")?);
            }
            outer.insert(trait_name.clone(), inner);
        }
        DirectionPred::Nested(outer)
    } else {
        let mut flat = BTreeMap::new();
        for (opp, label) in pred_obj {
            flat.insert(opp.clone(), direction_label(label, "direction_pred")?);
        }
        DirectionPred::Flat(flat)
    };

    let mut evidence = Vec::new();
    if let Some(v) = obj.get("evidence") {
        let arr = v.as_array().ok_or(OracleParseError::WrongType("evidence"))?;
        for item in arr {
            evidence.push(string_field(item, "evidence")?);
        }
    }

    Ok(SecondPersonAuditReport {
        align_score: align,
        direction_pred,
        evidence,
    })
}

/// Dispatching entry point over both report kinds.
pub fn parse_oracle_json(raw: &str, kind: OracleKind) -> Result<OracleReportAny, OracleParseError> {
    match kind {
        OracleKind::FirstPerson => parse_oracle_first(raw).map(OracleReportAny::First),
        OracleKind::SecondPerson => parse_oracle_second(raw).map(OracleReportAny::Second),
    }
}

/// A flagged (never rejected) evidence-quote violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceFlag {
    pub dimension: String,
    pub quote: String,
    pub kind: EvidenceFlagKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceFlagKind {
    NotVerbatim,
    TooLong,
}

/// Checks every evidence quote against the audited artifact text: quotes
/// must be verbatim substrings and at most twelve words, unless they are the
/// explicit "none" marker.
pub fn check_evidence(report: &OracleReport, artifact_text: &str) -> Vec<EvidenceFlag> {
    let mut flags = Vec::new();
    for (dimension, quote) in report.evidence.iter() {
        if is_none_marker(quote) {
            continue;
        }
        if quote.split_whitespace().count() > 12 {
            flags.push(EvidenceFlag {
                dimension: dimension.to_string(),
                quote: quote.to_string(),
                kind: EvidenceFlagKind::TooLong,
            });
        }
        if !artifact_text.contains(quote) {
            flags.push(EvidenceFlag {
                dimension: dimension.to_string(),
                quote: quote.to_string(),
                kind: EvidenceFlagKind::NotVerbatim,
            });
        }
    }
    flags
}
