//! Parser for [OPPONENT-PROFILE] response blocks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::{ProfileProposal, Trait};

/// One parsed profile block plus its repair flags. Out-of-range trait values
/// are clamped and flagged rather than rejected; unparsable trait lines are
/// dropped from the proposal and recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileParse {
    pub opponent_id: Option<String>,
    pub proposal: ProfileProposal,
    pub clamped_traits: Vec<Trait>,
    pub malformed_lines: Vec<String>,
    pub summary_missing: bool,
    pub rationale_missing: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileParseError {
    #[error("no [OPPONENT-PROFILE] block in the response; prior profile retained")]
    MissingBlock,
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn line_value<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let mut t = line.trim();
    if let Some(rest) = t.strip_prefix('-') {
        t = rest.trim_start();
    }
    if t.len() > label.len()
        && t[..label.len()].eq_ignore_ascii_case(label)
        && t[label.len()..].trim_start().starts_with(':')
    {
        let after = t[label.len()..].trim_start();
        Some(after[1..].trim())
    } else {
        None
    }
}

fn unquote(s: &str) -> &str {
    let t = s.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        t[1..t.len() - 1].trim()
    } else {
        t
    }
}

fn parse_block(body: &str) -> ProfileParse {
    let mut parse = ProfileParse {
        opponent_id: None,
        proposal: ProfileProposal::default(),
        clamped_traits: Vec::new(),
        malformed_lines: Vec::new(),
        summary_missing: true,
        rationale_missing: true,
    };

    for line in body.lines() {
        if let Some(v) = line_value(line, "OpponentID") {
            if parse.opponent_id.is_none() && !unquote(v).is_empty() {
                parse.opponent_id = Some(unquote(v).to_string());
            }
            continue;
        }
        if let Some(v) = line_value(line, "QualitativeSummary") {
            let text = unquote(v);
            if !text.is_empty() {
                parse.proposal.summary = Some(text.to_string());
                parse.summary_missing = false;
            }
            continue;
        }
        if let Some(v) = line_value(line, "UpdateRationale") {
            let text = unquote(v);
            if !text.is_empty() {
                parse.proposal.rationale = Some(text.to_string());
                parse.rationale_missing = false;
            }
            continue;
        }
        for t in Trait::ALL {
            if let Some(v) = line_value(line, t.prompt_name()) {
                match unquote(v).parse::<f64>() {
                    Ok(x) if x.is_finite() => {
                        let clamped = x.clamp(0.0, 1.0);
                        if clamped != x {
                            parse.clamped_traits.push(t);
                        }
                        parse.proposal.traits.entry(t).or_insert(clamped);
                    }
                    _ => parse.malformed_lines.push(line.trim().to_string()),
                }
                break;
            }
        }
    }
    parse
}

/// Extracts every [OPPONENT-PROFILE] block in the response, in order. A
/// response with no block at all is the skip signal: the caller keeps the
/// prior profile untouched.
pub fn parse_opponent_profile(raw: &str) -> Result<Vec<ProfileParse>, ProfileParseError> {
    const OPEN: &str = "[OPPONENT-PROFILE]";
    const CLOSE: &str = "[/OPPONENT-PROFILE]";
    let mut blocks = Vec::new();
    let mut cursor = 0;
    while let Some(rel) = find_ci(&raw[cursor..], OPEN) {
        let body_start = cursor + rel + OPEN.len();
        let (body_end, next_cursor) = match find_ci(&raw[body_start..], CLOSE) {
            Some(r) => (body_start + r, body_start + r + CLOSE.len()),
            None => (raw.len(), raw.len()),
        };
        blocks.push(parse_block(&raw[body_start..body_end]));
        cursor = next_cursor;
    }
    if blocks.is_empty() {
        return Err(ProfileParseError::MissingBlock);
    }
    Ok(blocks)
}
