//! First-person artifact parsing: the [SELF-EXPLANATION] block plus the
//! DECISION JSON, canonicalized into an explanation signature.
//!
//! The parser is total: any input yields either a typed artifact or a typed
//! error, and enum fields record MISSING/MALFORMED states explicitly instead
//! of guessing defaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Action;

/// Status of one schema field after canonicalization. Malformed entries keep
/// the offending raw token verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Claim<T> {
    Value(T),
    Missing,
    Malformed(String),
}

impl<T> Claim<T> {
    pub fn is_value(&self) -> bool {
        matches!(self, Claim::Value(_))
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Claim::Value(v) => Some(v),
            _ => None,
        }
    }
}

macro_rules! claim_enum {
    ($name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            pub fn parse(s: &str) -> Option<$name> {
                let t = s.trim();
                $(
                    if t.eq_ignore_ascii_case($token) {
                        return Some($name::$variant);
                    }
                )+
                None
            }
        }
    };
}

claim_enum!(HandStrengthClaim {
    Weak => "weak",
    Medium => "medium",
    Strong => "strong",
});

claim_enum!(RiskAttitudeClaim {
    Conservative => "conservative",
    Neutral => "neutral",
    Aggressive => "aggressive",
});

claim_enum!(MainGoalClaim {
    MinimizeLoss => "minimize_loss",
    TakeSmallEdge => "take_small_edge",
    MaximizeValue => "maximize_value",
    Bluff => "bluff",
});

claim_enum!(PerceivedRiskClaim {
    Low => "low",
    Medium => "medium",
    High => "high",
});

claim_enum!(IntendedActionTypeClaim {
    Fold => "fold",
    Check => "check",
    Call => "call",
    BetSmall => "bet_small",
    BetBig => "bet_big",
});

claim_enum!(IntendedRiskLevelClaim {
    Low => "low",
    Medium => "medium",
    High => "high",
});

/// Parsed first-person explanation plus the final decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPersonArtifact {
    pub narrative: Claim<String>,
    pub hand_strength: Claim<HandStrengthClaim>,
    pub risk_attitude: Claim<RiskAttitudeClaim>,
    pub main_goal: Claim<MainGoalClaim>,
    pub perceived_opponent_risk: Claim<PerceivedRiskClaim>,
    pub profile_influence: Claim<String>,
    pub intended_reason: Claim<String>,
    pub intended_action_type: Claim<IntendedActionTypeClaim>,
    pub intended_risk_level: Claim<IntendedRiskLevelClaim>,
    pub decision: Action,
}

impl FirstPersonArtifact {
    /// Artifact standing in for an unparseable response: every explanation
    /// field missing, decision forced by the fallback policy.
    pub fn fallback(decision: Action) -> FirstPersonArtifact {
        FirstPersonArtifact {
            narrative: Claim::Missing,
            hand_strength: Claim::Missing,
            risk_attitude: Claim::Missing,
            main_goal: Claim::Missing,
            perceived_opponent_risk: Claim::Missing,
            profile_influence: Claim::Missing,
            intended_reason: Claim::Missing,
            intended_action_type: Claim::Missing,
            intended_risk_level: Claim::Missing,
            decision,
        }
    }
}

/// One canonical status per schema field, keyed by the snake_case field
/// name. Equality ignores the raw span offsets on purpose: canonical
/// re-emission moves text around but must preserve the claims.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub struct ExplanationSignature {
    pub claims: BTreeMap<String, Claim<String>>,
    pub block_span: Option<(usize, usize)>,
    pub decision_span: Option<(usize, usize)>,
}

impl PartialEq for ExplanationSignature {
    fn eq(&self, other: &Self) -> bool {
        self.claims == other.claims
    }
}

pub const SIGNATURE_FIELDS: [&str; 10] = [
    "narrative",
    "hand_strength",
    "risk_attitude",
    "main_goal",
    "perceived_opponent_risk",
    "profile_influence",
    "intended_reason",
    "intended_action_type",
    "intended_risk_level",
    "decision",
];

fn status_text<T: Clone>(c: &Claim<T>, to_token: impl Fn(&T) -> String) -> Claim<String> {
    match c {
        Claim::Value(v) => Claim::Value(to_token(v)),
        Claim::Missing => Claim::Missing,
        Claim::Malformed(raw) => Claim::Malformed(raw.clone()),
    }
}

fn decision_token(a: Action) -> String {
    match a {
        Action::Fold => "fold".to_string(),
        Action::Check => "check".to_string(),
        Action::Call => "call".to_string(),
        Action::Raise { to } => format!("raise:{to}"),
    }
}

/// Derives the canonical signature from an artifact. Every schema field
/// appears exactly once.
pub fn signature_of(artifact: &FirstPersonArtifact) -> ExplanationSignature {
    let mut claims = BTreeMap::new();
    claims.insert(
        "narrative".to_string(),
        status_text(&artifact.narrative, |s| s.clone()),
    );
    claims.insert(
        "hand_strength".to_string(),
        status_text(&artifact.hand_strength, |v| v.token().to_string()),
    );
    claims.insert(
        "risk_attitude".to_string(),
        status_text(&artifact.risk_attitude, |v| v.token().to_string()),
    );
    claims.insert(
        "main_goal".to_string(),
        status_text(&artifact.main_goal, |v| v.token().to_string()),
    );
    claims.insert(
        "perceived_opponent_risk".to_string(),
        status_text(&artifact.perceived_opponent_risk, |v| v.token().to_string()),
    );
    claims.insert(
        "profile_influence".to_string(),
        status_text(&artifact.profile_influence, |s| s.clone()),
    );
    claims.insert(
        "intended_reason".to_string(),
        status_text(&artifact.intended_reason, |s| s.clone()),
    );
    claims.insert(
        "intended_action_type".to_string(),
        status_text(&artifact.intended_action_type, |v| v.token().to_string()),
    );
    claims.insert(
        "intended_risk_level".to_string(),
        status_text(&artifact.intended_risk_level, |v| v.token().to_string()),
    );
    claims.insert(
        "decision".to_string(),
        Claim::Value(decision_token(artifact.decision)),
    );
    ExplanationSignature {
        claims,
        block_span: None,
        decision_span: None,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FirstPersonParseError {
    #[error("no parseable DECISION JSON anywhere in the response")]
    NoDecision,
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn strip_quotes(s: &str) -> &str {
    let t = s.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

/// Extracts the value following `label:` on a line shaped like the template
/// (optional leading dash). Returns the first matching line's remainder.
fn field_line<'a>(body: &'a str, label: &str) -> Option<&'a str> {
    for line in body.lines() {
        let mut t = line.trim();
        if let Some(rest) = t.strip_prefix('-') {
            t = rest.trim_start();
        }
        if t.len() > label.len()
            && t[..label.len()].eq_ignore_ascii_case(label)
            && t[label.len()..].trim_start().starts_with(':')
        {
            let after = t[label.len()..].trim_start();
            return Some(after[1..].trim());
        }
    }
    None
}

fn text_claim(body: &str, label: &str) -> Claim<String> {
    match field_line(body, label) {
        None => Claim::Missing,
        Some(raw) => {
            let inner = strip_quotes(raw);
            if inner.trim().is_empty() {
                Claim::Missing
            } else {
                Claim::Value(inner.trim().to_string())
            }
        }
    }
}

fn enum_claim<T>(body: &str, label: &str, parse: impl Fn(&str) -> Option<T>) -> Claim<T> {
    match field_line(body, label) {
        None => Claim::Missing,
        Some(raw) => {
            let candidate = strip_quotes(raw).trim_end_matches(['.', ',']).trim();
            match parse(candidate) {
                Some(v) => Claim::Value(v),
                None => {
                    if raw.trim().is_empty() {
                        Claim::Missing
                    } else {
                        Claim::Malformed(raw.trim().to_string())
                    }
                }
            }
        }
    }
}

/// Finds the first balanced `{...}` object starting at or after `from`,
/// honoring JSON string syntax. Returns byte span.
fn balanced_object(raw: &str, from: usize) -> Option<(usize, usize)> {
    let bytes = raw.as_bytes();
    let start = (from..raw.len()).find(|&i| bytes[i] == b'{')?;
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
                    return Some((start, i + 1));
                }
            }
            _ => {}
        }
    }
    None
}

fn decision_from_json(text: &str) -> Option<Action> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    let obj = v.as_object()?;
    let action = obj.get("action")?.as_str()?.trim().to_ascii_lowercase();
    let amount = match obj.get("amount") {
        None => None,
        Some(a) => Some(number_as_u64(a)?),
    };
    match action.as_str() {
        "fold" => Some(Action::Fold),
        "check" => Some(Action::Check),
        "call" => Some(Action::Call),
        "raise" => Some(Action::Raise { to: amount? }),
        _ => None,
    }
}

fn number_as_u64(v: &serde_json::Value) -> Option<u64> {
    if let Some(u) = v.as_u64() {
        return Some(u);
    }
    if let Some(f) = v.as_f64() {
        if f.is_finite() && f >= 0.0 && f.fract() == 0.0 {
            return Some(f as u64);
        }
    }
    None
}

/// Scans for a decision object: first after any DECISION marker, then any
/// object carrying an "action" key. Returns the action and its byte span.
fn extract_decision(raw: &str, after: usize) -> Option<(Action, (usize, usize))> {
    let mut starts = Vec::new();
    let mut search = 0;
    while let Some(rel) = find_ci(&raw[search..], "DECISION") {
        let at = search + rel;
        starts.push(at);
        search = at + "DECISION".len();
    }
    starts.retain(|&s| s >= after);
    for s in starts {
        let mut from = s;
        while let Some(span) = balanced_object(raw, from) {
            if let Some(action) = decision_from_json(&raw[span.0..span.1]) {
                return Some((action, span));
            }
            from = span.0 + 1;
        }
    }
    // No usable marker: accept any JSON object that parses as a decision.
    let mut from = 0;
    while let Some(span) = balanced_object(raw, from) {
        if let Some(action) = decision_from_json(&raw[span.0..span.1]) {
            return Some((action, span));
        }
        from = span.0 + 1;
    }
    None
}

/// Parses a raw model response into the artifact and its signature. Total:
/// the only failure is the absence of any parseable DECISION.
pub fn parse_first_person(
    raw: &str,
) -> Result<(FirstPersonArtifact, ExplanationSignature), FirstPersonParseError> {
    const OPEN: &str = "[SELF-EXPLANATION]";
    const CLOSE: &str = "[/SELF-EXPLANATION]";

    let (body, block_span) = match find_ci(raw, OPEN) {
        Some(open) => {
            let body_start = open + OPEN.len();
            match find_ci(&raw[body_start..], CLOSE) {
                Some(rel) => {
                    let close = body_start + rel;
                    (&raw[body_start..close], Some((open, close + CLOSE.len())))
                }
                None => (&raw[body_start..], Some((open, raw.len()))),
            }
        }
        None => ("", None),
    };

    let block_end = block_span.map(|(_, e)| e).unwrap_or(0);
    let (decision, decision_span) =
        extract_decision(raw, block_end).ok_or(FirstPersonParseError::NoDecision)?;

    let artifact = FirstPersonArtifact {
        narrative: text_claim(body, "NaturalLanguage"),
        hand_strength: enum_claim(body, "HandStrength", HandStrengthClaim::parse),
        risk_attitude: enum_claim(body, "RiskAttitudeThisHand", RiskAttitudeClaim::parse),
        main_goal: enum_claim(body, "MainGoal", MainGoalClaim::parse),
        perceived_opponent_risk: enum_claim(
            body,
            "PerceivedOpponentRisk",
            PerceivedRiskClaim::parse,
        ),
        profile_influence: text_claim(body, "ProfileInfluence"),
        intended_reason: text_claim(body, "IntendedReason"),
        intended_action_type: enum_claim(body, "IntendedActionType", IntendedActionTypeClaim::parse),
        intended_risk_level: enum_claim(body, "IntendedRiskLevel", IntendedRiskLevelClaim::parse),
        decision,
    };
    let mut signature = signature_of(&artifact);
    signature.block_span = block_span;
    signature.decision_span = Some(decision_span);
    Ok((artifact, signature))
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

fn push_text_line(out: &mut String, dash: bool, label: &str, c: &Claim<String>, quoted: bool) {
    let prefix = if dash { "- " } else { "" };
    match c {
        Claim::Missing => {}
        Claim::Value(v) => {
            if quoted {
                out.push_str(&format!("{prefix}{label}: \"{}\"\n", one_line(v)));
            } else {
                out.push_str(&format!("{prefix}{label}: {}\n", one_line(v)));
            }
        }
        Claim::Malformed(raw) => {
            out.push_str(&format!("{prefix}{label}: {}\n", one_line(raw)));
        }
    }
}

fn push_enum_line<T: Copy>(
    out: &mut String,
    label: &str,
    c: &Claim<T>,
    token: impl Fn(T) -> &'static str,
) {
    match c {
        Claim::Missing => {}
        Claim::Value(v) => out.push_str(&format!("- {label}: {}\n", token(*v))),
        Claim::Malformed(raw) => out.push_str(&format!("- {label}: {}\n", one_line(raw))),
    }
}

/// Canonical decision JSON for an action, matching the template's DECISION
/// line shape.
pub fn decision_json(action: Action) -> String {
    let (kind, amount) = match action {
        Action::Fold => ("fold", 0),
        Action::Check => ("check", 0),
        Action::Call => ("call", 0),
        Action::Raise { to } => ("raise", to),
    };
    format!("{{\"action\": \"{kind}\", \"amount\": {amount}}}")
}

/// Re-emits an artifact in template shape. Missing fields are omitted so a
/// re-parse reproduces the exact same signature.
pub fn emit_canonical(artifact: &FirstPersonArtifact) -> String {
    let mut out = String::new();
    out.push_str("[SELF-EXPLANATION]\n");
    push_text_line(&mut out, false, "NaturalLanguage", &artifact.narrative, true);
    out.push_str("\nBeliefs:\n");
    push_enum_line(&mut out, "HandStrength", &artifact.hand_strength, |v| {
        v.token()
    });
    push_enum_line(
        &mut out,
        "RiskAttitudeThisHand",
        &artifact.risk_attitude,
        |v| v.token(),
    );
    push_enum_line(&mut out, "MainGoal", &artifact.main_goal, |v| v.token());
    push_enum_line(
        &mut out,
        "PerceivedOpponentRisk",
        &artifact.perceived_opponent_risk,
        |v| v.token(),
    );
    push_text_line(
        &mut out,
        true,
        "ProfileInfluence",
        &artifact.profile_influence,
        true,
    );
    push_text_line(
        &mut out,
        true,
        "IntendedReason",
        &artifact.intended_reason,
        true,
    );
    out.push_str("\nChosenActionSummary:\n");
    push_enum_line(
        &mut out,
        "IntendedActionType",
        &artifact.intended_action_type,
        |v| v.token(),
    );
    push_enum_line(
        &mut out,
        "IntendedRiskLevel",
        &artifact.intended_risk_level,
        |v| v.token(),
    );
    out.push_str("[/SELF-EXPLANATION]\n\nDECISION:\n");
    out.push_str(&decision_json(artifact.decision));
    out.push('\n');
    out
}
