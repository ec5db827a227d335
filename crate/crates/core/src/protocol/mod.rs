//! Prompt protocol: the four prompt templates shipped as versioned text
//! assets, placeholder rendering, and parsers for the structured responses.
//!
//! Templates are stored byte-for-byte and hashed with SHA-256; the hashes go
//! into every trace header so an audit can be traced to exact prompt bytes.
//! Rendering splices values into registered placeholder spans only, so a
//! value that happens to contain a brace token can never corrupt the
//! surrounding template text.

pub mod first_person;
pub mod oracle;
pub mod profiles;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::beliefs::{OpponentProfile, Trait};
use crate::cards::Card;
use crate::engine::{Street, TableState};
use crate::features::ReferenceFeatures;

pub const DECISION_TEMPLATE: &str = include_str!("templates/decision.txt");
pub const PROFILING_TEMPLATE: &str = include_str!("templates/profiling.txt");
pub const ORACLE_FIRST_TEMPLATE: &str = include_str!("templates/oracle_first.txt");
pub const ORACLE_SECOND_TEMPLATE: &str = include_str!("templates/oracle_second.txt");

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// SHA-256 of each template asset, keyed by template name.
pub fn template_hashes() -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("decision".into(), sha256_hex(DECISION_TEMPLATE.as_bytes()));
    m.insert("profiling".into(), sha256_hex(PROFILING_TEMPLATE.as_bytes()));
    m.insert(
        "oracle_first_person".into(),
        sha256_hex(ORACLE_FIRST_TEMPLATE.as_bytes()),
    );
    m.insert(
        "oracle_second_person".into(),
        sha256_hex(ORACLE_SECOND_TEMPLATE.as_bytes()),
    );
    m
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("placeholder {0} is not present in the template")]
    PlaceholderNotInTemplate(String),
}

/// Replaces each registered placeholder occurrence in `template` with its
/// value. Spans are located in the template itself, never in already
/// substituted values.
pub fn substitute(template: &str, pairs: &[(&str, String)]) -> Result<String, RenderError> {
    let mut spans: Vec<(usize, usize, &str)> = Vec::new();
    for (token, value) in pairs {
        let mut search = 0;
        let mut found = false;
        while let Some(rel) = template[search..].find(token) {
            let start = search + rel;
            spans.push((start, start + token.len(), value.as_str()));
            search = start + token.len();
            found = true;
        }
        if !found {
            return Err(RenderError::PlaceholderNotInTemplate((*token).to_string()));
        }
    }
    spans.sort_by_key(|s| s.0);
    let mut out = String::with_capacity(template.len());
    let mut cursor = 0;
    for (start, end, value) in spans {
        out.push_str(&template[cursor..start]);
        out.push_str(value);
        cursor = end;
    }
    out.push_str(&template[cursor..]);
    Ok(out)
}

fn or_none(text: &str) -> String {
    if text.trim().is_empty() {
        "none".to_string()
    } else {
        text.to_string()
    }
}

/// Everything the first-person decision prompt needs. Text sections arrive
/// preformatted; empty ones render as an explicit "none" line. Serialized
/// into the trace so re-query stages can rebuild the prompt byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPromptContext {
    pub hole_cards: String,
    pub community_cards: String,
    pub street: String,
    pub pot_size: u64,
    pub call_amount: u64,
    pub min_raise: u64,
    pub max_raise: u64,
    pub pot_odds: f64,
    pub position_text: String,
    pub opponent_actions_text: String,
    pub opponent_profiles_text: String,
}

pub fn render_decision_prompt(ctx: &DecisionPromptContext) -> Result<String, RenderError> {
    substitute(
        DECISION_TEMPLATE,
        &[
            ("{hole_cards}", or_none(&ctx.hole_cards)),
            ("{community_cards}", or_none(&ctx.community_cards)),
            ("{street}", ctx.street.clone()),
            ("{pot_size}", ctx.pot_size.to_string()),
            ("{call_amount}", ctx.call_amount.to_string()),
            ("{min_raise}", ctx.min_raise.to_string()),
            ("{max_raise}", ctx.max_raise.to_string()),
            ("{pot_odds:.2f}", format!("{:.2}", ctx.pot_odds)),
            ("{position_text}", ctx.position_text.clone()),
            (
                "{opponent_actions_text}",
                or_none(&ctx.opponent_actions_text),
            ),
            (
                "{opponent_profiles_text}",
                or_none(&ctx.opponent_profiles_text),
            ),
        ],
    )
}

pub fn render_profiling_prompt(summary_text: &str) -> Result<String, RenderError> {
    substitute(
        PROFILING_TEMPLATE,
        &[("{summary_text}", or_none(summary_text))],
    )
}

/// Inputs for the third-person oracle prompt over one decision point.
#[derive(Debug, Clone)]
pub struct OracleFirstContext {
    pub player: String,
    pub round: String,
    pub street: String,
    pub hole_cards: String,
    pub board_cards: String,
    pub pot_size: u64,
    pub call_amount: u64,
    pub min_raise: u64,
    pub max_raise: u64,
    pub position_info: String,
    pub opp_actions: String,
    pub hand_strength: f64,
    pub hs_bucket: String,
    pub pot_odds: f64,
    pub risk_text: String,
    pub self_reasoning: String,
    pub profiles_text: String,
    pub action_text: String,
}

pub fn render_oracle_first_prompt(ctx: &OracleFirstContext) -> Result<String, RenderError> {
    substitute(
        ORACLE_FIRST_TEMPLATE,
        &[
            ("{sample.get(\"player\")}", ctx.player.clone()),
            ("{sample.get(\"round\")}", ctx.round.clone()),
            ("{sample.get(\"street\")}", ctx.street.clone()),
            ("{hole_cards_str}", or_none(&ctx.hole_cards)),
            ("{board_cards_str}", or_none(&ctx.board_cards)),
            ("{pot_size}", ctx.pot_size.to_string()),
            ("{call_amount}", ctx.call_amount.to_string()),
            ("{min_raise}", ctx.min_raise.to_string()),
            ("{max_raise}", ctx.max_raise.to_string()),
            ("{position_info_str}", or_none(&ctx.position_info)),
            ("{opp_actions_str}", or_none(&ctx.opp_actions)),
            ("{hs_str}", format!("{:.3}", ctx.hand_strength)),
            ("{hs_bucket}", ctx.hs_bucket.clone()),
            ("{pot_odds_str}", format!("{:.2}", ctx.pot_odds)),
            ("{risk_str}", or_none(&ctx.risk_text)),
            ("{self_reasoning}", ctx.self_reasoning.clone()),
            ("{profiles_str}", or_none(&ctx.profiles_text)),
            ("{action_str}", ctx.action_text.clone()),
        ],
    )
}

/// The second-person oracle template carries no placeholders; the evidence
/// tables are appended after it as a data section.
pub fn render_oracle_second_prompt(data_section: &str) -> String {
    let mut out = String::with_capacity(ORACLE_SECOND_TEMPLATE.len() + data_section.len() + 2);
    out.push_str(ORACLE_SECOND_TEMPLATE);
    out.push('\n');
    out.push_str(data_section);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

/// "Ah Kd Qs" style card list, or empty for an empty slice.
pub fn cards_text(cards: &[Card]) -> String {
    cards
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One line per opponent action so far in this hand, oldest first.
pub fn opponent_actions_text(table: &TableState, focal_seat: usize) -> String {
    let mut lines = Vec::new();
    for entry in &table.history {
        if entry.seat == focal_seat {
            continue;
        }
        let who = &table.seats[entry.seat].player_id;
        lines.push(format!(
            "- {} ({}): {}",
            who,
            entry.street.label(),
            action_phrase(entry.action, entry.paid)
        ));
    }
    lines.join("\n")
}

fn action_phrase(action: crate::engine::Action, paid: u64) -> String {
    match action {
        crate::engine::Action::Fold => "FOLD".to_string(),
        crate::engine::Action::Check => "CHECK".to_string(),
        crate::engine::Action::Call if paid == 0 => "CHECK".to_string(),
        crate::engine::Action::Call => format!("CALL {paid}"),
        crate::engine::Action::Raise { to } => format!("RAISE to {to}"),
    }
}

/// One line per opponent profile, with all five trait numbers visible so an
/// intervention on a rendered value is observable by the agent.
pub fn opponent_profiles_text(profiles: &[&OpponentProfile]) -> String {
    let mut lines = Vec::new();
    for p in profiles {
        let traits = Trait::ALL
            .iter()
            .map(|t| format!("{}: {:.2}", t.prompt_name(), p.traits.get(*t)))
            .collect::<Vec<_>>()
            .join(", ");
        let style = if p.summary.trim().is_empty() {
            "no read yet".to_string()
        } else {
            p.summary.trim().to_string()
        };
        lines.push(format!("- {}: {}. Style: {}", p.opponent_id, traits, style));
    }
    lines.join("\n")
}

/// The [RISK-FEATURES] section body for the oracle prompt.
pub fn risk_features_text(f: &ReferenceFeatures) -> String {
    let fmt_opt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.3}"),
        None => "n/a".to_string(),
    };
    format!(
        "raise_over_pot: {}\nraise_over_stack: {}\nspr: {}\nhigh_risk: {}",
        fmt_opt(f.raise_over_pot),
        fmt_opt(f.raise_over_stack),
        fmt_opt(f.spr),
        f.high_risk
    )
}

/// Seat and stack context for the prompt's position line.
pub fn position_text(table: &TableState, focal_seat: usize) -> String {
    let n = table.seats.len();
    let rel = (focal_seat + n - table.button) % n;
    let label = match (n, rel) {
        (2, 0) => "button/small blind",
        (2, 1) => "big blind",
        (_, 0) => "button",
        (_, 1) => "small blind",
        (_, 2) => "big blind",
        _ => "middle position",
    };
    let stacks = table
        .seats
        .iter()
        .map(|s| format!("{}: {}", s.player_id, s.stack))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "Your position: {} (seat {} of {}). Stacks: {}",
        label, focal_seat, n, stacks
    )
}

/// Street name as it appears in prompts.
pub fn street_text(street: Street) -> String {
    street.label().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::TraitVector;

    fn sentinel_decision_ctx() -> DecisionPromptContext {
        DecisionPromptContext {
            hole_cards: "@HOLE@".into(),
            community_cards: "@BOARD@".into(),
            street: "@STREET@".into(),
            pot_size: 111,
            call_amount: 222,
            min_raise: 333,
            max_raise: 444,
            pot_odds: 0.3333,
            position_text: "@POS@".into(),
            opponent_actions_text: "@ACTS@".into(),
            opponent_profiles_text: "@PROFS@".into(),
        }
    }

    #[test]
    fn template_hashes_are_stable_sha256() {
        let h = template_hashes();
        assert_eq!(h.len(), 4);
        for v in h.values() {
            assert_eq!(v.len(), 64);
        }
        assert_eq!(
            h["decision"],
            sha256_hex(DECISION_TEMPLATE.as_bytes()),
            "hash must cover the shipped bytes"
        );
    }

    #[test]
    fn decision_template_carries_expected_placeholders_and_literals() {
        for token in [
            "{hole_cards}",
            "{community_cards}",
            "{street}",
            "{pot_size}",
            "{call_amount}",
            "{min_raise}",
            "{max_raise}",
            "{pot_odds:.2f}",
            "{position_text}",
            "{opponent_actions_text}",
            "{opponent_profiles_text}",
        ] {
            assert!(DECISION_TEMPLATE.contains(token), "missing {token}");
        }
        // Literal brace groups stay untouched by rendering.
        assert!(DECISION_TEMPLATE.contains("{weak / medium / strong}"));
        assert!(DECISION_TEMPLATE.contains("{\"action\": \"...\", \"amount\": ...}"));
        assert!(DECISION_TEMPLATE.contains("CHECK is allowed only when call_amount == 0"));
    }

    #[test]
    fn rendered_prompt_differs_only_at_placeholder_spans() {
        let rendered = render_decision_prompt(&sentinel_decision_ctx()).unwrap();
        // Rebuild the template by undoing each sentinel substitution.
        let mut back = rendered.clone();
        for (sentinel, token) in [
            ("@HOLE@", "{hole_cards}"),
            ("@BOARD@", "{community_cards}"),
            ("@STREET@", "{street}"),
            ("111", "{pot_size}"),
            ("222", "{call_amount}"),
            ("333", "{min_raise}"),
            ("444", "{max_raise}"),
            ("0.33", "{pot_odds:.2f}"),
            ("@POS@", "{position_text}"),
            ("@ACTS@", "{opponent_actions_text}"),
            ("@PROFS@", "{opponent_profiles_text}"),
        ] {
            assert!(back.contains(sentinel), "sentinel {sentinel} not rendered");
            back = back.replacen(sentinel, token, 1);
        }
        assert_eq!(back, DECISION_TEMPLATE);
    }

    #[test]
    fn pot_odds_renders_to_two_decimals() {
        let rendered = render_decision_prompt(&sentinel_decision_ctx()).unwrap();
        assert!(rendered.contains("Pot odds (0-1): 0.33"));
    }

    #[test]
    fn empty_sections_render_as_none_lines() {
        let mut ctx = sentinel_decision_ctx();
        ctx.opponent_actions_text = String::new();
        ctx.opponent_profiles_text = "  ".into();
        ctx.community_cards = String::new();
        let rendered = render_decision_prompt(&ctx).unwrap();
        assert!(rendered.contains("Recent opponent actions this hand:\nnone"));
        assert!(rendered.contains("Opponent profiling information (long-term tendencies):\nnone"));
        assert!(rendered.contains("- Community cards: none"));
    }

    #[test]
    fn substitute_rejects_unknown_tokens() {
        let err = substitute("abc {x} def", &[("{y}", "1".into())]).unwrap_err();
        assert_eq!(err, RenderError::PlaceholderNotInTemplate("{y}".into()));
    }

    #[test]
    fn values_containing_brace_tokens_do_not_cascade() {
        let out = substitute(
            "A {x} B {y} C",
            &[("{x}", "{y}".into()), ("{y}", "2".into())],
        )
        .unwrap();
        assert_eq!(out, "A {y} B 2 C");
    }

    #[test]
    fn oracle_first_render_fills_all_eighteen_spans() {
        let ctx = OracleFirstContext {
            player: "p0".into(),
            round: "b0/h3".into(),
            street: "flop".into(),
            hole_cards: "Ah Kd".into(),
            board_cards: "2c 7d 9s".into(),
            pot_size: 60,
            call_amount: 20,
            min_raise: 40,
            max_raise: 990,
            position_info: "seat 0".into(),
            opp_actions: "- v (flop): RAISE to 20".into(),
            hand_strength: 0.4218,
            hs_bucket: "medium".into(),
            pot_odds: 0.25,
            risk_text: "raise_over_pot: n/a".into(),
            self_reasoning: "[SELF-EXPLANATION]\nx\n[/SELF-EXPLANATION]".into(),
            profiles_text: "- v: ...".into(),
            action_text: "{\"action\": \"call\", \"amount\": 20}".into(),
        };
        let out = render_oracle_first_prompt(&ctx).unwrap();
        assert!(!out.contains("{sample.get("));
        assert!(out.contains("Player: p0"));
        assert!(out.contains("- EnvHandStrength (0-1): 0.422"));
        assert!(out.contains("PotOdds: 0.25"));
        // The example JSON double braces are template bytes, not placeholders.
        assert!(out.contains("{{\n  \"HandStrengthConsistency\": 1,"));
        assert!(out.contains("ActualAction: {\"action\": \"call\", \"amount\": 20}"));
    }

    #[test]
    fn second_person_prompt_is_template_plus_data() {
        let out = render_oracle_second_prompt("TRAIT: ALL\nOpponent: x");
        assert!(out.starts_with(ORACLE_SECOND_TEMPLATE));
        assert!(out.ends_with("TRAIT: ALL\nOpponent: x\n"));
    }

    #[test]
    fn profile_lines_expose_all_five_trait_numbers() {
        let p = OpponentProfile {
            opponent_id: "maniac".into(),
            traits: TraitVector::uniform(0.5),
            summary: "wild".into(),
            rationale: String::new(),
            updated_at_hand: 0,
            history: Vec::new(),
        };
        let text = opponent_profiles_text(&[&p]);
        assert!(text.contains("RiskTolerance: 0.50"));
        assert!(text.contains("ShowdownPropensity: 0.50"));
        assert!(text.contains("Style: wild"));
    }
}
