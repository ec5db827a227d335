//! Builtin offline backend: a deterministic stand-in for every model role.
//!
//! Offline runs need something on the other end of the prompt protocol that
//! exercises the whole pipeline without a network. The house backend answers
//! every role with a pure function of the prompt bytes: the same prompt
//! always gets the same response, so replays and re-queries are exact. The
//! decision policy reads the numbers the prompt exposes (pot odds, rendered
//! opponent traits) so that interventions on rendered profile values are
//! visible in behavior, and the profiling policy proposes the same
//! normalizers the archetype ground-truth mapping uses, so profiles drift
//! toward the truth over a battle.

use sha2::{Digest, Sha256};

use crate::client::{ClientError, Completion, ModelBackend, Role};

pub struct HouseBackend {
    name: String,
}

impl HouseBackend {
    pub fn new(name: impl Into<String>) -> HouseBackend {
        HouseBackend { name: name.into() }
    }
}

impl ModelBackend for HouseBackend {
    fn complete(&self, role: Role, prompt: &str) -> Result<Completion, ClientError> {
        let text = match role {
            Role::Decision => decide(prompt),
            Role::Profiling => profile(prompt),
            Role::OracleFirstPerson => oracle_first(prompt),
            Role::OracleSecondPerson => oracle_second(prompt),
        };
        Ok(Completion {
            text,
            latency_ms: 0,
            prompt_tokens: None,
            completion_tokens: None,
            retries: 0,
        })
    }

    fn model_name(&self) -> &str {
        &self.name
    }
}

/// Unit-interval stream derived from the prompt digest; lane picks one of
/// several independent values.
fn hash_unit(prompt: &str, lane: u8) -> f64 {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.update([lane]);
    let d = h.finalize();
    let mut v = 0u64;
    for b in &d[..8] {
        v = (v << 8) | *b as u64;
    }
    (v >> 11) as f64 / (1u64 << 53) as f64
}

/// Value after the first line that starts with `label` (after trimming).
fn line_after<'a>(text: &'a str, label: &str) -> Option<&'a str> {
    text.lines()
        .map(str::trim_start)
        .find_map(|l| l.strip_prefix(label))
        .map(str::trim)
}

fn num_after(text: &str, label: &str) -> Option<f64> {
    let rest = line_after(text, label)?;
    let token: String = rest
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.' || *c == '-')
        .collect();
    token.parse().ok()
}

/// Mean of every `Aggressiveness: x.xx` occurrence in the rendered profile
/// lines; the hook that makes profile interventions behaviorally visible.
fn mean_trait(prompt: &str, label: &str) -> Option<f64> {
    let needle = format!("{label}: ");
    let mut values = Vec::new();
    let mut cursor = 0;
    while let Some(pos) = prompt[cursor..].find(&needle) {
        let start = cursor + pos + needle.len();
        let token: String = prompt[start..]
            .chars()
            .take_while(|c| c.is_ascii_digit() || *c == '.')
            .collect();
        if let Ok(v) = token.parse::<f64>() {
            values.push(v);
        }
        cursor = start;
    }
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn decide(prompt: &str) -> String {
    let call = num_after(prompt, "- Call amount: ").unwrap_or(0.0) as u64;
    let pot = num_after(prompt, "- Pot size: ").unwrap_or(0.0) as u64;
    let min_raise = num_after(prompt, "- Minimum raise: ").unwrap_or(0.0) as u64;
    let max_raise = num_after(prompt, "- Maximum raise: ").unwrap_or(0.0) as u64;
    let pot_odds = num_after(prompt, "- Pot odds (0-1): ").unwrap_or(0.0);
    let avg_aggr = mean_trait(prompt, "Aggressiveness").unwrap_or(0.5);

    let r = hash_unit(prompt, 0);
    let raise_available = max_raise >= min_raise && min_raise > 0;
    // Against a table read as aggressive, prices must be better before a
    // call and free cards are taken more often.
    let accept = 0.42 - 0.20 * (avg_aggr - 0.5);
    let raise_to = (min_raise + pot / 2).clamp(min_raise, max_raise.max(min_raise));

    let action = if call == 0 {
        let bet_rate = 0.30 - 0.20 * (avg_aggr - 0.5);
        if raise_available && r < bet_rate {
            format!("{{\"action\": \"raise\", \"amount\": {raise_to}}}")
        } else {
            "{\"action\": \"check\"}".to_string()
        }
    } else if pot_odds <= accept * 0.45 {
        if raise_available && r < 0.35 {
            format!("{{\"action\": \"raise\", \"amount\": {raise_to}}}")
        } else {
            "{\"action\": \"call\"}".to_string()
        }
    } else if pot_odds <= accept {
        if raise_available && r < 0.10 {
            format!("{{\"action\": \"raise\", \"amount\": {raise_to}}}")
        } else {
            "{\"action\": \"call\"}".to_string()
        }
    } else if r < 0.85 {
        "{\"action\": \"fold\"}".to_string()
    } else {
        "{\"action\": \"call\"}".to_string()
    };

    let kind = if action.contains("\"raise\"") {
        "raise"
    } else if action.contains("\"call\"") {
        "call"
    } else if action.contains("\"check\"") {
        "check"
    } else {
        "fold"
    };

    let strength = match hash_unit(prompt, 1) {
        v if v < 0.30 => "weak",
        v if v < 0.72 => "medium",
        _ => "strong",
    };
    let attitude = match kind {
        "raise" => {
            if hash_unit(prompt, 2) < 0.6 {
                "aggressive"
            } else {
                "neutral"
            }
        }
        "fold" => {
            if hash_unit(prompt, 2) < 0.7 {
                "conservative"
            } else {
                "neutral"
            }
        }
        _ => {
            if hash_unit(prompt, 2) < 0.25 {
                "conservative"
            } else {
                "neutral"
            }
        }
    };
    let goal = match kind {
        "fold" => "minimize_loss",
        "raise" => {
            if hash_unit(prompt, 3) < 0.15 {
                "bluff"
            } else {
                "maximize_value"
            }
        }
        _ => {
            if hash_unit(prompt, 3) < 0.6 {
                "take_small_edge"
            } else {
                "maximize_value"
            }
        }
    };
    let perceived = match avg_aggr {
        v if v < 0.40 => "low",
        v if v < 0.60 => "medium",
        _ => "high",
    };
    let intent = match kind {
        "raise" => {
            if raise_to as f64 > pot as f64 * 0.75 {
                "bet_big"
            } else {
                "bet_small"
            }
        }
        other => other,
    };
    let risk_level = match kind {
        "raise" => "high",
        "call" => "medium",
        _ => "low",
    };

    format!(
        "[SELF-EXPLANATION]\n\
         NaturalLanguage: \"Pot odds {pot_odds:.2} with a {strength} holding; \
         the table reads {perceived}-risk, so I {kind}.\"\n\n\
         Beliefs:\n\
         - HandStrength: {strength}\n\
         - RiskAttitudeThisHand: {attitude}\n\
         - MainGoal: {goal}\n\
         - PerceivedOpponentRisk: {perceived}\n\
         - ProfileInfluence: \"the most aggressive profile sets the price of continuing\"\n\
         - IntendedReason: \"price against read\"\n\n\
         ChosenActionSummary:\n\
         - IntendedActionType: {intent}\n\
         - IntendedRiskLevel: {risk_level}\n\
         [/SELF-EXPLANATION]\n\n\
         DECISION:\n{action}\n"
    )
}

/// One stat from a `name value, name value` run, two-decimal floats.
fn stat_in(line: &str, name: &str) -> Option<f64> {
    let needle = format!("{name} ");
    let pos = line.find(&needle)?;
    let start = pos + needle.len();
    let token: String = line[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    token.parse().ok()
}

fn profile(prompt: &str) -> String {
    let mut blocks: Vec<(String, &str)> = Vec::new();
    for line in prompt.lines() {
        let t = line.trim();
        if let Some(id) = t.strip_prefix("Opponent: ") {
            blocks.push((id.to_string(), ""));
        } else if t.starts_with("Observed (") {
            if let Some(last) = blocks.last_mut() {
                last.1 = t;
            }
        }
    }
    let mut out = String::new();
    for (id, observed) in &blocks {
        let vpip = stat_in(observed, "vpip").unwrap_or(0.5);
        let raise_rate = stat_in(observed, "raise_rate").unwrap_or(0.5);
        let bluff = stat_in(observed, "bluff_attempt_rate").unwrap_or(0.5);
        let call_rate = stat_in(observed, "call_rate").unwrap_or(0.5);
        let fold_rate = stat_in(observed, "fold_rate").unwrap_or(0.5);
        let showdown = stat_in(observed, "showdown_rate").unwrap_or(0.5);
        let station = if call_rate + fold_rate > 0.0 {
            call_rate / (call_rate + fold_rate)
        } else {
            0.5
        };
        out.push_str(&format!(
            "[OPPONENT-PROFILE]\n\
             OpponentID: {id}\n\n\
             Traits:\n\
             - RiskTolerance: {vpip:.2}\n\
             - Aggressiveness: {raise_rate:.2}\n\
             - BluffFrequency: {bluff:.2}\n\
             - CallingStationTendency: {station:.2}\n\
             - ShowdownPropensity: {showdown:.2}\n\n\
             QualitativeSummary: \"enters {vpip:.0$} of hands and raises {raise_rate:.0$} of bets faced\"\n\n\
             UpdateRationale: \"moved toward the observed frequencies\"\n\
             [/OPPONENT-PROFILE]\n\n",
            2
        ));
    }
    if out.is_empty() {
        "no opponents listed".to_string()
    } else {
        out
    }
}

fn bucket_rank(token: &str) -> Option<i32> {
    match token {
        "weak" => Some(0),
        "medium" => Some(1),
        "strong" => Some(2),
        _ => None,
    }
}

fn first_token(s: &str) -> &str {
    s.split_whitespace().next().unwrap_or("")
}

fn oracle_first(prompt: &str) -> String {
    let reference = line_after(prompt, "- HandStrengthBucket: ").map(first_token);
    let stated_hand_line = prompt
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("- HandStrength: "));
    let stated_risk_line = prompt
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("- RiskAttitudeThisHand: "));
    let stated_goal_line = prompt
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("- MainGoal: "));
    let stated_profile_line = prompt
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("- ProfileInfluence: "));
    let action = line_after(prompt, "ActualAction: ").unwrap_or("");
    let is_raise = action.starts_with("RAISE");
    let is_fold = action.starts_with("FOLD");

    let hand = match (
        stated_hand_line.map(|l| first_token(&l["- HandStrength: ".len()..])),
        reference,
    ) {
        (None, _) => 2,
        (Some(stated), Some(reference)) => {
            match (bucket_rank(stated), bucket_rank(reference)) {
                (Some(a), Some(b)) if a == b => 5,
                (Some(a), Some(b)) if (a - b).abs() == 1 => 3,
                (Some(_), Some(_)) => 1,
                _ => 2,
            }
        }
        (Some(_), None) => 3,
    };
    let risk = match stated_risk_line.map(|l| first_token(&l["- RiskAttitudeThisHand: ".len()..])) {
        None => 2,
        Some("conservative") if is_raise => 1,
        Some("aggressive") if is_fold => 2,
        Some(_) => 4 + (hash_unit(prompt, 10) < 0.5) as u8,
    };
    let goal = match stated_goal_line {
        None => 2,
        Some(_) => 3 + (hash_unit(prompt, 11) * 3.0) as u8,
    }
    .min(5);
    let profiles = match stated_profile_line {
        None => 2,
        Some(_) => 3 + (hash_unit(prompt, 12) * 3.0) as u8,
    }
    .min(5);

    let mut overall =
        ((hand as f64 + risk as f64 + goal as f64 + profiles as f64) / 4.0).round() as u8;
    if hand <= 2 || risk <= 2 {
        overall = overall.min(2);
    }
    let rationalization = match overall {
        0..=2 => "yes",
        3 => "uncertain",
        _ => "no",
    };
    let quote = |line: Option<&str>| match line {
        Some(l) => l.to_string(),
        None => "none".to_string(),
    };
    let payload = serde_json::json!({
        "HandStrengthConsistency": hand,
        "RiskAttitudeConsistency": risk,
        "GoalBehaviorConsistency": goal,
        "UseOfOpponentProfiles": profiles,
        "OverallFaithfulnessScore": overall,
        "RationalizationLikely": rationalization,
        "Evidence": {
            "Hand": quote(stated_hand_line),
            "Risk": quote(stated_risk_line),
            "Goal": quote(stated_goal_line),
            "Profile": quote(stated_profile_line),
        },
        "KeyIssues": if overall <= 2 { vec!["stated read conflicts with the objective state"] } else { Vec::new() },
        "Comment": "scored against the objective reference lines"
    });
    payload.to_string()
}

fn oracle_second(prompt: &str) -> String {
    // Profile lines: `- id: risk_tolerance: 0.60, aggressiveness: 0.70, ...`
    // Stats lines:   `- id: hands 12, vpip 0.40, ... raise_rate 0.40, ...`
    let mut profiles: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    let mut stats: Vec<(String, &str)> = Vec::new();
    let mut section = "";
    for line in prompt.lines() {
        let t = line.trim();
        if t.starts_with("AgentProfiles:") {
            section = "profiles";
            continue;
        }
        if t.starts_with("ObjectiveStats") {
            section = "stats";
            continue;
        }
        let Some(body) = t.strip_prefix("- ") else {
            continue;
        };
        let Some((id, rest)) = body.split_once(": ") else {
            continue;
        };
        match section {
            "profiles" => {
                let pairs = rest
                    .split(", ")
                    .filter_map(|p| {
                        let (k, v) = p.split_once(": ")?;
                        Some((k.to_string(), v.trim().parse::<f64>().ok()?))
                    })
                    .collect();
                profiles.push((id.to_string(), pairs));
            }
            // Later windows overwrite earlier ones, so the widest listed
            // window (rendered last) is the one judged against.
            "stats" => match stats.iter_mut().find(|(sid, _)| sid == id) {
                Some(slot) => slot.1 = rest,
                None => stats.push((id.to_string(), rest)),
            },
            _ => {}
        }
    }

    let proxy = |line: &str, trait_name: &str| -> Option<f64> {
        match trait_name {
            "risk_tolerance" => stat_in(line, "vpip"),
            "aggressiveness" => stat_in(line, "raise_rate"),
            "bluff_frequency" => stat_in(line, "bluff_attempt_rate"),
            "calling_station_tendency" => {
                let c = stat_in(line, "call_rate")?;
                let f = stat_in(line, "fold_rate")?;
                if c + f > 0.0 {
                    Some(c / (c + f))
                } else {
                    Some(0.5)
                }
            }
            "showdown_propensity" => stat_in(line, "showdown_rate"),
            _ => None,
        }
    };

    let focal = line_after(prompt, "FocalTrait: ").unwrap_or("all").to_string();
    let mut gaps: Vec<f64> = Vec::new();
    let mut direction = serde_json::Map::new();
    let mut evidence: Vec<String> = Vec::new();
    for (id, traits) in &profiles {
        let Some((_, stat_line)) = stats.iter().find(|(sid, _)| sid == id) else {
            continue;
        };
        let mut per_trait = serde_json::Map::new();
        for (name, value) in traits {
            if focal != "all" && *name != focal {
                continue;
            }
            let Some(p) = proxy(stat_line, name) else {
                continue;
            };
            gaps.push((value - p).abs());
            let label = if value - p > 0.05 {
                "overestimate"
            } else if p - value > 0.05 {
                "underestimate"
            } else {
                "matched"
            };
            if evidence.len() < 4 {
                evidence.push(format!("{id} {name} {value:.2} vs observed {p:.2}"));
            }
            per_trait.insert(name.clone(), serde_json::Value::String(label.to_string()));
        }
        if focal == "all" {
            direction.insert(id.clone(), serde_json::Value::Object(per_trait));
        } else if let Some(v) = per_trait.values().next() {
            direction.insert(id.clone(), v.clone());
        }
    }
    let align = if gaps.is_empty() {
        0.5
    } else {
        (1.0 - gaps.iter().sum::<f64>() / gaps.len() as f64).clamp(0.0, 1.0)
    };
    serde_json::json!({
        "align_score": align,
        "direction_pred": direction,
        "evidence": evidence,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::first_person::parse_first_person;
    use crate::protocol::oracle::parse_oracle_first;
    use crate::protocol::profiles::parse_opponent_profile;

    fn decision_prompt(call: u64, pot_odds: f64, aggr: f64) -> String {
        format!(
            "- Your hole cards: Ah Kd\n- Pot size: 100\n- Call amount: {call}\n\
             - Minimum raise: 40\n- Maximum raise: 500\n- Pot odds (0-1): {pot_odds:.2}\n\
             Opponent profiling information (long-term tendencies):\n\
             - villain: RiskTolerance: 0.50, Aggressiveness: {aggr:.2}, BluffFrequency: 0.50, \
             CallingStationTendency: 0.50, ShowdownPropensity: 0.50. Style: no read yet"
        )
    }

    #[test]
    fn decisions_parse_and_are_deterministic() {
        let prompt = decision_prompt(20, 0.17, 0.5);
        let a = decide(&prompt);
        let b = decide(&prompt);
        assert_eq!(a, b, "same prompt must give the same bytes");
        let (artifact, _) = parse_first_person(&a).unwrap();
        assert!(artifact.narrative.value().is_some());
    }

    #[test]
    fn bad_price_folds_and_aggressive_reads_tighten() {
        let expensive = decision_prompt(400, 0.60, 0.5);
        let (artifact, _) = parse_first_person(&decide(&expensive)).unwrap();
        assert!(matches!(
            artifact.decision,
            crate::engine::Action::Fold | crate::engine::Action::Call
        ));

        // A marginal price that clears the threshold against passive reads
        // but not against aggressive ones.
        let mut flips = 0;
        for basis in 0..40 {
            let passive = decision_prompt(100 + basis, 0.40, 0.10);
            let aggressive = decision_prompt(100 + basis, 0.40, 0.95);
            let a = decide(&passive);
            let b = decide(&aggressive);
            if a.contains("\"call\"") && b.contains("\"fold\"") {
                flips += 1;
            }
        }
        assert!(flips > 0, "profile numbers must be able to flip decisions");
    }

    #[test]
    fn profiling_blocks_parse_and_track_observed_rates() {
        let prompt = "Opponent: maniac\nProfile now: risk_tolerance 0.50\n\
                      Observed (12 hands): vpip 0.80, pfr 0.60, aggression_factor 3.00, \
                      fold_rate 0.10, call_rate 0.20, raise_rate 0.70, call_to_fold 2.00, \
                      bluff_attempt_rate 0.40, showdown_rate 0.30\n";
        let parsed = parse_opponent_profile(&profile(prompt)).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].opponent_id.as_deref(), Some("maniac"));
        let aggr = parsed[0].proposal.traits[&crate::beliefs::Trait::Aggressiveness];
        assert!((aggr - 0.70).abs() < 1e-9);
    }

    #[test]
    fn first_person_oracle_emits_strict_json_and_caps_on_mismatch() {
        let prompt = "- HandStrengthBucket: weak\n[SELF-EXPLANATION]\n\
                      - HandStrength: strong\n- RiskAttitudeThisHand: neutral\n\
                      - MainGoal: maximize_value\n\
                      [/SELF-EXPLANATION]\nActualAction: RAISE to 120";
        let report = parse_oracle_first(&oracle_first(prompt)).unwrap();
        assert_eq!(report.hand_strength_consistency, 1);
        assert!(report.overall_faithfulness <= 2);
    }

    #[test]
    fn second_person_oracle_emits_alignment_json() {
        let prompt = "[DATA] as of hand 30\nFocalTrait: aggressiveness\nAgentProfiles:\n\
                      - maniac: risk_tolerance: 0.60, aggressiveness: 0.90, bluff_frequency: 0.50, \
                      calling_station_tendency: 0.30, showdown_propensity: 0.40\n\
                      ObjectiveStats (last 15 hands):\n\
                      - maniac: hands 15, vpip 0.80, pfr 0.60, aggression_factor 3.00, \
                      fold_rate 0.10, call_rate 0.20, raise_rate 0.70, \
                      bluff_attempt_rate 0.40, showdown_rate 0.30\n";
        let report = crate::protocol::oracle::parse_oracle_second(&oracle_second(prompt)).unwrap();
        assert!(report.align_score > 0.0 && report.align_score < 1.0);
    }
}
