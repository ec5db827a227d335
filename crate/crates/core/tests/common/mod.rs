//! Shared helpers for the acceptance suite: an independent naive hand
//! evaluator (best five of seven by exhaustive enumeration, written without
//! looking at the crate's evaluator) and scripted model backends with
//! known decision policies.

use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use glasstable::cards::Card;
use glasstable::client::{ClientError, Completion, ModelBackend, Role};
use glasstable::engine::Action;
use glasstable::protocol::first_person::{
    emit_canonical, Claim, FirstPersonArtifact, HandStrengthClaim, IntendedActionTypeClaim,
    IntendedRiskLevelClaim, MainGoalClaim, PerceivedRiskClaim, RiskAttitudeClaim,
};

/// (category, tiebreaks) with plain lexicographic ordering. Category codes:
/// 0 high card .. 8 straight flush.
pub type NaiveRank = (u8, Vec<u8>);

fn straight_high(ranks_desc_unique: &[u8]) -> Option<u8> {
    // Ace plays low in the wheel.
    let mut vals = ranks_desc_unique.to_vec();
    if vals.contains(&14) {
        vals.push(1);
    }
    for window in vals.windows(5) {
        if window.windows(2).all(|w| w[0] == w[1] + 1) {
            return Some(window[0].max(5));
        }
    }
    None
}

/// Naive five-card rank, from the written rules of poker.
pub fn naive_five(cards: &[Card; 5]) -> NaiveRank {
    let mut ranks: Vec<u8> = cards.iter().map(|c| c.rank.value()).collect();
    ranks.sort_unstable_by(|a, b| b.cmp(a));
    let flush = cards.iter().all(|c| c.suit == cards[0].suit);

    let mut unique: Vec<u8> = ranks.clone();
    unique.dedup();
    let straight = if unique.len() == 5 {
        straight_high(&unique)
    } else {
        None
    };

    // counts per rank, highest multiplicity first, rank as tiebreak.
    let mut counts: Vec<(u8, u8)> = unique
        .iter()
        .map(|&r| (ranks.iter().filter(|&&x| x == r).count() as u8, r))
        .collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));

    match (flush, straight) {
        (true, Some(high)) => return (8, vec![high]),
        (true, None) => return (5, ranks),
        (false, Some(high)) => return (4, vec![high]),
        (false, None) => {}
    }
    let shape: Vec<u8> = counts.iter().map(|c| c.0).collect();
    let order: Vec<u8> = counts.iter().map(|c| c.1).collect();
    match shape.as_slice() {
        [4, 1] => (7, order),
        [3, 2] => (6, order),
        [3, 1, 1] => (3, order),
        [2, 2, 1] => (2, order),
        [2, 1, 1, 1] => (1, order),
        _ => (0, order),
    }
}

/// Best of the 21 five-card hands in a seven-card set.
pub fn naive_best_of_seven(cards: &[Card; 7]) -> NaiveRank {
    let mut best: Option<NaiveRank> = None;
    for skip_a in 0..7 {
        for skip_b in (skip_a + 1)..7 {
            let mut five = [cards[0]; 5];
            let mut n = 0;
            for (i, &c) in cards.iter().enumerate() {
                if i != skip_a && i != skip_b {
                    five[n] = c;
                    n += 1;
                }
            }
            let rank = naive_five(&five);
            if best.as_ref().map(|b| rank > *b).unwrap_or(true) {
                best = Some(rank);
            }
        }
    }
    best.unwrap()
}

/// First integer after a labeled line, e.g. `num_after(p, "- Call amount: ")`.
pub fn num_after(prompt: &str, label: &str) -> Option<u64> {
    let start = prompt.find(label)? + label.len();
    let rest = &prompt[start..];
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// A complete, well-formed self-explanation around the given action.
pub fn scripted_response(action: Action) -> String {
    let (kind, risk) = match action {
        Action::Fold => (IntendedActionTypeClaim::Fold, IntendedRiskLevelClaim::Low),
        Action::Check => (IntendedActionTypeClaim::Check, IntendedRiskLevelClaim::Low),
        Action::Call => (IntendedActionTypeClaim::Call, IntendedRiskLevelClaim::Medium),
        Action::Raise { .. } => (
            IntendedActionTypeClaim::BetSmall,
            IntendedRiskLevelClaim::Medium,
        ),
    };
    let artifact = FirstPersonArtifact {
        narrative: Claim::Value("scripted policy for the acceptance suite".to_string()),
        hand_strength: Claim::Value(HandStrengthClaim::Medium),
        risk_attitude: Claim::Value(RiskAttitudeClaim::Neutral),
        main_goal: Claim::Value(MainGoalClaim::TakeSmallEdge),
        perceived_opponent_risk: Claim::Value(PerceivedRiskClaim::Medium),
        profile_influence: Claim::Value("reads taken as rendered".to_string()),
        intended_reason: Claim::Value("follow the scripted policy".to_string()),
        intended_action_type: Claim::Value(kind),
        intended_risk_level: Claim::Value(risk),
        decision: action,
    };
    emit_canonical(&artifact)
}

fn completion(text: String) -> Result<Completion, ClientError> {
    Ok(Completion {
        text,
        latency_ms: 0,
        prompt_tokens: None,
        completion_tokens: None,
        retries: 0,
    })
}

/// Stochastic but seed-reproducible policy: mostly passive, never updates
/// its opponent profiles. Prompt content does not influence the draw.
pub struct CoinflipBackend {
    name: String,
    rng: Mutex<ChaCha8Rng>,
}

impl CoinflipBackend {
    pub fn new(name: &str, rng: ChaCha8Rng) -> CoinflipBackend {
        CoinflipBackend {
            name: name.to_string(),
            rng: Mutex::new(rng),
        }
    }
}

impl ModelBackend for CoinflipBackend {
    fn complete(&self, role: Role, prompt: &str) -> Result<Completion, ClientError> {
        match role {
            Role::Decision => {
                let call = num_after(prompt, "- Call amount: ").unwrap_or(0);
                let min_raise = num_after(prompt, "- Minimum raise: ").unwrap_or(0);
                let u: f64 = self.rng.lock().unwrap().gen();
                let action = if call == 0 {
                    if u < 0.15 && min_raise > 0 {
                        Action::Raise { to: min_raise }
                    } else {
                        Action::Check
                    }
                } else if u < 0.45 {
                    Action::Fold
                } else if u < 0.90 || min_raise == 0 {
                    Action::Call
                } else {
                    Action::Raise { to: min_raise }
                };
                completion(scripted_response(action))
            }
            _ => completion("no update".to_string()),
        }
    }

    fn model_name(&self) -> &str {
        &self.name
    }
}

/// Deterministic belief-threshold policy: folds to any bet the moment it
/// reads an opponent aggressiveness above the threshold, otherwise calls.
/// Never updates its profiles, so the logged run reads the 0.50 priors.
pub struct ThresholdBackend {
    name: String,
    threshold: f64,
}

impl ThresholdBackend {
    pub fn new(name: &str, threshold: f64) -> ThresholdBackend {
        ThresholdBackend {
            name: name.to_string(),
            threshold,
        }
    }

    fn max_aggressiveness(prompt: &str) -> f64 {
        let mut max = 0.0f64;
        let mut rest = prompt;
        while let Some(pos) = rest.find("Aggressiveness: ") {
            rest = &rest[pos + "Aggressiveness: ".len()..];
            let token: String = rest
                .chars()
                .take_while(|c| c.is_ascii_digit() || *c == '.')
                .collect();
            if let Ok(v) = token.parse::<f64>() {
                max = max.max(v);
            }
        }
        max
    }
}

impl ModelBackend for ThresholdBackend {
    fn complete(&self, role: Role, prompt: &str) -> Result<Completion, ClientError> {
        match role {
            Role::Decision => {
                let call = num_after(prompt, "- Call amount: ").unwrap_or(0);
                let scared = Self::max_aggressiveness(prompt) > self.threshold;
                let action = match (call > 0, scared) {
                    (false, _) => Action::Check,
                    (true, true) => Action::Fold,
                    (true, false) => Action::Call,
                };
                completion(scripted_response(action))
            }
            _ => completion("no update".to_string()),
        }
    }

    fn model_name(&self) -> &str {
        &self.name
    }
}
