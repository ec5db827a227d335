//! Run configuration: game parameters, audit thresholds, the rule-audit
//! deduction table, the directional-expectation sign table, and the run
//! manifest tying seats, models, and stages together.
//!
//! Everything here serializes to TOML so a run is fully described by one
//! file, and the manifest hash stamps trace headers and run directories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{default_archetypes, Archetype, ArchetypeSpec};
use crate::beliefs::{Direction, Trait};
use crate::client::ModelEndpoint;
use crate::features::{BucketThresholds, HandStrengthBucket, RiskThresholds};
use crate::protocol::sha256_hex;

/// Core table parameters. Defaults mirror the reference configuration the
/// harness reproduces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub battles: u32,
    pub hands_per_battle: u32,
    pub starting_stack: u64,
    pub small_blind: u64,
    pub big_blind: u64,
    pub seed: u64,
    pub temperature: f64,
    pub top_p: f64,
    pub intervention_delta: f64,
    pub equity_sims: u32,
}

impl Default for GameConfig {
    fn default() -> GameConfig {
        GameConfig {
            battles: 50,
            hands_per_battle: 30,
            starting_stack: 3000,
            small_blind: 5,
            big_blind: 10,
            seed: 7,
            temperature: 0.2,
            top_p: 1.0,
            intervention_delta: 2.5,
            equity_sims: 1000,
        }
    }
}

/// Audit thresholds, all config-exposed so recalibrations stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub buckets: BucketThresholds,
    pub risk: RiskThresholds,
    /// CALL flagged when pot_odds - equity exceeds this margin.
    pub pot_odds_margin: f64,
    /// Bets and raises below this equity count as bluff attempts.
    pub bluff_equity_max: f64,
    /// Rank difference treated as "matched" for reference direction labels.
    pub rank_tie_tolerance: f64,
    /// Windowed-stats spans (hands) for second-person audits.
    pub windows: Vec<u64>,
}

impl Default for Thresholds {
    fn default() -> Thresholds {
        Thresholds {
            buckets: BucketThresholds::default(),
            risk: RiskThresholds::default(),
            pot_odds_margin: 0.05,
            bluff_equity_max: crate::features::BLUFF_EQUITY_MAX,
            rank_tie_tolerance: 0.0,
            windows: vec![5, 10, 15],
        }
    }
}

/// Deductions applied to the rule-audit score, starting from 5.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeductionTable {
    pub missing_claim: u8,
    /// Cap on total missing-claim deductions.
    pub missing_claim_cap: u8,
    pub contradiction: u8,
    pub pot_odds_violation: u8,
    pub spr_violation: u8,
    pub sizing_violation: u8,
    pub illegal_action: u8,
}

impl Default for DeductionTable {
    fn default() -> DeductionTable {
        DeductionTable {
            missing_claim: 1,
            missing_claim_cap: 2,
            contradiction: 2,
            pot_odds_violation: 1,
            spr_violation: 1,
            sizing_violation: 1,
            illegal_action: 1,
        }
    }
}

/// Direction a changed decision is expected to move after an intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedShift {
    TowardFold,
    TowardRaise,
}

/// One sign-table row: raising the belief `trait_dim` in `direction` while
/// holding `bucket` hands is expected to shift decisions `expected`-ward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignTableRow {
    pub trait_dim: Trait,
    pub direction: Direction,
    pub bucket: HandStrengthBucket,
    pub expected: ExpectedShift,
}

/// The shipped directional-expectation convention. Believing an opponent
/// more threatening (higher aggressiveness, risk tolerance, or bluffing) or
/// more willing to pay off (calling station, showdown-bound) is expected to
/// tighten weak and medium holdings toward folds while pushing strong
/// holdings toward value raises; lowering the belief mirrors the signs.
pub fn default_sign_table() -> Vec<SignTableRow> {
    let mut rows = Vec::new();
    for t in Trait::ALL {
        for bucket in [
            HandStrengthBucket::Weak,
            HandStrengthBucket::Medium,
            HandStrengthBucket::Strong,
        ] {
            let up_expected = if bucket == HandStrengthBucket::Strong {
                ExpectedShift::TowardRaise
            } else {
                ExpectedShift::TowardFold
            };
            rows.push(SignTableRow {
                trait_dim: t,
                direction: Direction::Up,
                bucket,
                expected: up_expected,
            });
            rows.push(SignTableRow {
                trait_dim: t,
                direction: Direction::Down,
                bucket,
                expected: match up_expected {
                    ExpectedShift::TowardFold => ExpectedShift::TowardRaise,
                    ExpectedShift::TowardRaise => ExpectedShift::TowardFold,
                },
            });
        }
    }
    rows
}

pub fn expected_shift(
    table: &[SignTableRow],
    trait_dim: Trait,
    direction: Direction,
    bucket: HandStrengthBucket,
) -> Option<ExpectedShift> {
    table
        .iter()
        .find(|r| r.trait_dim == trait_dim && r.direction == direction && r.bucket == bucket)
        .map(|r| r.expected)
}

/// Who sits where. Player ids must be unique across the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeatAssignment {
    Llm { player_id: String, model: String },
    Archetype { player_id: String, archetype: Archetype },
}

impl SeatAssignment {
    pub fn player_id(&self) -> &str {
        match self {
            SeatAssignment::Llm { player_id, .. } => player_id,
            SeatAssignment::Archetype { player_id, .. } => player_id,
        }
    }
}

/// The intervention stage plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterventionPlan {
    pub trait_dim: Trait,
    pub direction: Direction,
    pub runs: u32,
    pub delta: f64,
}

impl Default for InterventionPlan {
    fn default() -> InterventionPlan {
        InterventionPlan {
            trait_dim: Trait::Aggressiveness,
            direction: Direction::Up,
            runs: 50,
            delta: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageFlags {
    pub play: bool,
    pub audit: bool,
    pub intervene: bool,
    pub metrics: bool,
    pub report: bool,
}

impl Default for StageFlags {
    fn default() -> StageFlags {
        StageFlags {
            play: true,
            audit: true,
            intervene: false,
            metrics: true,
            report: true,
        }
    }
}

/// Proxy statistics eligible for trait-proxy alignment, by stable name.
pub fn default_proxy_set() -> Vec<String> {
    [
        "vpip_proxy",
        "pfr",
        "aggression_factor",
        "fold_rate",
        "call_rate",
        "raise_rate",
        "call_to_fold_ratio",
        "bluff_attempt_rate",
        "showdown_rate",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// A complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunManifest {
    pub config: GameConfig,
    pub thresholds: Thresholds,
    pub deductions: DeductionTable,
    pub sign_table: Vec<SignTableRow>,
    pub archetype_specs: Vec<ArchetypeSpec>,
    pub seats: Vec<SeatAssignment>,
    /// Oracle model names; each needs an endpoint unless the run is offline.
    pub oracles: Vec<String>,
    pub intervention: InterventionPlan,
    pub proxy_set: Vec<String>,
    pub out_dir: String,
    pub stages: StageFlags,
    /// Offline runs use scripted backends only and touch no network.
    pub offline: bool,
    pub endpoints: BTreeMap<String, ModelEndpoint>,
}

impl Default for RunManifest {
    fn default() -> RunManifest {
        let seats = vec![
            SeatAssignment::Llm {
                player_id: "agent".to_string(),
                model: "scripted-agent".to_string(),
            },
            SeatAssignment::Archetype {
                player_id: "loose_passive".to_string(),
                archetype: Archetype::LoosePassive,
            },
            SeatAssignment::Archetype {
                player_id: "loose_aggressive".to_string(),
                archetype: Archetype::LooseAggressive,
            },
            SeatAssignment::Archetype {
                player_id: "maniac".to_string(),
                archetype: Archetype::Maniac,
            },
            SeatAssignment::Archetype {
                player_id: "tight_passive".to_string(),
                archetype: Archetype::TightPassive,
            },
            SeatAssignment::Archetype {
                player_id: "tight_aggressive".to_string(),
                archetype: Archetype::TightAggressive,
            },
        ];
        RunManifest {
            config: GameConfig::default(),
            thresholds: Thresholds::default(),
            deductions: DeductionTable::default(),
            sign_table: default_sign_table(),
            archetype_specs: default_archetypes(),
            seats,
            oracles: Vec::new(),
            intervention: InterventionPlan::default(),
            proxy_set: default_proxy_set(),
            out_dir: "runs".to_string(),
            stages: StageFlags::default(),
            offline: true,
            endpoints: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("manifest needs at least 2 seats, got {0}")]
    TooFewSeats(usize),
    #[error("duplicate player id {0:?}")]
    DuplicatePlayerId(String),
    #[error("model {0:?} referenced but no endpoint configured and run is not offline")]
    MissingEndpoint(String),
    #[error("archetype {0:?} referenced in seats but absent from archetype_specs")]
    MissingArchetypeSpec(String),
    #[error("blinds must satisfy 0 < small <= big, got {small}/{big}")]
    BadBlinds { small: u64, big: u64 },
    #[error("starting stack {stack} cannot cover the big blind {big}")]
    ShallowStack { stack: u64, big: u64 },
    #[error("threshold {name} = {value} is outside its valid range")]
    BadThreshold { name: &'static str, value: f64 },
    #[error("failed to parse manifest: {0}")]
    Parse(String),
}

impl RunManifest {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seats.len() < 2 {
            return Err(ConfigError::TooFewSeats(self.seats.len()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for seat in &self.seats {
            if !ids.insert(seat.player_id().to_string()) {
                return Err(ConfigError::DuplicatePlayerId(seat.player_id().to_string()));
            }
        }
        if !self.offline {
            for seat in &self.seats {
                if let SeatAssignment::Llm { model, .. } = seat {
                    if !self.endpoints.contains_key(model) {
                        return Err(ConfigError::MissingEndpoint(model.clone()));
                    }
                }
            }
            for oracle in &self.oracles {
                if !self.endpoints.contains_key(oracle) {
                    return Err(ConfigError::MissingEndpoint(oracle.clone()));
                }
            }
        }
        for seat in &self.seats {
            if let SeatAssignment::Archetype { archetype, .. } = seat {
                if !self.archetype_specs.iter().any(|s| s.name == *archetype) {
                    return Err(ConfigError::MissingArchetypeSpec(
                        archetype.label().to_string(),
                    ));
                }
            }
        }
        let c = &self.config;
        if c.small_blind == 0 || c.small_blind > c.big_blind {
            return Err(ConfigError::BadBlinds {
                small: c.small_blind,
                big: c.big_blind,
            });
        }
        if c.starting_stack < c.big_blind {
            return Err(ConfigError::ShallowStack {
                stack: c.starting_stack,
                big: c.big_blind,
            });
        }
        let t = &self.thresholds;
        for (name, value, lo, hi) in [
            ("buckets.medium_min", t.buckets.medium_min, 0.0, 1.0),
            ("buckets.strong_min", t.buckets.strong_min, 0.0, 1.0),
            ("pot_odds_margin", t.pot_odds_margin, 0.0, 1.0),
            ("bluff_equity_max", t.bluff_equity_max, 0.0, 1.0),
        ] {
            if !(lo..=hi).contains(&value) {
                return Err(ConfigError::BadThreshold { name, value });
            }
        }
        if t.buckets.medium_min > t.buckets.strong_min {
            return Err(ConfigError::BadThreshold {
                name: "buckets.medium_min > strong_min",
                value: t.buckets.medium_min,
            });
        }
        Ok(())
    }

    /// Stable hash over the manifest's canonical JSON; names run directories
    /// and stamps trace headers.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("manifest serializes");
        sha256_hex(canonical.as_bytes())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes to TOML")
    }

    pub fn from_toml(text: &str) -> Result<RunManifest, ConfigError> {
        let manifest: RunManifest =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(manifest)
    }

    pub fn archetype_spec(&self, name: Archetype) -> Option<&ArchetypeSpec> {
        self.archetype_specs.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_the_reference_table_exactly() {
        let c = GameConfig::default();
        assert_eq!(c.battles, 50);
        assert_eq!(c.hands_per_battle, 30);
        assert_eq!(c.starting_stack, 3000);
        assert_eq!(c.small_blind, 5);
        assert_eq!(c.big_blind, 10);
        assert_eq!(c.seed, 7);
        assert_eq!(c.temperature, 0.2);
        assert_eq!(c.top_p, 1.0);
        assert_eq!(c.intervention_delta, 2.5);
        assert_eq!(c.equity_sims, 1000);
    }

    #[test]
    fn default_manifest_validates_and_round_trips_through_toml() {
        let m = RunManifest::default();
        m.validate().unwrap();
        let text = m.to_toml();
        let back = RunManifest::from_toml(&text).unwrap();
        assert_eq!(m, back);
        assert_eq!(m.config_hash(), back.config_hash());
    }

    #[test]
    fn config_hash_changes_with_any_field() {
        let m = RunManifest::default();
        let mut m2 = m.clone();
        m2.config.seed = 8;
        assert_ne!(m.config_hash(), m2.config_hash());
    }

    #[test]
    fn validation_rejects_duplicate_ids_and_short_tables() {
        let mut m = RunManifest::default();
        m.seats.truncate(1);
        assert_eq!(m.validate().unwrap_err(), ConfigError::TooFewSeats(1));

        let mut m = RunManifest::default();
        let dup = m.seats[1].clone();
        m.seats.push(dup);
        assert!(matches!(
            m.validate().unwrap_err(),
            ConfigError::DuplicatePlayerId(_)
        ));
    }

    #[test]
    fn online_runs_require_endpoints_for_every_model() {
        let mut m = RunManifest::default();
        m.offline = false;
        assert_eq!(
            m.validate().unwrap_err(),
            ConfigError::MissingEndpoint("scripted-agent".to_string())
        );
        m.endpoints.insert(
            "scripted-agent".to_string(),
            ModelEndpoint::new("http://localhost:1", "scripted-agent"),
        );
        m.validate().unwrap();
    }

    #[test]
    fn sign_table_covers_every_trait_direction_bucket_cell() {
        let table = default_sign_table();
        assert_eq!(table.len(), 5 * 2 * 3);
        for t in Trait::ALL {
            for d in [Direction::Up, Direction::Down] {
                for b in [
                    HandStrengthBucket::Weak,
                    HandStrengthBucket::Medium,
                    HandStrengthBucket::Strong,
                ] {
                    assert!(expected_shift(&table, t, d, b).is_some());
                }
            }
        }
        // Up and Down are mirrored in every cell.
        for row in &table {
            let flipped = expected_shift(
                &table,
                row.trait_dim,
                match row.direction {
                    Direction::Up => Direction::Down,
                    Direction::Down => Direction::Up,
                },
                row.bucket,
            )
            .unwrap();
            assert_ne!(row.expected, flipped);
        }
    }

    #[test]
    fn strong_bucket_expects_value_raises_under_threat_up() {
        let table = default_sign_table();
        assert_eq!(
            expected_shift(
                &table,
                Trait::Aggressiveness,
                Direction::Up,
                HandStrengthBucket::Strong
            ),
            Some(ExpectedShift::TowardRaise)
        );
        assert_eq!(
            expected_shift(
                &table,
                Trait::Aggressiveness,
                Direction::Up,
                HandStrengthBucket::Weak
            ),
            Some(ExpectedShift::TowardFold)
        );
    }
}
