//! One battle: a fixed-seat table played for a bounded number of hands,
//! with every focal-agent decision traced and a per-hand sidecar record of
//! what everyone did, so later stages never have to re-simulate.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{archetype_decide, archetype_spec, Archetype};
use crate::beliefs::{OpponentProfile, Trait, TraitVector, PROFILE_STEP};
use crate::client::{prompt_hash, ModelBackend, Role};
use crate::config::{RunManifest, SeatAssignment};
use crate::engine::{
    next_funded_seat, normalize_action, Action, Hand, HistoryEntry, PlayerInit, Street,
};
use crate::features::{
    behavior_stats, decision_features, finalize_with_action, update_behavior_counters,
    BehaviorCounters, HandObservation, ObservedDecision,
};
use crate::protocol::first_person::{parse_first_person, signature_of, FirstPersonArtifact};
use crate::protocol::{
    cards_text, opponent_actions_text, opponent_profiles_text, position_text,
    render_decision_prompt, render_profiling_prompt, sha256_hex, template_hashes,
    DecisionPromptContext,
};
use crate::trace::{battle_path, DecisionKey, ObservationSnapshot, TraceHeader, TraceWriter};

use super::{RunnerError, SharedBackends};

/// One applied action, keyed by player rather than seat index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub player_id: String,
    pub street: Street,
    pub action: Action,
    pub paid: u64,
}

/// Per-hand sidecar row: everything the audit and metrics stages need about
/// the hand beyond the focal decision rows themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandRecord {
    pub battle_id: u32,
    pub hand_id: u32,
    pub button: usize,
    pub events: Vec<ActionEvent>,
    pub net: BTreeMap<String, i64>,
    pub showdown: bool,
    /// Cumulative behavior counters per player after this hand, so any
    /// window of hands reduces to a counter subtraction.
    pub counters_after: BTreeMap<String, BehaviorCounters>,
    /// Trait estimates per observing agent after this hand's profile update.
    pub profiles_after: BTreeMap<String, BTreeMap<String, TraitVector>>,
    pub stacks_after: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattleSummary {
    pub battle_id: u32,
    pub hands: u32,
    pub rows: u32,
    pub aborted: Option<String>,
    pub final_stacks: BTreeMap<String, u64>,
}

/// Sidecar file next to the trace file.
pub fn hands_path(dir: &Path, battle_id: u32) -> PathBuf {
    dir.join(format!("battle-{battle_id:04}.hands.jsonl"))
}

/// Independent per-battle stream: reseeding from a digest keeps battles
/// decorrelated and makes any battle reproducible in isolation.
pub fn battle_rng(seed: u64, battle_id: u32) -> ChaCha8Rng {
    let digest = sha256_hex(format!("battle:{seed}:{battle_id}").as_bytes());
    let mut key = [0u8; 32];
    for (i, chunk) in digest.as_bytes().chunks(2).take(32).enumerate() {
        key[i] = u8::from_str_radix(std::str::from_utf8(chunk).unwrap(), 16).unwrap();
    }
    ChaCha8Rng::from_seed(key)
}

struct AgentState {
    player_id: String,
    model: String,
    backend: Arc<dyn ModelBackend>,
    profiles: BTreeMap<String, OpponentProfile>,
}

enum SeatKind {
    Agent(usize),
    Archetype(Archetype),
}

pub fn read_hand_records(path: &Path) -> Result<Vec<HandRecord>, RunnerError> {
    let file = File::open(path).map_err(|e| RunnerError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RunnerError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: HandRecord = serde_json::from_str(&line).map_err(|e| {
            RunnerError::Data(format!("{}:{}: bad hand record: {e}", path.display(), i + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

fn summary_text_for(
    agent: &AgentState,
    counters: &BTreeMap<String, BehaviorCounters>,
) -> String {
    let mut out = String::new();
    for (id, profile) in &agent.profiles {
        let stats = behavior_stats(&counters[id]);
        let traits = Trait::ALL
            .iter()
            .map(|t| format!("{} {:.2}", t.snake_name(), profile.traits.get(*t)))
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!(
            "Opponent: {id}\nProfile now: {traits}\n\
             Observed ({} hands): vpip {:.2}, pfr {:.2}, aggression_factor {:.2}, \
             fold_rate {:.2}, call_rate {:.2}, raise_rate {:.2}, call_to_fold {:.2}, \
             bluff_attempt_rate {:.2}, showdown_rate {:.2}\n\n",
            stats.hands_seen,
            stats.vpip_proxy,
            stats.pfr,
            stats.aggression_factor,
            stats.fold_rate,
            stats.call_rate,
            stats.raise_rate,
            stats.call_to_fold_ratio,
            stats.bluff_attempt_rate,
            stats.showdown_rate,
        ));
    }
    out
}

/// Plays one battle to completion and writes its trace and hand-record
/// files. A transport failure mid-battle marks the summary instead of
/// discarding the rows already on disk.
pub fn run_battle(
    manifest: &RunManifest,
    backends: &SharedBackends,
    run_dir: &Path,
    battle_id: u32,
) -> Result<BattleSummary, RunnerError> {
    let cfg = &manifest.config;
    let mut rng = battle_rng(cfg.seed, battle_id);

    let mut agents: Vec<AgentState> = Vec::new();
    let mut kinds: Vec<SeatKind> = Vec::new();
    for seat in &manifest.seats {
        match seat {
            SeatAssignment::Llm { player_id, model } => {
                let backend = backends.get(model)?.clone();
                let profiles = manifest
                    .seats
                    .iter()
                    .filter(|o| o.player_id() != player_id)
                    .map(|o| {
                        (
                            o.player_id().to_string(),
                            OpponentProfile::new(o.player_id()),
                        )
                    })
                    .collect();
                kinds.push(SeatKind::Agent(agents.len()));
                agents.push(AgentState {
                    player_id: player_id.clone(),
                    model: model.clone(),
                    backend,
                    profiles,
                });
            }
            SeatAssignment::Archetype { archetype, .. } => {
                kinds.push(SeatKind::Archetype(*archetype));
            }
        }
    }

    let player_ids: Vec<String> = manifest
        .seats
        .iter()
        .map(|s| s.player_id().to_string())
        .collect();
    let mut stacks: Vec<u64> = vec![cfg.starting_stack; player_ids.len()];
    let mut counters: BTreeMap<String, BehaviorCounters> = player_ids
        .iter()
        .map(|id| (id.clone(), BehaviorCounters::default()))
        .collect();

    let header = TraceHeader {
        schema_version: crate::trace::SCHEMA_VERSION,
        config_hash: super::run_identity_hash(manifest),
        template_hashes: template_hashes(),
        seed: cfg.seed,
    };
    let trace_file = battle_path(run_dir, battle_id);
    let mut writer = TraceWriter::create(&trace_file, &header)
        .map_err(|e| RunnerError::Data(format!("{}: {e}", trace_file.display())))?;
    let hands_file = hands_path(run_dir, battle_id);
    let mut hands_out = BufWriter::new(
        File::create(&hands_file).map_err(|e| RunnerError::io(&hands_file, e))?,
    );

    let template_hash = header.template_hashes["decision"].clone();
    let decision_template_hash = template_hash.as_str();
    let mut button = battle_id as usize % player_ids.len();
    if stacks[button] == 0 {
        button = next_funded_seat(&stacks, button).unwrap_or(0);
    }

    let mut hands_played = 0u32;
    let mut rows_written = 0u32;
    let mut aborted: Option<String> = None;

    'battle: for hand_id in 0..cfg.hands_per_battle {
        if stacks.iter().filter(|s| **s > 0).count() < 2 {
            break;
        }
        let players: Vec<PlayerInit> = player_ids
            .iter()
            .zip(&stacks)
            .map(|(id, stack)| PlayerInit {
                player_id: id.clone(),
                stack: *stack,
            })
            .collect();
        let mut hand = Hand::new(&players, button, (cfg.small_blind, cfg.big_blind), &mut rng)
            .map_err(|e| RunnerError::Data(format!("battle {battle_id} hand {hand_id}: {e}")))?;

        let mut decision_index = 0u32;
        let mut observations: BTreeMap<String, HandObservation> = BTreeMap::new();

        while !hand.is_over() {
            let seat = hand
                .to_act()
                .ok_or_else(|| RunnerError::Data("no seat to act in open hand".to_string()))?;
            let legal = hand
                .legal_actions()
                .ok_or_else(|| RunnerError::Data("no legal actions for acting seat".to_string()))?;
            let table = &hand.table;
            let pot = table.pot();
            let hole = table.seats[seat]
                .hole
                .ok_or_else(|| RunnerError::Data("acting seat has no cards".to_string()))?;
            let opponents = table.live_seats().len().saturating_sub(1).max(1);
            let estimate =
                crate::equity::equity_for_street(hole, &table.board, opponents, cfg.equity_sims, &mut rng)
                    .map_err(|e| RunnerError::Data(format!("equity: {e}")))?;
            let features = decision_features(
                pot,
                table.seats[seat].stack,
                &legal,
                estimate.equity,
                estimate.exact,
                &manifest.thresholds.buckets,
            );
            let street = table.street;
            let player_id = table.seats[seat].player_id.clone();

            let normalized = match &kinds[seat] {
                SeatKind::Archetype(name) => {
                    let spec = manifest
                        .archetype_specs
                        .iter()
                        .find(|s| s.name == *name)
                        .cloned()
                        .unwrap_or_else(|| archetype_spec(*name));
                    let action = archetype_decide(&spec, &features, &legal, street, pot, &mut rng);
                    normalize_action(action, &legal)
                }
                SeatKind::Agent(agent_idx) => {
                    let profiles_snapshot = agents[*agent_idx].profiles.clone();
                    let profile_refs: Vec<&OpponentProfile> =
                        profiles_snapshot.values().collect();
                    let ctx = DecisionPromptContext {
                        hole_cards: cards_text(&hole),
                        community_cards: cards_text(&table.board),
                        street: street.label().to_string(),
                        pot_size: pot,
                        call_amount: legal.call_amount,
                        min_raise: legal.min_raise,
                        max_raise: legal.max_raise,
                        pot_odds: features.pot_odds,
                        position_text: position_text(table, seat),
                        opponent_actions_text: opponent_actions_text(table, seat),
                        opponent_profiles_text: opponent_profiles_text(&profile_refs),
                    };
                    let prompt = render_decision_prompt(&ctx)
                        .map_err(|e| RunnerError::Data(format!("render: {e}")))?;
                    let agent = &agents[*agent_idx];
                    let completion = match agent.backend.complete(Role::Decision, &prompt) {
                        Ok(c) => c,
                        Err(e) => {
                            aborted = Some(format!(
                                "hand {hand_id}: decision query for {player_id}: {e}"
                            ));
                            break 'battle;
                        }
                    };
                    let (artifact, signature, proposed, parse_fallback, parse_notes) =
                        match parse_first_person(&completion.text) {
                            Ok((artifact, signature)) => {
                                let proposed = artifact.decision;
                                (artifact, signature, Some(proposed), false, Vec::new())
                            }
                            Err(e) => {
                                let forced = if legal.call_amount > 0 {
                                    Action::Fold
                                } else {
                                    Action::Check
                                };
                                let artifact = FirstPersonArtifact::fallback(forced);
                                let signature = signature_of(&artifact);
                                (artifact, signature, None, true, vec![e.to_string()])
                            }
                        };
                    let normalized =
                        normalize_action(proposed.unwrap_or(artifact.decision), &legal);
                    let final_features = finalize_with_action(
                        features,
                        normalized,
                        table.seats[seat].committed_street,
                        pot,
                        table.seats[seat].stack,
                        &manifest.thresholds.risk,
                    );
                    let observation = ObservationSnapshot {
                        hole: hole.to_vec(),
                        board: table.board.clone(),
                        pot,
                        stacks: table
                            .seats
                            .iter()
                            .map(|s| (s.player_id.clone(), s.stack))
                            .collect(),
                        position: ctx.position_text.clone(),
                    };
                    let row = crate::trace::DecisionTrace {
                        key: DecisionKey {
                            battle_id,
                            hand_id,
                            decision_index,
                            player_id: player_id.clone(),
                        },
                        street,
                        seat_index: seat,
                        model_name: agent.model.clone(),
                        observation,
                        legal,
                        proposed,
                        normalized,
                        artifact,
                        signature,
                        profiles: profiles_snapshot,
                        features: final_features,
                        prompt_hash: prompt_hash(&prompt),
                        template_hash: decision_template_hash.to_string(),
                        prompt_context: ctx,
                        parse_fallback,
                        parse_notes,
                        latency_ms: completion.latency_ms,
                        timestamp_ms: 0,
                    };
                    writer
                        .append(&row)
                        .map_err(|e| RunnerError::Data(format!("trace append: {e}")))?;
                    rows_written += 1;
                    decision_index += 1;
                    normalized
                }
            };

            observations
                .entry(player_id.clone())
                .or_default()
                .decisions
                .push(ObservedDecision {
                    street,
                    faced_bet: legal.call_amount > 0,
                    action: normalized,
                    equity: estimate.equity,
                    voluntary: street == Street::Preflop
                        && legal.call_amount > 0
                        && normalized.coarse() != crate::engine::CoarseAction::Fold,
                });

            hand.apply(seat, normalized)
                .map_err(|e| RunnerError::Data(format!("apply: {e}")))?;
        }

        if aborted.is_some() {
            break;
        }
        let outcome = hand
            .outcome()
            .cloned()
            .ok_or_else(|| RunnerError::Data("finished hand without outcome".to_string()))?;

        let mut net = BTreeMap::new();
        for (i, seat) in hand.table.seats.iter().enumerate() {
            net.insert(seat.player_id.clone(), outcome.net[i]);
            stacks[i] = seat.stack;
            let mut obs = observations.remove(&seat.player_id).unwrap_or_default();
            obs.reached_showdown = outcome.showdown && !seat.folded && seat.hole.is_some();
            obs.won_without_showdown = !outcome.showdown && outcome.net[i] > 0;
            if seat.hole.is_some() {
                update_behavior_counters(
                    counters.get_mut(&seat.player_id).unwrap(),
                    &obs,
                    manifest.thresholds.bluff_equity_max,
                );
            }
        }

        for agent in &mut agents {
            let summary = summary_text_for(agent, &counters);
            let prompt = render_profiling_prompt(&summary)
                .map_err(|e| RunnerError::Data(format!("render profiling: {e}")))?;
            let completion = match agent.backend.complete(Role::Profiling, &prompt) {
                Ok(c) => c,
                Err(e) => {
                    aborted = Some(format!(
                        "hand {hand_id}: profiling query for {}: {e}",
                        agent.player_id
                    ));
                    break;
                }
            };
            match crate::protocol::profiles::parse_opponent_profile(&completion.text) {
                Ok(blocks) => {
                    for block in blocks {
                        let Some(id) = block.opponent_id else { continue };
                        let Some(current) = agent.profiles.get(&id) else {
                            continue;
                        };
                        let updated = crate::beliefs::apply_bounded_update(
                            current,
                            &block.proposal,
                            u64::from(hand_id) + 1,
                            PROFILE_STEP,
                        );
                        agent.profiles.insert(id, updated);
                    }
                }
                // No block at all is the skip signal: keep the prior read.
                Err(_) => {}
            }
        }
        if aborted.is_some() {
            break;
        }

        let events: Vec<ActionEvent> = hand
            .table
            .history
            .iter()
            .map(|e: &HistoryEntry| ActionEvent {
                player_id: hand.table.seats[e.seat].player_id.clone(),
                street: e.street,
                action: e.action,
                paid: e.paid,
            })
            .collect();
        let record = HandRecord {
            battle_id,
            hand_id,
            button,
            events,
            net,
            showdown: outcome.showdown,
            counters_after: counters.clone(),
            profiles_after: agents
                .iter()
                .map(|a| {
                    (
                        a.player_id.clone(),
                        a.profiles
                            .iter()
                            .map(|(id, p)| (id.clone(), p.traits))
                            .collect(),
                    )
                })
                .collect(),
            stacks_after: player_ids
                .iter()
                .zip(&stacks)
                .map(|(id, s)| (id.clone(), *s))
                .collect(),
        };
        serde_json::to_writer(&mut hands_out, &record)
            .map_err(|e| RunnerError::Data(format!("hand record: {e}")))?;
        hands_out
            .write_all(b"\n")
            .map_err(|e| RunnerError::io(&hands_file, e))?;

        hands_played += 1;
        button = next_funded_seat(&stacks, button).unwrap_or(button);
    }

    writer
        .finish()
        .map_err(|e| RunnerError::Data(format!("trace finish: {e}")))?;
    hands_out.flush().map_err(|e| RunnerError::io(&hands_file, e))?;

    Ok(BattleSummary {
        battle_id,
        hands: hands_played,
        rows: rows_written,
        aborted,
        final_stacks: player_ids
            .iter()
            .zip(&stacks)
            .map(|(id, s)| (id.clone(), *s))
            .collect(),
    })
}
