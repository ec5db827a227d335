//! Stage orchestration behind the CLI: play, audit, intervene, metrics,
//! report. Each stage reads only files the earlier stages wrote, stamps its
//! completion with the run identity hash, and re-running a completed stage
//! with the same inputs is a no-op.

mod battle;
pub mod house;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{
    classify_outcome, oracle_audit_first_person, oracle_audit_second_person, reference_directions,
    rule_audit, AuditError, RuleAuditInput, RuleAuditReport, SecondPersonData,
};
use crate::baselines::ground_truth_traits;
use crate::beliefs::{intervene_value, Direction, OpponentProfile, Trait, TraitVector};
use crate::client::{prompt_hash, ClientError, HttpBackend, ModelBackend, Role};
use crate::config::{expected_shift, ConfigError, ExpectedShift, RunManifest, SeatAssignment};
use crate::engine::{normalize_action, Action, CoarseAction};
use crate::features::{behavior_stats, windowed_delta, BehaviorCounters, BehaviorStats};
use crate::metrics::{
    aggregate_runs, change_rates, cohens_kappa_quadratic, convergence_curve, radar_dimensions,
    spearman_xy, trait_proxy_alignment, AlignmentTable, ChangeRateSummary, ConvergencePoint,
    MetricError, RadarInput, RunAggregate, StratInput, StratifyBy, StratumRow,
};
use crate::protocol::first_person::emit_canonical;
use crate::protocol::{
    cards_text, opponent_profiles_text, render_decision_prompt, risk_features_text, sha256_hex,
    OracleFirstContext,
};
use crate::trace::{
    audit_path, battle_path, read_audit_file, read_trace_file, run_dir as run_dir_name,
    AuditPayload, AuditRecord, AuditWriter, AuditorId, DecisionKey, DecisionTrace, TraceError,
};

pub use battle::{
    battle_rng, hands_path, read_hand_records, run_battle, ActionEvent, BattleSummary, HandRecord,
};
pub use house::HouseBackend;

/// Stage failures carry the exit-code class the CLI reports: configuration
/// problems, transport problems talking to a model, and bad or missing data.
#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("no backend registered for model {0}")]
    MissingBackend(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("data: {0}")]
    Data(String),
    #[error("io {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;
pub const EXIT_DATA: i32 = 4;

impl RunnerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) | RunnerError::MissingBackend(_) => EXIT_CONFIG,
            RunnerError::Transport(_) => EXIT_TRANSPORT,
            RunnerError::Data(_) | RunnerError::Io { .. } => EXIT_DATA,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> RunnerError {
        RunnerError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<TraceError> for RunnerError {
    fn from(e: TraceError) -> RunnerError {
        RunnerError::Data(e.to_string())
    }
}

impl From<ClientError> for RunnerError {
    fn from(e: ClientError) -> RunnerError {
        RunnerError::Transport(e.to_string())
    }
}

impl From<MetricError> for RunnerError {
    fn from(e: MetricError) -> RunnerError {
        RunnerError::Data(e.to_string())
    }
}

/// Model name to backend. Backends are shared across worker threads.
#[derive(Default)]
pub struct SharedBackends {
    map: BTreeMap<String, Arc<dyn ModelBackend>>,
}

impl SharedBackends {
    pub fn new() -> SharedBackends {
        SharedBackends::default()
    }

    pub fn register(&mut self, backend: Arc<dyn ModelBackend>) {
        self.map.insert(backend.model_name().to_string(), backend);
    }

    pub fn get(&self, model: &str) -> Result<&Arc<dyn ModelBackend>, RunnerError> {
        self.map
            .get(model)
            .ok_or_else(|| RunnerError::MissingBackend(model.to_string()))
    }

    pub fn models(&self) -> Vec<String> {
        self.map.keys().cloned().collect()
    }
}

/// Every model the manifest names, answered by the deterministic house
/// backend. The offline pipeline touches no network by construction.
pub fn offline_backends(manifest: &RunManifest) -> SharedBackends {
    let mut reg = SharedBackends::new();
    for seat in &manifest.seats {
        if let SeatAssignment::Llm { model, .. } = seat {
            reg.register(Arc::new(HouseBackend::new(model.clone())));
        }
    }
    for oracle in &manifest.oracles {
        reg.register(Arc::new(HouseBackend::new(oracle.clone())));
    }
    reg
}

/// HTTP backends for every configured endpoint. Keys come only from the
/// environment variables the endpoints name.
pub fn online_backends(manifest: &RunManifest) -> Result<SharedBackends, RunnerError> {
    let mut reg = SharedBackends::new();
    for (model, endpoint) in &manifest.endpoints {
        let mut endpoint = endpoint.clone();
        endpoint.model_name = model.clone();
        reg.register(Arc::new(HttpBackend::new(endpoint)));
    }
    Ok(reg)
}

/// Hash over the parts of the manifest that determine gameplay bytes. The
/// oracle list, intervention plan, stage flags, and output location can all
/// change between stages of one run without relocating it.
pub fn run_identity_hash(manifest: &RunManifest) -> String {
    let ident = serde_json::json!({
        "config": manifest.config,
        "thresholds": manifest.thresholds,
        "deductions": manifest.deductions,
        "sign_table": manifest.sign_table,
        "archetype_specs": manifest.archetype_specs,
        "seats": manifest.seats,
        "proxy_set": manifest.proxy_set,
    });
    sha256_hex(ident.to_string().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct StageStamp {
    identity: String,
    detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayReport {
    pub battles: Vec<BattleSummary>,
    pub rows_total: u64,
    pub hands_total: u64,
    pub run_dir: String,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditStageReport {
    pub battles: u32,
    pub rule_rows: u64,
    pub oracle_first: u64,
    pub oracle_second: u64,
    pub oracle_parse_failures: u64,
    pub oracles: Vec<String>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    pub trait_dim: Trait,
    pub direction: Direction,
    pub delta: f64,
    pub runs: u32,
    pub decisions: u64,
    pub per_run: Vec<ChangeRateSummary>,
    pub cr_log_reo: Option<RunAggregate>,
    pub cr_log_rei: Option<RunAggregate>,
    pub cr_reo_rei: Option<RunAggregate>,
    pub delta_fold: Option<RunAggregate>,
    pub delta_call: Option<RunAggregate>,
    pub delta_raise: Option<RunAggregate>,
    /// Aggregated over runs where at least one decision changed.
    pub directional_consistency: Option<RunAggregate>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeShares {
    pub faithful: f64,
    pub uncertain: f64,
    pub rationalized: f64,
    pub labeled: u64,
    pub unlabeled: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: u64,
    pub oracle_models: Vec<String>,
    /// Oracle whose scores feed outcome labels and the agreement numbers:
    /// the alphabetically first model present in the audit files.
    pub primary_oracle: Option<String>,
    pub outcomes_by_model: BTreeMap<String, OutcomeShares>,
    pub stratified: BTreeMap<String, Vec<StratumRow>>,
    pub kappa_rule_vs_oracle: Option<f64>,
    pub spearman_rule_vs_oracle: Option<f64>,
    pub agreement_note: Option<String>,
    /// Per observing agent: strongest proxy per trait with permutation p.
    pub alignment: BTreeMap<String, AlignmentTable>,
    pub alignment_notes: BTreeMap<String, String>,
    /// Per observing agent, per trait: profile-vs-truth rank correlation
    /// after each hand, averaged over battles.
    pub convergence: BTreeMap<String, BTreeMap<String, Vec<ConvergencePoint>>>,
    pub radar: Option<BTreeMap<String, BTreeMap<String, f64>>>,
    pub radar_note: Option<String>,
    pub intervention: Option<InterventionReport>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub files: Vec<String>,
    pub skipped: bool,
}

/// One configured run rooted at its identity-hashed directory.
pub struct Runner {
    pub manifest: RunManifest,
    pub backends: SharedBackends,
    pub run_dir: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunnerError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| RunnerError::Data(format!("serialize {}: {e}", path.display())))?;
    fs::write(path, text).map_err(|e| RunnerError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunnerError> {
    let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| RunnerError::Data(format!("parse {}: {e}", path.display())))
}

impl Runner {
    pub fn new(manifest: RunManifest, backends: SharedBackends) -> Result<Runner, RunnerError> {
        manifest.validate()?;
        let identity = run_identity_hash(&manifest);
        let run_dir = run_dir_name(Path::new(&manifest.out_dir), &identity, manifest.config.seed);
        fs::create_dir_all(&run_dir).map_err(|e| RunnerError::io(&run_dir, e))?;
        let manifest_path = run_dir.join("manifest.toml");
        if !manifest_path.exists() {
            fs::write(&manifest_path, manifest.to_toml())
                .map_err(|e| RunnerError::io(&manifest_path, e))?;
        }
        Ok(Runner {
            manifest,
            backends,
            run_dir,
        })
    }

    fn identity(&self) -> String {
        run_identity_hash(&self.manifest)
    }

    fn stamp_path(&self, stage: &str) -> PathBuf {
        self.run_dir.join(".stamps").join(format!("{stage}.json"))
    }

    fn stamp_matches(&self, stage: &str, detail: &str) -> bool {
        let path = self.stamp_path(stage);
        let Ok(text) = fs::read_to_string(&path) else {
            return false;
        };
        matches!(
            serde_json::from_str::<StageStamp>(&text),
            Ok(stamp) if stamp.identity == self.identity() && stamp.detail == detail
        )
    }

    fn write_stamp(&self, stage: &str, detail: &str) -> Result<(), RunnerError> {
        let path = self.stamp_path(stage);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| RunnerError::io(parent, e))?;
        }
        write_json(
            &path,
            &StageStamp {
                identity: self.identity(),
                detail: detail.to_string(),
            },
        )
    }

    fn battle_ids(&self) -> Result<Vec<u32>, RunnerError> {
        let mut ids = Vec::new();
        let entries = fs::read_dir(&self.run_dir).map_err(|e| RunnerError::io(&self.run_dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| RunnerError::io(&self.run_dir, e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if let Some(rest) = name.strip_prefix("battle-") {
                if let Some(id) = rest.strip_suffix(".jsonl") {
                    if !id.contains('.') {
                        if let Ok(n) = id.parse::<u32>() {
                            ids.push(n);
                        }
                    }
                }
            }
        }
        ids.sort_unstable();
        if ids.is_empty() {
            return Err(RunnerError::Data(format!(
                "no battle traces under {}; run the play stage first",
                self.run_dir.display()
            )));
        }
        Ok(ids)
    }

    fn load_battles(&self) -> Result<Vec<(u32, Vec<DecisionTrace>)>, RunnerError> {
        let mut out = Vec::new();
        for id in self.battle_ids()? {
            let (_, rows) = read_trace_file(&battle_path(&self.run_dir, id))?;
            out.push((id, rows));
        }
        Ok(out)
    }

    /// Plays every battle in parallel. Worker count does not affect the
    /// bytes: each battle owns its RNG stream and its own files.
    pub fn stage_play(&self) -> Result<PlayReport, RunnerError> {
        let cfg = &self.manifest.config;
        let detail = format!("battles={} hands={}", cfg.battles, cfg.hands_per_battle);
        let report_path = self.run_dir.join("play_report.json");
        if self.stamp_matches("play", &detail) && report_path.exists() {
            let mut report: PlayReport = read_json(&report_path)?;
            report.skipped = true;
            return Ok(report);
        }

        let mut battles: Vec<BattleSummary> = (0..cfg.battles)
            .into_par_iter()
            .map(|b| run_battle(&self.manifest, &self.backends, &self.run_dir, b))
            .collect::<Result<_, _>>()?;
        battles.sort_by_key(|b| b.battle_id);

        let report = PlayReport {
            rows_total: battles.iter().map(|b| u64::from(b.rows)).sum(),
            hands_total: battles.iter().map(|b| u64::from(b.hands)).sum(),
            run_dir: self.run_dir.display().to_string(),
            battles,
            skipped: false,
        };
        write_json(&report_path, &report)?;
        self.write_stamp("play", &detail)?;
        Ok(report)
    }

    /// Rule-audits every decision row, then runs each configured oracle over
    /// the first- and second-person rubrics. The rule stream never touches a
    /// backend, so an empty oracle list keeps this stage fully offline.
    pub fn stage_audit(&self) -> Result<AuditStageReport, RunnerError> {
        let mut oracles = self.manifest.oracles.clone();
        oracles.sort();
        let detail = format!("oracles={}", oracles.join(","));
        let report_path = self.run_dir.join("audit_report.json");
        if self.stamp_matches("audit", &detail) && report_path.exists() {
            let mut report: AuditStageReport = read_json(&report_path)?;
            report.skipped = true;
            return Ok(report);
        }

        let thresholds = &self.manifest.thresholds;
        let deductions = &self.manifest.deductions;
        let mut rule_rows = 0u64;
        let mut oracle_first = 0u64;
        let mut oracle_second = 0u64;
        let mut parse_failures = 0u64;
        let ids = self.battle_ids()?;

        for &battle_id in &ids {
            let (_, rows) = read_trace_file(&battle_path(&self.run_dir, battle_id))?;
            let records = read_hand_records(&hands_path(&self.run_dir, battle_id))?;
            let out_path = audit_path(&self.run_dir, battle_id);
            let mut writer = AuditWriter::create(&out_path)?;

            for row in &rows {
                let report = rule_audit(
                    &RuleAuditInput {
                        artifact: &row.artifact,
                        proposed: row.proposed,
                        normalized: row.normalized,
                        legal: &row.legal,
                        features: &row.features,
                    },
                    thresholds,
                    deductions,
                );
                writer.append(&AuditRecord {
                    key: row.key.clone(),
                    auditor: AuditorId::Rule,
                    payload: AuditPayload::Rule(report),
                    timestamp_ms: 0,
                })?;
                rule_rows += 1;
            }

            for oracle in &oracles {
                let backend = self.backends.get(oracle)?;
                for row in &rows {
                    let ctx = oracle_first_context(row);
                    match oracle_audit_first_person(backend.as_ref(), &ctx) {
                        Ok(audit) => {
                            writer.append(&AuditRecord {
                                key: row.key.clone(),
                                auditor: AuditorId::Oracle {
                                    model: oracle.clone(),
                                },
                                payload: AuditPayload::OracleFirst(audit),
                                timestamp_ms: 0,
                            })?;
                            oracle_first += 1;
                        }
                        Err(AuditError::Transport(e)) => {
                            return Err(RunnerError::Transport(e.to_string()))
                        }
                        Err(e) => {
                            writer.append(&AuditRecord {
                                key: row.key.clone(),
                                auditor: AuditorId::Oracle {
                                    model: oracle.clone(),
                                },
                                payload: AuditPayload::Missing {
                                    reason: e.to_string(),
                                },
                                timestamp_ms: 0,
                            })?;
                            parse_failures += 1;
                        }
                    }
                }

                oracle_second += self.second_person_audits(
                    &mut writer,
                    battle_id,
                    &records,
                    oracle,
                    &mut parse_failures,
                )?;
            }
        }

        let report = AuditStageReport {
            battles: ids.len() as u32,
            rule_rows,
            oracle_first,
            oracle_second,
            oracle_parse_failures: parse_failures,
            oracles,
            skipped: false,
        };
        write_json(&report_path, &report)?;
        self.write_stamp("audit", &detail)?;
        Ok(report)
    }

    /// One profile-accuracy audit per agent at the end of each battle.
    fn second_person_audits(
        &self,
        writer: &mut AuditWriter,
        battle_id: u32,
        records: &[HandRecord],
        oracle: &str,
        parse_failures: &mut u64,
    ) -> Result<u64, RunnerError> {
        let Some(last) = records.last() else {
            return Ok(0);
        };
        let backend = self.backends.get(oracle)?;
        let mut written = 0u64;
        for (agent_id, profiles) in &last.profiles_after {
            if profiles.is_empty() {
                continue;
            }
            let mut windows: Vec<(u64, BTreeMap<String, BehaviorStats>)> = Vec::new();
            for &k in &self.manifest.thresholds.windows {
                let mut per_opp = BTreeMap::new();
                for id in profiles.keys() {
                    let now = &last.counters_after[id];
                    let stats = if (k as usize) < records.len() {
                        let prev = &records[records.len() - 1 - k as usize].counters_after[id];
                        windowed_delta(now, prev).ok()
                    } else {
                        Some(behavior_stats(now))
                    };
                    if let Some(s) = stats {
                        per_opp.insert(id.clone(), s);
                    }
                }
                windows.push((k, per_opp));
            }
            let objective: BTreeMap<String, TraitVector> = profiles
                .keys()
                .map(|id| {
                    (
                        id.clone(),
                        ground_truth_traits(&behavior_stats(&last.counters_after[id])),
                    )
                })
                .collect();
            let reference = reference_directions(
                &Trait::ALL,
                profiles,
                &objective,
                self.manifest.thresholds.rank_tie_tolerance,
            )
            .map_err(|e| RunnerError::Data(e.to_string()))?;
            let data = SecondPersonData {
                hand_id: u64::from(last.hand_id),
                focal_trait: None,
                profiles,
                windows: &windows,
            };
            // Profile audits attach to the hand, not to a decision; the
            // sentinel index keeps their keys clear of decision rows.
            let key = DecisionKey {
                battle_id,
                hand_id: last.hand_id,
                decision_index: u32::MAX,
                player_id: agent_id.clone(),
            };
            match oracle_audit_second_person(backend.as_ref(), &data) {
                Ok(audit) => {
                    writer.append(&AuditRecord {
                        key,
                        auditor: AuditorId::Oracle {
                            model: oracle.to_string(),
                        },
                        payload: AuditPayload::OracleSecond { audit, reference },
                        timestamp_ms: 0,
                    })?;
                    written += 1;
                }
                Err(AuditError::Transport(e)) => {
                    return Err(RunnerError::Transport(e.to_string()));
                }
                Err(e) => {
                    writer.append(&AuditRecord {
                        key,
                        auditor: AuditorId::Oracle {
                            model: oracle.to_string(),
                        },
                        payload: AuditPayload::Missing {
                            reason: e.to_string(),
                        },
                        timestamp_ms: 0,
                    })?;
                    *parse_failures += 1;
                }
            }
        }
        Ok(written)
    }

    /// Re-queries every logged decision twice per run: once with the exact
    /// logged prompt (ReO) and once with only the focal trait's rendered
    /// numbers shifted through the logit intervention (ReI).
    pub fn stage_intervene(&self) -> Result<InterventionReport, RunnerError> {
        let plan = &self.manifest.intervention;
        let detail = format!(
            "trait={} direction={:?} runs={} delta={}",
            plan.trait_dim.snake_name(),
            plan.direction,
            plan.runs,
            plan.delta
        );
        let report_path = self.run_dir.join("intervention_report.json");
        if self.stamp_matches("intervene", &detail) && report_path.exists() {
            let mut report: InterventionReport = read_json(&report_path)?;
            report.skipped = true;
            return Ok(report);
        }

        let battles = self.load_battles()?;
        let mut log: BTreeMap<DecisionKey, CoarseAction> = BTreeMap::new();
        let mut expected: BTreeMap<DecisionKey, ExpectedShift> = BTreeMap::new();
        let mut prepared: Vec<PreparedQuery> = Vec::new();
        for (_, rows) in &battles {
            for row in rows {
                let prompt = render_decision_prompt(&row.prompt_context)
                    .map_err(|e| RunnerError::Data(format!("render: {e}")))?;
                if prompt_hash(&prompt) != row.prompt_hash {
                    return Err(RunnerError::Data(format!(
                        "prompt reconstruction hash mismatch at {:?}; the template or renderer no longer matches the trace",
                        row.key
                    )));
                }
                let shift = expected_shift(
                    &self.manifest.sign_table,
                    plan.trait_dim,
                    plan.direction,
                    row.features.hand_strength_bucket,
                )
                .ok_or_else(|| {
                    RunnerError::Data(format!(
                        "sign table has no row for {} {:?} {}",
                        plan.trait_dim.snake_name(),
                        plan.direction,
                        row.features.hand_strength_bucket.label()
                    ))
                })?;
                log.insert(row.key.clone(), row.normalized.coarse());
                expected.insert(row.key.clone(), shift);

                let mut shifted = row.profiles.clone();
                for profile in shifted.values_mut() {
                    let p = profile.traits.get(plan.trait_dim);
                    profile
                        .traits
                        .set(plan.trait_dim, intervene_value(p, plan.delta, plan.direction));
                }
                let refs: Vec<&OpponentProfile> = shifted.values().collect();
                let mut shifted_ctx = row.prompt_context.clone();
                shifted_ctx.opponent_profiles_text = opponent_profiles_text(&refs);
                let shifted_prompt = render_decision_prompt(&shifted_ctx)
                    .map_err(|e| RunnerError::Data(format!("render: {e}")))?;
                prepared.push(PreparedQuery {
                    key: row.key.clone(),
                    model: row.model_name.clone(),
                    legal: row.legal,
                    base_prompt: prompt,
                    shifted_prompt,
                });
            }
        }
        if prepared.is_empty() {
            return Err(RunnerError::Data(
                "no logged decisions to intervene on".to_string(),
            ));
        }

        let mut per_run = Vec::with_capacity(plan.runs as usize);
        for _ in 0..plan.runs {
            let mut reo = BTreeMap::new();
            let mut rei = BTreeMap::new();
            for q in &prepared {
                let backend = self.backends.get(&q.model)?;
                reo.insert(q.key.clone(), self.requery(backend.as_ref(), q, false)?);
                rei.insert(q.key.clone(), self.requery(backend.as_ref(), q, true)?);
            }
            let summary = change_rates(&log, &reo, &rei, &expected)?;
            per_run.push(summary);
        }

        let collect = |f: fn(&ChangeRateSummary) -> f64| -> Option<RunAggregate> {
            aggregate_runs(&per_run.iter().map(f).collect::<Vec<_>>())
        };
        let consistency: Vec<f64> = per_run
            .iter()
            .filter_map(|r| r.directional_consistency)
            .collect();
        let report = InterventionReport {
            trait_dim: plan.trait_dim,
            direction: plan.direction,
            delta: plan.delta,
            runs: plan.runs,
            decisions: prepared.len() as u64,
            cr_log_reo: collect(|r| r.cr_log_reo),
            cr_log_rei: collect(|r| r.cr_log_rei),
            cr_reo_rei: collect(|r| r.cr_reo_rei),
            delta_fold: collect(|r| r.delta_fold),
            delta_call: collect(|r| r.delta_call),
            delta_raise: collect(|r| r.delta_raise),
            directional_consistency: aggregate_runs(&consistency),
            per_run,
            skipped: false,
        };
        write_json(&report_path, &report)?;
        self.write_stamp("intervene", &detail)?;
        Ok(report)
    }

    fn requery(
        &self,
        backend: &dyn ModelBackend,
        q: &PreparedQuery,
        shifted: bool,
    ) -> Result<CoarseAction, RunnerError> {
        let prompt = if shifted {
            &q.shifted_prompt
        } else {
            &q.base_prompt
        };
        let completion = backend.complete(Role::Decision, prompt)?;
        let proposed = match crate::protocol::first_person::parse_first_person(&completion.text) {
            Ok((artifact, _)) => artifact.decision,
            Err(_) => {
                if q.legal.call_amount > 0 {
                    Action::Fold
                } else {
                    Action::Check
                }
            }
        };
        Ok(normalize_action(proposed, &q.legal).coarse())
    }

    /// Computes the whole metrics battery offline from trace and audit
    /// files; nothing here queries a model.
    pub fn stage_metrics(&self) -> Result<MetricsReport, RunnerError> {
        let detail = "metrics".to_string();
        let report_path = self.run_dir.join("metrics_report.json");
        if self.stamp_matches("metrics", &detail) && report_path.exists() {
            let mut report: MetricsReport = read_json(&report_path)?;
            report.skipped = true;
            return Ok(report);
        }

        let battles = self.load_battles()?;
        let ids: Vec<u32> = battles.iter().map(|(id, _)| *id).collect();

        let mut rule: BTreeMap<DecisionKey, RuleAuditReport> = BTreeMap::new();
        let mut oracle_overall: BTreeMap<String, BTreeMap<DecisionKey, u8>> = BTreeMap::new();
        let mut oracle_reports: BTreeMap<DecisionKey, crate::audit::FirstPersonAudit> =
            BTreeMap::new();
        let mut oracle_models: BTreeSet<String> = BTreeSet::new();
        for &id in &ids {
            let path = audit_path(&self.run_dir, id);
            if !path.exists() {
                return Err(RunnerError::Data(format!(
                    "missing audit file {}; run the audit stage first",
                    path.display()
                )));
            }
            for record in read_audit_file(&path)? {
                match record.payload {
                    AuditPayload::Rule(report) => {
                        rule.insert(record.key, report);
                    }
                    AuditPayload::OracleFirst(audit) => {
                        let model = audit.oracle_model.clone();
                        oracle_models.insert(model.clone());
                        oracle_overall
                            .entry(model)
                            .or_default()
                            .insert(record.key.clone(), audit.report.overall_faithfulness);
                        oracle_reports.entry(record.key).or_insert(audit);
                    }
                    AuditPayload::OracleSecond { .. } | AuditPayload::Missing { .. } => {}
                }
            }
        }
        let primary_oracle = oracle_models.iter().next().cloned();

        let mut strat_rows: Vec<StratInput> = Vec::new();
        let mut outcome_count: BTreeMap<String, (u64, u64, u64, u64)> = BTreeMap::new();
        let mut kappa_pairs: Vec<(u8, u8)> = Vec::new();
        let mut fallback_by_model: BTreeMap<String, (u64, u64)> = BTreeMap::new();
        for (_, rows) in &battles {
            for row in rows {
                let rule_report = rule.get(&row.key);
                let oracle_report = primary_oracle
                    .as_ref()
                    .and_then(|_| oracle_reports.get(&row.key))
                    .map(|a| &a.report);
                let outcome = classify_outcome(rule_report, oracle_report);
                let oracle_score = oracle_report.map(|r| r.overall_faithfulness);
                let rule_score = rule_report.map(|r| r.rule_score);
                if let (Some(a), Some(b)) = (rule_score, oracle_score) {
                    kappa_pairs.push((a, b));
                }
                strat_rows.push(StratInput {
                    street: row.street,
                    bucket: row.features.hand_strength_bucket,
                    action: row.normalized.coarse(),
                    high_risk: row.features.high_risk,
                    model: row.model_name.clone(),
                    rule_score,
                    oracle_overall: oracle_score,
                    outcome,
                });
                let slot = outcome_count.entry(row.model_name.clone()).or_default();
                match outcome {
                    Some(crate::audit::OutcomeLabel::Faithful) => slot.0 += 1,
                    Some(crate::audit::OutcomeLabel::Uncertain) => slot.1 += 1,
                    Some(crate::audit::OutcomeLabel::Rationalized) => slot.2 += 1,
                    None => slot.3 += 1,
                }
                let f = fallback_by_model.entry(row.model_name.clone()).or_default();
                f.1 += 1;
                if row.parse_fallback {
                    f.0 += 1;
                }
            }
        }

        let outcomes_by_model = outcome_count
            .into_iter()
            .map(|(model, (fa, un, ra, none))| {
                let labeled = fa + un + ra;
                let d = labeled.max(1) as f64;
                (
                    model,
                    OutcomeShares {
                        faithful: fa as f64 / d,
                        uncertain: un as f64 / d,
                        rationalized: ra as f64 / d,
                        labeled,
                        unlabeled: none,
                    },
                )
            })
            .collect();

        let mut stratified = BTreeMap::new();
        for (name, by) in [
            ("street", StratifyBy::Street),
            ("risk", StratifyBy::Risk),
            ("model", StratifyBy::Model),
            ("bucket", StratifyBy::Bucket),
            ("action", StratifyBy::ActionKind),
        ] {
            stratified.insert(
                name.to_string(),
                crate::metrics::stratified_summary(&strat_rows, by),
            );
        }

        let mut agreement_note = None;
        let (kappa, spearman) = if kappa_pairs.len() >= 2 {
            let a: Vec<u8> = kappa_pairs.iter().map(|p| p.0).collect();
            let b: Vec<u8> = kappa_pairs.iter().map(|p| p.1).collect();
            let kappa = match cohens_kappa_quadratic(&a, &b, 5) {
                Ok(v) => Some(v),
                Err(e) => {
                    agreement_note = Some(e.to_string());
                    None
                }
            };
            let xf: Vec<f64> = a.iter().map(|v| f64::from(*v)).collect();
            let yf: Vec<f64> = b.iter().map(|v| f64::from(*v)).collect();
            let rho = match spearman_xy(&xf, &yf) {
                Ok(v) => Some(v),
                Err(e) => {
                    if agreement_note.is_none() {
                        agreement_note = Some(e.to_string());
                    }
                    None
                }
            };
            (kappa, rho)
        } else {
            if primary_oracle.is_some() {
                agreement_note = Some("fewer than two rows carry both scores".to_string());
            }
            (None, None)
        };

        // Profile quality: pooled over battles per observing agent.
        let mut records_by_battle: Vec<Vec<HandRecord>> = Vec::new();
        for &id in &ids {
            records_by_battle.push(read_hand_records(&hands_path(&self.run_dir, id))?);
        }
        let agents: Vec<String> = self
            .manifest
            .seats
            .iter()
            .filter_map(|s| match s {
                SeatAssignment::Llm { player_id, .. } => Some(player_id.clone()),
                SeatAssignment::Archetype { .. } => None,
            })
            .collect();

        let mut alignment = BTreeMap::new();
        let mut alignment_notes = BTreeMap::new();
        let mut convergence = BTreeMap::new();
        for agent in &agents {
            let mut pooled: BTreeMap<String, BehaviorCounters> = BTreeMap::new();
            let mut final_profiles: BTreeMap<String, Vec<TraitVector>> = BTreeMap::new();
            let mut per_battle_rounds: Vec<Vec<BTreeMap<String, BTreeMap<String, f64>>>> =
                Vec::new();
            for records in &records_by_battle {
                let Some(last) = records.last() else { continue };
                let Some(profiles) = last.profiles_after.get(agent) else {
                    continue;
                };
                for (id, tv) in profiles {
                    final_profiles.entry(id.clone()).or_default().push(*tv);
                    add_counters(
                        pooled.entry(id.clone()).or_default(),
                        &last.counters_after[id],
                    );
                }
                let rounds: Vec<BTreeMap<String, BTreeMap<String, f64>>> = records
                    .iter()
                    .filter_map(|r| r.profiles_after.get(agent))
                    .map(|profiles| {
                        profiles
                            .iter()
                            .map(|(id, tv)| {
                                (
                                    id.clone(),
                                    Trait::ALL
                                        .iter()
                                        .map(|t| (t.snake_name().to_string(), tv.get(*t)))
                                        .collect(),
                                )
                            })
                            .collect()
                    })
                    .collect();
                per_battle_rounds.push(rounds);
            }
            if pooled.is_empty() {
                continue;
            }
            let stats: BTreeMap<String, BehaviorStats> = pooled
                .iter()
                .map(|(id, c)| (id.clone(), behavior_stats(c)))
                .collect();
            let mean_profiles: BTreeMap<String, TraitVector> = final_profiles
                .iter()
                .map(|(id, list)| (id.clone(), mean_traits(list)))
                .collect();

            let mut rng = battle_rng(self.manifest.config.seed, u32::MAX);
            match trait_proxy_alignment(&mean_profiles, &stats, &self.manifest.proxy_set, &mut rng)
            {
                Ok(table) => {
                    alignment.insert(agent.clone(), table);
                }
                Err(e) => {
                    alignment_notes.insert(agent.clone(), e.to_string());
                }
            }

            let truth_full: BTreeMap<String, TraitVector> = stats
                .iter()
                .map(|(id, s)| (id.clone(), ground_truth_traits(s)))
                .collect();
            let mut curves = BTreeMap::new();
            for t in Trait::ALL {
                let rounds: Vec<Vec<BTreeMap<String, f64>>> = per_battle_rounds
                    .iter()
                    .map(|battle| {
                        battle
                            .iter()
                            .map(|round| {
                                round
                                    .iter()
                                    .map(|(id, traits)| (id.clone(), traits[t.snake_name()]))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                let truth: BTreeMap<String, f64> = truth_full
                    .iter()
                    .map(|(id, tv)| (id.clone(), tv.get(t)))
                    .collect();
                curves.insert(
                    t.snake_name().to_string(),
                    convergence_curve(&rounds, &truth),
                );
            }
            convergence.insert(agent.clone(), curves);
        }

        // Radar needs at least two models to rank against each other.
        let models: BTreeSet<String> = strat_rows.iter().map(|r| r.model.clone()).collect();
        let (radar, radar_note) = if models.len() >= 2 {
            let inputs: Vec<RadarInput> = models
                .iter()
                .map(|model| {
                    let rows: Vec<&StratInput> =
                        strat_rows.iter().filter(|r| &r.model == model).collect();
                    let rule_scores: Vec<f64> = rows
                        .iter()
                        .filter_map(|r| r.rule_score.map(f64::from))
                        .collect();
                    let labeled: Vec<&&StratInput> =
                        rows.iter().filter(|r| r.outcome.is_some()).collect();
                    let faithful = labeled
                        .iter()
                        .filter(|r| r.outcome == Some(crate::audit::OutcomeLabel::Faithful))
                        .count();
                    let (fallbacks, total) = fallback_by_model[model];
                    let mut values = BTreeMap::new();
                    values.insert(
                        "mean_rule_score".to_string(),
                        mean_or(&rule_scores, 0.0),
                    );
                    values.insert(
                        "faithful_share".to_string(),
                        faithful as f64 / labeled.len().max(1) as f64,
                    );
                    values.insert(
                        "parse_clean_rate".to_string(),
                        1.0 - fallbacks as f64 / total.max(1) as f64,
                    );
                    RadarInput {
                        model: model.clone(),
                        values,
                    }
                })
                .collect();
            match radar_dimensions(&inputs, &BTreeSet::new()) {
                Ok(map) => (Some(map), None),
                Err(e) => (None, Some(e.to_string())),
            }
        } else {
            (
                None,
                Some("radar needs at least two models in the run".to_string()),
            )
        };

        let intervention_path = self.run_dir.join("intervention_report.json");
        let intervention = if intervention_path.exists() {
            Some(read_json::<InterventionReport>(&intervention_path)?)
        } else {
            None
        };

        let report = MetricsReport {
            rows: strat_rows.len() as u64,
            oracle_models: oracle_models.into_iter().collect(),
            primary_oracle,
            outcomes_by_model,
            stratified,
            kappa_rule_vs_oracle: kappa,
            spearman_rule_vs_oracle: spearman,
            agreement_note,
            alignment,
            alignment_notes,
            convergence,
            radar,
            radar_note,
            intervention,
            skipped: false,
        };
        write_json(&report_path, &report)?;
        self.write_stamp("metrics", &detail)?;
        Ok(report)
    }

    /// Renders the metrics report into CSV tables and an SVG outcome plot
    /// under `report/`.
    pub fn stage_report(&self) -> Result<ReportFiles, RunnerError> {
        let detail = "report".to_string();
        let listing_path = self.run_dir.join("report").join("files.json");
        if self.stamp_matches("report", &detail) && listing_path.exists() {
            let mut listing: ReportFiles = read_json(&listing_path)?;
            listing.skipped = true;
            return Ok(listing);
        }

        let metrics_path = self.run_dir.join("metrics_report.json");
        if !metrics_path.exists() {
            return Err(RunnerError::Data(format!(
                "missing {}; run the metrics stage first",
                metrics_path.display()
            )));
        }
        let metrics: MetricsReport = read_json(&metrics_path)?;
        let dir = self.run_dir.join("report");
        fs::create_dir_all(&dir).map_err(|e| RunnerError::io(&dir, e))?;

        let mut files = Vec::new();
        for (axis, rows) in &metrics.stratified {
            let path = dir.join(format!("stratified_{axis}.csv"));
            fs::write(&path, stratified_csv(rows)).map_err(|e| RunnerError::io(&path, e))?;
            files.push(path.display().to_string());
        }
        let path = dir.join("alignment.csv");
        fs::write(&path, alignment_csv(&metrics.alignment))
            .map_err(|e| RunnerError::io(&path, e))?;
        files.push(path.display().to_string());

        let path = dir.join("convergence.csv");
        fs::write(&path, convergence_csv(&metrics.convergence))
            .map_err(|e| RunnerError::io(&path, e))?;
        files.push(path.display().to_string());

        let path = dir.join("outcomes.svg");
        fs::write(&path, outcome_svg(&metrics)).map_err(|e| RunnerError::io(&path, e))?;
        files.push(path.display().to_string());

        if let Some(radar) = &metrics.radar {
            let path = dir.join("radar.csv");
            fs::write(&path, radar_csv(radar)).map_err(|e| RunnerError::io(&path, e))?;
            files.push(path.display().to_string());
        }

        let listing = ReportFiles {
            files,
            skipped: false,
        };
        write_json(&listing_path, &listing)?;
        self.write_stamp("report", &detail)?;
        Ok(listing)
    }

    /// Convenience pipeline honoring the manifest's stage flags.
    pub fn run_pipeline(&self) -> Result<(), RunnerError> {
        let stages = &self.manifest.stages;
        if stages.play {
            self.stage_play()?;
        }
        if stages.audit {
            self.stage_audit()?;
        }
        if stages.intervene {
            self.stage_intervene()?;
        }
        if stages.metrics {
            self.stage_metrics()?;
        }
        if stages.report {
            self.stage_report()?;
        }
        Ok(())
    }
}

struct PreparedQuery {
    key: DecisionKey,
    model: String,
    legal: crate::engine::LegalActionSet,
    base_prompt: String,
    shifted_prompt: String,
}

fn mean_or(values: &[f64], when_empty: f64) -> f64 {
    if values.is_empty() {
        when_empty
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn mean_traits(list: &[TraitVector]) -> TraitVector {
    let mut out = TraitVector::default();
    for t in Trait::ALL {
        let mean = list.iter().map(|tv| tv.get(t)).sum::<f64>() / list.len().max(1) as f64;
        out.set(t, mean);
    }
    out
}

fn add_counters(into: &mut BehaviorCounters, from: &BehaviorCounters) {
    into.hands_seen += from.hands_seen;
    into.hands_voluntary += from.hands_voluntary;
    into.hands_preflop_raise += from.hands_preflop_raise;
    into.decision_points += from.decision_points;
    into.postflop_bets_raises += from.postflop_bets_raises;
    into.postflop_calls += from.postflop_calls;
    into.faced_bet_points += from.faced_bet_points;
    into.folds_vs_bet += from.folds_vs_bet;
    into.calls_vs_bet += from.calls_vs_bet;
    into.raises_vs_bet += from.raises_vs_bet;
    into.bluff_attempts += from.bluff_attempts;
    into.bluff_successes += from.bluff_successes;
    into.showdowns += from.showdowns;
}

/// Everything the first-person oracle prompt needs, pulled from one row.
fn oracle_first_context(row: &DecisionTrace) -> OracleFirstContext {
    let reasoning = emit_canonical(&row.artifact);
    let body = reasoning
        .strip_prefix("[SELF-EXPLANATION]\n")
        .unwrap_or(&reasoning);
    let body = body
        .split("[/SELF-EXPLANATION]")
        .next()
        .unwrap_or(body)
        .trim_end()
        .to_string();
    let refs: Vec<&OpponentProfile> = row.profiles.values().collect();
    OracleFirstContext {
        player: row.key.player_id.clone(),
        round: row.key.hand_id.to_string(),
        street: row.street.label().to_string(),
        hole_cards: cards_text(&row.observation.hole),
        board_cards: cards_text(&row.observation.board),
        pot_size: row.observation.pot,
        call_amount: row.legal.call_amount,
        min_raise: row.legal.min_raise,
        max_raise: row.legal.max_raise,
        position_info: row.observation.position.clone(),
        opp_actions: row.prompt_context.opponent_actions_text.clone(),
        hand_strength: row.features.equity,
        hs_bucket: row.features.hand_strength_bucket.label().to_string(),
        pot_odds: row.features.pot_odds,
        risk_text: risk_features_text(&row.features),
        self_reasoning: body,
        profiles_text: opponent_profiles_text(&refs),
        action_text: action_text(row.normalized, row.legal.call_amount),
    }
}

fn action_text(action: Action, call_amount: u64) -> String {
    match action {
        Action::Fold => "FOLD".to_string(),
        Action::Check => "CHECK".to_string(),
        Action::Call if call_amount == 0 => "CHECK".to_string(),
        Action::Call => format!("CALL {call_amount}"),
        Action::Raise { to } => format!("RAISE to {to}"),
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn stratified_csv(rows: &[StratumRow]) -> String {
    let mut out = String::from(
        "stratum,n,mean_rule,mean_oracle,rationalization_rate,labeled,rho_rule_oracle,high_risk_share\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.stratum,
            r.n,
            csv_opt(r.mean_rule),
            csv_opt(r.mean_oracle),
            csv_opt(r.rationalization_rate),
            r.labeled,
            csv_opt(r.rho_rule_oracle),
            csv_opt(r.high_risk_share),
        ));
    }
    out
}

fn alignment_csv(tables: &BTreeMap<String, AlignmentTable>) -> String {
    let mut out = String::from("agent,trait,proxy,rho,p_value,n,skipped_proxies\n");
    for (agent, table) in tables {
        for row in &table.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{},{}\n",
                agent,
                row.trait_dim.snake_name(),
                row.proxy,
                row.rho,
                row.p_value,
                row.n,
                row.skipped_proxies.join(";"),
            ));
        }
        for t in &table.undefined_traits {
            out.push_str(&format!("{},{},undefined,,,0,\n", agent, t.snake_name()));
        }
    }
    out
}

fn convergence_csv(
    curves: &BTreeMap<String, BTreeMap<String, Vec<ConvergencePoint>>>,
) -> String {
    let mut out = String::from("agent,trait,round,mean_spearman,defined,skipped\n");
    for (agent, by_trait) in curves {
        for (trait_name, points) in by_trait {
            for p in points {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    agent,
                    trait_name,
                    p.round,
                    csv_opt(p.mean_spearman),
                    p.defined,
                    p.skipped,
                ));
            }
        }
    }
    out
}

fn radar_csv(radar: &BTreeMap<String, BTreeMap<String, f64>>) -> String {
    let mut out = String::from("model,dimension,percentile\n");
    for (model, dims) in radar {
        for (dim, pct) in dims {
            out.push_str(&format!("{model},{dim},{pct:.6}\n"));
        }
    }
    out
}

/// Horizontal stacked bars of outcome shares per model. Self-contained SVG
/// with no external references.
fn outcome_svg(metrics: &MetricsReport) -> String {
    const WIDTH: f64 = 720.0;
    const BAR: f64 = 28.0;
    const GAP: f64 = 14.0;
    const LEFT: f64 = 170.0;
    const TOP: f64 = 56.0;
    let span = WIDTH - LEFT - 30.0;
    let models: Vec<&String> = metrics.outcomes_by_model.keys().collect();
    let height = TOP + models.len() as f64 * (BAR + GAP) + 40.0;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\">\n\
         <rect width=\"{WIDTH}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"16\" y=\"24\" font-size=\"16\" fill=\"#222\">Explanation outcomes by model</text>\n\
         <text x=\"16\" y=\"42\" font-size=\"11\" fill=\"#666\">share of labeled decisions: \
         faithful / uncertain / rationalized</text>\n"
    );
    let palette = [
        ("faithful", "#4c9f70"),
        ("uncertain", "#d9b73b"),
        ("rationalized", "#c95252"),
    ];
    for (i, (name, color)) in palette.iter().enumerate() {
        let x = LEFT + i as f64 * 130.0;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"30\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"39\" font-size=\"11\" fill=\"#444\">{name}</text>\n",
            x + 14.0
        ));
    }
    for (i, model) in models.iter().enumerate() {
        let shares = &metrics.outcomes_by_model[*model];
        let y = TOP + i as f64 * (BAR + GAP);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#222\" text-anchor=\"end\">{model}</text>\n",
            LEFT - 10.0,
            y + BAR * 0.65
        ));
        let mut x = LEFT;
        for (share, (_, color)) in [
            shares.faithful,
            shares.uncertain,
            shares.rationalized,
        ]
        .iter()
        .zip(palette.iter())
        {
            let w = share * span;
            if *share > 0.0 {
                svg.push_str(&format!(
                    "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{BAR}\" fill=\"{color}\"/>\n"
                ));
                if w > 44.0 {
                    svg.push_str(&format!(
                        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"white\">{:.0}%</text>\n",
                        x + 6.0,
                        y + BAR * 0.65,
                        share * 100.0
                    ));
                }
            }
            x += w;
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" fill=\"#666\">n={}, unlabeled {}</text>\n",
            LEFT,
            y + BAR + 11.0,
            shares.labeled,
            shares.unlabeled
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_manifest(out_dir: &Path) -> RunManifest {
        let mut manifest = RunManifest::default();
        manifest.config.battles = 2;
        manifest.config.hands_per_battle = 6;
        manifest.config.equity_sims = 200;
        manifest.oracles = vec!["house-oracle".to_string()];
        manifest.intervention.runs = 2;
        manifest.out_dir = out_dir.display().to_string();
        manifest
    }

    #[test]
    fn identity_hash_ignores_stage_only_settings() {
        let base = RunManifest::default();
        let mut other = base.clone();
        other.oracles = vec!["somebody-else".to_string()];
        other.intervention.runs = 99;
        other.out_dir = "elsewhere".to_string();
        other.offline = false;
        assert_eq!(run_identity_hash(&base), run_identity_hash(&other));

        let mut gameplay = base.clone();
        gameplay.config.seed = 8;
        assert_ne!(run_identity_hash(&base), run_identity_hash(&gameplay));
    }

    #[test]
    fn offline_pipeline_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = small_manifest(dir.path());
        let backends = offline_backends(&manifest);
        let runner = Runner::new(manifest.clone(), backends).unwrap();

        let play = runner.stage_play().unwrap();
        assert_eq!(play.battles.len(), 2);
        assert!(play.rows_total > 0, "agent never acted");
        assert!(play.battles.iter().all(|b| b.aborted.is_none()));
        let replay = runner.stage_play().unwrap();
        assert!(replay.skipped);
        assert_eq!(replay.rows_total, play.rows_total);

        let audit = runner.stage_audit().unwrap();
        assert_eq!(audit.rule_rows, play.rows_total);
        assert_eq!(audit.oracle_first, play.rows_total);
        assert_eq!(audit.oracle_second, 2);
        assert_eq!(audit.oracle_parse_failures, 0);

        let intervene = runner.stage_intervene().unwrap();
        assert_eq!(intervene.decisions, play.rows_total);
        assert_eq!(intervene.per_run.len(), 2);
        let reo = intervene.cr_log_reo.unwrap();
        assert!((0.0..=1.0).contains(&reo.mean));

        let metrics = runner.stage_metrics().unwrap();
        assert_eq!(metrics.rows, play.rows_total);
        assert_eq!(metrics.primary_oracle.as_deref(), Some("house-oracle"));
        assert!(metrics.outcomes_by_model.contains_key("scripted-agent"));
        assert_eq!(metrics.stratified.len(), 5);
        let curves = &metrics.convergence["agent"];
        assert_eq!(curves.len(), 5);
        assert!(metrics.intervention.is_some());
        assert!(metrics.radar.is_none(), "single model cannot rank");

        let report = runner.stage_report().unwrap();
        for name in [
            "stratified_street.csv",
            "stratified_model.csv",
            "alignment.csv",
            "convergence.csv",
            "outcomes.svg",
        ] {
            assert!(
                report.files.iter().any(|f| f.ends_with(name)),
                "missing {name} in {:?}",
                report.files
            );
        }
        for f in &report.files {
            assert!(Path::new(f).exists());
        }
    }

    #[test]
    fn same_seed_runs_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let manifest_a = small_manifest(dir_a.path());
        let mut manifest_b = small_manifest(dir_b.path());
        manifest_b.out_dir = dir_b.path().display().to_string();

        let runner_a = Runner::new(manifest_a.clone(), offline_backends(&manifest_a)).unwrap();
        let runner_b = Runner::new(manifest_b.clone(), offline_backends(&manifest_b)).unwrap();
        runner_a.stage_play().unwrap();
        runner_b.stage_play().unwrap();

        for battle in 0..2 {
            let a = fs::read(battle_path(&runner_a.run_dir, battle)).unwrap();
            let b = fs::read(battle_path(&runner_b.run_dir, battle)).unwrap();
            assert_eq!(a, b, "battle {battle} traces diverge");
            let a = fs::read(hands_path(&runner_a.run_dir, battle)).unwrap();
            let b = fs::read(hands_path(&runner_b.run_dir, battle)).unwrap();
            assert_eq!(a, b, "battle {battle} hand records diverge");
        }
    }
}
