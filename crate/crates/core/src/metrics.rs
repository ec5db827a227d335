//! The statistics battery: rank correlation, weighted agreement, change
//! rates with directional consistency, trait-proxy alignment with
//! permutation p-values, convergence curves, stratified summaries, and
//! rank-percentile radar dimensions.
//!
//! Undefined statistics are explicit signals, never NaN: constant series,
//! degenerate marginals, and empty strata are skipped and counted so every
//! denominator stays auditable.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::OutcomeLabel;
use crate::beliefs::{average_ranks_desc, Trait, TraitVector};
use crate::config::ExpectedShift;
use crate::engine::{CoarseAction, Street};
use crate::features::{BehaviorStats, HandStrengthBucket};
use crate::trace::DecisionKey;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("statistic undefined: {reason}")]
    Undefined { reason: &'static str },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("join keys do not align: {0}")]
    KeyMismatch(String),
}

/// Aligned value pairs with their join keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    pub keys: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PairedSeries {
    /// Joins two keyed maps. Any key present on one side only is a hard
    /// failure: silent inner joins hide alignment bugs.
    pub fn from_maps(
        a: &BTreeMap<String, f64>,
        b: &BTreeMap<String, f64>,
    ) -> Result<PairedSeries, MetricError> {
        if a.keys().ne(b.keys()) {
            let only_a: Vec<&String> = a.keys().filter(|k| !b.contains_key(*k)).collect();
            let only_b: Vec<&String> = b.keys().filter(|k| !a.contains_key(*k)).collect();
            return Err(MetricError::KeyMismatch(format!(
                "only left {only_a:?}, only right {only_b:?}"
            )));
        }
        Ok(PairedSeries {
            keys: a.keys().cloned().collect(),
            x: a.values().copied().collect(),
            y: b.values().copied().collect(),
        })
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Spearman rank correlation: Pearson over average ranks. Ties get the
/// mean of the ranks they span; a constant series has no ranking and is
/// reported undefined rather than silently zero.
pub fn spearman_xy(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::KeyMismatch(format!(
            "series lengths {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(MetricError::TooFewPoints {
            need: 2,
            got: x.len(),
        });
    }
    let rx = average_ranks_desc(x);
    let ry = average_ranks_desc(y);
    pearson(&rx, &ry).ok_or(MetricError::Undefined {
        reason: "constant series",
    })
}

pub fn spearman(pairs: &PairedSeries) -> Result<f64, MetricError> {
    spearman_xy(&pairs.x, &pairs.y)
}

/// Quadratic-weighted Cohen's kappa over ordinal labels 1..=k.
/// w_ij = (i-j)^2 / (k-1)^2; kappa = 1 - sum(w*O) / sum(w*E).
pub fn cohens_kappa_quadratic(a: &[u8], b: &[u8], k: usize) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::KeyMismatch(format!(
            "label vectors {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(MetricError::TooFewPoints {
            need: 2,
            got: a.len(),
        });
    }
    let n = a.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    let mut marg_a = vec![0.0f64; k];
    let mut marg_b = vec![0.0f64; k];
    for (&la, &lb) in a.iter().zip(b.iter()) {
        assert!(
            (1..=k as u8).contains(&la) && (1..=k as u8).contains(&lb),
            "labels must lie in 1..={k}"
        );
        observed[(la - 1) as usize][(lb - 1) as usize] += 1.0 / n;
        marg_a[(la - 1) as usize] += 1.0 / n;
        marg_b[(lb - 1) as usize] += 1.0 / n;
    }
    let denom_sq = ((k - 1) * (k - 1)) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / denom_sq;
            num += w * observed[i][j];
            den += w * marg_a[i] * marg_b[j];
        }
    }
    if den == 0.0 {
        return Err(MetricError::Undefined {
            reason: "degenerate marginals",
        });
    }
    Ok(1.0 - num / den)
}

/// One point of a convergence curve: mean Spearman at a round across the
/// battles where the statistic was defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    /// 1-based hand round within a battle.
    pub round: u32,
    pub mean_spearman: Option<f64>,
    pub defined: usize,
    pub skipped: usize,
}

/// Per-round profile accuracy against a fixed ground-truth ordering.
/// `rounds[b][r]` holds battle b's profiled values per reference opponent
/// after round r+1. Rounds with fewer than two shared opponents, or with
/// a constant ranking, are skipped and counted.
pub fn convergence_curve(
    rounds: &[Vec<BTreeMap<String, f64>>],
    truth: &BTreeMap<String, f64>,
) -> Vec<ConvergencePoint> {
    let max_rounds = rounds.iter().map(Vec::len).max().unwrap_or(0);
    let mut curve = Vec::with_capacity(max_rounds);
    for r in 0..max_rounds {
        let mut values = Vec::new();
        let mut skipped = 0;
        for battle in rounds {
            let Some(profiled) = battle.get(r) else {
                skipped += 1;
                continue;
            };
            let shared: Vec<&String> =
                profiled.keys().filter(|k| truth.contains_key(*k)).collect();
            if shared.len() < 2 {
                skipped += 1;
                continue;
            }
            let x: Vec<f64> = shared.iter().map(|k| profiled[*k]).collect();
            let y: Vec<f64> = shared.iter().map(|k| truth[*k]).collect();
            match spearman_xy(&x, &y) {
                Ok(v) => values.push(v),
                Err(_) => skipped += 1,
            }
        }
        let mean = if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        };
        curve.push(ConvergencePoint {
            round: (r + 1) as u32,
            mean_spearman: mean,
            defined: values.len(),
            skipped,
        });
    }
    curve
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRateSummary {
    pub cr_log_reo: f64,
    pub cr_log_rei: f64,
    pub cr_reo_rei: f64,
    /// Coarse-class rate shifts, re-run-with-intervention minus re-run:
    /// the intervention effect net of rerun noise.
    pub delta_fold: f64,
    pub delta_call: f64,
    pub delta_raise: f64,
    /// Share of ReO->ReI changes moving in the expected semantic
    /// direction; None when nothing changed.
    pub directional_consistency: Option<f64>,
    pub changed: usize,
    pub total: usize,
}

fn class_rates(actions: &BTreeMap<DecisionKey, CoarseAction>) -> (f64, f64, f64) {
    let n = actions.len() as f64;
    let mut fold = 0.0;
    let mut call = 0.0;
    let mut raise = 0.0;
    for a in actions.values() {
        match a {
            CoarseAction::Fold => fold += 1.0,
            CoarseAction::Call => call += 1.0,
            CoarseAction::Raise => raise += 1.0,
        }
    }
    (fold / n, call / n, raise / n)
}

fn check_aligned(
    a: &BTreeMap<DecisionKey, CoarseAction>,
    b: &BTreeMap<DecisionKey, CoarseAction>,
    what: &str,
) -> Result<(), MetricError> {
    if a.keys().ne(b.keys()) {
        return Err(MetricError::KeyMismatch(format!(
            "{what}: {} vs {} keys with differing membership",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn differ_rate(
    a: &BTreeMap<DecisionKey, CoarseAction>,
    b: &BTreeMap<DecisionKey, CoarseAction>,
) -> f64 {
    let n = a.len() as f64;
    let changed = a.iter().filter(|(k, v)| b[*k] != **v).count() as f64;
    changed / n
}

/// Change rates over three aligned action sets plus directional
/// consistency of the ReO->ReI changes against the expected shift per key.
pub fn change_rates(
    log: &BTreeMap<DecisionKey, CoarseAction>,
    reo: &BTreeMap<DecisionKey, CoarseAction>,
    rei: &BTreeMap<DecisionKey, CoarseAction>,
    expected: &BTreeMap<DecisionKey, ExpectedShift>,
) -> Result<ChangeRateSummary, MetricError> {
    if log.is_empty() {
        return Err(MetricError::TooFewPoints { need: 1, got: 0 });
    }
    check_aligned(log, reo, "log vs reo")?;
    check_aligned(log, rei, "log vs rei")?;

    let (fold_o, call_o, raise_o) = class_rates(reo);
    let (fold_i, call_i, raise_i) = class_rates(rei);

    let mut changed = 0usize;
    let mut matched = 0usize;
    for (key, before) in reo {
        let after = rei[key];
        if after == *before {
            continue;
        }
        changed += 1;
        let shift = expected.get(key).ok_or_else(|| {
            MetricError::KeyMismatch(format!("no expected direction for {key:?}"))
        })?;
        let toward_raise = after > *before;
        if matches!(shift, ExpectedShift::TowardRaise) == toward_raise {
            matched += 1;
        }
    }

    Ok(ChangeRateSummary {
        cr_log_reo: differ_rate(log, reo),
        cr_log_rei: differ_rate(log, rei),
        cr_reo_rei: differ_rate(reo, rei),
        delta_fold: fold_i - fold_o,
        delta_call: call_i - call_o,
        delta_raise: raise_i - raise_o,
        directional_consistency: if changed == 0 {
            None
        } else {
            Some(matched as f64 / changed as f64)
        },
        changed,
        total: log.len(),
    })
}

/// Mean and sample variance across intervention runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

pub fn aggregate_runs(values: &[f64]) -> Option<RunAggregate> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    };
    Some(RunAggregate {
        mean,
        variance,
        n: values.len(),
    })
}

/// Pulls one named proxy statistic out of BehaviorStats.
pub fn proxy_value(stats: &BehaviorStats, name: &str) -> Option<f64> {
    match name {
        "vpip_proxy" => Some(stats.vpip_proxy),
        "pfr" => Some(stats.pfr),
        "aggression_factor" => Some(stats.aggression_factor),
        "fold_rate" => Some(stats.fold_rate),
        "call_rate" => Some(stats.call_rate),
        "raise_rate" => Some(stats.raise_rate),
        "call_to_fold_ratio" => Some(stats.call_to_fold_ratio),
        "bluff_attempt_rate" => Some(stats.bluff_attempt_rate),
        "bluff_success_rate" => Some(stats.bluff_success_rate),
        "showdown_rate" => Some(stats.showdown_rate),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyAlignment {
    pub trait_dim: Trait,
    pub proxy: String,
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    /// Proxies that were constant (no ranking) or unknown for this trait.
    pub skipped_proxies: Vec<String>,
}

/// Two-sided permutation p-value for an observed Spearman rho: exact over
/// all n! orderings for n <= 7, Monte Carlo with 10k draws above that.
pub fn spearman_permutation_p(
    x: &[f64],
    y: &[f64],
    observed: f64,
    rng: &mut impl Rng,
) -> f64 {
    const MC_DRAWS: usize = 10_000;
    let threshold = observed.abs() - 1e-12;
    let n = y.len();
    if n <= 7 {
        let mut perm: Vec<f64> = y.to_vec();
        let mut extreme = 0u64;
        let mut total = 0u64;
        // Heap's algorithm, iterative.
        let mut c = vec![0usize; n];
        let count = |p: &[f64]| {
            if let Ok(r) = spearman_xy(x, p) {
                if r.abs() >= threshold {
                    return 1;
                }
            }
            0
        };
        extreme += count(&perm);
        total += 1;
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                extreme += count(&perm);
                total += 1;
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        extreme as f64 / total as f64
    } else {
        let mut perm: Vec<f64> = y.to_vec();
        let mut extreme = 0u64;
        for _ in 0..MC_DRAWS {
            // Fisher-Yates shuffle.
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            if let Ok(r) = spearman_xy(x, &perm) {
                if r.abs() >= threshold {
                    extreme += 1;
                }
            }
        }
        // Add-one correction keeps Monte Carlo p-values off exact zero.
        (extreme + 1) as f64 / (MC_DRAWS + 1) as f64
    }
}

/// Alignment rows plus the traits no proxy could rank (skip-and-count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTable {
    pub rows: Vec<ProxyAlignment>,
    pub undefined_traits: Vec<Trait>,
}

/// For each trait: Spearman rho of profile values against every proxy in
/// the set, reporting the strongest-|rho| proxy with a permutation
/// p-value. Requires at least four opponents on both sides.
pub fn trait_proxy_alignment(
    profiles: &BTreeMap<String, TraitVector>,
    stats: &BTreeMap<String, BehaviorStats>,
    proxy_set: &[String],
    rng: &mut impl Rng,
) -> Result<AlignmentTable, MetricError> {
    if profiles.keys().ne(stats.keys()) {
        return Err(MetricError::KeyMismatch(
            "profile and stats opponents differ".to_string(),
        ));
    }
    if profiles.len() < 4 {
        return Err(MetricError::TooFewPoints {
            need: 4,
            got: profiles.len(),
        });
    }
    let mut rows = Vec::new();
    let mut undefined_traits = Vec::new();
    for t in Trait::ALL {
        let x: Vec<f64> = profiles.values().map(|v| v.get(t)).collect();
        let mut best: Option<(String, f64)> = None;
        let mut skipped = Vec::new();
        let mut proxy_series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for name in proxy_set {
            let values: Option<Vec<f64>> =
                stats.values().map(|s| proxy_value(s, name)).collect();
            let Some(y) = values else {
                skipped.push(name.clone());
                continue;
            };
            match spearman_xy(&x, &y) {
                Ok(rho) => {
                    proxy_series.insert(name.clone(), y);
                    let better = best
                        .as_ref()
                        .is_none_or(|(_, b)| rho.abs() > b.abs() + 1e-12);
                    if better {
                        best = Some((name.clone(), rho));
                    }
                }
                Err(_) => skipped.push(name.clone()),
            }
        }
        let Some((proxy, rho)) = best else {
            undefined_traits.push(t);
            continue;
        };
        let y = &proxy_series[&proxy];
        let p_value = spearman_permutation_p(&x, y, rho, rng);
        rows.push(ProxyAlignment {
            trait_dim: t,
            proxy,
            rho,
            p_value,
            n: profiles.len(),
            skipped_proxies: skipped,
        });
    }
    Ok(AlignmentTable {
        rows,
        undefined_traits,
    })
}

/// One decision row joined to its audits, flattened for stratification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratInput {
    pub street: Street,
    pub bucket: HandStrengthBucket,
    pub action: CoarseAction,
    pub high_risk: bool,
    pub model: String,
    pub rule_score: Option<u8>,
    pub oracle_overall: Option<u8>,
    pub outcome: Option<OutcomeLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyBy {
    Street,
    Risk,
    Model,
    Bucket,
    ActionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub stratum: String,
    pub n: usize,
    pub mean_rule: Option<f64>,
    pub mean_oracle: Option<f64>,
    /// Rationalized share over labeled rows.
    pub rationalization_rate: Option<f64>,
    pub labeled: usize,
    pub rho_rule_oracle: Option<f64>,
    pub high_risk_share: Option<f64>,
}

fn stratum_key(row: &StratInput, by: StratifyBy) -> String {
    match by {
        StratifyBy::Street => row.street.label().to_string(),
        StratifyBy::Risk => if row.high_risk { "high_risk" } else { "low_risk" }.to_string(),
        StratifyBy::Model => row.model.clone(),
        StratifyBy::Bucket => row.bucket.label().to_string(),
        StratifyBy::ActionKind => row.action.label().to_string(),
    }
}

/// The full domain of a stratification axis, so empty strata are reported
/// with N=0 instead of vanishing. Models have an open domain: observed only.
fn stratum_domain(by: StratifyBy, rows: &[StratInput]) -> Vec<String> {
    match by {
        StratifyBy::Street => [Street::Preflop, Street::Flop, Street::Turn, Street::River]
            .iter()
            .map(|s| s.label().to_string())
            .collect(),
        StratifyBy::Risk => vec!["low_risk".to_string(), "high_risk".to_string()],
        StratifyBy::Bucket => [
            HandStrengthBucket::Weak,
            HandStrengthBucket::Medium,
            HandStrengthBucket::Strong,
        ]
        .iter()
        .map(|b| b.label().to_string())
        .collect(),
        StratifyBy::ActionKind => [CoarseAction::Fold, CoarseAction::Call, CoarseAction::Raise]
            .iter()
            .map(|a| a.label().to_string())
            .collect(),
        StratifyBy::Model => {
            let mut models: Vec<String> = rows.iter().map(|r| r.model.clone()).collect();
            models.sort();
            models.dedup();
            models
        }
    }
}

pub fn stratified_summary(rows: &[StratInput], by: StratifyBy) -> Vec<StratumRow> {
    let mut grouped: BTreeMap<String, Vec<&StratInput>> = BTreeMap::new();
    for row in rows {
        grouped.entry(stratum_key(row, by)).or_default().push(row);
    }
    stratum_domain(by, rows)
        .into_iter()
        .map(|stratum| {
            let members = grouped.get(&stratum).map(Vec::as_slice).unwrap_or(&[]);
            summarize_stratum(stratum, members)
        })
        .collect()
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn summarize_stratum(stratum: String, members: &[&StratInput]) -> StratumRow {
    let n = members.len();
    if n == 0 {
        return StratumRow {
            stratum,
            n: 0,
            mean_rule: None,
            mean_oracle: None,
            rationalization_rate: None,
            labeled: 0,
            rho_rule_oracle: None,
            high_risk_share: None,
        };
    }
    let rule: Vec<f64> = members
        .iter()
        .filter_map(|r| r.rule_score.map(f64::from))
        .collect();
    let oracle: Vec<f64> = members
        .iter()
        .filter_map(|r| r.oracle_overall.map(f64::from))
        .collect();
    let labeled: Vec<OutcomeLabel> = members.iter().filter_map(|r| r.outcome).collect();
    let rationalized = labeled
        .iter()
        .filter(|o| **o == OutcomeLabel::Rationalized)
        .count();
    // rho over rows carrying both scores.
    let both: Vec<(f64, f64)> = members
        .iter()
        .filter_map(|r| match (r.rule_score, r.oracle_overall) {
            (Some(a), Some(b)) => Some((f64::from(a), f64::from(b))),
            _ => None,
        })
        .collect();
    let rho = if both.len() >= 2 {
        let x: Vec<f64> = both.iter().map(|p| p.0).collect();
        let y: Vec<f64> = both.iter().map(|p| p.1).collect();
        spearman_xy(&x, &y).ok()
    } else {
        None
    };
    StratumRow {
        stratum,
        n,
        mean_rule: mean_of(&rule),
        mean_oracle: mean_of(&oracle),
        rationalization_rate: if labeled.is_empty() {
            None
        } else {
            Some(rationalized as f64 / labeled.len() as f64)
        },
        labeled: labeled.len(),
        rho_rule_oracle: rho,
        high_risk_share: Some(
            members.iter().filter(|r| r.high_risk).count() as f64 / n as f64,
        ),
    }
}

/// Per-model raw values for the benchmark radar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarInput {
    pub model: String,
    pub values: BTreeMap<String, f64>,
}

/// Rank-percentile normalization of each dimension across models into
/// [0,1] via (rank-1)/(n-1) with average-tie ranks. Dimensions named in
/// `inverted` flip so that higher always reads as better.
pub fn radar_dimensions(
    inputs: &[RadarInput],
    inverted: &BTreeSet<String>,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, MetricError> {
    if inputs.len() < 2 {
        return Err(MetricError::TooFewPoints {
            need: 2,
            got: inputs.len(),
        });
    }
    let dims: Vec<String> = inputs[0].values.keys().cloned().collect();
    for input in inputs {
        if input.values.keys().ne(dims.iter()) {
            return Err(MetricError::KeyMismatch(format!(
                "model {} has a different dimension set",
                input.model
            )));
        }
    }
    let n = inputs.len() as f64;
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = inputs
        .iter()
        .map(|i| (i.model.clone(), BTreeMap::new()))
        .collect();
    for dim in &dims {
        let values: Vec<f64> = inputs.iter().map(|i| i.values[dim]).collect();
        let desc = average_ranks_desc(&values);
        for (input, rank_desc) in inputs.iter().zip(desc.iter()) {
            // Descending rank 1 is the largest value, so percentile
            // (n - r) / (n - 1) sends it to 1.0.
            let mut pct = (n - rank_desc) / (n - 1.0);
            if inverted.contains(dim) {
                pct = 1.0 - pct;
            }
            out.get_mut(&input.model).unwrap().insert(dim.clone(), pct);
        }
    }
    Ok(out)
}
