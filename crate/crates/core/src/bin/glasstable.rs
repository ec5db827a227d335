//! Command-line front end. One subcommand per pipeline stage; every stage
//! is restartable and a completed stage with unchanged inputs is a no-op.
//!
//! Exit codes: 2 for configuration problems, 3 for transport failures
//! against a model endpoint, 4 for missing or corrupt run data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use glasstable::beliefs::{Direction, Trait};
use glasstable::config::{ConfigError, RunManifest};
use glasstable::runner::{offline_backends, online_backends, Runner, RunnerError};

#[derive(Parser)]
#[command(name = "glasstable")]
#[command(about = "Play, audit, and measure explanation-instrumented hold'em agents")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Manifest TOML. Omitted: the built-in offline default.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the manifest seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the number of battles.
    #[arg(long)]
    battles: Option<u32>,

    /// Override the output root directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Force the deterministic offline backends regardless of the manifest.
    #[arg(long)]
    offline: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Play all battles and write decision traces plus hand records.
    Play(Common),
    /// Rule-audit every logged decision and run the configured oracles.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Oracle model name (repeatable). Replaces the manifest list.
        #[arg(long = "oracle")]
        oracles: Vec<String>,
    },
    /// Re-query logged decisions with and without a trait intervention.
    Intervene {
        #[command(flatten)]
        common: Common,
        /// Trait to shift, by snake_case name.
        #[arg(long = "trait", value_parser = parse_trait)]
        trait_dim: Option<Trait>,
        /// Shift direction: up or down.
        #[arg(long, value_parser = parse_direction)]
        direction: Option<Direction>,
        /// Number of paired re-query runs.
        #[arg(long)]
        runs: Option<u32>,
        /// Logit-space shift magnitude.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Compute the metrics battery from trace and audit files.
    Metrics(Common),
    /// Render metrics into CSV tables and an outcome plot.
    Report(Common),
}

fn parse_trait(s: &str) -> Result<Trait, String> {
    Trait::ALL
        .into_iter()
        .find(|t| t.snake_name() == s)
        .ok_or_else(|| {
            let names: Vec<&str> = Trait::ALL.iter().map(|t| t.snake_name()).collect();
            format!("unknown trait {s:?}; expected one of {}", names.join(", "))
        })
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "up" => Ok(Direction::Up),
        "down" => Ok(Direction::Down),
        _ => Err(format!("unknown direction {s:?}; expected up or down")),
    }
}

fn load_manifest(common: &Common) -> Result<RunManifest, RunnerError> {
    let mut manifest = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                RunnerError::Config(ConfigError::Parse(format!("read {}: {e}", path.display())))
            })?;
            RunManifest::from_toml(&text).map_err(RunnerError::Config)?
        }
        None => RunManifest::default(),
    };
    if let Some(seed) = common.seed {
        manifest.config.seed = seed;
    }
    if let Some(battles) = common.battles {
        manifest.config.battles = battles;
    }
    if let Some(out) = &common.out {
        manifest.out_dir = out.display().to_string();
    }
    if common.offline {
        manifest.offline = true;
    }
    Ok(manifest)
}

fn runner_for(manifest: RunManifest) -> Result<Runner, RunnerError> {
    let backends = if manifest.offline {
        offline_backends(&manifest)
    } else {
        online_backends(&manifest)?
    };
    Runner::new(manifest, backends)
}

fn fmt_agg(agg: &Option<glasstable::metrics::RunAggregate>) -> String {
    match agg {
        Some(a) => format!("{:.4} (sd {:.4}, n={})", a.mean, a.variance.sqrt(), a.n),
        None => "undefined".to_string(),
    }
}

fn run(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Play(common) => {
            let runner = runner_for(load_manifest(&common)?)?;
            let report = runner.stage_play()?;
            let aborted = report
                .battles
                .iter()
                .filter(|b| b.aborted.is_some())
                .count();
            println!(
                "play{}: {} battles, {} hands, {} decision rows -> {}",
                if report.skipped { " (already done)" } else { "" },
                report.battles.len(),
                report.hands_total,
                report.rows_total,
                report.run_dir,
            );
            if aborted > 0 {
                println!("  {aborted} battle(s) aborted early; see play_report.json");
            }
        }
        Command::Audit { common, oracles } => {
            let mut manifest = load_manifest(&common)?;
            if !oracles.is_empty() {
                manifest.oracles = oracles;
            }
            let runner = runner_for(manifest)?;
            let report = runner.stage_audit()?;
            println!(
                "audit{}: {} rule audits, {} first-person + {} second-person oracle audits ({} parse failures) across {} battles",
                if report.skipped { " (already done)" } else { "" },
                report.rule_rows,
                report.oracle_first,
                report.oracle_second,
                report.oracle_parse_failures,
                report.battles,
            );
        }
        Command::Intervene {
            common,
            trait_dim,
            direction,
            runs,
            delta,
        } => {
            let mut manifest = load_manifest(&common)?;
            if let Some(t) = trait_dim {
                manifest.intervention.trait_dim = t;
            }
            if let Some(d) = direction {
                manifest.intervention.direction = d;
            }
            if let Some(r) = runs {
                manifest.intervention.runs = r;
            }
            if let Some(d) = delta {
                manifest.intervention.delta = d;
            }
            let runner = runner_for(manifest)?;
            let report = runner.stage_intervene()?;
            println!(
                "intervene{}: {} {:?} delta {} over {} decisions x {} runs",
                if report.skipped { " (already done)" } else { "" },
                report.trait_dim.snake_name(),
                report.direction,
                report.delta,
                report.decisions,
                report.runs,
            );
            println!("  CR(log->reo):  {}", fmt_agg(&report.cr_log_reo));
            println!("  CR(log->rei):  {}", fmt_agg(&report.cr_log_rei));
            println!("  CR(reo->rei):  {}", fmt_agg(&report.cr_reo_rei));
            println!(
                "  dir. consistency: {}",
                fmt_agg(&report.directional_consistency)
            );
        }
        Command::Metrics(common) => {
            let runner = runner_for(load_manifest(&common)?)?;
            let report = runner.stage_metrics()?;
            println!(
                "metrics{}: {} rows, oracle = {}",
                if report.skipped { " (already done)" } else { "" },
                report.rows,
                report.primary_oracle.as_deref().unwrap_or("none"),
            );
            for (model, shares) in &report.outcomes_by_model {
                println!(
                    "  {model}: faithful {:.2} / uncertain {:.2} / rationalized {:.2} ({} labeled, {} unlabeled)",
                    shares.faithful, shares.uncertain, shares.rationalized,
                    shares.labeled, shares.unlabeled,
                );
            }
            match (report.kappa_rule_vs_oracle, report.spearman_rule_vs_oracle) {
                (Some(k), Some(r)) => println!("  rule vs oracle: kappa {k:.3}, rho {r:.3}"),
                _ => {
                    if let Some(note) = &report.agreement_note {
                        println!("  rule vs oracle: {note}");
                    }
                }
            }
        }
        Command::Report(common) => {
            let runner = runner_for(load_manifest(&common)?)?;
            let report = runner.stage_report()?;
            println!(
                "report{}: {} files",
                if report.skipped { " (already done)" } else { "" },
                report.files.len()
            );
            for f in &report.files {
                println!("  {f}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
