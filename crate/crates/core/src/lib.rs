//! Simulation and auditing harness for explanation-instrumented no-limit
//! hold'em agents.
//!
//! The crate runs table games where some seats are scripted archetypes and
//! some are model-backed agents that must explain every decision, profile
//! their opponents, and survive having those profiles perturbed. Everything
//! an agent says is written to decision traces, and the audit machinery
//! scores those traces with a deterministic rule checker and optional
//! oracle models.
//!
//! Modules split along the pipeline: [`engine`], [`cards`], and [`equity`]
//! simulate the game; [`protocol`] renders and parses the fixed prompt
//! formats; [`beliefs`] and [`features`] maintain opponent reads and derive
//! behavior statistics; [`audit`] and [`metrics`] score explanations and
//! aggregate results; [`runner`] orchestrates the whole thing behind the
//! `glasstable` binary.

pub mod audit;
pub mod baselines;
pub mod beliefs;
pub mod cards;
pub mod client;
pub mod config;
pub mod engine;
pub mod equity;
pub mod features;
pub mod metrics;
pub mod protocol;
pub mod runner;
pub mod trace;
