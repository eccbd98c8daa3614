//! Monte Carlo harness for two-agent adversarial debates under controlled
//! toxicity conditions.
//!
//! The crate is organised the way a run flows:
//!
//! - [`debate`] holds the domain model and the single-debate state machine.
//! - [`agents`] provides the agent interface with endpoint, scripted and
//!   synthetic backends, plus prompt rendering.
//! - [`montecarlo`] plans seeded trials and schedules them with bounded
//!   concurrency.
//! - [`persistence`] stores transcripts as append-only JSON lines and exports
//!   CSV tables.
//! - [`stats`] computes latency summaries, exact binomial tests, t-tests,
//!   one-way ANOVA and histograms.
//! - [`config`] and [`report`] back the command-line front end.

pub mod agents;
pub mod config;
pub mod debate;
pub mod montecarlo;
pub mod persistence;
pub mod report;
pub mod seed;
pub mod stats;
pub mod topics;

pub use agents::{AgentError, AgentHandle, Backend, PromptTemplate, SyntheticAgentParams};
pub use debate::{
    classify_turn, run_debate, ConvergenceProtocol, DebateConfig, DebateError, DebateStatus, Side, Topic,
    ToxicityLevel, Transcript, Turn, TurnKind,
};
pub use montecarlo::{execute, plan_trials, resume, BackendSpec, ExperimentPlan, RunSummary, TrialAssignment};
pub use persistence::{RunStore, StoreError, TranscriptRecord};
pub use stats::{OutcomeRecord, StatReport, TestResult};
