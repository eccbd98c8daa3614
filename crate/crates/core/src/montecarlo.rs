//! Trial planning and the bounded-concurrency scheduler.
//!
//! Every random choice of a trial flows from its derived seed, a pure
//! function of `(master_seed, condition, trial_index)`. Workers may finish in
//! any order; a single writer commits transcripts in plan order, so the
//! store's bytes do not depend on the concurrency limit.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::agents::{
    render_instructions, AgentHandle, Backend, EndpointClient, EndpointConfig, PromptTemplate, ScriptedAgent,
    SyntheticAgent, SyntheticAgentParams,
};
use crate::debate::{
    run_debate, ConvergenceProtocol, DebateConfig, DebateError, DebateStatus, Side, Topic, ToxicityLevel, Transcript,
};
use crate::persistence::{RunStore, StoreError, TranscriptRecord};
use crate::seed;

const SCRIPT_REFUSAL_STREAM: u64 = 0x5C_21F7;

/// Deterministic replay backend used for accounting tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedSpec {
    /// Turn at which the speaker concedes; `None` argues until the cap.
    pub concede_turn: Option<u32>,
    /// Per-debate probability that the responder refuses on turn 2.
    pub refusal_rate: f64,
    /// Trial indices that always refuse, in every condition.
    pub refuse_trials: Vec<u64>,
}

impl Default for ScriptedSpec {
    fn default() -> Self {
        ScriptedSpec {
            concede_turn: Some(4),
            refusal_rate: 0.0,
            refuse_trials: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Synthetic(SyntheticAgentParams),
    Scripted(ScriptedSpec),
    Endpoint(EndpointConfig),
}

impl BackendSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BackendSpec::Synthetic(_) => "synthetic",
            BackendSpec::Scripted(_) => "scripted",
            BackendSpec::Endpoint(_) => "endpoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub n_per_condition: u64,
    pub levels: Vec<ToxicityLevel>,
    pub corpus: Vec<Topic>,
    pub master_seed: u64,
    /// Not part of the fingerprint: results do not depend on it.
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    pub backend: BackendSpec,
    pub round_cap: u32,
    pub min_rounds: u32,
    pub model_tag: String,
    pub protocol: ConvergenceProtocol,
    pub prompts: PromptTemplate,
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid plan: {0}")]
    Invalid(String),
}

impl ExperimentPlan {
    /// Plan over the given corpus with the synthetic backend and default settings.
    pub fn synthetic(corpus: Vec<Topic>, n_per_condition: u64, master_seed: u64) -> Self {
        ExperimentPlan {
            n_per_condition,
            levels: ToxicityLevel::ALL.to_vec(),
            corpus,
            master_seed,
            concurrency_limit: default_concurrency(),
            backend: BackendSpec::Synthetic(SyntheticAgentParams::default()),
            round_cap: 60,
            min_rounds: 2,
            model_tag: "synthetic".into(),
            protocol: ConvergenceProtocol::default(),
            prompts: PromptTemplate::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::Invalid(m));
        if self.n_per_condition == 0 {
            return bad("n_per_condition must be at least 1".into());
        }
        if self.corpus.is_empty() {
            return bad("corpus is empty".into());
        }
        if self.levels.is_empty() {
            return bad("no toxicity levels selected".into());
        }
        let distinct: HashSet<_> = self.levels.iter().collect();
        if distinct.len() != self.levels.len() {
            return bad("toxicity levels repeat".into());
        }
        if self.concurrency_limit == 0 {
            return bad("concurrency_limit must be positive".into());
        }
        if self.min_rounds < 1 {
            return bad("min_rounds must be at least 1".into());
        }
        if u64::from(self.round_cap) < u64::from(self.min_rounds) + 2 {
            return bad(format!("round_cap {} must be at least min_rounds + 2", self.round_cap));
        }
        crate::topics::validate(&self.corpus).map_err(|e| PlanError::Invalid(e.to_string()))?;
        self.protocol.validate().map_err(PlanError::Invalid)?;
        self.prompts
            .validate()
            .map_err(|e| PlanError::Invalid(format!("prompt templates: {e}")))?;
        match &self.backend {
            BackendSpec::Synthetic(p) => p.validate().map_err(PlanError::Invalid)?,
            BackendSpec::Scripted(s) => {
                if !(0.0..=1.0).contains(&s.refusal_rate) {
                    return bad(format!("refusal_rate {} outside [0, 1]", s.refusal_rate));
                }
                if s.concede_turn.is_some_and(|t| t < self.min_rounds) {
                    return bad("scripted concede_turn is below min_rounds".into());
                }
            }
            BackendSpec::Endpoint(e) => {
                if e.base_url.trim().is_empty() || e.model.trim().is_empty() {
                    return bad("endpoint needs a base_url and a model".into());
                }
            }
        }
        Ok(())
    }

    /// The plan as JSON without the concurrency limit. Object keys are
    /// sorted, so equal plans give equal text.
    pub fn canonical(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("plan serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("concurrency_limit");
        }
        value
    }

    /// SHA-256 over the canonical JSON.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(&self.canonical()).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn planned_trials(&self) -> u64 {
        self.n_per_condition * self.levels.len() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialAssignment {
    pub trial_index: u64,
    pub condition: ToxicityLevel,
    pub topic: Topic,
    pub starter: Side,
    pub toxic_side: Option<Side>,
    pub derived_seed: u64,
}

pub fn derived_seed(master_seed: u64, condition: ToxicityLevel, trial_index: u64) -> u64 {
    seed::derive(&[master_seed, condition.ordinal(), trial_index])
}

fn random_side(rng: &mut ChaCha8Rng) -> Side {
    if rng.random::<bool>() {
        Side::Pro
    } else {
        Side::Con
    }
}

/// Levels in plan order, trial indices ascending within each level.
pub fn plan_trials(plan: &ExperimentPlan) -> Vec<TrialAssignment> {
    let mut out = Vec::with_capacity(plan.planned_trials() as usize);
    for &condition in &plan.levels {
        for trial_index in 0..plan.n_per_condition {
            let derived_seed = derived_seed(plan.master_seed, condition, trial_index);
            let mut rng = ChaCha8Rng::seed_from_u64(derived_seed);
            let topic = plan.corpus[rng.random_range(0..plan.corpus.len())].clone();
            let starter = random_side(&mut rng);
            let toxic_side = (condition != ToxicityLevel::No).then(|| random_side(&mut rng));
            out.push(TrialAssignment {
                trial_index,
                condition,
                topic,
                starter,
                toxic_side,
                derived_seed,
            });
        }
    }
    out
}

impl TrialAssignment {
    pub fn debate_config(&self, plan: &ExperimentPlan) -> DebateConfig {
        DebateConfig {
            topic: self.topic.clone(),
            starter: self.starter,
            toxic_side: self.toxic_side,
            level: self.condition,
            round_cap: plan.round_cap,
            min_rounds: plan.min_rounds,
            seed: self.derived_seed,
            model_tag: plan.model_tag.clone(),
        }
    }
}

/// Per-condition accounting. `converged + capped + refused + aborted + pending = planned`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub planned: u64,
    pub converged: u64,
    pub capped: u64,
    pub refused: u64,
    pub aborted: u64,
    pub pending: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fingerprint: String,
    pub model_tag: String,
    pub backend: String,
    pub conditions: BTreeMap<ToxicityLevel, ConditionCounts>,
    /// Transcripts written by this invocation. Not persisted, so a resumed
    /// store's summary matches an uninterrupted one.
    #[serde(skip)]
    pub written: u64,
    /// Aborted trials as `(condition, trial_index, error)`.
    pub aborted: Vec<(ToxicityLevel, u64, String)>,
}

impl RunSummary {
    pub fn totals(&self) -> ConditionCounts {
        self.conditions.values().fold(ConditionCounts::default(), |mut acc, c| {
            acc.planned += c.planned;
            acc.converged += c.converged;
            acc.capped += c.capped;
            acc.refused += c.refused;
            acc.aborted += c.aborted;
            acc.pending += c.pending;
            acc
        })
    }

    pub fn is_complete(&self) -> bool {
        let t = self.totals();
        t.pending == 0 && t.aborted == 0
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("store already holds {0} transcript(s); use resume to continue it")]
    StoreNotEmpty(usize),
    #[error("plan fingerprint mismatch: store has {stored}, plan is {requested}")]
    PlanMismatch { stored: String, requested: String },
    #[error("sink failure: {0}")]
    Sink(#[source] StoreError),
}

impl From<StoreError> for RunError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::PlanMismatch { stored, requested } => RunError::PlanMismatch { stored, requested },
            other => RunError::Sink(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecuteOptions {
    /// Stop after this many transcripts have been written. The store then
    /// holds a plan-order prefix, exactly as after a crash.
    pub limit: Option<u64>,
    /// Extra attempts of a whole debate after a backend failure.
    pub trial_retry_limit: u32,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        ExecuteOptions {
            limit: None,
            trial_retry_limit: 1,
        }
    }
}

/// Runs every assignment of `plan` into an empty store.
pub fn execute(plan: &ExperimentPlan, store: &mut RunStore) -> Result<RunSummary, RunError> {
    execute_with(plan, store, ExecuteOptions::default())
}

/// Runs only the assignments that have no stored transcript yet.
pub fn resume(plan: &ExperimentPlan, store: &mut RunStore) -> Result<RunSummary, RunError> {
    resume_with(plan, store, ExecuteOptions::default())
}

pub fn execute_with(
    plan: &ExperimentPlan,
    store: &mut RunStore,
    options: ExecuteOptions,
) -> Result<RunSummary, RunError> {
    plan.validate()?;
    if !store.is_empty() {
        return Err(RunError::StoreNotEmpty(store.len()));
    }
    resume_with(plan, store, options)
}

pub fn resume_with(
    plan: &ExperimentPlan,
    store: &mut RunStore,
    options: ExecuteOptions,
) -> Result<RunSummary, RunError> {
    plan.validate()?;
    let fingerprint = plan.fingerprint();
    store.bind_plan(&fingerprint, &plan.canonical())?;

    let pending: Vec<TrialAssignment> = plan_trials(plan)
        .into_iter()
        .filter(|a| !store.contains(a.condition, a.trial_index))
        .collect();
    info!(
        pending = pending.len(),
        stored = store.len(),
        concurrency = plan.concurrency_limit,
        "starting trials"
    );

    let shared = SharedBackend::new(&plan.backend);
    let outcome = schedule(plan, &shared, &pending, store, options);
    // The summary is written even when the sink failed part-way.
    let summary = summarize(plan, &fingerprint, store, &outcome)?;
    if let Some(e) = outcome.sink_error {
        return Err(RunError::Sink(e));
    }
    store.write_summary(&summary)?;
    Ok(summary)
}

enum SharedBackend {
    Synthetic(SyntheticAgentParams),
    Scripted(ScriptedSpec),
    Endpoint(Arc<EndpointClient>),
}

impl SharedBackend {
    fn new(spec: &BackendSpec) -> Self {
        match spec {
            BackendSpec::Synthetic(p) => SharedBackend::Synthetic(p.clone()),
            BackendSpec::Scripted(s) => SharedBackend::Scripted(s.clone()),
            BackendSpec::Endpoint(c) => SharedBackend::Endpoint(Arc::new(EndpointClient::new(c.clone()))),
        }
    }

    fn backend_for(
        &self,
        config: &DebateConfig,
        side: Side,
        trial_index: u64,
        protocol: &ConvergenceProtocol,
    ) -> Backend {
        match self {
            SharedBackend::Synthetic(p) => Backend::Synthetic(SyntheticAgent::new(p.clone())),
            SharedBackend::Endpoint(c) => Backend::Endpoint(Arc::clone(c)),
            SharedBackend::Scripted(spec) => Backend::Scripted(ScriptedAgent::new(script_lines(
                spec,
                config,
                side,
                trial_index,
                protocol,
            ))),
        }
    }
}

/// Whether a scripted trial refuses: listed explicitly, or by its own
/// per-debate draw against `refusal_rate`.
pub fn scripted_refuses(spec: &ScriptedSpec, config: &DebateConfig, trial_index: u64) -> bool {
    spec.refuse_trials.contains(&trial_index)
        || seed::unit_f64(seed::derive(&[config.seed, SCRIPT_REFUSAL_STREAM])) < spec.refusal_rate
}

fn script_lines(
    spec: &ScriptedSpec,
    config: &DebateConfig,
    side: Side,
    trial_index: u64,
    protocol: &ConvergenceProtocol,
) -> Vec<String> {
    let refuses = scripted_refuses(spec, config, trial_index);
    let last = spec.concede_turn.unwrap_or(config.round_cap).min(config.round_cap);
    (1..=last)
        .filter(|&turn| config.speaker(turn) == side)
        .map(|turn| {
            if turn == 2 && refuses {
                protocol
                    .refusal_patterns
                    .first()
                    .map(|p| format!("{p}."))
                    .unwrap_or_default()
            } else if Some(turn) == spec.concede_turn {
                format!("I accept your argument. {}", protocol.concession_marker)
            } else {
                format!("{side} argument for turn {turn}.")
            }
        })
        .collect()
}

/// Runs one trial with its own pair of agents.
pub fn run_trial(plan: &ExperimentPlan, assignment: &TrialAssignment) -> Result<Transcript, DebateError> {
    run_trial_with(plan, &SharedBackend::new(&plan.backend), assignment)
}

fn run_trial_with(
    plan: &ExperimentPlan,
    shared: &SharedBackend,
    assignment: &TrialAssignment,
) -> Result<Transcript, DebateError> {
    let config = assignment.debate_config(plan);
    let make = |side: Side| -> Result<AgentHandle, DebateError> {
        let instructions = render_instructions(
            &plan.prompts,
            &config.topic,
            side,
            config.level,
            config.is_toxic(side),
            &plan.protocol,
        )
        .map_err(|e| DebateError::InvalidConfig(e.to_string()))?;
        Ok(AgentHandle::new(
            side,
            plan.prompts.persona(side),
            instructions,
            shared.backend_for(&config, side, assignment.trial_index, &plan.protocol),
        ))
    };
    let mut pro = make(Side::Pro)?;
    let mut con = make(Side::Con)?;
    run_debate(&config, &mut pro, &mut con, &plan.protocol)
}

struct ScheduleOutcome {
    written: u64,
    aborted: Vec<(ToxicityLevel, u64, String)>,
    sink_error: Option<StoreError>,
}

fn schedule(
    plan: &ExperimentPlan,
    shared: &SharedBackend,
    pending: &[TrialAssignment],
    store: &mut RunStore,
    options: ExecuteOptions,
) -> ScheduleOutcome {
    let mut outcome = ScheduleOutcome {
        written: 0,
        aborted: Vec::new(),
        sink_error: None,
    };
    let limit = options.limit.unwrap_or(u64::MAX);
    if pending.is_empty() || limit == 0 {
        return outcome;
    }
    let workers = plan.concurrency_limit.min(pending.len());
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<Transcript, DebateError>)>();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Acquire) {
                    break;
                }
                let pos = next.fetch_add(1, Ordering::AcqRel);
                let Some(assignment) = pending.get(pos) else { break };
                let mut result = run_trial_with(plan, shared, assignment);
                let mut attempt = 0;
                while let Err(DebateError::Backend { .. }) = &result {
                    if attempt >= options.trial_retry_limit || stop.load(Ordering::Acquire) {
                        break;
                    }
                    attempt += 1;
                    debug!(trial = assignment.trial_index, attempt, "retrying trial");
                    result = run_trial_with(plan, shared, assignment);
                }
                if tx.send((pos, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Reorder buffer: commit strictly in plan order.
        let mut buffer: BTreeMap<usize, Result<Transcript, DebateError>> = BTreeMap::new();
        let mut expected = 0usize;
        'recv: for (pos, result) in rx.iter() {
            buffer.insert(pos, result);
            while let Some(result) = buffer.remove(&expected) {
                let assignment = &pending[expected];
                expected += 1;
                match result {
                    Ok(transcript) => {
                        let record = TranscriptRecord {
                            trial_index: assignment.trial_index,
                            transcript,
                        };
                        if let Err(e) = store.append_transcript(&record) {
                            warn!(error = %e, "sink failure; stopping run");
                            outcome.sink_error = Some(e);
                            stop.store(true, Ordering::Release);
                            break 'recv;
                        }
                        outcome.written += 1;
                        if outcome.written >= limit {
                            stop.store(true, Ordering::Release);
                            break 'recv;
                        }
                    }
                    Err(e) => {
                        warn!(condition = %assignment.condition, trial = assignment.trial_index, error = %e, "trial aborted");
                        outcome
                            .aborted
                            .push((assignment.condition, assignment.trial_index, e.to_string()));
                    }
                }
            }
        }
        // Dropping the receiver makes any remaining sends fail fast.
        drop(rx);
    });
    outcome
}

fn summarize(
    plan: &ExperimentPlan,
    fingerprint: &str,
    store: &RunStore,
    outcome: &ScheduleOutcome,
) -> Result<RunSummary, StoreError> {
    let mut conditions: BTreeMap<ToxicityLevel, ConditionCounts> = plan
        .levels
        .iter()
        .map(|&l| {
            (
                l,
                ConditionCounts {
                    planned: plan.n_per_condition,
                    ..Default::default()
                },
            )
        })
        .collect();
    for record in store.load_transcripts()? {
        let t = &record.transcript;
        let Some(c) = conditions.get_mut(&t.config.level) else {
            continue;
        };
        match t.status {
            DebateStatus::Converged => c.converged += 1,
            DebateStatus::Capped => c.capped += 1,
            DebateStatus::Refused => c.refused += 1,
        }
    }
    for (level, _, _) in &outcome.aborted {
        if let Some(c) = conditions.get_mut(level) {
            c.aborted += 1;
        }
    }
    for c in conditions.values_mut() {
        c.pending = c.planned - (c.converged + c.capped + c.refused + c.aborted).min(c.planned);
    }
    Ok(RunSummary {
        fingerprint: fingerprint.to_string(),
        model_tag: plan.model_tag.clone(),
        backend: plan.backend.name().to_string(),
        conditions,
        written: outcome.written,
        aborted: outcome.aborted.clone(),
    })
}
