//! Agent interface and backends.
//!
//! An [`AgentHandle`] binds one debate side to its rendered instructions and
//! to a backend that produces messages: a chat-completion endpoint, a
//! scripted replay for tests, or the calibrated synthetic model.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{ConvergenceProtocol, DebateConfig, Side, ToxicityLevel, Turn};

pub mod endpoint;
pub mod prompt;
pub mod scripted;
pub mod stub;
pub mod synthetic;

pub use endpoint::{ChatMessage, ChatRequest, EndpointClient, EndpointConfig};
pub use prompt::{render_instructions, PromptError, PromptTemplate};
pub use scripted::ScriptedAgent;
pub use synthetic::{SyntheticAgent, SyntheticAgentParams};

#[derive(Debug, Error)]
pub enum AgentError {
    /// The endpoint failed on every attempt.
    #[error("backend failed after {attempts} attempt(s): {message}")]
    Backend { attempts: u32, message: String },
    #[error("scripted {side} agent ran out of lines")]
    ScriptExhausted { side: Side },
}

/// Everything an agent sees when asked for its next message.
#[derive(Debug, Clone, Copy)]
pub struct TurnRequest<'a> {
    pub config: &'a DebateConfig,
    pub side: Side,
    pub history: &'a [Turn],
    pub protocol: &'a ConvergenceProtocol,
}

impl TurnRequest<'_> {
    /// 1-based index of the turn being produced.
    pub fn turn_index(&self) -> u32 {
        self.history.len() as u32 + 1
    }
}

pub enum Backend {
    Endpoint(Arc<EndpointClient>),
    Scripted(ScriptedAgent),
    Synthetic(SyntheticAgent),
}

pub struct AgentHandle {
    pub side: Side,
    pub persona: String,
    /// Rendered system instructions.
    pub instructions: String,
    pub backend: Backend,
}

impl AgentHandle {
    pub fn new(side: Side, persona: impl Into<String>, instructions: String, backend: Backend) -> Self {
        AgentHandle {
            side,
            persona: persona.into(),
            instructions,
            backend,
        }
    }

    pub fn next_message(&mut self, request: &TurnRequest<'_>) -> Result<String, AgentError> {
        match &mut self.backend {
            Backend::Endpoint(client) => {
                let chat = client.build_request(&self.instructions, self.side, request.history);
                client.complete(&chat)
            }
            Backend::Scripted(agent) => agent.next_line(self.side),
            Backend::Synthetic(agent) => Ok(agent.next_message(request)),
        }
    }

    /// Backend settings recorded into transcripts.
    pub fn metadata(&self) -> BTreeMap<String, serde_json::Value> {
        let mut meta = BTreeMap::new();
        meta.insert("persona".into(), self.persona.clone().into());
        match &self.backend {
            Backend::Endpoint(client) => {
                meta.insert("backend".into(), "endpoint".into());
                meta.extend(client.metadata());
            }
            Backend::Scripted(_) => {
                meta.insert("backend".into(), "scripted".into());
            }
            Backend::Synthetic(_) => {
                meta.insert("backend".into(), "synthetic".into());
            }
        }
        meta
    }
}

/// One value per toxicity level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerLevel<T> {
    pub no: T,
    pub mild: T,
    pub moderate: T,
    pub heavy: T,
}

impl<T: Copy> PerLevel<T> {
    pub fn uniform(value: T) -> Self {
        PerLevel {
            no: value,
            mild: value,
            moderate: value,
            heavy: value,
        }
    }
}

impl<T> PerLevel<T> {
    pub fn get(&self, level: ToxicityLevel) -> &T {
        match level {
            ToxicityLevel::No => &self.no,
            ToxicityLevel::Mild => &self.mild,
            ToxicityLevel::Moderate => &self.moderate,
            ToxicityLevel::Heavy => &self.heavy,
        }
    }
}
