//! Replays preloaded lines verbatim.

use std::collections::VecDeque;

use super::AgentError;
use crate::debate::Side;

#[derive(Debug, Clone, Default)]
pub struct ScriptedAgent {
    lines: VecDeque<String>,
}

impl ScriptedAgent {
    pub fn new(lines: impl IntoIterator<Item = String>) -> Self {
        ScriptedAgent {
            lines: lines.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.lines.len()
    }

    pub fn next_line(&mut self, side: Side) -> Result<String, AgentError> {
        self.lines.pop_front().ok_or(AgentError::ScriptExhausted { side })
    }
}
