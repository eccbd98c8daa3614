//! Instruction templates.
//!
//! A template is a layout with five slot placeholders (`{persona}`,
//! `{topic}`, `{stance}`, `{toxicity}`, `{protocol}`) and one text per slot.
//! Slot texts may use the keys `{proposition}`, `{domain}`, `{side}`,
//! `{opponent}`, `{stance}`, `{level}` and `{marker}`.
//!
//! The toxicity slot is filled with the directive for the debate's level when
//! the agent is the toxic one, and with the `no` text (empty by default)
//! otherwise.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PerLevel;
use crate::debate::{ConvergenceProtocol, Side, Topic, ToxicityLevel};

pub const SLOTS: [&str; 5] = ["persona", "topic", "stance", "toxicity", "protocol"];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template layout lacks the `{{{0}}}` placeholder")]
    MissingSlot(&'static str),
    #[error("template layout uses `{{{0}}}` more than once")]
    DuplicateSlot(&'static str),
    #[error("no toxicity directive for level {0}")]
    MissingDirective(ToxicityLevel),
    #[error("the No condition has no toxic agent")]
    ToxicAtNoLevel,
    #[error("unresolved placeholder `{{{0}}}` in rendered instructions")]
    Unresolved(String),
    #[error("failed to read prompt file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub layout: String,
    pub persona_pro: String,
    pub persona_con: String,
    pub topic: String,
    pub stance: String,
    pub protocol: String,
    pub toxicity: PerLevel<String>,
}

macro_rules! asset {
    ($name:literal) => {
        include_str!(concat!("../../assets/prompts/", $name))
    };
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            layout: asset!("layout.txt").to_string(),
            persona_pro: asset!("persona_pro.txt").trim().to_string(),
            persona_con: asset!("persona_con.txt").trim().to_string(),
            topic: asset!("topic.txt").trim().to_string(),
            stance: asset!("stance.txt").trim().to_string(),
            protocol: asset!("protocol.txt").trim().to_string(),
            toxicity: PerLevel {
                no: asset!("toxicity/no.txt").trim().to_string(),
                mild: asset!("toxicity/mild.txt").trim().to_string(),
                moderate: asset!("toxicity/moderate.txt").trim().to_string(),
                heavy: asset!("toxicity/heavy.txt").trim().to_string(),
            },
        }
    }
}

impl PromptTemplate {
    /// Loads a template directory laid out like `assets/prompts`. Files that
    /// are absent keep their bundled default.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut template = PromptTemplate::default();
        let read = |name: &str, target: &mut String| -> Result<(), PromptError> {
            let path = dir.join(name);
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                *target = if name == "layout.txt" {
                    text
                } else {
                    text.trim().to_string()
                };
            }
            Ok(())
        };
        read("layout.txt", &mut template.layout)?;
        read("persona_pro.txt", &mut template.persona_pro)?;
        read("persona_con.txt", &mut template.persona_con)?;
        read("topic.txt", &mut template.topic)?;
        read("stance.txt", &mut template.stance)?;
        read("protocol.txt", &mut template.protocol)?;
        read("toxicity/no.txt", &mut template.toxicity.no)?;
        read("toxicity/mild.txt", &mut template.toxicity.mild)?;
        read("toxicity/moderate.txt", &mut template.toxicity.moderate)?;
        read("toxicity/heavy.txt", &mut template.toxicity.heavy)?;
        Ok(template)
    }

    /// Checks the layout and that every non-No level has a directive.
    pub fn validate(&self) -> Result<(), PromptError> {
        for slot in SLOTS {
            match count_placeholder(&self.layout, slot) {
                0 => return Err(PromptError::MissingSlot(slot)),
                1 => {}
                _ => return Err(PromptError::DuplicateSlot(slot)),
            }
        }
        for level in [ToxicityLevel::Mild, ToxicityLevel::Moderate, ToxicityLevel::Heavy] {
            if self.toxicity.get(level).trim().is_empty() {
                return Err(PromptError::MissingDirective(level));
            }
        }
        Ok(())
    }

    pub fn persona(&self, side: Side) -> &str {
        match side {
            Side::Pro => &self.persona_pro,
            Side::Con => &self.persona_con,
        }
    }
}

fn count_placeholder(text: &str, key: &str) -> usize {
    text.matches(&format!("{{{key}}}")).count()
}

/// Replaces `{key}` occurrences for which `lookup` returns a value; other
/// braces are copied through untouched.
fn fill(text: &str, lookup: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_key(&after[..close]) => match lookup(&after[..close]) {
                Some(value) => {
                    out.push_str(&value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            },
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn is_key(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c == '_')
}

fn first_unresolved(text: &str) -> Option<String> {
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        if let Some(close) = after.find('}') {
            if is_key(&after[..close]) {
                return Some(after[..close].to_string());
            }
        }
        rest = after;
    }
    None
}

/// Renders the system instructions for one agent.
pub fn render_instructions(
    template: &PromptTemplate,
    topic: &Topic,
    side: Side,
    level: ToxicityLevel,
    is_toxic: bool,
    protocol: &ConvergenceProtocol,
) -> Result<String, PromptError> {
    template.validate()?;
    if is_toxic && level == ToxicityLevel::No {
        return Err(PromptError::ToxicAtNoLevel);
    }
    let stance = match side {
        Side::Pro => "in favour of",
        Side::Con => "against",
    };
    let key = |k: &str| -> Option<String> {
        Some(match k {
            "proposition" => topic.proposition.clone(),
            "domain" => topic.domain.clone(),
            "side" => side.to_string(),
            "opponent" => side.opposite().to_string(),
            "stance" => stance.to_string(),
            "level" => level.to_string(),
            "marker" => protocol.concession_marker.clone(),
            _ => return None,
        })
    };
    let toxicity = if is_toxic {
        template.toxicity.get(level)
    } else {
        &template.toxicity.no
    };
    let slot = |k: &str| -> Option<String> {
        let text = match k {
            "persona" => template.persona(side),
            "topic" => &template.topic,
            "stance" => &template.stance,
            "toxicity" => toxicity,
            "protocol" => &template.protocol,
            _ => return None,
        };
        Some(fill(text, key))
    };
    let rendered = collapse_blank_lines(&fill(&template.layout, slot));
    match first_unresolved(&rendered) {
        Some(name) => Err(PromptError::Unresolved(name)),
        None => Ok(rendered),
    }
}

fn collapse_blank_lines(text: &str) -> String {
    let mut out = Vec::new();
    let mut blank = false;
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            if !blank && !out.is_empty() {
                out.push("");
            }
            blank = true;
        } else {
            out.push(line);
            blank = false;
        }
    }
    while out.last() == Some(&"") {
        out.pop();
    }
    out.join("\n")
}
