//! Debate domain model and the single-debate state machine.
//!
//! A debate alternates turns between the Pro and Con agents, starting with
//! the configured starter, and ends at the first accepted concession, the
//! first refusal, or the round cap.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, AgentHandle, TurnRequest};

/// Debate side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Pro,
    Con,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Pro, Side::Con];

    pub fn opposite(self) -> Side {
        match self {
            Side::Pro => Side::Con,
            Side::Con => Side::Pro,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Pro => "Pro",
            Side::Con => "Con",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pro" => Ok(Side::Pro),
            "con" => Ok(Side::Con),
            other => Err(format!("unknown side `{other}` (expected pro or con)")),
        }
    }
}

/// Toxicity treatment applied to one agent's instructions.
///
/// Ordered `No < Mild < Moderate < Heavy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToxicityLevel {
    No,
    Mild,
    Moderate,
    Heavy,
}

impl ToxicityLevel {
    pub const ALL: [ToxicityLevel; 4] = [
        ToxicityLevel::No,
        ToxicityLevel::Mild,
        ToxicityLevel::Moderate,
        ToxicityLevel::Heavy,
    ];

    /// Position in the total order, `No = 0`.
    pub fn ordinal(self) -> u64 {
        self as u64
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToxicityLevel::No => "No",
            ToxicityLevel::Mild => "Mild",
            ToxicityLevel::Moderate => "Moderate",
            ToxicityLevel::Heavy => "Heavy",
        }
    }
}

impl fmt::Display for ToxicityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToxicityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "no" | "none" => Ok(ToxicityLevel::No),
            "mild" => Ok(ToxicityLevel::Mild),
            "moderate" => Ok(ToxicityLevel::Moderate),
            "heavy" => Ok(ToxicityLevel::Heavy),
            other => Err(format!(
                "unknown toxicity level `{other}` (expected no, mild, moderate or heavy)"
            )),
        }
    }
}

/// A debatable proposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: String,
    pub domain: String,
    pub proposition: String,
}

/// Full assignment for one debate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateConfig {
    pub topic: Topic,
    pub starter: Side,
    pub toxic_side: Option<Side>,
    pub level: ToxicityLevel,
    /// Maximum number of turns.
    pub round_cap: u32,
    /// Concessions before this many turns are not accepted.
    pub min_rounds: u32,
    pub seed: u64,
    pub model_tag: String,
}

impl DebateConfig {
    pub fn validate(&self) -> Result<(), DebateError> {
        let invalid = |msg: String| Err(DebateError::InvalidConfig(msg));
        match (self.level, self.toxic_side) {
            (ToxicityLevel::No, Some(side)) => return invalid(format!("toxic side {side} set for the No condition")),
            (level, None) if level != ToxicityLevel::No => {
                return invalid(format!("{level} condition without a toxic side"))
            }
            _ => {}
        }
        if self.round_cap < 2 {
            return invalid(format!("round_cap {} is below 2", self.round_cap));
        }
        if u64::from(self.round_cap) < u64::from(self.min_rounds) + 2 {
            return invalid(format!(
                "round_cap {} must be at least min_rounds + 2 = {}",
                self.round_cap,
                u64::from(self.min_rounds) + 2
            ));
        }
        if self.topic.proposition.trim().is_empty() {
            return invalid(format!("topic `{}` has an empty proposition", self.topic.id));
        }
        Ok(())
    }

    /// Side speaking at 1-based turn `index`.
    pub fn speaker(&self, index: u32) -> Side {
        if index % 2 == 1 {
            self.starter
        } else {
            self.starter.opposite()
        }
    }

    pub fn is_toxic(&self, side: Side) -> bool {
        self.toxic_side == Some(side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnKind {
    Argument,
    Concession,
    Refusal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based turn number.
    pub index: u32,
    pub side: Side,
    pub text: String,
    pub kind: TurnKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DebateStatus {
    Converged,
    Capped,
    Refused,
}

/// A finished debate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: DebateConfig,
    pub turns: Vec<Turn>,
    pub status: DebateStatus,
    pub winner: Option<Side>,
    /// Number of turns including the conceding one; present only when converged.
    pub t_conv: Option<u32>,
    /// Backend settings recorded verbatim (model, sampling parameters, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Transcript {
    /// Checks every structural invariant of a finished transcript.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = i as u32 + 1;
            if turn.index != expected {
                return Err(format!("turn {i} has index {}", turn.index));
            }
            if turn.side != self.config.speaker(expected) {
                return Err(format!("turn {expected} spoken by the wrong side"));
            }
            if turn.kind != TurnKind::Argument && expected as usize != self.turns.len() {
                return Err(format!("terminal turn {expected} is not last"));
            }
        }
        let last = self.turns.last().map(|t| t.kind);
        let len = self.turns.len() as u32;
        match self.status {
            DebateStatus::Converged => {
                let conceder = self.turns.last().map(|t| t.side);
                if last != Some(TurnKind::Concession)
                    || self.winner != conceder.map(Side::opposite)
                    || self.t_conv != Some(len)
                    || len < self.config.min_rounds
                {
                    return Err("inconsistent converged transcript".into());
                }
            }
            DebateStatus::Refused => {
                if last != Some(TurnKind::Refusal) || self.winner.is_some() || self.t_conv.is_some() {
                    return Err("inconsistent refused transcript".into());
                }
            }
            DebateStatus::Capped => {
                if len != self.config.round_cap
                    || last != Some(TurnKind::Argument)
                    || self.winner.is_some()
                    || self.t_conv.is_some()
                {
                    return Err("inconsistent capped transcript".into());
                }
            }
        }
        Ok(())
    }
}

/// How concessions and refusals are recognised in agent messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceProtocol {
    pub concession_marker: String,
    /// Case-insensitive substrings that mark a refusal to continue.
    pub refusal_patterns: Vec<String>,
}

pub const DEFAULT_CONCESSION_MARKER: &str = "[CONCEDE]";

impl Default for ConvergenceProtocol {
    fn default() -> Self {
        let patterns = [
            "I cannot continue this conversation",
            "I can't continue this conversation",
            "I won't continue this conversation",
            "I am unable to continue",
            "I'm unable to continue",
            "I cannot help with that",
            "I can't help with that",
            "I cannot comply",
            "I can't comply",
            "I'm sorry, but I can't",
            "I must decline",
        ];
        ConvergenceProtocol {
            concession_marker: DEFAULT_CONCESSION_MARKER.to_string(),
            refusal_patterns: patterns.iter().map(|p| p.to_string()).collect(),
        }
    }
}

impl ConvergenceProtocol {
    pub fn validate(&self) -> Result<(), String> {
        if normalize(&self.concession_marker).is_empty() {
            return Err("concession marker is empty".into());
        }
        if self.refusal_patterns.iter().any(|p| normalize(p).is_empty()) {
            return Err("refusal pattern list contains an empty pattern".into());
        }
        Ok(())
    }
}

/// Lowercases and collapses every whitespace run to a single space.
fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Classifies a message. Concession wins over refusal when both match.
pub fn classify_turn(text: &str, protocol: &ConvergenceProtocol) -> TurnKind {
    let text = normalize(text);
    if text.contains(&normalize(&protocol.concession_marker)) {
        return TurnKind::Concession;
    }
    if protocol.refusal_patterns.iter().any(|p| text.contains(&normalize(p))) {
        return TurnKind::Refusal;
    }
    TurnKind::Argument
}

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("invalid debate config: {0}")]
    InvalidConfig(String),
    #[error("{side} agent failed on turn {turn}: {source}")]
    Backend {
        side: Side,
        turn: u32,
        #[source]
        source: AgentError,
    },
}

/// Runs one debate to completion.
///
/// Turn 1 belongs to `config.starter`. A concession marker is only accepted
/// from turn `config.min_rounds` on; earlier markers are recorded as plain
/// arguments. Empty replies count as refusals.
pub fn run_debate(
    config: &DebateConfig,
    pro: &mut AgentHandle,
    con: &mut AgentHandle,
    protocol: &ConvergenceProtocol,
) -> Result<Transcript, DebateError> {
    config.validate()?;
    if pro.side != Side::Pro || con.side != Side::Con {
        return Err(DebateError::InvalidConfig(format!(
            "agents bound to ({}, {}) instead of (Pro, Con)",
            pro.side, con.side
        )));
    }

    let mut turns: Vec<Turn> = Vec::new();
    let mut status = DebateStatus::Capped;
    for index in 1..=config.round_cap {
        let side = config.speaker(index);
        let agent = match side {
            Side::Pro => &mut *pro,
            Side::Con => &mut *con,
        };
        let request = TurnRequest {
            config,
            side,
            history: &turns,
            protocol,
        };
        let text = agent.next_message(&request).map_err(|source| DebateError::Backend {
            side,
            turn: index,
            source,
        })?;

        let kind = if text.trim().is_empty() {
            TurnKind::Refusal
        } else {
            match classify_turn(&text, protocol) {
                TurnKind::Concession if index < config.min_rounds => TurnKind::Argument,
                kind => kind,
            }
        };
        turns.push(Turn {
            index,
            side,
            text,
            kind,
        });
        match kind {
            TurnKind::Argument => continue,
            TurnKind::Concession => status = DebateStatus::Converged,
            TurnKind::Refusal => status = DebateStatus::Refused,
        }
        break;
    }

    let (winner, t_conv) = match status {
        DebateStatus::Converged => {
            let last = turns.last().expect("converged debate has turns");
            (Some(last.side.opposite()), Some(last.index))
        }
        _ => (None, None),
    };

    let mut metadata = BTreeMap::new();
    for (side, handle) in [(Side::Pro, &*pro), (Side::Con, &*con)] {
        for (key, value) in handle.metadata() {
            metadata.insert(format!("{}.{key}", side.as_str().to_lowercase()), value);
        }
    }

    Ok(Transcript {
        config: config.clone(),
        turns,
        status,
        winner,
        t_conv,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Backend, ScriptedAgent};

    fn topic() -> Topic {
        Topic {
            id: "culture-08".into(),
            domain: "Culture".into(),
            proposition: "We should ban gambling".into(),
        }
    }

    fn config(starter: Side, round_cap: u32) -> DebateConfig {
        DebateConfig {
            topic: topic(),
            starter,
            toxic_side: None,
            level: ToxicityLevel::No,
            round_cap,
            min_rounds: 2,
            seed: 11,
            model_tag: "scripted".into(),
        }
    }

    fn scripted(side: Side, lines: &[&str]) -> AgentHandle {
        AgentHandle::new(
            side,
            "test",
            String::new(),
            Backend::Scripted(ScriptedAgent::new(lines.iter().map(|s| s.to_string()))),
        )
    }

    fn args(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("argument {i}")).collect()
    }

    #[test]
    fn con_concedes_on_fourth_message() {
        let pro_lines = args(10);
        let mut con_lines = args(3);
        con_lines.push("Fine, you win. [CONCEDE]".into());
        let mut pro = scripted(Side::Pro, &pro_lines.iter().map(String::as_str).collect::<Vec<_>>());
        let mut con = scripted(Side::Con, &con_lines.iter().map(String::as_str).collect::<Vec<_>>());
        let t = run_debate(
            &config(Side::Pro, 60),
            &mut pro,
            &mut con,
            &ConvergenceProtocol::default(),
        )
        .unwrap();
        assert_eq!(t.turns.len(), 8);
        assert_eq!(t.status, DebateStatus::Converged);
        assert_eq!(t.winner, Some(Side::Pro));
        assert_eq!(t.t_conv, Some(8));
        t.check_invariants().unwrap();
    }

    #[test]
    fn never_conceding_hits_cap() {
        let lines = args(20);
        let lines: Vec<&str> = lines.iter().map(String::as_str).collect();
        let mut pro = scripted(Side::Pro, &lines);
        let mut con = scripted(Side::Con, &lines);
        let t = run_debate(
            &config(Side::Con, 23),
            &mut pro,
            &mut con,
            &ConvergenceProtocol::default(),
        )
        .unwrap();
        assert_eq!(t.turns.len(), 23);
        assert_eq!(t.status, DebateStatus::Capped);
        assert_eq!(t.winner, None);
        assert_eq!(t.turns[0].side, Side::Con);
        t.check_invariants().unwrap();
    }

    #[test]
    fn refusal_on_turn_two() {
        let mut pro = scripted(Side::Pro, &["opening", "second"]);
        let mut con = scripted(Side::Con, &["I cannot continue this conversation."]);
        let t = run_debate(
            &config(Side::Pro, 60),
            &mut pro,
            &mut con,
            &ConvergenceProtocol::default(),
        )
        .unwrap();
        assert_eq!(t.status, DebateStatus::Refused);
        assert_eq!(t.turns.len(), 2);
        assert_eq!(t.winner, None);
        assert_eq!(t.t_conv, None);
        t.check_invariants().unwrap();
    }

    #[test]
    fn early_concession_is_not_accepted() {
        let mut cfg = config(Side::Pro, 60);
        cfg.min_rounds = 4;
        let mut pro = scripted(Side::Pro, &["[CONCEDE] oops", "a", "b"]);
        let mut con = scripted(Side::Con, &["x", "I yield [CONCEDE]"]);
        let t = run_debate(&cfg, &mut pro, &mut con, &ConvergenceProtocol::default()).unwrap();
        assert_eq!(t.turns[0].kind, TurnKind::Argument);
        assert_eq!(t.t_conv, Some(4));
        assert_eq!(t.winner, Some(Side::Pro));
    }

    #[test]
    fn empty_reply_counts_as_refusal() {
        let mut pro = scripted(Side::Pro, &["   "]);
        let mut con = scripted(Side::Con, &[]);
        let t = run_debate(
            &config(Side::Pro, 60),
            &mut pro,
            &mut con,
            &ConvergenceProtocol::default(),
        )
        .unwrap();
        assert_eq!(t.status, DebateStatus::Refused);
        assert_eq!(t.turns.len(), 1);
    }

    #[test]
    fn script_exhaustion_surfaces_as_backend_error() {
        let mut pro = scripted(Side::Pro, &["a"]);
        let mut con = scripted(Side::Con, &[]);
        let err = run_debate(
            &config(Side::Pro, 60),
            &mut pro,
            &mut con,
            &ConvergenceProtocol::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            DebateError::Backend {
                side: Side::Con,
                turn: 2,
                source: AgentError::ScriptExhausted { .. }
            }
        ));
    }

    #[test]
    fn invalid_config_rejected_before_any_call() {
        let mut cfg = config(Side::Pro, 60);
        cfg.toxic_side = Some(Side::Con);
        let mut pro = scripted(Side::Pro, &[]);
        let mut con = scripted(Side::Con, &[]);
        let err = run_debate(&cfg, &mut pro, &mut con, &ConvergenceProtocol::default()).unwrap_err();
        assert!(matches!(err, DebateError::InvalidConfig(_)));

        let mut cfg = config(Side::Pro, 3);
        cfg.min_rounds = 2;
        assert!(cfg.validate().is_err());
        cfg.round_cap = 4;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn swapped_handles_rejected() {
        let mut a = scripted(Side::Con, &["x"]);
        let mut b = scripted(Side::Pro, &["y"]);
        let err = run_debate(&config(Side::Pro, 60), &mut a, &mut b, &ConvergenceProtocol::default()).unwrap_err();
        assert!(matches!(err, DebateError::InvalidConfig(_)));
    }

    #[test]
    fn classify_examples() {
        let p = ConvergenceProtocol::default();
        assert_eq!(classify_turn("You are right. [CONCEDE]", &p), TurnKind::Concession);
        assert_eq!(
            classify_turn("I cannot continue this conversation.", &p),
            TurnKind::Refusal
        );
        assert_eq!(
            classify_turn("Museums must stay free because access to culture matters.", &p),
            TurnKind::Argument
        );
    }

    #[test]
    fn classify_normalizes_case_and_whitespace() {
        let p = ConvergenceProtocol {
            concession_marker: "I  Concede".into(),
            refusal_patterns: vec!["cannot   continue".into()],
        };
        assert_eq!(classify_turn("ok,\n i concede", &p), TurnKind::Concession);
        assert_eq!(classify_turn("I CANNOT\tcontinue", &p), TurnKind::Refusal);
        // Concession takes precedence.
        assert_eq!(classify_turn("I cannot continue; I concede", &p), TurnKind::Concession);
    }

    #[test]
    fn level_order_and_parsing() {
        assert!(ToxicityLevel::No < ToxicityLevel::Mild);
        assert!(ToxicityLevel::Moderate < ToxicityLevel::Heavy);
        assert_eq!("HEAVY".parse::<ToxicityLevel>().unwrap(), ToxicityLevel::Heavy);
        assert_eq!("none".parse::<ToxicityLevel>().unwrap(), ToxicityLevel::No);
        assert!("extreme".parse::<ToxicityLevel>().is_err());
        assert_eq!(" con ".parse::<Side>().unwrap(), Side::Con);
    }
}
