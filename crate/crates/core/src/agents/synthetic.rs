//! Calibrated stochastic stand-in for a language-model debater.
//!
//! Each time an agent speaks at or after turn `min_rounds` it concedes with a
//! constant hazard
//!
//! ```text
//! h = clamp(q0 * s(level) + a * [opponent started] + b * [opponent is toxic])
//! ```
//!
//! and otherwise emits a filler argument. With probability `r(level)` per
//! debate the responder refuses on its first turn instead. Every draw is a
//! pure function of the debate seed and the turn index, so replays are exact.

use serde::{Deserialize, Serialize};

use super::{PerLevel, TurnRequest};
use crate::debate::ToxicityLevel;
use crate::seed;

const CONCEDE_STREAM: u64 = 0xC0_4CED;
const REFUSAL_STREAM: u64 = 0x5E_F05E;
const FILLER_STREAM: u64 = 0xF1_11E5;

const FALLBACK_REFUSAL: &str = "I cannot continue this conversation.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticAgentParams {
    /// Concession probability per opportunity at the No level (`q0`).
    pub base_hazard: f64,
    /// Multiplicative hazard factor per level (`s`), `s(No) = 1`.
    pub slowdown: PerLevel<f64>,
    /// Added when the speaker's opponent started the debate (`a`).
    pub anchoring_bonus: f64,
    /// Added when the speaker's opponent is the toxic agent (`b`).
    pub toxic_persuasion_bonus: f64,
    pub hazard_floor: f64,
    pub hazard_ceiling: f64,
    /// Per-debate probability that the responder refuses on its first turn.
    pub refusal_probability: PerLevel<f64>,
}

impl Default for SyntheticAgentParams {
    fn default() -> Self {
        SyntheticAgentParams {
            base_hazard: 0.135,
            slowdown: PerLevel {
                no: 1.0,
                mild: 0.55,
                moderate: 0.45,
                heavy: 0.35,
            },
            anchoring_bonus: 0.0,
            toxic_persuasion_bonus: 0.0,
            hazard_floor: 0.001,
            hazard_ceiling: 0.999,
            refusal_probability: PerLevel::uniform(0.0),
        }
    }
}

/// Which agent carries the toxicity directive, relative to the starter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToxicRole {
    None,
    Starter,
    Responder,
}

impl SyntheticAgentParams {
    pub fn validate(&self) -> Result<(), String> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.base_hazard) {
            return Err(format!("base_hazard {} is outside (0, 1)", self.base_hazard));
        }
        if !(open_unit(self.hazard_floor) && open_unit(self.hazard_ceiling) && self.hazard_floor < self.hazard_ceiling)
        {
            return Err("hazard clamps must satisfy 0 < floor < ceiling < 1".into());
        }
        if self.slowdown.no != 1.0 {
            return Err(format!("slowdown for No must be 1, got {}", self.slowdown.no));
        }
        let s = [
            self.slowdown.no,
            self.slowdown.mild,
            self.slowdown.moderate,
            self.slowdown.heavy,
        ];
        if s.iter().any(|&x| !(x > 0.0 && x.is_finite())) || s.windows(2).any(|w| w[1] > w[0]) {
            return Err("slowdown factors must be positive and non-increasing in level".into());
        }
        if !(self.anchoring_bonus >= 0.0 && self.toxic_persuasion_bonus >= 0.0) {
            return Err("anchoring and toxic persuasion bonuses must be non-negative".into());
        }
        for level in ToxicityLevel::ALL {
            let r = *self.refusal_probability.get(level);
            if !(0.0..1.0).contains(&r) {
                return Err(format!("refusal probability {r} for {level} is outside [0, 1)"));
            }
        }
        Ok(())
    }

    /// Concession hazard for a speaker.
    pub fn hazard(&self, level: ToxicityLevel, opponent_is_starter: bool, opponent_is_toxic: bool) -> f64 {
        let mut h = self.base_hazard * self.slowdown.get(level);
        if opponent_is_starter {
            h += self.anchoring_bonus;
        }
        if opponent_is_toxic {
            h += self.toxic_persuasion_bonus;
        }
        h.clamp(self.hazard_floor, self.hazard_ceiling)
    }

    /// Exact outcome distribution of one debate under this model.
    pub fn outcome_distribution(
        &self,
        level: ToxicityLevel,
        toxic: ToxicRole,
        min_rounds: u32,
        round_cap: u32,
    ) -> OutcomeDistribution {
        // The starter faces the responder and vice versa.
        let starter_h = self.hazard(level, false, toxic == ToxicRole::Responder);
        let responder_h = self.hazard(level, true, toxic == ToxicRole::Starter);
        let refusal = *self.refusal_probability.get(level);

        let mut alive = 1.0;
        let mut concede = Vec::with_capacity(round_cap as usize);
        let mut refused = 0.0;
        for t in 1..=round_cap {
            if t == 2 {
                refused = alive * refusal;
                alive -= refused;
            }
            let h = if t % 2 == 1 { starter_h } else { responder_h };
            let p = if t >= min_rounds { alive * h } else { 0.0 };
            concede.push(p);
            alive -= p;
        }
        OutcomeDistribution {
            concede,
            refused,
            capped: alive,
        }
    }

    /// Outcome distribution of a random trial at `level`: the toxic agent is
    /// the starter or the responder with equal probability.
    pub fn condition_distribution(&self, level: ToxicityLevel, min_rounds: u32, round_cap: u32) -> OutcomeDistribution {
        if level == ToxicityLevel::No {
            return self.outcome_distribution(level, ToxicRole::None, min_rounds, round_cap);
        }
        let a = self.outcome_distribution(level, ToxicRole::Starter, min_rounds, round_cap);
        let b = self.outcome_distribution(level, ToxicRole::Responder, min_rounds, round_cap);
        OutcomeDistribution {
            concede: a.concede.iter().zip(&b.concede).map(|(x, y)| 0.5 * (x + y)).collect(),
            refused: 0.5 * (a.refused + b.refused),
            capped: 0.5 * (a.capped + b.capped),
        }
    }
}

/// Per-turn outcome probabilities for one debate.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    /// `concede[t - 1]` is the probability that the debate ends by concession at turn `t`.
    pub concede: Vec<f64>,
    pub refused: f64,
    pub capped: f64,
}

impl OutcomeDistribution {
    pub fn p_converged(&self) -> f64 {
        self.concede.iter().sum()
    }

    fn conditional_moment(&self, power: i32) -> f64 {
        let weighted: f64 = self
            .concede
            .iter()
            .enumerate()
            .map(|(i, p)| p * ((i + 1) as f64).powi(power))
            .sum();
        weighted / self.p_converged()
    }

    /// `E[T_conv | converged]`.
    pub fn mean_t_conv(&self) -> f64 {
        self.conditional_moment(1)
    }

    /// `Var[T_conv | converged]`.
    pub fn var_t_conv(&self) -> f64 {
        let m = self.mean_t_conv();
        self.conditional_moment(2) - m * m
    }

    /// Probability that the starter wins, given convergence. The starter wins
    /// when the responder concedes, i.e. at even turns.
    pub fn p_starter_wins(&self) -> f64 {
        let even: f64 = self.concede.iter().skip(1).step_by(2).sum();
        even / self.p_converged()
    }
}

/// Synthetic debater bound to one parameter set.
#[derive(Debug, Clone)]
pub struct SyntheticAgent {
    params: SyntheticAgentParams,
}

const OPENERS: [&str; 6] = [
    "Consider the practical consequences",
    "Look at the evidence",
    "Think about who bears the cost",
    "History offers a clear lesson",
    "The principle at stake is simple",
    "Your last point overlooks something",
];

const CLOSERS: [&str; 6] = [
    "and that is why my position holds.",
    "which your argument does not address.",
    "so the balance of reasons favours my side.",
    "and the alternatives are worse.",
    "which matters more than the objections raised so far.",
    "and I have not heard a convincing reply.",
];

impl SyntheticAgent {
    pub fn new(params: SyntheticAgentParams) -> Self {
        SyntheticAgent { params }
    }

    pub fn params(&self) -> &SyntheticAgentParams {
        &self.params
    }

    pub fn next_message(&self, request: &TurnRequest<'_>) -> String {
        let config = request.config;
        let turn = request.turn_index();
        let debate_seed = config.seed;

        if turn == 2 {
            let u = seed::unit_f64(seed::derive(&[debate_seed, REFUSAL_STREAM]));
            if u < *self.params.refusal_probability.get(config.level) {
                return request
                    .protocol
                    .refusal_patterns
                    .first()
                    .map(|p| format!("{p}."))
                    .unwrap_or_else(|| FALLBACK_REFUSAL.to_string());
            }
        }

        if request.history.len() as u64 + 1 >= u64::from(config.min_rounds) {
            let opponent = request.side.opposite();
            let h = self
                .params
                .hazard(config.level, opponent == config.starter, config.is_toxic(opponent));
            let u = seed::unit_f64(seed::derive(&[debate_seed, CONCEDE_STREAM, u64::from(turn)]));
            if u < h {
                return format!(
                    "You have convinced me on \"{}\". {}",
                    config.topic.proposition, request.protocol.concession_marker
                );
            }
        }

        let pick = seed::derive(&[debate_seed, FILLER_STREAM, u64::from(turn)]);
        let opener = OPENERS[(pick % OPENERS.len() as u64) as usize];
        let closer = CLOSERS[((pick >> 32) % CLOSERS.len() as u64) as usize];
        let stance = match request.side {
            crate::debate::Side::Pro => "supports",
            crate::debate::Side::Con => "undermines",
        };
        format!(
            "{opener}: it {stance} the claim that {}, {closer}",
            lowercase_first(&config.topic.proposition)
        )
    }
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}
