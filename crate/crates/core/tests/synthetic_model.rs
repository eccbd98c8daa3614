//! The synthetic debater against its closed forms and exact law.

mod common;

use common::*;
use debatesim_core::agents::synthetic::{SyntheticAgent, ToxicRole};
use debatesim_core::agents::PerLevel;
use debatesim_core::montecarlo::{plan_trials, run_trial};
use debatesim_core::stats::{histogram, OutcomeRecord};
use debatesim_core::{
    run_debate, AgentHandle, Backend, ConvergenceProtocol, DebateConfig, DebateStatus, Side, SyntheticAgentParams,
    Topic, ToxicityLevel, Transcript,
};

fn config(level: ToxicityLevel, toxic: Option<Side>, min_rounds: u32, cap: u32, seed: u64) -> DebateConfig {
    DebateConfig {
        topic: Topic {
            id: "t".into(),
            domain: "Sport".into(),
            proposition: "We should ban boxing".into(),
        },
        starter: Side::Pro,
        toxic_side: toxic,
        level,
        round_cap: cap,
        min_rounds,
        seed,
        model_tag: "synthetic".into(),
    }
}

fn simulate(params: &SyntheticAgentParams, template: &DebateConfig, seed: u64) -> Transcript {
    let agent = |side| {
        AgentHandle::new(
            side,
            "p",
            String::new(),
            Backend::Synthetic(SyntheticAgent::new(params.clone())),
        )
    };
    let (mut pro, mut con) = (agent(Side::Pro), agent(Side::Con));
    let cfg = DebateConfig {
        seed,
        ..template.clone()
    };
    run_debate(&cfg, &mut pro, &mut con, &ConvergenceProtocol::default()).unwrap()
}

#[test]
fn exact_law_matches_oracle() {
    let params = SyntheticAgentParams {
        base_hazard: 0.2,
        anchoring_bonus: 0.07,
        toxic_persuasion_bonus: 0.11,
        refusal_probability: PerLevel {
            no: 0.0,
            mild: 0.05,
            moderate: 0.1,
            heavy: 0.3,
        },
        ..Default::default()
    };
    for level in ToxicityLevel::ALL {
        let roles: &[ToxicRole] = if level == ToxicityLevel::No {
            &[ToxicRole::None]
        } else {
            &[ToxicRole::Starter, ToxicRole::Responder]
        };
        let s = *params.slowdown.get(level);
        let r = *params.refusal_probability.get(level);
        for &role in roles {
            for &(m, cap) in &[(0u32, 10u32), (1, 7), (2, 60), (5, 23)] {
                let got = params.outcome_distribution(level, role, m, cap);
                let hs = hazard(0.2, s, 0.07, 0.11, false, role == ToxicRole::Responder, 0.001, 0.999);
                let hr = hazard(0.2, s, 0.07, 0.11, true, role == ToxicRole::Starter, 0.001, 0.999);
                let want = exact_law(hs, hr, r, m, cap);
                for (t, (a, b)) in got.concede.iter().zip(&want.concede).enumerate() {
                    assert!((a - b).abs() < 1e-14, "{level} {role:?} m={m} t={}: {a} vs {b}", t + 1);
                }
                assert!((got.refused - want.refused).abs() < 1e-14);
                assert!((got.capped - want.capped).abs() < 1e-14);
                let total = got.p_converged() + got.refused + got.capped;
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn starter_edge_without_anchoring() {
    // With a constant hazard q and no cap, the responder concedes first with
    // probability 1 / (2 - q).
    let params = SyntheticAgentParams::default();
    let d = params.outcome_distribution(ToxicityLevel::No, ToxicRole::None, 2, 400);
    let q: f64 = 0.135;
    assert!((d.p_starter_wins() - 1.0 / (2.0 - q)).abs() < 1e-12);
}

#[test]
fn geometric_closed_form_matches_million_sample_simulation() {
    let params = SyntheticAgentParams {
        base_hazard: 0.25,
        slowdown: PerLevel::uniform(1.0),
        ..Default::default()
    };
    let template = config(ToxicityLevel::No, None, 2, 60, 0);
    let closed = truncated_geometric_mean(0.25, 2, 60);
    let exact = params
        .outcome_distribution(ToxicityLevel::No, ToxicRole::None, 2, 60)
        .mean_t_conv();
    assert!((closed - exact).abs() < 1e-10, "{closed} vs {exact}");

    let n = 1_000_000u64;
    let mut sum = 0u64;
    let mut converged = 0u64;
    for i in 0..n {
        let t = simulate(&params, &template, debatesim_core::seed::derive(&[99, i]));
        if let Some(tc) = t.t_conv {
            sum += u64::from(tc);
            converged += 1;
        }
    }
    let sim = sum as f64 / converged as f64;
    assert!(
        ((sim - closed) / closed).abs() < 0.01,
        "simulated {sim}, closed form {closed}"
    );
}

#[test]
fn mean_latency_increases_with_level() {
    let plan = synthetic_plan(10_000, 31, &ToxicityLevel::ALL);
    let trials = plan_trials(&plan);
    let mut means = Vec::new();
    for level in ToxicityLevel::ALL {
        let ts: Vec<f64> = trials
            .iter()
            .filter(|a| a.condition == level)
            .filter_map(|a| run_trial(&plan, a).unwrap().t_conv)
            .map(f64::from)
            .collect();
        means.push(mean(&ts));
    }
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn replay_is_byte_identical() {
    let params = SyntheticAgentParams {
        anchoring_bonus: 0.03,
        ..Default::default()
    };
    let template = config(ToxicityLevel::Heavy, Some(Side::Con), 2, 60, 0);
    for seed in 0..50 {
        let a = serde_json::to_string(&simulate(&params, &template, seed)).unwrap();
        let b = serde_json::to_string(&simulate(&params, &template, seed)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn floor_hazard_never_concedes_on_turn_one() {
    let params = SyntheticAgentParams {
        base_hazard: 0.0005,
        ..Default::default()
    };
    let template = config(ToxicityLevel::No, None, 2, 10, 0);
    for seed in 0..200 {
        let t = simulate(&params, &template, seed);
        assert!(t.t_conv.is_none_or(|tc| tc >= 2));
        assert_eq!(t.turns[0].kind, debatesim_core::TurnKind::Argument);
    }
}

#[test]
fn histogram_mode_matches_closed_form() {
    let plan = synthetic_plan(1000, 2026, &[ToxicityLevel::No]);
    let records: Vec<OutcomeRecord> = plan_trials(&plan)
        .iter()
        .filter_map(|a| OutcomeRecord::from_transcript(&run_trial(&plan, a).unwrap()))
        .collect();
    let h = histogram(&records, 23);
    assert_eq!(h.len(), 1);
    assert_eq!(h[0].mode(), Some(truncated_geometric_mode(0.135, 2)));
    assert_eq!(h[0].total(), records.len() as u64);
}

#[test]
fn refusal_rate_within_binomial_interval() {
    let mut plan = synthetic_plan(1000, 17, &[ToxicityLevel::Heavy]);
    plan.backend = debatesim_core::BackendSpec::Synthetic(SyntheticAgentParams {
        refusal_probability: PerLevel::uniform(0.1),
        ..Default::default()
    });
    let refused = plan_trials(&plan)
        .iter()
        .filter(|a| run_trial(&plan, a).unwrap().status == DebateStatus::Refused)
        .count() as u64;
    let (lo, hi) = binom_central_interval(1000, 0.1, 0.99);
    assert!(lo >= 70 && hi <= 130);
    assert!((lo..=hi).contains(&refused), "{refused} outside [{lo}, {hi}]");
}
