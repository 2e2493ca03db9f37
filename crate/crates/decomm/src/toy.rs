//! Small built-in models for smoke runs.

use decomm_core::{AgentModel, DecMdpCom, FactoredState, GoalPredicate, Rewards};

fn two_cells(name: &str, p: f64) -> AgentModel {
    AgentModel {
        name: name.to_string(),
        states: vec!["home".into(), "site".into()],
        actions: vec!["go".into(), "stay".into()],
        transition: vec![vec![vec![(1, p), (0, 1.0 - p)], vec![(0, 1.0)]], vec![vec![(1, 1.0)], vec![(1, 1.0)]]],
        goal_candidates: vec![0, 1],
        noop: Some(1),
    }
}

/// Two agents that each try to reach `site` within three steps; the team
/// earns 10 only if both arrive. Moving costs 1, an exchange 0.5.
pub fn toy2() -> DecMdpCom {
    let mut rewards = Rewards::additive(vec![-1.0, 0.0], vec![-1.0, 0.0]);
    rewards.terminal = Some(vec![0.0, 0.0, 0.0, 10.0]);
    DecMdpCom {
        agents: [two_cells("left", 0.75), two_cells("right", 0.5)],
        rewards,
        comm_cost: -0.5,
        horizon: 3,
        initial: FactoredState::new(0, 0),
        goal: GoalPredicate::States(vec![(1, 1)]),
    }
}
