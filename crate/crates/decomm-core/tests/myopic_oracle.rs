use decomm_core::domains::{build_meeting, GridConfig, MeetingPolicy};
use decomm_core::myopic::{
    comm_policy_table, pbar, rbar, theta_c_expected, theta_nc, theta_nc_meeting, FixedLocalPolicies, MeetingTableParams,
    MeetingValues,
};
use decomm_core::{AgentModel, DecMdpCom, FactoredState, GoalPredicate, Rewards};
use proptest::prelude::*;

fn small_grid(p: f64, c: f64, d: usize) -> GridConfig {
    let mut g = GridConfig::corners(p, c);
    g.width = 5;
    g.height = 5;
    g.start2 = (d.min(4), d.saturating_sub(4));
    g.horizon_cap = 150;
    g
}

#[test]
fn model_recursion_matches_distance_recursion() {
    for p in [0.5, 0.8, 1.0] {
        for d in [1, 3, 6, 8] {
            let g = small_grid(p, -1.0, d);
            let m = build_meeting(&g).unwrap();
            let pol = MeetingPolicy { grid: g };
            let v = theta_nc(&m, &m.initial, &pol).unwrap();
            let want = 2.0 * theta_nc_meeting(d / 2, d - d / 2, p, p).unwrap();
            assert!((v - want).abs() < 1e-9, "p={p} d={d}: {v} vs {want}");
        }
    }
}

#[test]
fn exchanging_in_a_deterministic_world_only_adds_its_cost() {
    let g = small_grid(1.0, -0.7, 8);
    let m = build_meeting(&g).unwrap();
    let pol = MeetingPolicy { grid: g };
    let nc = theta_nc(&m, &m.initial, &pol).unwrap();
    assert_eq!(nc, -8.0);
    for t in 1..4 {
        assert!((theta_c_expected(&m, &m.initial, t, &pol).unwrap() - (nc - 0.7)).abs() < 1e-12);
    }
    // met at t = 4: nothing left to pay for
    for t in 4..7 {
        assert!((theta_c_expected(&m, &m.initial, t, &pol).unwrap() - nc).abs() < 1e-12);
    }
}

fn chain() -> DecMdpCom {
    let ag = |p: f64| AgentModel {
        name: "c".to_string(),
        states: vec!["0".to_string(), "1".to_string(), "2".to_string()],
        actions: vec!["go".to_string(), "rest".to_string()],
        transition: vec![
            vec![vec![(1, p), (0, 1.0 - p)], vec![(0, 1.0)]],
            vec![vec![(2, p), (1, 1.0 - p)], vec![(1, 1.0)]],
            vec![vec![(2, 1.0)], vec![(2, 1.0)]],
        ],
        goal_candidates: vec![2],
        noop: Some(1),
    };
    DecMdpCom {
        agents: [ag(0.7), ag(0.4)],
        rewards: Rewards::additive(vec![-1.0, -0.25], vec![-2.0, -0.5]),
        comm_cost: -1.0,
        horizon: 6,
        initial: FactoredState::new(0, 0),
        goal: GoalPredicate::None,
    }
}

fn policies() -> FixedLocalPolicies {
    // go while not at the end, then rest; agent 2 rests at odd times
    let a1 = vec![vec![0, 0, 1]; 6];
    let a2 = (0..6).map(|t| if t % 2 == 1 { vec![1, 1, 1] } else { vec![0, 0, 1] }).collect();
    FixedLocalPolicies { actions: [a1, a2] }
}

/// Forward DP over `(x, y)` for `n` steps: probability and reward mass.
fn forward_dp(m: &DecMdpCom, pol: &FixedLocalPolicies, n: usize) -> Vec<Vec<(f64, f64)>> {
    let mut cur = vec![vec![(0.0, 0.0); 3]; 3];
    cur[0][0] = (1.0, 0.0);
    for t in 0..n {
        let mut next = vec![vec![(0.0, 0.0); 3]; 3];
        for x in 0..3 {
            for y in 0..3 {
                let (p, r) = cur[x][y];
                if p == 0.0 {
                    continue;
                }
                let (a1, a2) = (pol.actions[0][t][x], pol.actions[1][t][y]);
                let step = m.rewards.action_cost[0][a1] + m.rewards.action_cost[1][a2];
                for x2 in 0..3 {
                    for y2 in 0..3 {
                        let q = m.agents[0].prob(x, a1, x2) * m.agents[1].prob(y, a2, y2);
                        next[x2][y2].0 += p * q;
                        next[x2][y2].1 += (r + p * step) * q;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

#[test]
fn rbar_and_pbar_match_forward_dp() {
    let m = chain();
    let pol = policies();
    let s0 = FactoredState::at(0, 0, 0);
    for n in 1..=3 {
        let dp = forward_dp(&m, &pol, n);
        for x in 0..3 {
            for y in 0..3 {
                let s = FactoredState::at(x, y, n);
                let (p, rm) = dp[x][y];
                assert!((pbar(&m, &s0, &s, &pol).unwrap() - p).abs() < 1e-12);
                let want = if p > 0.0 { rm / p } else { 0.0 };
                assert!((rbar(&m, &s0, &s, &pol).unwrap() - want).abs() < 1e-12, "rbar at ({x},{y},{n})");
            }
        }
    }
    assert_eq!(pbar(&m, &s0, &s0, &pol).unwrap(), 1.0);
    assert_eq!(pbar(&m, &FactoredState::at(0, 0, 2), &FactoredState::at(1, 1, 1), &pol).unwrap(), 0.0);
    assert!(rbar(&m, &s0, &s0, &pol).is_err());
    assert!(pbar(&m, &FactoredState::new(0, 0), &s0, &pol).is_err());
}

#[test]
fn theta_minimum_on_the_ten_by_ten_grid() {
    // the placement is confirmed by scanning all four success rates
    for p in [0.2, 0.4, 0.6, 0.8] {
        let best = (0..=18)
            .map(|d1| (d1, theta_nc_meeting(d1, 18 - d1, p, p).unwrap()))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(best.0, 9, "p = {p}");
    }
    let v = theta_nc_meeting(9, 9, 0.8, 0.8).unwrap();
    assert!((v + 12.16).abs() <= 0.01, "{v}");
}

#[test]
fn no_communication_column() {
    for (p, want) in [(0.2, -104.925), (0.4, -51.4522), (0.6, -33.4955), (0.8, -24.3202)] {
        let v = 2.0 * theta_nc_meeting(9, 9, p, p).unwrap();
        assert!((v - want).abs() <= 0.01, "p = {p}: {v}");
    }
}

fn params(p: f64, c: f64) -> MeetingTableParams {
    MeetingTableParams { max_distance: 18, p1: p, p2: p, comm_cost: c, action_cost: -1.0, horizon: 200 }
}

#[test]
fn communication_time_anchors() {
    assert_eq!(comm_policy_table(&params(0.4, -1.0)).unwrap().get(5), Some(4));
    // at distance one the meeting point is agent 1's cell: an exchange can
    // never pay for itself
    for p in [0.2, 0.4, 0.6, 0.8] {
        for c in [-0.1, -1.0, -10.0] {
            assert_eq!(comm_policy_table(&params(p, c)).unwrap().get(1), None);
        }
    }
}

#[test]
fn later_exchanges_as_cost_grows() {
    for p in [0.2, 0.4, 0.6, 0.8] {
        let rows: Vec<_> = [-0.1, -1.0, -10.0].iter().map(|&c| comm_policy_table(&params(p, c)).unwrap()).collect();
        for d in 1..=18 {
            let t: Vec<usize> = rows.iter().map(|r| r.get(d).unwrap_or(usize::MAX)).collect();
            assert!(t[0] <= t[1] && t[1] <= t[2], "p={p} d={d}: {t:?}");
        }
    }
}

#[test]
fn free_exchange_at_once_never_hurts() {
    for p in [0.2, 0.4, 0.6, 0.8] {
        let v = MeetingValues::new(params(p, 0.0)).unwrap();
        for d in 1..=18 {
            assert!(v.comm_at(d, 1) >= v.no_comm(d) - 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn theta_is_symmetric_and_monotone(d1 in 0usize..12, d2 in 0usize..12, p in 0.05f64..1.0) {
        let v = theta_nc_meeting(d1, d2, p, p).unwrap();
        prop_assert!((v - theta_nc_meeting(d2, d1, p, p).unwrap()).abs() <= 1e-9 * (1.0 + v.abs()));
        prop_assert!(theta_nc_meeting(d1 + 1, d2, p, p).unwrap() <= v + 1e-9);
        prop_assert!(theta_nc_meeting(d1, d2 + 1, p, p).unwrap() <= v + 1e-9);
        prop_assert!(v <= 0.0);
    }
}
