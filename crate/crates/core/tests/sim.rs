mod common;

use common::*;
use proptest::prelude::*;
use prosocial_core::fixtures::*;
use prosocial_core::model::DEFAULT_SCORES;
use prosocial_core::planner::exact_value;
use prosocial_core::policy::{myopic_score, PolicyKind, ReactiveStart};
use prosocial_core::session::replay;
use prosocial_core::sim::*;
use prosocial_core::{belief_update, Belief, InteractionEvent, Observation, RewardSpec, RobotAction};

fn tab_reward() -> RewardSpec {
    RewardSpec::tabulated(vec![0.0, 10.0], 15.0, 15.0, 0.95).unwrap()
}

#[test]
fn always_raises_final_belief_over_never() {
    let p = fixture_a();
    let modes = [H, R, H, R, H];
    let scores = ScoreMap(vec![1.0, 2.0]);
    let rep = compare_policies(
        &p,
        &p,
        &[PolicyKind::NeverHelpSignal, PolicyKind::AlwaysHelpSignal],
        &modes,
        &tab_reward(),
        &scores,
        10_000,
        1,
    )
    .unwrap();
    let final_p1 = |name: &str| -> Stat {
        let eps = &rep.policy(name).unwrap().episodes;
        Stat::of(&eps.iter().map(|e| e.final_belief()[1]).collect::<Vec<_>>())
    };
    let (never, always) = (final_p1("never"), final_p1("always"));
    assert!(always.lower() > never.upper(), "{always:?} vs {never:?}");
    for e in &rep.policy("always").unwrap().episodes {
        let observed = e.rounds.iter().filter(|r| r.observation != Observation::None).count();
        assert_eq!(observed, 2);
    }
}

#[test]
fn always_has_higher_help_rate_by_round_nine() {
    let p = fixture_a();
    let modes = prosocial_core::trajectory::builtin_sequence("HRHRHRHRH").unwrap().modes;
    let rep = compare_policies(
        &p,
        &p,
        &[PolicyKind::AlwaysHelpSignal, PolicyKind::NeverHelpSignal],
        &modes,
        &tab_reward(),
        &ScoreMap(vec![1.0, 2.0]),
        10_000,
        2,
    )
    .unwrap();
    let last = |name: &str| rep.policy(name).unwrap().per_round[8].help_rate.unwrap();
    assert!(last("always").lower() > last("never").upper());
    let csv = rep.to_csv();
    assert_eq!(csv.lines().count(), 1 + 2 * 9);
    // Baseline-relative series is exactly one for the baseline itself.
    for r in &rep.policy("never").unwrap().per_round {
        assert_eq!(r.relative_cumulative_score, Some(1.0));
    }
}

#[test]
fn delayed_payoff_separates_planner_from_myopic() {
    let p = delayed_payoff();
    let reward = delayed_payoff_reward();
    let modes = prosocial_core::trajectory::builtin_sequence("HRHRHRHRH").unwrap().modes;
    let exact = exact_value(&p, &reward, &p.initial_belief, &modes, reward.gamma).unwrap();
    let first = exact.first_action.unwrap();
    let [costly, free] = modes[0].actions();
    let myopic_first = if myopic_score(&p, &reward, &p.initial_belief, costly)
        > myopic_score(&p, &reward, &p.initial_belief, free)
    {
        costly
    } else {
        free
    };
    assert_eq!(first, costly);
    assert_eq!(myopic_first, free);
}

#[test]
fn stationary_help_frequency() {
    // Signal every round: the latent chain follows T(signal) and each round
    // helps with probability O(help | s, signal).
    let p = fixture_a();
    let t = &p.transition;
    let (a, b) = (t[0][2][1], t[1][2][0]);
    let pi = [b / (a + b), a / (a + b)];
    let expected = pi[0] * p.observation[0][0][0] + pi[1] * p.observation[1][0][0];
    let modes = vec![R; 400];
    let burn_in = 50;
    let mut per_episode = Vec::new();
    for i in 0..100 {
        let e = run_episode(&p, &p, &PolicyKind::AlwaysHelpSignal, &modes, &tab_reward(), &ScoreMap(vec![0.0, 1.0]), i)
            .unwrap();
        let helped = e.rounds[burn_in..].iter().filter(|r| r.observation == Observation::HumanHelped).count();
        per_episode.push(helped as f64 / (modes.len() - burn_in) as f64);
    }
    let s = Stat::of(&per_episode);
    assert!((s.mean - expected).abs() <= s.ci95.max(1e-3) * 1.5, "{s:?} vs {expected}");
}

#[test]
fn model_mismatch_uses_robot_model_for_beliefs() {
    let truth = fixture_a();
    let robot = planted_two_state();
    let modes = [R, H, R, R];
    let e = run_episode(&truth, &robot, &PolicyKind::MyopicGreedy, &modes, &tab_reward(), &ScoreMap(vec![0.0, 1.0]), 3)
        .unwrap();
    let events: Vec<_> = e
        .rounds
        .iter()
        .map(|r| InteractionEvent::new(r.round, r.mode, r.action, r.observation).unwrap())
        .collect();
    assert_eq!(replay(&robot, &events).unwrap().probs(), e.final_belief());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episodes_are_deterministic_and_replayable(seed in any::<u64>(), len in 1usize..12, which in 0usize..4) {
        let p = four_state_ladder();
        let reward = RewardSpec::reference();
        let modes: Vec<_> = (0..len).map(|k| if (k + seed as usize).is_multiple_of(2) { H } else { R }).collect();
        let policy = [
            PolicyKind::AlwaysHelpSignal,
            PolicyKind::NeverHelpSignal,
            PolicyKind::MyopicGreedy,
            PolicyKind::ReciprocalReactive(ReactiveStart::Neutral),
        ][which].clone();
        let scores = ScoreMap::from_reward(&reward);
        let a = run_episode(&p, &p, &policy, &modes, &reward, &scores, seed).unwrap();
        let b = run_episode(&p, &p, &policy, &modes, &reward, &scores, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let mut belief = p.initial_belief.clone();
        for r in &a.rounds {
            prop_assert!(r.action.is_legal(r.mode));
            belief = belief_update(&p, &belief, r.mode, r.action, r.observation).unwrap();
            prop_assert_eq!(belief.probs(), r.belief.as_slice());
            prop_assert!(Belief::new(r.belief.clone()).is_ok());
        }
        let observed = a.rounds.iter().filter(|r| r.observation != Observation::None).count();
        prop_assert_eq!(observed, modes.iter().filter(|m| **m == R).count());
    }
}

#[test]
fn sweep_matches_two_step_oracle() {
    let p = four_state_ladder();
    let grid = SweepGrid::reference(DEFAULT_SCORES.to_vec());
    let rep = sensitivity_sweep(&p, &grid, 0.95).unwrap();
    assert_eq!(rep.cells.len(), 20);
    for cell in &rep.cells {
        let values = exp_values(cell.r, &DEFAULT_SCORES);
        let (first, follow) = two_step_sweep_oracle(&p, &values, cell.c_help, 0.95, p.initial_belief.probs());
        assert_eq!(cell.first_action, Some(first), "r={} c={}", cell.r, cell.c_help);
        for (a0, a1) in follow {
            assert_eq!(cell.next_action_after(a0), Some(a1), "r={} c={} after {a0}", cell.r, cell.c_help);
        }
    }
}

#[test]
fn sweep_corner_cells() {
    let p = four_state_ladder();
    let rep = sensitivity_sweep(&p, &SweepGrid::reference(DEFAULT_SCORES.to_vec()), 0.95).unwrap();
    for cost in [30.0, 15.0, 5.0] {
        let c = rep.cell(0.001, cost).unwrap();
        assert_eq!(c.first_action, Some(RobotAction::NoHelp));
        assert!(c.branches.iter().all(|b| b.next_action == Some(RobotAction::NoSignal)));
    }
    for r in SWEEP_R_VALUES {
        let c = rep.cell(r, 0.0).unwrap();
        assert_eq!(c.first_action, Some(RobotAction::Help));
        assert!(c.branches.iter().all(|b| b.next_action == Some(RobotAction::Signal)));
    }
}

#[test]
fn sweep_cells_do_not_depend_on_grid_order() {
    let p = four_state_ladder();
    let grid = SweepGrid::reference(DEFAULT_SCORES.to_vec());
    let mut shuffled = grid.clone();
    shuffled.r_values.reverse();
    shuffled.cost_values.rotate_left(1);
    let a = sensitivity_sweep(&p, &grid, 0.95).unwrap();
    let b = sensitivity_sweep(&p, &shuffled, 0.95).unwrap();
    for cell in &a.cells {
        assert_eq!(Some(cell), b.cell(cell.r, cell.c_help));
    }
}
