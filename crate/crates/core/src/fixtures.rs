//! Small reference models used by tests, examples and the Python smoke test.

use crate::model::{Belief, ModelParams, RewardSpec};

/// Two-state model in which Help and Signal push the human towards the
/// prosocial state and the prosocial state helps 90% of the time.
///
/// Transition rows, action order help / no-help / signal / no-signal:
///
/// | from | help       | no-help    | signal     | no-signal  |
/// |------|------------|------------|------------|------------|
/// | s0   | [0.2, 0.8] | [0.9, 0.1] | [0.7, 0.3] | [0.9, 0.1] |
/// | s1   | [0.0, 1.0] | [0.5, 0.5] | [0.1, 0.9] | [0.5, 0.5] |
///
/// P(help | s0) = 0.1 and P(help | s1) = 0.9 for both R-mode actions.
pub fn fixture_a() -> ModelParams {
    let transition = vec![
        vec![vec![0.2, 0.8], vec![0.9, 0.1], vec![0.7, 0.3], vec![0.9, 0.1]],
        vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![0.1, 0.9], vec![0.5, 0.5]],
    ];
    let observation = vec![
        vec![vec![0.1, 0.9], vec![0.1, 0.9]],
        vec![vec![0.9, 0.1], vec![0.9, 0.1]],
    ];
    ModelParams::new(transition, observation, Belief::uniform(2)).expect("fixture is valid")
}

/// Well-separated two-state model for estimation tests: P(help | s) is 0.05
/// or 0.95 and every action has a distinct transition matrix.
pub fn planted_two_state() -> ModelParams {
    let transition = vec![
        vec![vec![0.02, 0.98], vec![0.98, 0.02], vec![0.05, 0.95], vec![0.98, 0.02]],
        vec![vec![0.02, 0.98], vec![0.95, 0.05], vec![0.02, 0.98], vec![0.05, 0.95]],
    ];
    let observation = vec![
        vec![vec![0.05, 0.95], vec![0.05, 0.95]],
        vec![vec![0.95, 0.05], vec![0.95, 0.05]],
    ];
    ModelParams::new(transition, observation, Belief::new(vec![0.5, 0.5]).unwrap()).expect("fixture is valid")
}

/// Four-state ladder in which Help and Signal raise prosociality and the
/// free actions let it decay. Used for the sensitivity sweep.
pub fn four_state_ladder() -> ModelParams {
    let up = |p: f64| -> Vec<Vec<f64>> {
        vec![
            vec![1.0 - p, p, 0.0, 0.0],
            vec![0.0, 1.0 - p, p, 0.0],
            vec![0.0, 0.0, 1.0 - p, p],
            vec![0.0, 0.0, 0.0, 1.0],
        ]
    };
    let down = |q: f64| -> Vec<Vec<f64>> {
        vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![q, 1.0 - q, 0.0, 0.0],
            vec![0.0, q, 1.0 - q, 0.0],
            vec![0.0, 0.0, q, 1.0 - q],
        ]
    };
    let help = up(0.6);
    let no_help = down(0.2);
    let signal = up(0.35);
    let no_signal = down(0.1);
    let transition = (0..4)
        .map(|s| vec![help[s].clone(), no_help[s].clone(), signal[s].clone(), no_signal[s].clone()])
        .collect();
    let observation = [0.1, 0.35, 0.6, 0.85]
        .iter()
        .map(|&h| vec![vec![h, 1.0 - h], vec![(h - 0.05f64).max(0.0), 1.0 - (h - 0.05f64).max(0.0)]])
        .collect();
    ModelParams::new(transition, observation, Belief::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap())
        .expect("fixture is valid")
}

/// Three-state model where helping from the bottom state pays off only two
/// rounds later: Help lifts s0 to s1 (worth nothing) and only further
/// cooperation from s1 reaches s2.
pub fn delayed_payoff() -> ModelParams {
    let transition = vec![
        // help, no-help, signal, no-signal
        vec![
            vec![0.1, 0.9, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.6, 0.4, 0.0],
            vec![1.0, 0.0, 0.0],
        ],
        vec![
            vec![0.0, 0.2, 0.8],
            vec![0.6, 0.4, 0.0],
            vec![0.0, 0.3, 0.7],
            vec![0.6, 0.4, 0.0],
        ],
        vec![
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.3, 0.7],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.3, 0.7],
        ],
    ];
    let observation = vec![
        vec![vec![0.1, 0.9], vec![0.05, 0.95]],
        vec![vec![0.5, 0.5], vec![0.4, 0.6]],
        vec![vec![0.9, 0.1], vec![0.85, 0.15]],
    ];
    ModelParams::new(transition, observation, Belief::new(vec![0.8, 0.2, 0.0]).unwrap()).expect("fixture is valid")
}

/// Reward paired with [`delayed_payoff`]: only the top state is worth much
/// and both costly actions cost 10.
pub fn delayed_payoff_reward() -> RewardSpec {
    RewardSpec::tabulated(vec![0.0, 5.0, 40.0], 10.0, 10.0, 0.95).expect("reward is valid")
}
