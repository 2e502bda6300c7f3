use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Policy, QTable, TabularMdp};

/// Random MDP: each transition row normalizes uniform positives, rewards
/// are uniform in `[-1, 1]`.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(n_states * n_actions);
    let mut reward = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let weights: Vec<f64> = (0..n_states).map(|_| rng.gen_range(1e-3..1.0)).collect();
        let total: f64 = weights.iter().sum();
        transitions.push(weights.into_iter().map(|w| w / total).enumerate().collect());
        reward.push(rng.gen_range(-1.0..=1.0));
    }
    TabularMdp::new(n_states, n_actions, transitions, reward, gamma)
        .expect("random MDP satisfies the MDP invariants")
}

/// Single-action chain `0 -> 1 -> ... -> length-1`, the last state looping on itself.
pub fn chain_mdp(length: usize, rewards: &[f64], gamma: f64) -> TabularMdp {
    assert_eq!(rewards.len(), length, "one reward per chain state");
    let transitions = (0..length)
        .map(|s| vec![((s + 1).min(length - 1), 1.0)])
        .collect();
    TabularMdp::new(length, 1, transitions, rewards.to_vec(), gamma)
        .expect("chain MDP satisfies the MDP invariants")
}

pub fn random_q(n_states: usize, n_actions: usize, scale: f64, rng: &mut impl Rng) -> QTable {
    let values = (0..n_states * n_actions)
        .map(|_| rng.gen_range(-scale..=scale))
        .collect();
    QTable::from_vec(n_states, n_actions, values).expect("shape matches")
}

pub fn random_stochastic_policy(n_states: usize, n_actions: usize, rng: &mut impl Rng) -> Policy {
    let rows = (0..n_states)
        .map(|_| {
            let w: Vec<f64> = (0..n_actions).map(|_| rng.gen_range(1e-3..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    Policy::Stochastic(rows)
}

pub fn random_deterministic_policy(
    n_states: usize,
    n_actions: usize,
    rng: &mut impl Rng,
) -> Policy {
    Policy::Deterministic((0..n_states).map(|_| rng.gen_range(0..n_actions)).collect())
}
