//! Environments: the gold-mining gridworld, its exact MDP expansion, and
//! small MDP fixtures.

mod fixtures;
mod gold;
mod markov;

pub use fixtures::{
    chain_mdp, random_deterministic_policy, random_mdp, random_q, random_stochastic_policy,
};
pub use gold::{
    default_gold_layout, load_layout, GoldMiningEnv, GridAction, GridLayout, DEFAULT_LAYOUT_TEXT,
};
pub use markov::{markovize, MarkovizedGrid, MAX_MARKOVIZE_MINES};

use crate::error::Result;

/// Result of a single environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: usize,
    pub reward: f64,
    pub done: bool,
}

/// An episodic environment with integer observations and actions.
pub trait Environment {
    fn n_observations(&self) -> usize;

    fn n_actions(&self) -> usize;

    /// Starts a new episode and returns the first observation.
    fn reset(&mut self) -> usize;

    fn step(&mut self, action: usize) -> Result<StepOutcome>;
}
