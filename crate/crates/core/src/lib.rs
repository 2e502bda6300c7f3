//! Max-Bellman dynamic programming and tabular reinforcement learning.
//!
//! The max-Bellman objective scores a trajectory by its largest discounted
//! reward, `max_t γ^t r_t`, instead of the discounted sum. This crate
//! provides the corresponding backup operators and fixed-point solver,
//! brute-force oracles, tabular Q-learning and Max-Q learners, a
//! gold-mining gridworld, and an experiment harness.

pub mod envs;
pub mod error;
pub mod experiments;
pub mod learners;
pub mod mdp;
pub mod operators;
pub mod oracle;

pub use error::{Error, Result};
pub use mdp::{greedy_policy, sup_norm_distance, Policy, QTable, TabularMdp};
