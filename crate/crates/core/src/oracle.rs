//! Brute-force ground truth for the expected-max objective.
//!
//! Everything here is deliberately naive: exhaustive enumeration of action
//! sequences (deterministic environments), exhaustive enumeration of
//! state/action paths (small stochastic MDPs), and finite-horizon backward
//! induction.

use rayon::prelude::*;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::mdp::{Policy, QTable, TabularMdp};

/// Default cap on the number of enumerated sequences (2^26).
pub const DEFAULT_BUDGET: u128 = 1 << 26;

/// Best values over all action sequences of a deterministic environment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    /// Best undiscounted sum of rewards.
    pub best_cumulative_return: f64,
    pub best_return_actions: Vec<usize>,
    /// Best `max_t γ^t r_t` (t counted from 0).
    pub best_max_discounted_reward: f64,
    pub best_discounted_actions: Vec<usize>,
    /// Best `max_t r_t`.
    pub best_max_raw_reward: f64,
    pub best_raw_actions: Vec<usize>,
    /// Best undiscounted return among sequences attaining `best_max_raw_reward`.
    pub best_return_reaching_raw_max: f64,
    pub best_return_reaching_raw_max_actions: Vec<usize>,
    pub sequences: u64,
}

/// Return, discounted max and raw max of one replayed sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutValues {
    pub cumulative_return: f64,
    pub max_discounted_reward: f64,
    pub max_raw_reward: f64,
}

/// Resets a copy of `env` and plays `actions`, stopping early if the episode ends.
pub fn replay<E: Environment + Clone>(
    env: &E,
    actions: &[usize],
    gamma: f64,
) -> Result<RolloutValues> {
    let mut env = env.clone();
    env.reset();
    let mut acc = Accum::new();
    for &a in actions {
        let out = env.step(a)?;
        acc = acc.push(out.reward, gamma);
        if out.done {
            break;
        }
    }
    Ok(RolloutValues {
        cumulative_return: acc.sum,
        max_discounted_reward: acc.disc_max,
        max_raw_reward: acc.raw_max,
    })
}

#[derive(Debug, Clone, Copy)]
struct Accum {
    sum: f64,
    disc_max: f64,
    raw_max: f64,
    discount: f64,
}

impl Accum {
    fn new() -> Self {
        Self {
            sum: 0.0,
            disc_max: f64::NEG_INFINITY,
            raw_max: f64::NEG_INFINITY,
            discount: 1.0,
        }
    }

    fn push(self, r: f64, gamma: f64) -> Self {
        Self {
            sum: self.sum + r,
            disc_max: self.disc_max.max(self.discount * r),
            raw_max: self.raw_max.max(r),
            discount: self.discount * gamma,
        }
    }
}

#[derive(Debug, Clone)]
struct Best {
    value: f64,
    actions: Vec<usize>,
}

impl Best {
    fn empty() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            actions: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, actions: &[usize]) {
        if value > self.value {
            self.value = value;
            self.actions.clear();
            self.actions.extend_from_slice(actions);
        }
    }

    fn merge(&mut self, other: Best) {
        if other.value > self.value {
            *self = other;
        }
    }
}

#[derive(Debug, Clone)]
struct Search {
    ret: Best,
    disc: Best,
    raw: Best,
    // (raw max, return) compared lexicographically
    raw_then_ret: (f64, Best),
    sequences: u64,
}

impl Search {
    fn new() -> Self {
        Self {
            ret: Best::empty(),
            disc: Best::empty(),
            raw: Best::empty(),
            raw_then_ret: (f64::NEG_INFINITY, Best::empty()),
            sequences: 0,
        }
    }

    fn leaf(&mut self, acc: &Accum, actions: &[usize]) {
        self.sequences += 1;
        self.ret.offer(acc.sum, actions);
        self.disc.offer(acc.disc_max, actions);
        self.raw.offer(acc.raw_max, actions);
        let (raw, best) = &mut self.raw_then_ret;
        if acc.raw_max > *raw {
            *raw = acc.raw_max;
            best.value = acc.sum;
            best.actions.clear();
            best.actions.extend_from_slice(actions);
        } else if acc.raw_max == *raw {
            best.offer(acc.sum, actions);
        }
    }

    fn merge(&mut self, other: Search) {
        self.sequences += other.sequences;
        self.ret.merge(other.ret);
        self.disc.merge(other.disc);
        self.raw.merge(other.raw);
        if other.raw_then_ret.0 > self.raw_then_ret.0 {
            self.raw_then_ret = other.raw_then_ret;
        } else if other.raw_then_ret.0 == self.raw_then_ret.0 {
            self.raw_then_ret.1.merge(other.raw_then_ret.1);
        }
    }
}

fn dfs<E: Environment + Clone>(
    env: &E,
    depth: usize,
    horizon: usize,
    gamma: f64,
    acc: Accum,
    actions: &mut Vec<usize>,
    search: &mut Search,
) -> Result<()> {
    let n_actions = env.n_actions();
    for a in 0..n_actions {
        let mut child = env.clone();
        let out = child.step(a)?;
        let next = acc.push(out.reward, gamma);
        actions.push(a);
        if out.done || depth + 1 == horizon {
            search.leaf(&next, actions);
        } else {
            dfs(&child, depth + 1, horizon, gamma, next, actions, search)?;
        }
        actions.pop();
    }
    Ok(())
}

/// Exhaustively enumerates every action sequence of length `horizon`
/// (shorter if the environment ends the episode first).
///
/// Sequences are visited in lexicographic action order and ties keep the
/// first sequence found. Branches on the first action run in parallel.
pub fn enumerate_deterministic<E>(
    env: &E,
    horizon: usize,
    gamma: f64,
    budget: u128,
) -> Result<TrajectoryStats>
where
    E: Environment + Clone + Send + Sync,
{
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let n_actions = env.n_actions();
    let sequences = (n_actions as u128)
        .checked_pow(horizon as u32)
        .unwrap_or(u128::MAX);
    if sequences > budget {
        return Err(Error::BudgetExceeded { sequences, budget });
    }
    let mut root = env.clone();
    root.reset();

    let branches: Vec<Result<Search>> = (0..n_actions)
        .into_par_iter()
        .map(|a| {
            let mut search = Search::new();
            let mut child = root.clone();
            let out = child.step(a)?;
            let acc = Accum::new().push(out.reward, gamma);
            let mut actions = vec![a];
            if out.done || horizon == 1 {
                search.leaf(&acc, &actions);
            } else {
                dfs(&child, 1, horizon, gamma, acc, &mut actions, &mut search)?;
            }
            Ok(search)
        })
        .collect();

    let mut total = Search::new();
    for branch in branches {
        total.merge(branch?);
    }
    Ok(TrajectoryStats {
        best_cumulative_return: total.ret.value,
        best_return_actions: total.ret.actions,
        best_max_discounted_reward: total.disc.value,
        best_discounted_actions: total.disc.actions,
        best_max_raw_reward: total.raw.value,
        best_raw_actions: total.raw.actions,
        best_return_reaching_raw_max: total.raw_then_ret.1.value,
        best_return_reaching_raw_max_actions: total.raw_then_ret.1.actions,
        sequences: total.sequences,
    })
}

/// Finite-horizon max-Bellman backups.
///
/// `result[k - 1]` holds the values with `k` decisions remaining:
/// `Q_1 = r`, `Q_{k+1}(s, a) = max(r(s, a), γ E_{s'}[max_a' Q_k(s', a')])`.
/// Past the horizon the continuation is treated as `-inf`, hence `Q_1 = r`.
pub fn backward_induction_max(mdp: &TabularMdp, horizon: usize) -> Result<Vec<QTable>> {
    backward_induction(mdp, horizon, |q, s| q.max_value(s))
}

/// Same as [`backward_induction_max`] with the continuation taken under `policy`.
pub fn backward_induction_max_policy(
    mdp: &TabularMdp,
    policy: &Policy,
    horizon: usize,
) -> Result<Vec<QTable>> {
    policy.check_compatible(mdp.n_states(), mdp.n_actions())?;
    backward_induction(mdp, horizon, |q, s| policy.expected_value(q, s))
}

fn backward_induction(
    mdp: &TabularMdp,
    horizon: usize,
    state_value: impl Fn(&QTable, usize) -> f64,
) -> Result<Vec<QTable>> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let gamma = mdp.gamma();
    let mut levels = vec![mdp.reward_table()];
    for _ in 1..horizon {
        let prev = levels.last().expect("at least the base level");
        let v: Vec<f64> = (0..mdp.n_states()).map(|s| state_value(prev, s)).collect();
        let next = QTable::map_indexed(mdp.n_states(), mdp.n_actions(), |s, a| {
            let cont: f64 = mdp.transitions(s, a).iter().map(|&(n, p)| p * v[n]).sum();
            mdp.reward(s, a).max(gamma * cont)
        });
        levels.push(next);
    }
    Ok(levels)
}

/// Exact `E[max_{t < horizon} γ^t r(s_t, a_t)]` from `start`, with `a_0 ~ policy`.
///
/// Enumerates every state/action path weighted by its probability.
pub fn policy_expected_max(
    mdp: &TabularMdp,
    policy: &Policy,
    horizon: usize,
    start: usize,
    budget: u128,
) -> Result<f64> {
    policy.check_compatible(mdp.n_states(), mdp.n_actions())?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if start >= mdp.n_states() {
        return Err(Error::IndexOutOfRange {
            what: "start state",
            index: start,
            limit: mdp.n_states(),
        });
    }
    let max_succ = (0..mdp.n_states())
        .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| mdp.transitions(s, a).len())
        .max()
        .unwrap_or(1);
    let max_actions = (0..mdp.n_states())
        .map(|s| {
            (0..mdp.n_actions())
                .filter(|&a| policy.probability(s, a) > 0.0)
                .count()
        })
        .max()
        .unwrap_or(1);
    let branching = (max_succ * max_actions) as u128;
    let paths = branching.checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if paths > budget {
        return Err(Error::BudgetExceeded {
            sequences: paths,
            budget,
        });
    }
    Ok(expected_max_from(
        mdp,
        policy,
        start,
        0,
        horizon,
        1.0,
        f64::NEG_INFINITY,
    ))
}

fn expected_max_from(
    mdp: &TabularMdp,
    policy: &Policy,
    s: usize,
    t: usize,
    horizon: usize,
    discount: f64,
    running: f64,
) -> f64 {
    let mut total = 0.0;
    for a in 0..mdp.n_actions() {
        let pa = policy.probability(s, a);
        if pa == 0.0 {
            continue;
        }
        let m = running.max(discount * mdp.reward(s, a));
        let value = if t + 1 == horizon {
            m
        } else {
            mdp.transitions(s, a)
                .iter()
                .map(|&(next, p)| {
                    p * expected_max_from(
                        mdp,
                        policy,
                        next,
                        t + 1,
                        horizon,
                        discount * mdp.gamma(),
                        m,
                    )
                })
                .sum()
        };
        total += pa * value;
    }
    total
}
