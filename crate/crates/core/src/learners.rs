//! Tabular TD learners (Q-learning and Max-Q), exploration schedules, and
//! the clipped double-Q max-Bellman target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::mdp::QTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateRule {
    /// Target `r + γ max_a Q(s', a)`.
    QLearning,
    /// Target `max(r, γ max_a Q(s', a))`.
    MaxQ,
}

impl UpdateRule {
    pub fn name(self) -> &'static str {
        match self {
            UpdateRule::QLearning => "q-learning",
            UpdateRule::MaxQ => "max-q",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "q-learning" | "qlearning" | "q" => Ok(UpdateRule::QLearning),
            "max-q" | "maxq" => Ok(UpdateRule::MaxQ),
            other => Err(Error::Config(format!("unknown update rule `{other}`"))),
        }
    }

    /// One-step TD target; on the terminal transition there is no bootstrap.
    pub fn target(self, r: f64, gamma: f64, next_max: f64, terminal: bool) -> f64 {
        if terminal {
            return r;
        }
        match self {
            UpdateRule::QLearning => r + gamma * next_max,
            UpdateRule::MaxQ => r.max(gamma * next_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Linear interpolation from `start` to `end` over `over_episodes`, then flat.
    LinearDecay {
        start: f64,
        end: f64,
        over_episodes: usize,
    },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = match *self {
            Schedule::Constant(v) => in_unit(v),
            Schedule::LinearDecay {
                start,
                end,
                over_episodes,
            } => in_unit(start) && in_unit(end) && over_episodes >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid schedule {self:?}")))
        }
    }

    /// Value at 0-based `episode`.
    pub fn value(&self, episode: usize) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::LinearDecay {
                start,
                end,
                over_episodes,
            } => {
                if episode >= over_episodes {
                    end
                } else {
                    start + (end - start) * (episode as f64 / over_episodes as f64)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub rule: UpdateRule,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: Schedule,
    pub episodes: usize,
    pub seed: u64,
}

impl LearnerConfig {
    /// Gold-mining hyperparameters: α = 0.001, γ = 0.99, ε 0.2 → 0 over
    /// 50 000 episodes, 100 000 episodes in total.
    pub fn gold_mining(rule: UpdateRule, seed: u64) -> Self {
        Self {
            rule,
            alpha: 0.001,
            gamma: 0.99,
            epsilon: Schedule::LinearDecay {
                start: 0.2,
                end: 0.0,
                over_episodes: 50_000,
            },
            episodes: 100_000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        self.epsilon.validate()
    }
}

/// Per-episode statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeLog {
    pub cumulative_return: f64,
    /// Largest raw (undiscounted) reward seen in the episode.
    pub max_reward: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub q: QTable,
    pub logs: Vec<EpisodeLog>,
}

fn check_indices(q: &QTable, s: usize, a: usize, s_next: usize) -> Result<()> {
    for (what, index, limit) in [
        ("state", s, q.n_states()),
        ("action", a, q.n_actions()),
        ("next state", s_next, q.n_states()),
    ] {
        if index >= limit {
            return Err(Error::IndexOutOfRange { what, index, limit });
        }
    }
    Ok(())
}

/// In-place TD update of entry `(s, a)`.
#[allow(clippy::too_many_arguments)]
pub fn td_update_in_place(
    rule: UpdateRule,
    q: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
    terminal: bool,
) -> Result<()> {
    check_indices(q, s, a, s_next)?;
    let target = rule.target(r, gamma, q.max_value(s_next), terminal);
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (target - old));
    Ok(())
}

/// `Q(s,a) += α (r + γ max_a' Q(s',a') - Q(s,a))`, returning a new table.
#[allow(clippy::too_many_arguments)]
pub fn q_learning_update(
    q: &QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
    terminal: bool,
) -> Result<QTable> {
    let mut out = q.clone();
    td_update_in_place(
        UpdateRule::QLearning,
        &mut out,
        s,
        a,
        r,
        s_next,
        alpha,
        gamma,
        terminal,
    )?;
    Ok(out)
}

/// `Q(s,a) += α (max(r, γ max_a' Q(s',a')) - Q(s,a))`, returning a new table.
#[allow(clippy::too_many_arguments)]
pub fn max_q_update(
    q: &QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
    terminal: bool,
) -> Result<QTable> {
    let mut out = q.clone();
    td_update_in_place(
        UpdateRule::MaxQ,
        &mut out,
        s,
        a,
        r,
        s_next,
        alpha,
        gamma,
        terminal,
    )?;
    Ok(out)
}

/// Max-Bellman target with clipped double-Q bootstrapping:
/// `max(r, γ min(c1, c2))`, or `r` on a terminal transition.
pub fn max_bellman_td_target(r: f64, gamma: f64, critic_values: (f64, f64), terminal: bool) -> f64 {
    if terminal {
        r
    } else {
        r.max(gamma * critic_values.0.min(critic_values.1))
    }
}

fn select_action(q: &QTable, s: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    let explore = rng.gen::<f64>() < epsilon;
    if explore {
        rng.gen_range(0..q.n_actions())
    } else {
        q.argmax(s)
    }
}

fn check_observation(q: &QTable, obs: usize) -> Result<()> {
    if obs >= q.n_states() {
        return Err(Error::IndexOutOfRange {
            what: "observation",
            index: obs,
            limit: q.n_states(),
        });
    }
    Ok(())
}

/// Runs `config.episodes` episodes of ε-greedy interaction from a zero table.
///
/// The transition that ends an episode is updated as terminal.
pub fn train<E: Environment>(env: &mut E, config: &LearnerConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut q = QTable::zeros(env.n_observations(), env.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut logs = Vec::with_capacity(config.episodes);
    for episode in 0..config.episodes {
        let epsilon = config.epsilon.value(episode);
        let mut s = env.reset();
        check_observation(&q, s)?;
        let mut log = EpisodeLog {
            cumulative_return: 0.0,
            max_reward: f64::NEG_INFINITY,
            steps: 0,
        };
        loop {
            let a = select_action(&q, s, epsilon, &mut rng);
            let out = env.step(a)?;
            check_observation(&q, out.observation)?;
            td_update_in_place(
                config.rule,
                &mut q,
                s,
                a,
                out.reward,
                out.observation,
                config.alpha,
                config.gamma,
                out.done,
            )?;
            log.cumulative_return += out.reward;
            log.max_reward = log.max_reward.max(out.reward);
            log.steps += 1;
            s = out.observation;
            if out.done {
                break;
            }
        }
        logs.push(log);
    }
    Ok(TrainOutcome { q, logs })
}

/// One greedy (ε = 0) episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Rollout {
    pub fn cumulative_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Plays one episode greedily with respect to `q` (ties to the lowest action).
pub fn greedy_rollout<E: Environment>(env: &mut E, q: &QTable) -> Result<Rollout> {
    let mut s = env.reset();
    check_observation(q, s)?;
    let mut rollout = Rollout {
        observations: vec![s],
        actions: Vec::new(),
        rewards: Vec::new(),
    };
    loop {
        let a = q.argmax(s);
        let out = env.step(a)?;
        check_observation(q, out.observation)?;
        rollout.actions.push(a);
        rollout.rewards.push(out.reward);
        rollout.observations.push(out.observation);
        s = out.observation;
        if out.done {
            return Ok(rollout);
        }
    }
}
