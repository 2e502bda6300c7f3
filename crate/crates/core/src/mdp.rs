//! Finite MDPs, action-value tables and policies.
//!
//! Transitions are stored sparsely: each `(s, a)` row keeps only its
//! nonzero successors. Dense random MDPs simply store every entry; the
//! markovized gridworld keeps one successor per row.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tolerance on the sum of each transition row.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Above this many states the text writer switches to the sparse row form.
pub const DENSE_WRITE_LIMIT: usize = 1024;

/// A finite, discounted MDP with rewards `r(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    /// Builds an MDP from sparse rows indexed by `s * n_actions + a`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp(format!(
                "state and action counts must be positive (got {n_states} x {n_actions})"
            )));
        }
        let rows = n_states * n_actions;
        if transitions.len() != rows || reward.len() != rows {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows} (s, a) rows"),
                found: format!(
                    "{} transition rows, {} rewards",
                    transitions.len(),
                    reward.len()
                ),
            });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!(
                "gamma must lie in [0, 1), got {gamma}"
            )));
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!(
                "reward for (s={}, a={}) is not finite",
                i / n_actions,
                i % n_actions
            )));
        }
        let mut cleaned = Vec::with_capacity(rows);
        for (i, row) in transitions.into_iter().enumerate() {
            let (s, a) = (i / n_actions, i % n_actions);
            let mut sum = 0.0;
            let mut kept = Vec::with_capacity(row.len());
            for (next, p) in row {
                if next >= n_states {
                    return Err(Error::IndexOutOfRange {
                        what: "next state",
                        index: next,
                        limit: n_states,
                    });
                }
                if p.is_nan() || p < 0.0 || !p.is_finite() {
                    return Err(Error::InvalidMdp(format!(
                        "transition probability P({next} | {s}, {a}) = {p} is not a probability"
                    )));
                }
                sum += p;
                if p > 0.0 {
                    kept.push((next, p));
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMdp(format!(
                    "transition row (s={s}, a={a}) sums to {sum}, not 1"
                )));
            }
            cleaned.push(kept);
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions: cleaned,
            reward,
            gamma,
        })
    }

    /// Builds an MDP from a dense `n_states * n_actions * n_states` tensor.
    pub fn from_dense(
        n_states: usize,
        n_actions: usize,
        transition: &[f64],
        reward: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let expected = n_states * n_actions * n_states;
        if transition.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} transition entries"),
                found: transition.len().to_string(),
            });
        }
        let rows = transition
            .chunks(n_states.max(1))
            .map(|row| row.iter().copied().enumerate().collect())
            .collect();
        Self::new(n_states, n_actions, rows, reward, gamma)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Nonzero successors of `(s, a)` with their probabilities.
    pub fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    /// Dense probability `P(next | s, a)`.
    pub fn probability(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions(s, a)
            .iter()
            .filter(|(n, _)| *n == next)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn is_deterministic(&self) -> bool {
        self.transitions.iter().all(|row| row.len() == 1)
    }

    /// Reward table as a Q-shaped table.
    pub fn reward_table(&self) -> QTable {
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.reward.clone(),
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transitions.clone(),
            self.reward.clone(),
            gamma,
        )
    }

    pub(crate) fn check_table(&self, q: &QTable) -> Result<()> {
        if q.shape() != (self.n_states, self.n_actions) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", self.n_states, self.n_actions),
                found: format!("{} x {}", q.n_states, q.n_actions),
            });
        }
        Ok(())
    }

    /// Parses the `mdp <n_states> <n_actions> <gamma>` text format.
    ///
    /// Each following line is `s a r p_0 ... p_{n-1}`. The sparse form
    /// `s a r ; next:p next:p ...` is also accepted. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty MDP file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "mdp" {
            return Err(Error::parse(
                hline,
                "expected header `mdp <n_states> <n_actions> <gamma>`",
            ));
        }
        let n_states: usize = parse_field(hline, fields[1], "n_states")?;
        let n_actions: usize = parse_field(hline, fields[2], "n_actions")?;
        let gamma: f64 = parse_field(hline, fields[3], "gamma")?;
        if n_states == 0 || n_actions == 0 {
            return Err(Error::parse(
                hline,
                "state and action counts must be positive",
            ));
        }

        let rows = n_states * n_actions;
        let mut transitions: Vec<Option<Vec<(usize, f64)>>> = vec![None; rows];
        let mut reward = vec![0.0; rows];
        for (lineno, line) in lines {
            let (head, sparse) = match line.split_once(';') {
                Some((h, rest)) => (h, Some(rest)),
                None => (line, None),
            };
            let mut it = head.split_whitespace();
            let s: usize = parse_field(lineno, it.next().unwrap_or(""), "state")?;
            let a: usize = parse_field(lineno, it.next().unwrap_or(""), "action")?;
            let r: f64 = parse_field(lineno, it.next().unwrap_or(""), "reward")?;
            if s >= n_states || a >= n_actions {
                return Err(Error::parse(
                    lineno,
                    format!("(s={s}, a={a}) outside {n_states} x {n_actions}"),
                ));
            }
            let row = match sparse {
                None => {
                    let probs = it
                        .map(|tok| parse_field::<f64>(lineno, tok, "probability"))
                        .collect::<Result<Vec<_>>>()?;
                    if probs.len() != n_states {
                        return Err(Error::parse(
                            lineno,
                            format!("expected {n_states} probabilities, found {}", probs.len()),
                        ));
                    }
                    probs.into_iter().enumerate().collect()
                }
                Some(rest) => {
                    if it.next().is_some() {
                        return Err(Error::parse(lineno, "unexpected tokens before `;`"));
                    }
                    rest.split_whitespace()
                        .map(|tok| {
                            let (n, p) = tok.split_once(':').ok_or_else(|| {
                                Error::parse(lineno, format!("expected `next:p`, found `{tok}`"))
                            })?;
                            Ok((
                                parse_field(lineno, n, "next state")?,
                                parse_field(lineno, p, "probability")?,
                            ))
                        })
                        .collect::<Result<Vec<_>>>()?
                }
            };
            let idx = s * n_actions + a;
            if transitions[idx].is_some() {
                return Err(Error::parse(
                    lineno,
                    format!("duplicate row for (s={s}, a={a})"),
                ));
            }
            transitions[idx] = Some(row);
            reward[idx] = r;
        }
        if let Some(missing) = transitions.iter().position(Option::is_none) {
            return Err(Error::parse(
                0,
                format!(
                    "missing row for (s={}, a={})",
                    missing / n_actions,
                    missing % n_actions
                ),
            ));
        }
        Self::new(
            n_states,
            n_actions,
            transitions.into_iter().map(Option::unwrap).collect(),
            reward,
            gamma,
        )
    }

    /// Writes the text format; rows are dense up to [`DENSE_WRITE_LIMIT`] states.
    pub fn to_text(&self) -> String {
        let dense = self.n_states <= DENSE_WRITE_LIMIT;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mdp {} {} {}",
            self.n_states, self.n_actions, self.gamma
        );
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let _ = write!(out, "{s} {a} {}", self.reward(s, a));
                if dense {
                    let mut probs = vec![0.0; self.n_states];
                    for &(n, p) in self.transitions(s, a) {
                        probs[n] += p;
                    }
                    for p in probs {
                        let _ = write!(out, " {p}");
                    }
                } else {
                    out.push_str(" ;");
                    for &(n, p) in self.transitions(s, a) {
                        let _ = write!(out, " {n}:{p}");
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

/// A state-by-action table of values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", n_states * n_actions),
                found: values.len().to_string(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMdp("Q-table entries must be finite".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::ShapeMismatch {
                expected: format!("rows of length {n_actions}"),
                found: "ragged rows".into(),
            });
        }
        Self::from_vec(rows.len(), n_actions, rows.concat())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_states, self.n_actions)
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_actions + a] = value;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action for `s`; ties go to the lowest index.
    pub fn argmax(&self, s: usize) -> usize {
        argmax_lowest(self.row(s))
    }

    /// Adds `c` to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn map_indexed(
        n_states: usize,
        n_actions: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            for a in 0..n_actions {
                values.push(f(s, a));
            }
        }
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    /// True when every entry of `self` is at least `other - slack`.
    pub fn dominates(&self, other: &QTable, slack: f64) -> bool {
        self.shape() == other.shape()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| *a >= *b - slack)
    }
}

pub(crate) fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// A stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic(Vec<usize>),
    Stochastic(Vec<Vec<f64>>),
    EpsilonGreedy { q: QTable, epsilon: f64 },
}

impl Policy {
    pub fn deterministic(actions: Vec<usize>, n_actions: usize) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: a,
                limit: n_actions,
            });
        }
        Ok(Policy::Deterministic(actions))
    }

    pub fn stochastic(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidPolicy(format!(
                    "action distribution for state {s} is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(Policy::Stochastic(rows))
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy::Stochastic(vec![vec![1.0 / n_actions as f64; n_actions]; n_states])
    }

    pub fn epsilon_greedy(q: QTable, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidPolicy(format!(
                "epsilon {epsilon} outside [0, 1]"
            )));
        }
        Ok(Policy::EpsilonGreedy { q, epsilon })
    }

    pub fn n_states(&self) -> usize {
        match self {
            Policy::Deterministic(a) => a.len(),
            Policy::Stochastic(rows) => rows.len(),
            Policy::EpsilonGreedy { q, .. } => q.n_states(),
        }
    }

    /// Checks that the policy covers `n_states` states over `n_actions` actions.
    pub fn check_compatible(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states() != n_states {
            return Err(Error::InvalidPolicy(format!(
                "policy covers {} states, MDP has {n_states}",
                self.n_states()
            )));
        }
        match self {
            Policy::Deterministic(actions) => {
                if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
                    return Err(Error::IndexOutOfRange {
                        what: "action",
                        index: a,
                        limit: n_actions,
                    });
                }
            }
            Policy::Stochastic(rows) => {
                if rows.iter().any(|r| r.len() != n_actions) {
                    return Err(Error::InvalidPolicy(format!(
                        "action distributions must have {n_actions} entries"
                    )));
                }
            }
            Policy::EpsilonGreedy { q, .. } => {
                if q.n_actions() != n_actions {
                    return Err(Error::InvalidPolicy(format!(
                        "base Q-table has {} actions, MDP has {n_actions}",
                        q.n_actions()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `pi(a | s)`.
    pub fn probability(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(actions) => f64::from(u8::from(actions[s] == a)),
            Policy::Stochastic(rows) => rows[s][a],
            Policy::EpsilonGreedy { q, epsilon } => {
                let uniform = epsilon / q.n_actions() as f64;
                if q.argmax(s) == a {
                    1.0 - epsilon + uniform
                } else {
                    uniform
                }
            }
        }
    }

    /// `E_{a ~ pi(.|s)} values(s, a)`.
    pub fn expected_value(&self, values: &QTable, s: usize) -> f64 {
        match self {
            Policy::Deterministic(actions) => values.get(s, actions[s]),
            _ => (0..values.n_actions())
                .map(|a| self.probability(s, a) * values.get(s, a))
                .sum(),
        }
    }
}

/// Deterministic policy picking the highest-valued action in every state.
pub fn greedy_policy(q: &QTable) -> Policy {
    Policy::Deterministic((0..q.n_states()).map(|s| q.argmax(s)).collect())
}

/// `max_{s,a} |q1(s,a) - q2(s,a)|`.
pub fn sup_norm_distance(q1: &QTable, q2: &QTable) -> Result<f64> {
    if q1.shape() != q2.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", q1.n_states, q1.n_actions),
            found: format!("{} x {}", q2.n_states, q2.n_actions),
        });
    }
    Ok(q1
        .values
        .iter()
        .zip(&q2.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
