//! Bellman-style backup operators and a fixed-point solver.
//!
//! The max-Bellman operators replace the usual `r + γ·next` backup with
//! `max(r, γ·next)`:
//!
//! ```text
//! (M^π Q)(s, a) = max(r(s, a), γ E_{s'~P, a'~π}[Q(s', a')])
//! (M*  Q)(s, a) = max(r(s, a), γ E_{s'~P}[max_a' Q(s', a')])
//! ```
//!
//! Both are γ-contractions in the sup norm, as are the standard sum-form
//! operators kept here for comparison. All applications are synchronous:
//! each output entry reads only the previous table.

use crate::error::{Error, Result};
use crate::mdp::{sup_norm_distance, Policy, QTable, TabularMdp};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Which backup to apply.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    MaxBellmanEvaluation(Policy),
    MaxBellmanOptimality,
    StandardEvaluation(Policy),
    StandardOptimality,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::MaxBellmanEvaluation(_) => "max-eval",
            OperatorKind::MaxBellmanOptimality => "max-opt",
            OperatorKind::StandardEvaluation(_) => "std-eval",
            OperatorKind::StandardOptimality => "std-opt",
        }
    }

    fn policy(&self) -> Option<&Policy> {
        match self {
            OperatorKind::MaxBellmanEvaluation(p) | OperatorKind::StandardEvaluation(p) => Some(p),
            _ => None,
        }
    }

    fn is_max_form(&self) -> bool {
        matches!(
            self,
            OperatorKind::MaxBellmanEvaluation(_) | OperatorKind::MaxBellmanOptimality
        )
    }

    /// Applies the operator once, returning a fresh table.
    pub fn apply(&self, q: &QTable, mdp: &TabularMdp) -> Result<QTable> {
        mdp.check_table(q)?;
        if let Some(policy) = self.policy() {
            policy.check_compatible(mdp.n_states(), mdp.n_actions())?;
        }
        let next_values: Vec<f64> = match self.policy() {
            Some(policy) => (0..mdp.n_states())
                .map(|s| policy.expected_value(q, s))
                .collect(),
            None => (0..mdp.n_states()).map(|s| q.max_value(s)).collect(),
        };
        let gamma = mdp.gamma();
        let max_form = self.is_max_form();
        Ok(QTable::map_indexed(
            mdp.n_states(),
            mdp.n_actions(),
            |s, a| {
                let continuation: f64 = mdp
                    .transitions(s, a)
                    .iter()
                    .map(|&(next, p)| p * next_values[next])
                    .sum();
                let r = mdp.reward(s, a);
                if max_form {
                    r.max(gamma * continuation)
                } else {
                    r + gamma * continuation
                }
            },
        ))
    }
}

/// One application of the max-Bellman evaluation operator.
pub fn apply_max_eval(q: &QTable, policy: &Policy, mdp: &TabularMdp) -> Result<QTable> {
    OperatorKind::MaxBellmanEvaluation(policy.clone()).apply(q, mdp)
}

/// One application of the max-Bellman optimality operator.
pub fn apply_max_optimality(q: &QTable, mdp: &TabularMdp) -> Result<QTable> {
    OperatorKind::MaxBellmanOptimality.apply(q, mdp)
}

pub fn apply_standard_eval(q: &QTable, policy: &Policy, mdp: &TabularMdp) -> Result<QTable> {
    OperatorKind::StandardEvaluation(policy.clone()).apply(q, mdp)
}

pub fn apply_standard_optimality(q: &QTable, mdp: &TabularMdp) -> Result<QTable> {
    OperatorKind::StandardOptimality.apply(q, mdp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub q: QTable,
    pub iterations: usize,
    /// Sup-norm change of the last application.
    pub residual: f64,
    pub converged: bool,
    /// Sup-norm change after each application, in order.
    pub residuals: Vec<f64>,
}

impl FixedPointResult {
    /// Turns a non-converged run into an error.
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Config(format!(
                "fixed-point iteration did not converge in {} iterations (residual {:e})",
                self.iterations, self.residual
            )))
        }
    }
}

/// Iterates `kind` from `q0` until the sup-norm change drops below `tol`.
///
/// Hitting `max_iter` is reported through `converged = false`, not an error.
pub fn solve_fixed_point(
    kind: &OperatorKind,
    mdp: &TabularMdp,
    q0: &QTable,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut q = q0.clone();
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let next = kind.apply(&q, mdp)?;
        let residual = sup_norm_distance(&next, &q)?;
        residuals.push(residual);
        q = next;
        if residual < tol {
            return Ok(FixedPointResult {
                q,
                iterations: residuals.len(),
                residual,
                converged: true,
                residuals,
            });
        }
    }
    Ok(FixedPointResult {
        q,
        iterations: residuals.len(),
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        converged: false,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop(rewards: &[f64], gamma: f64) -> TabularMdp {
        let n_actions = rewards.len();
        TabularMdp::new(
            1,
            n_actions,
            vec![vec![(0, 1.0)]; n_actions],
            rewards.to_vec(),
            gamma,
        )
        .unwrap()
    }

    fn chain2() -> TabularMdp {
        TabularMdp::new(
            2,
            1,
            vec![vec![(1, 1.0)], vec![(1, 1.0)]],
            vec![0.0, 2.0],
            0.5,
        )
        .unwrap()
    }

    fn q1(v: &[f64]) -> QTable {
        QTable::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn max_eval_self_loop() {
        let mdp = self_loop(&[1.0], 0.5);
        let pi = Policy::Deterministic(vec![0]);
        assert_eq!(apply_max_eval(&q1(&[0.0]), &pi, &mdp).unwrap(), q1(&[1.0]));
        assert_eq!(apply_max_eval(&q1(&[4.0]), &pi, &mdp).unwrap(), q1(&[2.0]));
    }

    #[test]
    fn max_eval_chain_two_steps() {
        let mdp = chain2();
        let pi = Policy::Deterministic(vec![0, 0]);
        let once = apply_max_eval(&QTable::zeros(2, 1), &pi, &mdp).unwrap();
        assert_eq!(once, q1(&[0.0, 2.0]));
        let twice = apply_max_eval(&once, &pi, &mdp).unwrap();
        assert_eq!(twice, q1(&[1.0, 2.0]));
        let fixed = solve_fixed_point(
            &OperatorKind::MaxBellmanEvaluation(pi),
            &mdp,
            &QTable::zeros(2, 1),
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert_eq!(fixed.q, twice);
    }

    #[test]
    fn max_optimality_examples() {
        let mdp = self_loop(&[1.0, 3.0], 0.9);
        let out = apply_max_optimality(&QTable::zeros(1, 2), &mdp).unwrap();
        assert_eq!(out, QTable::from_rows(&[vec![1.0, 3.0]]).unwrap());

        let fixed = solve_fixed_point(
            &OperatorKind::MaxBellmanOptimality,
            &chain2(),
            &QTable::zeros(2, 1),
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert!(fixed.converged);
        assert_eq!(fixed.q, q1(&[1.0, 2.0]));
    }

    #[test]
    fn standard_vs_max_fixed_points() {
        let mdp = self_loop(&[1.0], 0.5);
        let solve = |kind| {
            solve_fixed_point(&kind, &mdp, &QTable::zeros(1, 1), 1e-12, DEFAULT_MAX_ITER)
                .unwrap()
                .q
                .get(0, 0)
        };
        assert!((solve(OperatorKind::StandardOptimality) - 2.0).abs() < 1e-11);
        assert_eq!(solve(OperatorKind::MaxBellmanOptimality), 1.0);
    }

    #[test]
    fn standard_degenerate_cases() {
        let zero = self_loop(&[0.0, 0.0], 0.9);
        let q = QTable::zeros(1, 2);
        assert_eq!(apply_standard_optimality(&q, &zero).unwrap(), q);

        let ones = self_loop(&[1.0, 1.0], 0.0);
        let any = QTable::from_rows(&[vec![-7.0, 40.0]]).unwrap();
        let pi = Policy::uniform(1, 2);
        assert_eq!(
            apply_standard_eval(&any, &pi, &ones).unwrap(),
            QTable::filled(1, 2, 1.0)
        );
        assert_eq!(
            apply_standard_optimality(&any, &ones).unwrap(),
            QTable::filled(1, 2, 1.0)
        );
    }

    #[test]
    fn optimality_lower_bounded_by_reward() {
        let mdp = self_loop(&[1.0, -2.0], 0.9);
        let q = QTable::from_rows(&[vec![-100.0, -50.0]]).unwrap();
        let out = apply_max_optimality(&q, &mdp).unwrap();
        assert!(out.dominates(&mdp.reward_table(), 0.0));
    }

    #[test]
    fn solver_reports_convergence() {
        let mdp = self_loop(&[1.0], 0.5);
        let r = solve_fixed_point(
            &OperatorKind::MaxBellmanOptimality,
            &mdp,
            &QTable::zeros(1, 1),
            1e-10,
            DEFAULT_MAX_ITER,
        )
        .unwrap();
        assert!(r.converged && r.residual < 1e-10);
        assert!((r.q.get(0, 0) - 1.0).abs() < 1e-10);

        let at_fixed = solve_fixed_point(
            &OperatorKind::MaxBellmanOptimality,
            &mdp,
            &q1(&[1.0]),
            1e-10,
            10,
        )
        .unwrap();
        assert_eq!((at_fixed.iterations, at_fixed.residual), (1, 0.0));
    }

    #[test]
    fn solver_flags_non_convergence() {
        let mdp = self_loop(&[1.0], 0.99);
        let r = solve_fixed_point(
            &OperatorKind::StandardOptimality,
            &mdp,
            &QTable::zeros(1, 1),
            1e-10,
            5,
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
        assert!(r.into_converged().is_err());
        assert!(solve_fixed_point(
            &OperatorKind::StandardOptimality,
            &mdp,
            &QTable::zeros(1, 1),
            0.0,
            5
        )
        .is_err());
    }

    #[test]
    fn incompatible_policy_is_rejected() {
        let mdp = chain2();
        let pi = Policy::Deterministic(vec![0]);
        assert!(apply_max_eval(&QTable::zeros(2, 1), &pi, &mdp).is_err());
        assert!(apply_max_optimality(&QTable::zeros(3, 1), &mdp).is_err());
    }
}
