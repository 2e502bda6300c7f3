//! Reference implementations used as test oracles. Everything here works
//! from dense probability lookups and plain loops.
#![allow(dead_code)]

use maxdp::{Policy, QTable, TabularMdp};

#[derive(Clone, Copy, Debug)]
pub enum Kind {
    MaxEval,
    MaxOpt,
    StdEval,
    StdOpt,
}

pub const KINDS: [Kind; 4] = [Kind::MaxEval, Kind::MaxOpt, Kind::StdEval, Kind::StdOpt];

fn next_value(kind: Kind, q: &QTable, policy: &Policy, s: usize) -> f64 {
    match kind {
        Kind::MaxEval | Kind::StdEval => (0..q.n_actions())
            .map(|a| policy.probability(s, a) * q.get(s, a))
            .sum(),
        Kind::MaxOpt | Kind::StdOpt => (0..q.n_actions())
            .map(|a| q.get(s, a))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// One synchronous backup of `kind`.
pub fn backup(kind: Kind, q: &QTable, policy: &Policy, mdp: &TabularMdp) -> QTable {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let g = mdp.gamma();
    let mut out = vec![0.0; n * m];
    for s in 0..n {
        for a in 0..m {
            let mut cont = 0.0;
            for s2 in 0..n {
                cont += mdp.probability(s, a, s2) * next_value(kind, q, policy, s2);
            }
            let r = mdp.reward(s, a);
            out[s * m + a] = match kind {
                Kind::MaxEval | Kind::MaxOpt => r.max(g * cont),
                Kind::StdEval | Kind::StdOpt => r + g * cont,
            };
        }
    }
    QTable::from_vec(n, m, out).unwrap()
}

/// Iterates `backup` until successive tables differ by less than `tol`.
pub fn fixed_point(kind: Kind, policy: &Policy, mdp: &TabularMdp, tol: f64) -> QTable {
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    loop {
        let next = backup(kind, &q, policy, mdp);
        let diff = sup(&next, &q);
        q = next;
        if diff < tol {
            return q;
        }
    }
}

pub fn sup(a: &QTable, b: &QTable) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Lowest index among maximal entries.
pub fn first_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Plain gridworld walk: returns the reward sequence for `actions`.
pub fn walk_grid(
    rows: usize,
    cols: usize,
    cells: &[f64],
    start: (usize, usize),
    penalty: f64,
    actions: &[usize],
) -> Vec<f64> {
    let (mut r, mut c) = start;
    let mut taken = vec![false; cells.len()];
    let mut out = Vec::new();
    for &a in actions {
        match a {
            0 if r > 0 => r -= 1,
            1 if r + 1 < rows => r += 1,
            2 if c > 0 => c -= 1,
            3 if c + 1 < cols => c += 1,
            _ => {}
        }
        let k = r * cols + c;
        if cells[k] != 0.0 && !taken[k] {
            taken[k] = true;
            out.push(cells[k]);
        } else {
            out.push(penalty);
        }
    }
    out
}
