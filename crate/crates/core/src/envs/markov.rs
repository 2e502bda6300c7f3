use super::gold::{GridAction, GridLayout};
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub const MAX_MARKOVIZE_MINES: usize = 20;

/// Exact MDP over `(position, mined-bitmask)` for a gridworld layout.
///
/// State index is `cell * 2^mines + mask`, where bit `k` of `mask` marks
/// the `k`-th goldmine (row-major order) as mined.
#[derive(Debug, Clone)]
pub struct MarkovizedGrid {
    pub mdp: TabularMdp,
    pub mines: Vec<usize>,
    pub start_state: usize,
}

impl MarkovizedGrid {
    pub fn state_index(&self, cell: usize, mask: usize) -> usize {
        cell << self.mines.len() | mask
    }

    pub fn cell_of(&self, state: usize) -> usize {
        state >> self.mines.len()
    }

    pub fn mask_of(&self, state: usize) -> usize {
        state & ((1 << self.mines.len()) - 1)
    }

    /// The unique successor of `(state, action)`.
    pub fn next_state(&self, state: usize, action: usize) -> usize {
        self.mdp.transitions(state, action)[0].0
    }
}

/// Expands `layout` into a deterministic MDP with `rows * cols * 2^mines` states.
pub fn markovize(layout: &GridLayout, gamma: f64) -> Result<MarkovizedGrid> {
    let mines = layout.mines();
    if mines.len() > MAX_MARKOVIZE_MINES {
        return Err(Error::TooManyMines {
            mines: mines.len(),
            limit: MAX_MARKOVIZE_MINES,
        });
    }
    let masks = 1usize << mines.len();
    let mut mine_slot = vec![None; layout.n_cells()];
    for (k, &cell) in mines.iter().enumerate() {
        mine_slot[cell] = Some(k);
    }

    let n_states = layout.n_cells() * masks;
    let n_actions = GridAction::ALL.len();
    let mut transitions = Vec::with_capacity(n_states * n_actions);
    let mut reward = Vec::with_capacity(n_states * n_actions);
    for cell in 0..layout.n_cells() {
        for mask in 0..masks {
            for action in GridAction::ALL {
                let dest = layout.move_from(cell, action);
                let (r, next_mask) = match mine_slot[dest] {
                    Some(k) if mask & (1 << k) == 0 => (layout.cell_rewards[dest], mask | 1 << k),
                    _ => (layout.step_penalty, mask),
                };
                transitions.push(vec![(dest * masks + next_mask, 1.0)]);
                reward.push(r);
            }
        }
    }
    let mdp = TabularMdp::new(n_states, n_actions, transitions, reward, gamma)?;
    Ok(MarkovizedGrid {
        mdp,
        start_state: layout.start_index() * masks,
        mines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::load_layout;

    #[test]
    fn one_mine_strip_has_four_states() {
        let layout = load_layout("grid 1 2 0 0 3 -1\n0 5\n").unwrap();
        let m = markovize(&layout, 0.9).unwrap();
        assert_eq!(m.mdp.n_states(), 4);
        assert_eq!(m.start_state, 0);
        let right = GridAction::Right as usize;
        assert_eq!(m.mdp.reward(0, right), 5.0);
        let after = m.next_state(0, right);
        assert_eq!((m.cell_of(after), m.mask_of(after)), (1, 1));
        assert_eq!(m.mdp.reward(after, right), -1.0);
    }

    #[test]
    fn too_many_mines_rejected() {
        let row: Vec<String> = (1..=21).map(|v| v.to_string()).collect();
        let text = format!("grid 1 21 0 0 3 -1\n{}\n", row.join(" "));
        let layout = load_layout(&text).unwrap();
        assert!(matches!(
            markovize(&layout, 0.9),
            Err(Error::TooManyMines { mines: 21, .. })
        ));
    }
}
