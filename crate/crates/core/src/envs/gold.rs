use std::fmt::Write as _;
use std::sync::Arc;

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};

/// Text of the shipped default layout.
pub const DEFAULT_LAYOUT_TEXT: &str = include_str!("../../layouts/gold_default.grid");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAction::Up => "up",
            GridAction::Down => "down",
            GridAction::Left => "left",
            GridAction::Right => "right",
        }
    }
}

/// Reward grid with one-shot goldmines. Row 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    /// Row-major cell rewards; 0 marks a plain cell.
    pub cell_rewards: Vec<f64>,
    pub start: (usize, usize),
    pub horizon: usize,
    pub step_penalty: f64,
}

impl GridLayout {
    pub fn new(
        rows: usize,
        cols: usize,
        cell_rewards: Vec<f64>,
        start: (usize, usize),
        horizon: usize,
        step_penalty: f64,
    ) -> Result<Self> {
        let layout = Self {
            rows,
            cols,
            cell_rewards,
            start,
            horizon,
            step_penalty,
        };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidLayout(
                "grid must have at least one cell".into(),
            ));
        }
        if self.cell_rewards.len() != self.rows * self.cols {
            return Err(Error::InvalidLayout(format!(
                "expected {} cell rewards, found {}",
                self.rows * self.cols,
                self.cell_rewards.len()
            )));
        }
        if self.start.0 >= self.rows || self.start.1 >= self.cols {
            return Err(Error::InvalidLayout(format!(
                "start {:?} outside {} x {} grid",
                self.start, self.rows, self.cols
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidLayout("horizon must be at least 1".into()));
        }
        if !self.step_penalty.is_finite() || self.cell_rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidLayout("rewards must be finite".into()));
        }
        if self.mines().is_empty() {
            return Err(Error::InvalidLayout(
                "layout needs at least one goldmine".into(),
            ));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn cell_reward(&self, row: usize, col: usize) -> f64 {
        self.cell_rewards[self.cell_index(row, col)]
    }

    pub fn start_index(&self) -> usize {
        self.cell_index(self.start.0, self.start.1)
    }

    /// Cell indices holding a goldmine, in row-major order.
    pub fn mines(&self) -> Vec<usize> {
        (0..self.n_cells())
            .filter(|&i| self.cell_rewards[i] != 0.0)
            .collect()
    }

    /// Destination cell of `action` from `cell`; off-grid moves stay put.
    pub fn move_from(&self, cell: usize, action: GridAction) -> usize {
        let (r, c) = (cell / self.cols, cell % self.cols);
        let (r, c) = match action {
            GridAction::Up if r > 0 => (r - 1, c),
            GridAction::Down if r + 1 < self.rows => (r + 1, c),
            GridAction::Left if c > 0 => (r, c - 1),
            GridAction::Right if c + 1 < self.cols => (r, c + 1),
            _ => (r, c),
        };
        self.cell_index(r, c)
    }

    /// Parses the `grid <rows> <cols> <start_row> <start_col> <horizon> <step_penalty>`
    /// format followed by `rows` lines of cell rewards (top row first).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty layout"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 7 || f[0] != "grid" {
            return Err(Error::parse(
                hline,
                "expected `grid <rows> <cols> <start_row> <start_col> <horizon> <step_penalty>`",
            ));
        }
        let num = |i: usize, what: &str| -> Result<usize> {
            f[i].parse()
                .map_err(|_| Error::parse(hline, format!("invalid {what} `{}`", f[i])))
        };
        let rows = num(1, "rows")?;
        let cols = num(2, "cols")?;
        let start = (num(3, "start_row")?, num(4, "start_col")?);
        let horizon = num(5, "horizon")?;
        let step_penalty: f64 = f[6]
            .parse()
            .map_err(|_| Error::parse(hline, format!("invalid step_penalty `{}`", f[6])))?;

        let mut cells = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        let mut last_line = hline;
        for (lineno, line) in lines {
            last_line = lineno;
            if seen == rows {
                return Err(Error::parse(lineno, format!("more than {rows} grid rows")));
            }
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::parse(lineno, format!("invalid cell reward `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != cols {
                return Err(Error::parse(
                    lineno,
                    format!("expected {cols} cells, found {}", row.len()),
                ));
            }
            cells.extend(row);
            seen += 1;
        }
        if seen != rows {
            return Err(Error::parse(
                last_line,
                format!("expected {rows} grid rows, found {seen}"),
            ));
        }
        Self::new(rows, cols, cells, start, horizon, step_penalty)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "grid {} {} {} {} {} {}",
            self.rows, self.cols, self.start.0, self.start.1, self.horizon, self.step_penalty
        );
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| self.cell_reward(r, c).to_string())
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Parses layout text.
pub fn load_layout(text: &str) -> Result<GridLayout> {
    GridLayout::parse(text)
}

/// The shipped 3 x 12 gold-mining layout.
pub fn default_gold_layout() -> GridLayout {
    GridLayout::parse(DEFAULT_LAYOUT_TEXT).expect("shipped default layout parses")
}

/// Gridworld whose goldmines pay out once per episode.
///
/// Observations are the agent's cell index only, so the depletion state is
/// hidden from the learner.
#[derive(Debug, Clone)]
pub struct GoldMiningEnv {
    layout: Arc<GridLayout>,
    position: usize,
    mined: Vec<bool>,
    steps_taken: usize,
}

impl GoldMiningEnv {
    pub fn new(layout: GridLayout) -> Self {
        let layout = Arc::new(layout);
        Self {
            position: layout.start_index(),
            mined: vec![false; layout.n_cells()],
            steps_taken: 0,
            layout,
        }
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_done(&self) -> bool {
        self.steps_taken >= self.layout.horizon
    }

    pub fn is_mined(&self, cell: usize) -> bool {
        self.mined[cell]
    }

    pub fn grid_step(&mut self, action: GridAction) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished {
                steps: self.steps_taken,
            });
        }
        let dest = self.layout.move_from(self.position, action);
        let value = self.layout.cell_rewards[dest];
        let reward = if value != 0.0 && !self.mined[dest] {
            self.mined[dest] = true;
            value
        } else {
            self.layout.step_penalty
        };
        self.position = dest;
        self.steps_taken += 1;
        Ok(StepOutcome {
            observation: dest,
            reward,
            done: self.is_done(),
        })
    }
}

impl Environment for GoldMiningEnv {
    fn n_observations(&self) -> usize {
        self.layout.n_cells()
    }

    fn n_actions(&self) -> usize {
        GridAction::ALL.len()
    }

    fn reset(&mut self) -> usize {
        self.position = self.layout.start_index();
        self.mined.iter_mut().for_each(|m| *m = false);
        self.steps_taken = 0;
        self.position
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let action = GridAction::from_index(action).ok_or(Error::IndexOutOfRange {
            what: "action",
            index: action,
            limit: GridAction::ALL.len(),
        })?;
        self.grid_step(action)
    }
}
