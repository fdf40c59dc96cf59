use super::{check_action, Snapshot, SnapshotEnv, Step};
use crate::error::{Error, Result};

/// Deterministic corridor of `n_states` cells. Moving right off the last cell
/// pays +1 and ends the episode; every other move pays 0. Moving left from
/// cell 0 stays put.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainWorld {
    n_states: usize,
    max_steps: usize,
    position: usize,
    steps: usize,
    terminal: bool,
}

impl ChainWorld {
    pub const LEFT: usize = 0;
    pub const RIGHT: usize = 1;

    pub fn new(n_states: usize) -> Self {
        Self::with_max_steps(n_states, 100)
    }

    /// `max_steps` truncates episodes, which matters only when acting;
    /// [`chain_q_star`] ignores it.
    pub fn with_max_steps(n_states: usize, max_steps: usize) -> Self {
        assert!(n_states >= 1 && max_steps >= 1);
        Self {
            n_states,
            max_steps,
            position: 0,
            steps: 0,
            terminal: false,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn observe_cell(&self, cell: usize) -> Vec<f64> {
        if self.n_states == 1 {
            vec![0.0]
        } else {
            vec![cell as f64 / (self.n_states - 1) as f64]
        }
    }

    /// Deterministic model: `(next cell, reward, terminal)`.
    pub fn model(&self, cell: usize, action: usize) -> (usize, f64, bool) {
        if action == Self::RIGHT {
            if cell + 1 == self.n_states {
                (cell, 1.0, true)
            } else {
                (cell + 1, 0.0, false)
            }
        } else {
            (cell.saturating_sub(1), 0.0, false)
        }
    }
}

impl SnapshotEnv for ChainWorld {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn action_count(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Vec<f64> {
        self.position = 0;
        self.steps = 0;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, 2)?;
        if self.terminal {
            return Err(Error::EpisodeFinished);
        }
        let (next, reward, done) = self.model(self.position, action);
        self.position = next;
        self.steps += 1;
        self.terminal = done || self.steps >= self.max_steps;
        Ok(Step {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        })
    }

    fn observation(&self) -> Vec<f64> {
        self.observe_cell(self.position)
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn snapshot(&self) -> Snapshot {
        self.clone().into()
    }
}

/// Optimal action values by value iteration, indexed `[cell][action]`.
pub fn chain_q_star(n_states: usize, discount: f64) -> Vec<[f64; 2]> {
    assert!((0.0..1.0).contains(&discount), "discount must be in [0, 1)");
    let chain = ChainWorld::new(n_states);
    let mut q = vec![[0.0f64; 2]; n_states];
    loop {
        let value: Vec<f64> = q.iter().map(|row| row[0].max(row[1])).collect();
        let mut residual = 0.0f64;
        for (cell, row) in q.iter_mut().enumerate() {
            for (action, entry) in row.iter_mut().enumerate() {
                let (next, reward, done) = chain.model(cell, action);
                let backup = if done { reward } else { reward + discount * value[next] };
                residual = residual.max((backup - *entry).abs());
                *entry = backup;
            }
        }
        if residual < 1e-10 {
            return q;
        }
    }
}
