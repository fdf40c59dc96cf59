use super::{check_action, Snapshot, SnapshotEnv, Step};
use crate::error::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CorridorParams {
    /// Depth of the treasure at the end of the left branch.
    pub d_left: u32,
    pub len_right: u32,
    pub r_step_right: f64,
    pub r_step_left: f64,
    pub r_treasure: f64,
}

impl Default for CorridorParams {
    fn default() -> Self {
        Self {
            d_left: 15,
            len_right: 20,
            r_step_right: 1.0,
            r_step_left: 0.0,
            r_treasure: 40.0,
        }
    }
}

/// Two-branch corridor where the first action commits the agent to a side.
///
/// Going right pays a small reward every step. Going left pays nothing until
/// the treasure at depth `d_left`. After the first step both actions move in
/// the locked direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ForkedCorridor {
    params: CorridorParams,
    position: i64,
    lock: i8,
    terminal: bool,
}

impl ForkedCorridor {
    pub fn new(params: CorridorParams) -> Self {
        assert!(params.d_left >= 1 && params.len_right >= 1, "corridor branches need length >= 1");
        Self {
            params,
            position: 0,
            lock: 0,
            terminal: false,
        }
    }

    pub fn params(&self) -> &CorridorParams {
        &self.params
    }

    pub fn position(&self) -> i64 {
        self.position
    }

    /// `-1` after a LEFT start, `+1` after a RIGHT start, `0` before the first step.
    pub fn direction_lock(&self) -> i8 {
        self.lock
    }

    fn scale(&self) -> f64 {
        self.params.d_left.max(self.params.len_right) as f64
    }
}

impl SnapshotEnv for ForkedCorridor {
    fn name(&self) -> &'static str {
        "forked_corridor"
    }

    fn action_count(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        2
    }

    fn reset(&mut self) -> Vec<f64> {
        self.position = 0;
        self.lock = 0;
        self.terminal = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, 2)?;
        if self.terminal {
            return Err(Error::EpisodeFinished);
        }
        if self.lock == 0 {
            self.lock = if action == LEFT { -1 } else { 1 };
        }
        self.position += i64::from(self.lock);
        let reward = if self.lock > 0 {
            self.terminal = self.position >= i64::from(self.params.len_right);
            self.params.r_step_right
        } else if -self.position >= i64::from(self.params.d_left) {
            self.terminal = true;
            self.params.r_treasure
        } else {
            self.params.r_step_left
        };
        Ok(Step {
            observation: self.observation(),
            reward,
            terminal: self.terminal,
        })
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position as f64 / self.scale(), f64::from(self.lock)]
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn snapshot(&self) -> Snapshot {
        self.clone().into()
    }
}
