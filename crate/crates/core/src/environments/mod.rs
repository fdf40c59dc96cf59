//! Deterministic environments whose full state can be captured and respawned.
//!
//! Every environment here is a pure function of its state: given the same
//! state and the same action sequence it produces the same observations,
//! rewards and terminal flags. A [`Snapshot`] is a complete copy of that
//! state, which is what state recycling needs to re-run a stored experience
//! from its pre-action state with a different action.

mod cartpole;
mod chain;
mod corridor;

use std::fmt;
use std::str::FromStr;

pub use cartpole::{CartPole, CartPoleState};
pub use chain::{chain_q_star, ChainWorld};
pub use corridor::{CorridorParams, ForkedCorridor, LEFT, RIGHT};

use crate::error::{Error, Result};

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

pub trait SnapshotEnv: Send {
    fn name(&self) -> &'static str;

    fn action_count(&self) -> usize;

    fn observation_dim(&self) -> usize;

    /// Starts a new episode and returns its first observation.
    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<Step>;

    fn observation(&self) -> Vec<f64>;

    fn is_terminal(&self) -> bool;

    fn snapshot(&self) -> Snapshot;

    /// Builds an independent environment from `token`.
    ///
    /// Fails with a token error when the snapshot was taken from a different
    /// kind of environment.
    fn spawn_from(&self, token: &Snapshot) -> Result<Box<dyn SnapshotEnv>> {
        if token.env_name() != self.name() {
            return Err(Error::Token(format!(
                "snapshot of `{}` cannot spawn `{}`",
                token.env_name(),
                self.name()
            )));
        }
        Ok(token.spawn())
    }
}

/// Opaque copy of an environment's full state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot(SnapshotState);

#[derive(Debug, Clone, PartialEq)]
enum SnapshotState {
    ForkedCorridor(ForkedCorridor),
    CartPole(CartPole),
    Chain(ChainWorld),
}

impl Snapshot {
    pub fn env_name(&self) -> &'static str {
        match &self.0 {
            SnapshotState::ForkedCorridor(env) => env.name(),
            SnapshotState::CartPole(env) => env.name(),
            SnapshotState::Chain(env) => env.name(),
        }
    }

    pub fn spawn(&self) -> Box<dyn SnapshotEnv> {
        match &self.0 {
            SnapshotState::ForkedCorridor(env) => Box::new(env.clone()),
            SnapshotState::CartPole(env) => Box::new(env.clone()),
            SnapshotState::Chain(env) => Box::new(env.clone()),
        }
    }

    /// Observation the spawned environment would report.
    pub fn observation(&self) -> Vec<f64> {
        match &self.0 {
            SnapshotState::ForkedCorridor(env) => env.observation(),
            SnapshotState::CartPole(env) => env.observation(),
            SnapshotState::Chain(env) => env.observation(),
        }
    }
}

impl From<ForkedCorridor> for Snapshot {
    fn from(env: ForkedCorridor) -> Self {
        Snapshot(SnapshotState::ForkedCorridor(env))
    }
}

impl From<CartPole> for Snapshot {
    fn from(env: CartPole) -> Self {
        Snapshot(SnapshotState::CartPole(env))
    }
}

impl From<ChainWorld> for Snapshot {
    fn from(env: ChainWorld) -> Self {
        Snapshot(SnapshotState::Chain(env))
    }
}

pub(crate) fn check_action(action: usize, count: usize) -> Result<()> {
    if action >= count {
        return Err(Error::InvalidAction { action, count });
    }
    Ok(())
}

/// Environment selection as it appears in experiment files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    ForkedCorridor,
    CartPole,
    Chain,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::ForkedCorridor, EnvKind::CartPole, EnvKind::Chain];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::ForkedCorridor => "forked_corridor",
            EnvKind::CartPole => "cartpole",
            EnvKind::Chain => "chain",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown environment `{s}`")))
    }
}

/// Everything needed to construct a fresh environment for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    ForkedCorridor(CorridorParams),
    CartPole,
    Chain { n_states: usize, max_steps: usize },
}

impl EnvConfig {
    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::ForkedCorridor => EnvConfig::ForkedCorridor(CorridorParams::default()),
            EnvKind::CartPole => EnvConfig::CartPole,
            EnvKind::Chain => EnvConfig::Chain {
                n_states: 5,
                max_steps: 100,
            },
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            EnvConfig::ForkedCorridor(_) => EnvKind::ForkedCorridor,
            EnvConfig::CartPole => EnvKind::CartPole,
            EnvConfig::Chain { .. } => EnvKind::Chain,
        }
    }

    /// `seed` only matters for environments with randomized resets.
    pub fn build(&self, seed: u64) -> Box<dyn SnapshotEnv> {
        match self {
            EnvConfig::ForkedCorridor(params) => Box::new(ForkedCorridor::new(params.clone())),
            EnvConfig::CartPole => Box::new(CartPole::new(seed)),
            EnvConfig::Chain {
                n_states,
                max_steps,
            } => Box::new(ChainWorld::with_max_steps(*n_states, *max_steps)),
        }
    }
}
