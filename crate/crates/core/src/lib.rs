//! Experience replay for deep Q-learning with double prioritization and
//! state recycling.
//!
//! The crate is organized bottom-up:
//!
//! - [`priority_index`]: prefix-sum and extrema trees over slot weights.
//! - [`replay_buffer`]: the fixed-capacity experience store with prioritized
//!   sampling and prioritized replacement candidates.
//! - [`q_model`]: action-value models, double-DQN TD errors and the
//!   weighted semi-gradient step.
//! - [`environments`]: snapshot-restorable corridor, cart-pole and chain tasks.
//! - [`trainer`]: the training loop and its uniform / PER / DPSR modes.
//! - [`experiment`]: seeded run matrices, CSV output and comparison reports.

pub mod environments;
pub mod error;
pub mod experiment;
pub mod priority_index;
pub mod q_model;
pub mod replay_buffer;
pub mod trainer;

pub use error::{Error, Result};
