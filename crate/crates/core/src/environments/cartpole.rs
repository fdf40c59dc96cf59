//! Classic cart-pole balancing task.
//!
//! Dynamics follow the usual frictionless formulation integrated with an
//! explicit Euler step of 0.02 s: positions advance with the pre-step
//! velocities, then velocities advance with the accelerations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, Snapshot, SnapshotEnv, Step};
use crate::error::{Error, Result};

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const X_THRESHOLD: f64 = 2.4;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
const MAX_STEPS: u32 = 200;
const RESET_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    /// Total mechanical energy of cart and pole (pole as a uniform rod).
    pub fn energy(&self) -> f64 {
        let kinetic = 0.5 * TOTAL_MASS * self.x_dot * self.x_dot
            + POLE_MASS_LENGTH * self.x_dot * self.theta_dot * self.theta.cos()
            + 0.5 * (4.0 / 3.0) * MASS_POLE * HALF_LENGTH * HALF_LENGTH * self.theta_dot * self.theta_dot;
        kinetic + POLE_MASS_LENGTH * GRAVITY * self.theta.cos()
    }
}

/// The reset generator is part of the state, so a snapshot also captures
/// where future resets will start.
#[derive(Debug, Clone, PartialEq)]
pub struct CartPole {
    state: CartPoleState,
    steps: u32,
    terminal: bool,
    reset_rng: ChaCha8Rng,
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        Self {
            state: CartPoleState::default(),
            steps: 0,
            terminal: false,
            reset_rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
        self.terminal = false;
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Advances the dynamics under an arbitrary horizontal force.
    pub fn step_force(&mut self, force: f64) -> Result<Step> {
        if self.terminal {
            return Err(Error::EpisodeFinished);
        }
        let CartPoleState {
            x,
            x_dot,
            theta,
            theta_dot,
        } = self.state;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;

        self.state = CartPoleState {
            x: x + TAU * x_dot,
            x_dot: x_dot + TAU * x_acc,
            theta: theta + TAU * theta_dot,
            theta_dot: theta_dot + TAU * theta_acc,
        };
        self.steps += 1;
        self.terminal = self.state.x.abs() > X_THRESHOLD
            || self.state.theta.abs() > THETA_THRESHOLD
            || self.steps >= MAX_STEPS;
        Ok(Step {
            observation: self.observation(),
            reward: 1.0,
            terminal: self.terminal,
        })
    }
}

impl SnapshotEnv for CartPole {
    fn name(&self) -> &'static str {
        "cartpole"
    }

    fn action_count(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn reset(&mut self) -> Vec<f64> {
        let mut draw = || self.reset_rng.random_range(-RESET_SPREAD..RESET_SPREAD);
        let state = CartPoleState {
            x: draw(),
            x_dot: draw(),
            theta: draw(),
            theta_dot: draw(),
        };
        self.set_state(state);
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        check_action(action, 2)?;
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        self.step_force(force)
    }

    fn observation(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn snapshot(&self) -> Snapshot {
        self.clone().into()
    }
}
