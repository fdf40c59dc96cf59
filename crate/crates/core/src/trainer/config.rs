use std::fmt;
use std::str::FromStr;

use super::schedule::{Schedule, Schedules};
use crate::environments::EnvKind;
use crate::error::{Error, Result};
use crate::replay_buffer::DEFAULT_PRIORITY_EPSILON;

/// Which replay scheme a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Uniform sampling, unit weights, FIFO eviction.
    Uniform,
    /// Proportional prioritized sampling with importance weights, FIFO eviction.
    Per,
    /// Prioritized sampling, prioritized replacement and state recycling.
    Dpsr,
    /// Prioritized sampling and prioritized replacement only.
    DpsrNoRecycle,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Uniform, Mode::Per, Mode::Dpsr, Mode::DpsrNoRecycle];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Uniform => "uniform",
            Mode::Per => "per",
            Mode::Dpsr => "dpsr",
            Mode::DpsrNoRecycle => "dpsr_no_recycle",
        }
    }

    pub fn prioritized_replacement(self) -> bool {
        matches!(self, Mode::Dpsr | Mode::DpsrNoRecycle)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Minibatch size.
    pub k: usize,
    /// Learning rate applied to the summed batch gradient.
    pub eta: f64,
    pub buffer_size: usize,
    /// Recycled experiences take the buffer's max priority instead of |δ| + ε.
    pub max_priority_recycle: bool,
    pub candidates_common: usize,
    pub candidates_recycle: usize,
    pub target_sync_every: u64,
    pub sample_every: u64,
    /// Zero disables recycling.
    pub recycle_every: u64,
    pub total_steps: u64,
    pub discount: f64,
    pub learning_starts: usize,
    pub mode: Mode,
    pub seed: u64,
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    /// ε falls by this much per unit of `t / T` until it reaches `epsilon_final`.
    pub epsilon_decay: f64,
    pub epsilon_final: f64,
    pub priority_epsilon: f64,
    /// Keep every recycled experience in its slot (otherwise only their
    /// priorities are used to pick the slot to replace).
    pub recycle_write_back: bool,
    pub eval_episodes: usize,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    /// Table-3 learning settings with a buffer and horizon sized for a laptop.
    pub fn desk() -> Self {
        Self {
            k: 32,
            eta: 0.0005,
            buffer_size: 5_000,
            max_priority_recycle: false,
            candidates_common: 128,
            candidates_recycle: 8,
            target_sync_every: 500,
            sample_every: 1,
            recycle_every: 1_000,
            total_steps: 100_000,
            discount: 1.0,
            learning_starts: 1_000,
            mode: Mode::Dpsr,
            seed: 0,
            alpha: 0.6,
            beta_start: 0.4,
            beta_end: 1.0,
            gamma: 0.3,
            epsilon_start: 1.0,
            epsilon_decay: 9.8,
            epsilon_final: 0.02,
            priority_epsilon: DEFAULT_PRIORITY_EPSILON,
            recycle_write_back: true,
            eval_episodes: 10,
            checkpoint_every: 1_000,
        }
    }

    /// The full-size settings used for the Atari experiments.
    pub fn paper() -> Self {
        Self {
            buffer_size: 50_000,
            total_steps: 1_000_000,
            recycle_every: 10_000,
            learning_starts: 1_000,
            checkpoint_every: 10_000,
            ..Self::desk()
        }
    }

    /// Adjustments an environment needs on top of a base preset.
    pub fn for_env(mut self, env: EnvKind) -> Self {
        if env == EnvKind::CartPole {
            self.discount = 0.99;
        }
        self
    }

    pub fn schedules(&self) -> Schedules {
        Schedules {
            horizon: self.total_steps,
            epsilon: Schedule::Linear {
                start: self.epsilon_start,
                slope: -self.epsilon_decay,
                min: self.epsilon_final,
                max: self.epsilon_start.max(self.epsilon_final),
            },
            alpha: Schedule::Constant(self.alpha),
            beta: Schedule::Linear {
                start: self.beta_start,
                slope: self.beta_end - self.beta_start,
                min: self.beta_start.min(self.beta_end),
                max: self.beta_start.max(self.beta_end),
            },
            gamma: Schedule::Constant(self.gamma),
        }
    }

    /// Steps needed in the buffer before training starts.
    pub fn warmup(&self) -> usize {
        self.k.max(self.learning_starts)
    }

    pub fn recycles(&self) -> bool {
        self.mode == Mode::Dpsr && self.recycle_every > 0 && self.candidates_recycle > 0
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::config(msg));
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.buffer_size == 0 {
            return fail("buffer_size must be at least 1".into());
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return fail(format!("eta must be positive, got {}", self.eta));
        }
        if self.mode.prioritized_replacement()
            && !(1..=self.buffer_size).contains(&self.candidates_common)
        {
            return fail(format!(
                "candidates_common must be in 1..={}, got {}",
                self.buffer_size, self.candidates_common
            ));
        }
        if self.candidates_recycle > self.buffer_size {
            return fail(format!(
                "candidates_recycle must be at most {}, got {}",
                self.buffer_size, self.candidates_recycle
            ));
        }
        if self.sample_every == 0 || self.target_sync_every == 0 || self.checkpoint_every == 0 {
            return fail("sample_every, target_sync_every and checkpoint_every must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return fail(format!("discount must be in [0, 1], got {}", self.discount));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_final", self.epsilon_final),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta_start", self.beta_start),
            ("beta_end", self.beta_end),
            ("gamma", self.gamma),
            ("epsilon_decay", self.epsilon_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.priority_epsilon.is_finite() && self.priority_epsilon > 0.0) {
            return fail(format!("priority_epsilon must be positive, got {}", self.priority_epsilon));
        }
        Ok(())
    }

    /// Every tunable key in a fixed order, with its current value.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("k", self.k.to_string()),
            ("eta", self.eta.to_string()),
            ("buffer_size", self.buffer_size.to_string()),
            ("max_priority_recycle", self.max_priority_recycle.to_string()),
            ("candidates_common", self.candidates_common.to_string()),
            ("candidates_recycle", self.candidates_recycle.to_string()),
            ("target_sync_every", self.target_sync_every.to_string()),
            ("sample_every", self.sample_every.to_string()),
            ("recycle_every", self.recycle_every.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("discount", self.discount.to_string()),
            ("learning_starts", self.learning_starts.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta_start", self.beta_start.to_string()),
            ("beta_end", self.beta_end.to_string()),
            ("gamma", self.gamma.to_string()),
            ("epsilon_start", self.epsilon_start.to_string()),
            ("epsilon_decay", self.epsilon_decay.to_string()),
            ("epsilon_final", self.epsilon_final.to_string()),
            ("priority_epsilon", self.priority_epsilon.to_string()),
            ("recycle_write_back", self.recycle_write_back.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        Self::desk().entries().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one key from its text form. Returns `Ok(false)` for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(format!("invalid value `{value}` for key `{key}`")))
        }
        match key {
            "k" => self.k = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "buffer_size" => self.buffer_size = parse(key, value)?,
            "max_priority_recycle" => self.max_priority_recycle = parse(key, value)?,
            "candidates_common" => self.candidates_common = parse(key, value)?,
            "candidates_recycle" => self.candidates_recycle = parse(key, value)?,
            "target_sync_every" => self.target_sync_every = parse(key, value)?,
            "sample_every" => self.sample_every = parse(key, value)?,
            "recycle_every" => self.recycle_every = parse(key, value)?,
            "total_steps" => self.total_steps = parse(key, value)?,
            "discount" => self.discount = parse(key, value)?,
            "learning_starts" => self.learning_starts = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta_start" => self.beta_start = parse(key, value)?,
            "beta_end" => self.beta_end = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "epsilon_start" => self.epsilon_start = parse(key, value)?,
            "epsilon_decay" => self.epsilon_decay = parse(key, value)?,
            "epsilon_final" => self.epsilon_final = parse(key, value)?,
            "priority_epsilon" => self.priority_epsilon = parse(key, value)?,
            "recycle_write_back" => self.recycle_write_back = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.k, c.eta, c.target_sync_every, c.sample_every), (32, 0.0005, 500, 1));
        assert_eq!((c.buffer_size, c.total_steps, c.recycle_every), (5_000, 100_000, 1_000));
        assert_eq!((c.candidates_common, c.candidates_recycle, c.learning_starts), (128, 8, 1_000));
        assert_eq!(c.discount, 1.0);
        assert_eq!(c.warmup(), 1_000);
        c.validate().unwrap();
        let p = TrainConfig::paper();
        assert_eq!((p.buffer_size, p.total_steps, p.recycle_every), (50_000, 1_000_000, 10_000));
        assert_eq!(TrainConfig::desk().for_env(EnvKind::CartPole).discount, 0.99);
    }

    #[test]
    fn every_entry_round_trips_through_set() {
        let mut c = TrainConfig::paper();
        c.gamma = 0.123456789;
        c.max_priority_recycle = true;
        let mut d = TrainConfig::desk();
        for (key, value) in c.entries() {
            assert!(d.set(key, &value).unwrap(), "{key}");
        }
        assert_eq!(d.entries(), c.entries());
        assert!(!d.set("nope", "1").unwrap());
        assert!(d.set("k", "notanumber").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = [
            TrainConfig { k: 0, ..TrainConfig::desk() },
            TrainConfig { candidates_common: 5_001, ..TrainConfig::desk() },
            TrainConfig { discount: 1.5, ..TrainConfig::desk() },
            TrainConfig { eta: 0.0, ..TrainConfig::desk() },
            TrainConfig { gamma: -0.1, ..TrainConfig::desk() },
            TrainConfig { sample_every: 0, ..TrainConfig::desk() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config { .. })));
        }
    }

    #[test]
    fn modes_parse() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("rank".parse::<Mode>().is_err());
    }
}
