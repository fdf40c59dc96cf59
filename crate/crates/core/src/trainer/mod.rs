//! The DQN training loop with uniform, PER and DPSR replay.
//!
//! One [`Trainer`] owns everything a run touches: the buffer, online and
//! target networks, the environment and one seeded random stream per
//! purpose (acting, sampling, replacement, recycling). Keeping the streams
//! apart means a mode that never draws replacement candidates does not
//! shift the exploration or sampling draws of another mode run on the same
//! seed.

mod config;
mod metrics;
mod schedule;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{Mode, TrainConfig};
pub use metrics::{Checkpoint, EpisodeRecord, RecycleStats, RunMetrics};
pub use schedule::{Schedule, Schedules};

use crate::environments::{EnvConfig, SnapshotEnv};
use crate::error::{Error, Result};
use crate::q_model::{apply_weighted_update, greedy_action, sync_target, td_error, DenseQNet, QFunction, WeightedTd};
use crate::replay_buffer::{DpsrBuffer, Experience};
use metrics::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplacementKind {
    /// Global oldest slot (uniform and PER modes).
    Fifo,
    /// Oldest among prioritized candidates.
    Common,
    /// Minimum-priority recycled candidate.
    Recycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementEvent {
    pub t: u64,
    pub kind: ReplacementKind,
    pub candidates: Vec<usize>,
    /// Birth step of each candidate just before the replacement.
    pub birth_steps: Vec<u64>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecycleEvent {
    pub t: u64,
    pub slot: usize,
    pub old_action: usize,
    pub new_action: usize,
    pub new_priority: f64,
    /// Largest buffer priority when the recycle stage began.
    pub max_priority: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreEvent {
    pub t: u64,
    pub slot: usize,
    pub priority: f64,
    /// Largest buffer priority right before the experience was stored.
    pub max_priority_before: Option<f64>,
}

/// Instrumentation callbacks. Every method defaults to a no-op.
pub trait TrainerHooks {
    fn on_episode_end(&mut self, _episode: &EpisodeRecord) {}
    fn on_replacement(&mut self, _event: &ReplacementEvent) {}
    fn on_recycle(&mut self, _event: &RecycleEvent) {}
    fn on_store(&mut self, _event: &StoreEvent) {}
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoHooks;

impl TrainerHooks for NoHooks {}

struct Streams {
    init: ChaCha8Rng,
    act: ChaCha8Rng,
    sample: ChaCha8Rng,
    replace: ChaCha8Rng,
    recycle: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            init: stream(seed, 1),
            act: stream(seed, 2),
            sample: stream(seed, 3),
            replace: stream(seed, 4),
            recycle: stream(seed, 5),
        }
    }
}

const EVAL_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

pub struct Trainer<H: TrainerHooks = NoHooks> {
    config: TrainConfig,
    schedules: Schedules,
    env_config: EnvConfig,
    env: Box<dyn SnapshotEnv>,
    buffer: DpsrBuffer,
    online: Box<dyn QFunction>,
    target: Box<dyn QFunction>,
    streams: Streams,
    hooks: H,
    metrics: RunMetrics,
}

impl Trainer<NoHooks> {
    pub fn new(config: TrainConfig, env_config: EnvConfig) -> Result<Self> {
        Self::with_hooks(config, env_config, NoHooks)
    }
}

impl<H: TrainerHooks> Trainer<H> {
    /// Builds a trainer whose online network is `input → 64 → 64 → actions`.
    pub fn with_hooks(config: TrainConfig, env_config: EnvConfig, hooks: H) -> Result<Self> {
        config.validate()?;
        let env = env_config.build(config.seed);
        let mut streams = Streams::new(config.seed);
        let online = DenseQNet::standard(env.observation_dim(), env.action_count(), &mut streams.init);
        Self::assemble(config, env_config, env, Box::new(online), streams, hooks)
    }

    /// Builds a trainer around a caller-supplied model.
    pub fn with_model(
        config: TrainConfig,
        env_config: EnvConfig,
        model: Box<dyn QFunction>,
        hooks: H,
    ) -> Result<Self> {
        config.validate()?;
        let env = env_config.build(config.seed);
        if model.action_count() != env.action_count() {
            return Err(Error::Shape {
                expected: vec![env.action_count()],
                found: vec![model.action_count()],
            });
        }
        let streams = Streams::new(config.seed);
        Self::assemble(config, env_config, env, model, streams, hooks)
    }

    fn assemble(
        config: TrainConfig,
        env_config: EnvConfig,
        env: Box<dyn SnapshotEnv>,
        online: Box<dyn QFunction>,
        streams: Streams,
        hooks: H,
    ) -> Result<Self> {
        let alpha = if config.mode == Mode::Uniform { 0.0 } else { config.alpha };
        let buffer = DpsrBuffer::with_epsilon(config.buffer_size, alpha, config.gamma, config.priority_epsilon)?;
        let target = online.boxed_clone();
        Ok(Self {
            schedules: config.schedules(),
            config,
            env_config,
            env,
            buffer,
            online,
            target,
            streams,
            hooks,
            metrics: RunMetrics::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn buffer(&self) -> &DpsrBuffer {
        &self.buffer
    }

    pub fn buffer_mut(&mut self) -> &mut DpsrBuffer {
        &mut self.buffer
    }

    pub fn online(&self) -> &dyn QFunction {
        self.online.as_ref()
    }

    pub fn online_mut(&mut self) -> &mut dyn QFunction {
        self.online.as_mut()
    }

    pub fn target(&self) -> &dyn QFunction {
        self.target.as_ref()
    }

    pub fn env(&self) -> &dyn SnapshotEnv {
        self.env.as_ref()
    }

    pub fn env_mut(&mut self) -> &mut dyn SnapshotEnv {
        self.env.as_mut()
    }

    pub fn hooks(&self) -> &H {
        &self.hooks
    }

    pub fn into_hooks(self) -> H {
        self.hooks
    }

    /// ε-greedy action at timestep `t`.
    pub fn act(&mut self, obs: &[f64], t: u64) -> usize {
        let epsilon = self.schedules.epsilon(t);
        let explore = self.streams.act.random::<f64>() < epsilon;
        if explore {
            self.streams.act.random_range(0..self.env.action_count())
        } else {
            greedy_action(self.online.as_ref(), obs)
        }
    }

    /// Stores a new experience, appending while there is room and otherwise
    /// choosing a slot to overwrite according to the mode.
    pub fn store_experience(&mut self, exp: Experience, t: u64) -> Result<usize> {
        let max_priority_before = self.buffer.max_priority();
        let priority = exp.priority;
        let slot = if !self.buffer.is_full() {
            self.buffer.append(exp)?
        } else {
            let slot = self.choose_replacement_slot(t)?;
            self.buffer.overwrite_slot(slot, exp)?;
            slot
        };
        self.hooks.on_store(&StoreEvent {
            t,
            slot,
            priority,
            max_priority_before,
        });
        Ok(slot)
    }

    fn choose_replacement_slot(&mut self, t: u64) -> Result<usize> {
        if !self.config.mode.prioritized_replacement() {
            let oldest = self.buffer.oldest_slot().ok_or(Error::Empty)?;
            self.emit_replacement(t, ReplacementKind::Fifo, vec![oldest], oldest);
            return Ok(oldest);
        }
        if self.config.recycles() && t % self.config.recycle_every == 0 {
            if self.env.action_count() < 2 {
                warn!("state recycling needs at least two actions; using common replacement");
                self.metrics.recycle.fallbacks += 1;
            } else {
                match self.recycle_stage(t) {
                    Ok(slot) => return Ok(slot),
                    Err(Error::RecycleFailed) => {
                        warn!("recycle stage at t={t} skipped every candidate; using common replacement");
                        self.metrics.recycle.fallbacks += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let gamma = self.schedules.gamma(t);
        let candidates =
            self.buffer
                .select_replacement_candidates(self.config.candidates_common, gamma, &mut self.streams.replace)?;
        let chosen = *candidates
            .iter()
            .min_by_key(|&&slot| (self.buffer.get(slot).map(|e| e.birth_step), slot))
            .expect("at least one candidate");
        self.emit_replacement(t, ReplacementKind::Common, candidates, chosen);
        Ok(chosen)
    }

    fn emit_replacement(&mut self, t: u64, kind: ReplacementKind, candidates: Vec<usize>, chosen: usize) {
        let birth_steps = candidates
            .iter()
            .map(|&s| self.buffer.get(s).map_or(0, |e| e.birth_step))
            .collect();
        self.hooks.on_replacement(&ReplacementEvent {
            t,
            kind,
            candidates,
            birth_steps,
            chosen,
        });
    }

    /// Regenerates `candidates_recycle` prioritized-replacement candidates
    /// from their saved pre-action states with a different action, and
    /// returns the slot whose new priority is lowest (ties to the lowest id).
    pub fn recycle_stage(&mut self, t: u64) -> Result<usize> {
        let actions = self.env.action_count();
        if actions < 2 {
            return Err(Error::State("state recycling needs at least two actions".into()));
        }
        let gamma = self.schedules.gamma(t);
        let candidates =
            self.buffer
                .select_replacement_candidates(self.config.candidates_recycle, gamma, &mut self.streams.recycle)?;
        let max_priority = self.buffer.new_experience_priority();
        self.metrics.recycle.stages += 1;

        let mut best: Option<(f64, usize)> = None;
        for &slot in &candidates {
            let old = self.buffer.get(slot).ok_or(Error::Slot(slot))?;
            let Some(snapshot) = old.snapshot.clone() else {
                warn!("slot {slot} has no snapshot; skipping recycle");
                self.metrics.recycle.skipped += 1;
                continue;
            };
            let mut env = match self.env.spawn_from(&snapshot) {
                Ok(env) if !env.is_terminal() => env,
                Ok(_) => {
                    warn!("slot {slot} snapshot is terminal; skipping recycle");
                    self.metrics.recycle.skipped += 1;
                    continue;
                }
                Err(e) => {
                    warn!("slot {slot} snapshot rejected: {e}");
                    self.metrics.recycle.skipped += 1;
                    continue;
                }
            };
            let old_action = old.action;
            let state = old.state.clone();

            let mut action = greedy_action(self.online.as_ref(), &state);
            if action == old_action {
                let other = self.streams.recycle.random_range(0..actions - 1);
                action = if other >= old_action { other + 1 } else { other };
            }
            let step = match env.step(action) {
                Ok(step) => step,
                Err(e) => {
                    warn!("slot {slot} replay step failed: {e}");
                    self.metrics.recycle.skipped += 1;
                    continue;
                }
            };
            let mut fresh = Experience {
                state,
                action,
                reward: step.reward,
                next_state: step.observation,
                terminal: step.terminal,
                snapshot: Some(snapshot),
                birth_step: t,
                priority: max_priority,
            };
            if !self.config.max_priority_recycle {
                let delta = td_error(self.online.as_ref(), self.target.as_ref(), &fresh, self.config.discount);
                fresh.priority = delta.abs() + self.buffer.epsilon_p();
            }
            let new_priority = fresh.priority;
            if self.config.recycle_write_back {
                self.buffer.overwrite_slot(slot, fresh)?;
            }
            self.metrics.recycle.recycled += 1;
            self.hooks.on_recycle(&RecycleEvent {
                t,
                slot,
                old_action,
                new_action: action,
                new_priority,
                max_priority,
            });
            if best.is_none_or(|(p, s)| new_priority < p || (new_priority == p && slot < s)) {
                best = Some((new_priority, slot));
            }
        }
        let (_, slot) = best.ok_or(Error::RecycleFailed)?;
        let mut candidates = candidates;
        candidates.sort_unstable();
        self.emit_replacement(t, ReplacementKind::Recycle, candidates, slot);
        Ok(slot)
    }

    /// One prioritized minibatch update. Returns the batch mean |δ|, or
    /// `None` while the buffer is still below the warm-up size.
    pub fn train_step(&mut self, t: u64) -> Result<Option<f64>> {
        if self.buffer.len() < self.config.warmup() {
            return Ok(None);
        }
        let (alpha, beta) = match self.config.mode {
            Mode::Uniform => (0.0, 0.0),
            _ => (self.schedules.alpha(t), self.schedules.beta(t)),
        };
        let batch = self
            .buffer
            .sample_batch(self.config.k, alpha, beta, &mut self.streams.sample)?;
        let deltas: Vec<f64> = batch
            .iter()
            .map(|s| {
                let exp = self.buffer.get(s.slot).expect("sampled slot is occupied");
                td_error(self.online.as_ref(), self.target.as_ref(), exp, self.config.discount)
            })
            .collect();
        {
            let items: Vec<WeightedTd> = batch
                .iter()
                .zip(&deltas)
                .map(|(s, &d)| WeightedTd::new(self.buffer.get(s.slot).expect("occupied"), s.weight, d))
                .collect();
            apply_weighted_update(self.online.as_mut(), &items, self.config.eta);
        }
        for (s, d) in batch.iter().zip(&deltas) {
            self.buffer.update_priority(s.slot, d.abs())?;
        }
        if t % self.config.target_sync_every == 0 {
            sync_target(self.online.as_ref(), self.target.as_mut())?;
        }
        self.metrics.train_steps += 1;
        Ok(Some(deltas.iter().map(|d| d.abs()).sum::<f64>() / deltas.len() as f64))
    }

    /// Runs `total_steps` environment steps followed by greedy evaluation.
    pub fn run(&mut self) -> Result<RunMetrics> {
        self.metrics = RunMetrics::default();
        let total = self.config.total_steps;
        if total == 0 {
            return Ok(std::mem::take(&mut self.metrics));
        }
        let mut window = Window::default();
        let mut obs = self.env.reset();
        let mut snapshot = self.env.snapshot();
        let mut action = self.act(&obs, 0);
        let (mut ep_return, mut ep_len) = (0.0, 0u64);

        for t in 1..=total {
            let step = self.env.step(action)?;
            ep_return += step.reward;
            ep_len += 1;
            let exp = Experience {
                state: obs,
                action,
                reward: step.reward,
                next_state: step.observation.clone(),
                terminal: step.terminal,
                snapshot: Some(snapshot),
                birth_step: t,
                priority: self.buffer.new_experience_priority(),
            };
            self.store_experience(exp, t)?;

            if t % self.config.sample_every == 0 {
                self.train_step(t)?;
            }

            if step.terminal {
                let record = EpisodeRecord {
                    episode: self.metrics.episodes.len() + 1,
                    end_step: t,
                    ret: ep_return,
                    length: ep_len,
                    mean100: window.push(ep_return),
                    epsilon: self.schedules.epsilon(t),
                };
                self.hooks.on_episode_end(&record);
                self.metrics.episodes.push(record);
                ep_return = 0.0;
                ep_len = 0;
                obs = self.env.reset();
            } else {
                obs = step.observation;
            }
            snapshot = self.env.snapshot();
            action = self.act(&obs, t);

            if t % self.config.checkpoint_every == 0 {
                self.checkpoint(t, window.mean());
            }
        }
        self.evaluate()?;
        Ok(std::mem::take(&mut self.metrics))
    }

    fn checkpoint(&mut self, t: u64, mean100: Option<f64>) {
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for p in self.buffer.priorities() {
            lo = lo.min(p);
            hi = hi.max(p);
            sum += p;
        }
        self.metrics.checkpoints.push(Checkpoint {
            timestep: t,
            mean100,
            epsilon: self.schedules.epsilon(t),
            priority_min: lo,
            priority_mean: sum / self.buffer.len().max(1) as f64,
            priority_max: hi,
        });
    }

    fn evaluate(&mut self) -> Result<()> {
        let mut env = self.env_config.build(self.config.seed ^ EVAL_SEED_OFFSET);
        let mut returns = Vec::with_capacity(self.config.eval_episodes);
        for episode in 0..self.config.eval_episodes {
            let mut obs = env.reset();
            if episode == 0 {
                self.metrics.final_first_action = Some(greedy_action(self.online.as_ref(), &obs));
            }
            let mut ret = 0.0;
            loop {
                let step = env.step(greedy_action(self.online.as_ref(), &obs))?;
                ret += step.reward;
                if step.terminal {
                    break;
                }
                obs = step.observation;
            }
            returns.push(ret);
        }
        if self.config.eval_episodes == 0 {
            let obs = env.reset();
            self.metrics.final_first_action = Some(greedy_action(self.online.as_ref(), &obs));
        } else {
            self.metrics.final_eval = Some(returns.iter().sum::<f64>() / returns.len() as f64);
        }
        self.metrics.eval_returns = returns;
        Ok(())
    }
}

/// Runs one full training loop for `config` on a fresh environment.
pub fn run(config: &TrainConfig, env: &EnvConfig) -> Result<RunMetrics> {
    Trainer::new(config.clone(), env.clone())?.run()
}

pub fn run_with_hooks<H: TrainerHooks>(config: &TrainConfig, env: &EnvConfig, hooks: H) -> Result<(RunMetrics, H)> {
    let mut trainer = Trainer::with_hooks(config.clone(), env.clone(), hooks)?;
    let metrics = trainer.run()?;
    Ok((metrics, trainer.into_hooks()))
}
