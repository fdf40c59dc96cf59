//! Action-value functions and the update rules shared by every replay mode.
//!
//! Models expose a flat parameter vector, so copying to a target network,
//! saving, loading and the semi-gradient step all work the same way for the
//! dense network and the table.

mod dense;
mod tabular;

use std::io::{Read, Write};

pub use dense::DenseQNet;
pub use tabular::TabularQ;

use crate::error::{Error, Result};
use crate::replay_buffer::Experience;

pub trait QFunction: Send {
    fn action_count(&self) -> usize;

    /// Layer sizes (or table dimensions) that define the parameter layout.
    fn shape(&self) -> Vec<usize>;

    fn q_values(&self, state: &[f64]) -> Vec<f64>;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Adds `scale * ∇θ Q(state, action)` into `grad`.
    fn accumulate_gradient(&self, state: &[f64], action: usize, scale: f64, grad: &mut [f64]);

    fn boxed_clone(&self) -> Box<dyn QFunction>;
}

impl Clone for Box<dyn QFunction> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(qf: &dyn QFunction, state: &[f64]) -> usize {
    argmax(&qf.q_values(state))
}

/// Double-DQN temporal-difference error.
///
/// The online model picks the bootstrap action at `next_state`, the target
/// model scores it. Terminal transitions do not bootstrap.
pub fn td_error(qf: &dyn QFunction, target: &dyn QFunction, exp: &Experience, discount: f64) -> f64 {
    let current = qf.q_values(&exp.state)[exp.action];
    if exp.terminal {
        return exp.reward - current;
    }
    let next_action = greedy_action(qf, &exp.next_state);
    let bootstrap = target.q_values(&exp.next_state)[next_action];
    exp.reward + discount * bootstrap - current
}

/// One element of a weighted semi-gradient step.
#[derive(Debug, Clone, Copy)]
pub struct WeightedTd<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub weight: f64,
    pub delta: f64,
}

impl<'a> WeightedTd<'a> {
    pub fn new(exp: &'a Experience, weight: f64, delta: f64) -> Self {
        Self {
            state: &exp.state,
            action: exp.action,
            weight,
            delta,
        }
    }
}

/// `θ ← θ + η · Σ w_i δ_i ∇θ Q(s_i, a_i)`, with every gradient taken at the
/// parameters from before the step.
pub fn apply_weighted_update(qf: &mut dyn QFunction, batch: &[WeightedTd<'_>], eta: f64) {
    let mut accumulated = vec![0.0; qf.params().len()];
    for item in batch {
        let scale = item.weight * item.delta;
        if scale != 0.0 {
            qf.accumulate_gradient(item.state, item.action, scale, &mut accumulated);
        }
    }
    for (p, g) in qf.params_mut().iter_mut().zip(&accumulated) {
        *p += eta * g;
    }
}

pub fn sync_target(qf: &dyn QFunction, target: &mut dyn QFunction) -> Result<()> {
    let (expected, found) = (qf.shape(), target.shape());
    if expected != found {
        return Err(Error::Shape { expected, found });
    }
    target.params_mut().copy_from_slice(qf.params());
    Ok(())
}

/// Writes `u32 L`, `L` u32 shape entries, then every parameter as f64,
/// all little-endian.
pub fn write_params<W: Write>(qf: &dyn QFunction, mut out: W) -> std::io::Result<()> {
    let shape = qf.shape();
    out.write_all(&(shape.len() as u32).to_le_bytes())?;
    for dim in &shape {
        out.write_all(&(*dim as u32).to_le_bytes())?;
    }
    for p in qf.params() {
        out.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

/// Reads the shape header written by [`write_params`].
pub fn read_shape<R: Read>(input: &mut R) -> Result<Vec<usize>> {
    let count = read_u32(input)? as usize;
    (0..count).map(|_| read_u32(input).map(|d| d as usize)).collect()
}

/// Loads parameters into `qf`, which must have the shape in the header.
pub fn read_params<R: Read>(qf: &mut dyn QFunction, mut input: R) -> Result<()> {
    let found = read_shape(&mut input)?;
    let expected = qf.shape();
    if found != expected {
        return Err(Error::Shape { expected, found });
    }
    read_values(&mut input, qf.params_mut())
}

pub(crate) fn read_values<R: Read>(input: &mut R, params: &mut [f64]) -> Result<()> {
    let mut word = [0u8; 8];
    for p in params.iter_mut() {
        input
            .read_exact(&mut word)
            .map_err(|e| Error::Format(format!("truncated parameter data: {e}")))?;
        *p = f64::from_le_bytes(word);
    }
    let mut rest = Vec::new();
    input
        .read_to_end(&mut rest)
        .map_err(|e| Error::Format(e.to_string()))?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut word = [0u8; 4];
    input
        .read_exact(&mut word)
        .map_err(|e| Error::Format(format!("truncated shape header: {e}")))?;
    Ok(u32::from_le_bytes(word))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{chain_q_star, ChainWorld};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn transition(state: Vec<f64>, action: usize, reward: f64, next_state: Vec<f64>, terminal: bool) -> Experience {
        Experience {
            state,
            action,
            reward,
            next_state,
            terminal,
            snapshot: None,
            birth_step: 0,
            priority: 1.0,
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn zero_network_prefers_first_action() {
        let net = DenseQNet::zeros(&[3, 64, 64, 4]);
        assert_eq!(greedy_action(&net, &[0.3, -2.0, 7.0]), 0);
    }

    #[test]
    fn td_error_arithmetic() {
        // Two tabular states, two actions; state 0 is s, state 1 is s'.
        let mut online = TabularQ::new(2, 2);
        let mut target = TabularQ::new(2, 2);
        online.set(0, 1, 0.5);
        online.set(1, 0, 3.0);
        target.set(1, 0, 0.2);
        target.set(1, 1, 9.0);
        let exp = transition(vec![0.0], 1, 1.0, vec![1.0], false);
        assert!((td_error(&online, &target, &exp, 1.0) - 0.7).abs() < 1e-15);

        let terminal = transition(vec![0.0], 1, 1.0, vec![1.0], true);
        assert_eq!(td_error(&online, &target, &terminal, 1.0), 0.5);
    }

    #[test]
    fn zero_table_td_is_reward() {
        let chain = ChainWorld::new(3);
        let q = TabularQ::new(3, 2);
        for cell in 0..3 {
            for action in 0..2 {
                let (next, reward, done) = chain.model(cell, action);
                let exp = transition(chain.observe_cell(cell), action, reward, chain.observe_cell(next), done);
                assert_eq!(td_error(&q, &q, &exp, 0.9), reward);
            }
        }
    }

    #[test]
    fn double_dqn_matches_max_target_when_networks_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = DenseQNet::new(&[3, 16, 16, 3], &mut rng);
        for _ in 0..50 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s2: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exp = transition(s.clone(), 2, 0.3, s2.clone(), false);
            let next_max = net.q_values(&s2).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let classic = 0.3 + 0.99 * next_max - net.q_values(&s)[2];
            assert_eq!(td_error(&net, &net.clone(), &exp, 0.99), classic);
        }
    }

    #[test]
    fn tabular_update_arithmetic() {
        let mut q = TabularQ::new(2, 2);
        let exp = transition(vec![1.0], 1, 0.0, vec![1.0], false);
        apply_weighted_update(&mut q, &[WeightedTd::new(&exp, 1.0, 0.7)], 0.5);
        assert_eq!(q.get(1, 1), 0.35);
        let before = q.params().to_vec();
        apply_weighted_update(&mut q, &[WeightedTd::new(&exp, 1.0, 0.0)], 0.5);
        assert_eq!(q.params(), &before[..]);
    }

    #[test]
    fn tabular_sweeps_reach_value_iteration_fixed_point() {
        let chain = ChainWorld::new(5);
        let q_star = chain_q_star(5, 0.9);
        let transitions: Vec<Experience> = (0..5)
            .flat_map(|cell| (0..2).map(move |a| (cell, a)))
            .map(|(cell, a)| {
                let (next, reward, done) = chain.model(cell, a);
                transition(chain.observe_cell(cell), a, reward, chain.observe_cell(next), done)
            })
            .collect();
        let mut q = TabularQ::new(5, 2);
        let mut converged_at = None;
        for sweep in 1..=10_000 {
            let target = q.clone();
            let deltas: Vec<f64> = transitions.iter().map(|e| td_error(&q, &target, e, 0.9)).collect();
            let batch: Vec<WeightedTd> = transitions.iter().zip(&deltas).map(|(e, &d)| WeightedTd::new(e, 1.0, d)).collect();
            apply_weighted_update(&mut q, &batch, 0.1);
            let err = (0..5)
                .flat_map(|s| (0..2).map(move |a| (s, a)))
                .map(|(s, a)| (q.get(s, a) - q_star[s][a]).abs())
                .fold(0.0, f64::max);
            if err < 1e-3 {
                converged_at = Some(sweep);
                break;
            }
        }
        assert!(converged_at.is_some());
    }

    #[test]
    fn sync_copies_without_aliasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut online = DenseQNet::new(&[4, 64, 64, 2], &mut rng);
        let mut target = DenseQNet::zeros(&[4, 64, 64, 2]);
        sync_target(&online, &mut target).unwrap();
        let states: Vec<Vec<f64>> = (0..100).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        for s in &states {
            assert_eq!(online.q_values(s), target.q_values(s));
        }
        let frozen = target.params().to_vec();
        online.params_mut()[0] += 1.0;
        assert_eq!(target.params(), &frozen[..]);

        let mut other = DenseQNet::zeros(&[4, 32, 2]);
        assert!(matches!(sync_target(&online, &mut other), Err(Error::Shape { .. })));
    }

    #[test]
    fn params_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = DenseQNet::new(&[2, 5, 3], &mut rng);
        let mut bytes = Vec::new();
        write_params(&net, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], &3u32.to_le_bytes());
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 5, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 8 * net.params().len());

        let mut loaded = DenseQNet::zeros(&[2, 5, 3]);
        read_params(&mut loaded, &bytes[..]).unwrap();
        assert_eq!(loaded.params(), net.params());
        assert_eq!(DenseQNet::from_reader(&bytes[..]).unwrap().params(), net.params());

        let mut wrong = DenseQNet::zeros(&[2, 4, 3]);
        assert!(matches!(read_params(&mut wrong, &bytes[..]), Err(Error::Shape { .. })));
        assert!(matches!(read_params(&mut loaded, &bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut padded = bytes.clone();
        padded.push(0);
        assert!(matches!(read_params(&mut loaded, &padded[..]), Err(Error::Format(_))));
    }
}
