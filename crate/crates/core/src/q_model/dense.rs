use std::io::Read;

use rand::Rng;

use super::{read_shape, read_values, QFunction};
use crate::error::{Error, Result};

/// Fully connected network with rectified hidden layers and a linear head.
///
/// Parameters are one flat vector. Each layer stores its weight matrix
/// input-major (`w[i * out + j]` connects input `i` to unit `j`) followed by
/// its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQNet {
    layers: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(layers: &[usize]) -> usize {
    layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl DenseQNet {
    pub const HIDDEN: [usize; 2] = [64, 64];

    /// `input → 64 → 64 → actions`, randomly initialized.
    pub fn standard<R: Rng + ?Sized>(input: usize, actions: usize, rng: &mut R) -> Self {
        Self::new(&[input, Self::HIDDEN[0], Self::HIDDEN[1], actions], rng)
    }

    /// Weights and biases of each layer drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new<R: Rng + ?Sized>(layers: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(layers);
        let mut offset = 0;
        for pair in layers.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out + fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn zeros(layers: &[usize]) -> Self {
        assert!(layers.len() >= 2, "a network needs input and output sizes");
        assert!(layers.iter().all(|&n| n > 0), "layer sizes must be positive");
        Self {
            layers: layers.to_vec(),
            params: vec![0.0; param_count(layers)],
        }
    }

    /// Reads the format produced by [`write_params`](super::write_params).
    pub fn from_reader<R: Read>(mut input: R) -> Result<Self> {
        let layers = read_shape(&mut input)?;
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::Format(format!("invalid layer sizes {layers:?}")));
        }
        let mut net = Self::zeros(&layers);
        read_values(&mut input, &mut net.params)?;
        Ok(net)
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    /// Activations of every layer (the input included). Hidden entries are
    /// post-rectifier, so a zero marks an inactive unit.
    fn forward(&self, state: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(state.len(), self.layers[0], "observation size mismatch");
        let last = self.layers.len() - 2;
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(state.to_vec());
        let mut offset = 0;
        for (l, pair) in self.layers.windows(2).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let mut z = self.params[offset + n_in * n_out..offset + n_in * n_out + n_out].to_vec();
            let input = &acts[l];
            for (i, &x) in input.iter().enumerate() {
                if x != 0.0 {
                    let row = &weights[i * n_out..(i + 1) * n_out];
                    for (zj, &w) in z.iter_mut().zip(row) {
                        *zj += x * w;
                    }
                }
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
            offset += n_in * n_out + n_out;
        }
        acts
    }
}

impl QFunction for DenseQNet {
    fn action_count(&self) -> usize {
        *self.layers.last().expect("non-empty layers")
    }

    fn shape(&self) -> Vec<usize> {
        self.layers.clone()
    }

    fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.forward(state).pop().expect("output layer")
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_gradient(&self, state: &[f64], action: usize, scale: f64, grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let acts = self.forward(state);
        let n_layers = self.layers.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for pair in self.layers.windows(2) {
            offsets.push(offset);
            offset += pair[0] * pair[1] + pair[1];
        }

        // Upstream gradient of Q(s, action) w.r.t. the current layer's
        // pre-activations, already multiplied by `scale`.
        let mut upstream = vec![0.0; self.layers[n_layers]];
        upstream[action] = scale;
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layers[l], self.layers[l + 1]);
            let base = offsets[l];
            let input = &acts[l];
            {
                let (w_grad, b_grad) = grad[base..base + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (bg, &u) in b_grad.iter_mut().zip(&upstream) {
                    *bg += u;
                }
                for (i, &x) in input.iter().enumerate() {
                    if x != 0.0 {
                        for (g, &u) in w_grad[i * n_out..(i + 1) * n_out].iter_mut().zip(&upstream) {
                            *g += x * u;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[base..base + n_in * n_out];
            upstream = input
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if x > 0.0 {
                        weights[i * n_out..(i + 1) * n_out]
                            .iter()
                            .zip(&upstream)
                            .map(|(w, u)| w * u)
                            .sum()
                    } else {
                        0.0
                    }
                })
                .collect();
        }
    }

    fn boxed_clone(&self) -> Box<dyn QFunction> {
        Box::new(self.clone())
    }
}
