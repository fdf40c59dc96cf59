use super::QFunction;

/// Lookup table over a discretized state.
///
/// Observations are expected as a normalized cell index in `[0, 1]` in their
/// first component, which is what [`ChainWorld`](crate::environments::ChainWorld)
/// emits.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    n_states: usize,
    n_actions: usize,
    table: Vec<f64>,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        assert!(n_states > 0 && n_actions > 0);
        Self {
            n_states,
            n_actions,
            table: vec![0.0; n_states * n_actions],
        }
    }

    pub fn state_id(&self, state: &[f64]) -> usize {
        let scaled = state[0] * (self.n_states - 1) as f64;
        (scaled.round().max(0.0) as usize).min(self.n_states - 1)
    }

    pub fn get(&self, state_id: usize, action: usize) -> f64 {
        self.table[state_id * self.n_actions + action]
    }

    pub fn set(&mut self, state_id: usize, action: usize, value: f64) {
        self.table[state_id * self.n_actions + action] = value;
    }
}

impl QFunction for TabularQ {
    fn action_count(&self) -> usize {
        self.n_actions
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.n_states, self.n_actions]
    }

    fn q_values(&self, state: &[f64]) -> Vec<f64> {
        let row = self.state_id(state) * self.n_actions;
        self.table[row..row + self.n_actions].to_vec()
    }

    fn params(&self) -> &[f64] {
        &self.table
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.table
    }

    fn accumulate_gradient(&self, state: &[f64], action: usize, scale: f64, grad: &mut [f64]) {
        grad[self.state_id(state) * self.n_actions + action] += scale;
    }

    fn boxed_clone(&self) -> Box<dyn QFunction> {
        Box::new(self.clone())
    }
}
