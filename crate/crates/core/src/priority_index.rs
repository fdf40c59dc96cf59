//! Array-backed binary trees over a fixed number of slots.
//!
//! [`PrefixSumTree`] answers "which slot does this point of the cumulative
//! weight fall into" in `O(log N)`, which is all categorical sampling needs.
//! [`ExtremaTree`] keeps per-node minimum and maximum so the buffer can read
//! the smallest transformed priority and the largest raw priority without a
//! scan.
//!
//! Both trees are padded to the next power of two and stored implicitly:
//! node `i` has children `2i` and `2i + 1`, the root is node 1 and leaves
//! start at `size`.

use crate::error::{Error, Result};

fn padded(capacity: usize) -> usize {
    capacity.max(1).next_power_of_two()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSumTree {
    capacity: usize,
    size: usize,
    nodes: Vec<f64>,
}

impl PrefixSumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "PrefixSumTree capacity must be positive");
        let size = padded(capacity);
        Self {
            capacity,
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn weight(&self, index: usize) -> f64 {
        self.nodes[self.size + index]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.nodes[self.size..self.size + self.capacity]
    }

    pub fn set_weight(&mut self, index: usize, w: f64) -> Result<()> {
        if index >= self.capacity {
            return Err(Error::IndexOutOfRange {
                index,
                capacity: self.capacity,
            });
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeight(w));
        }
        let mut node = self.size + index;
        self.nodes[node] = w;
        // Parents are recomputed from their children rather than shifted by a
        // delta, so a node's value never depends on the update history.
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
        Ok(())
    }

    /// Returns the smallest slot `i` with `leaf[0] + ... + leaf[i] > u`.
    ///
    /// A `u` that lands exactly on a prefix boundary goes to the next slot,
    /// so zero-weight slots are never returned.
    pub fn find_prefix(&self, u: f64) -> Result<usize> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::Empty);
        }
        if !(0.0..total).contains(&u) {
            return Err(Error::QueryOutOfRange { value: u, total });
        }
        let mut node = 1;
        let mut rest = u;
        while node < self.size {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            if (rest < left || right <= 0.0) && left > 0.0 {
                node *= 2;
            } else {
                rest -= left;
                node = 2 * node + 1;
            }
        }
        Ok(node - self.size)
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for node in (1..self.size).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    pub fn clear(&mut self) {
        self.nodes.iter_mut().for_each(|n| *n = 0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremaTree {
    capacity: usize,
    size: usize,
    mins: Vec<f64>,
    maxs: Vec<f64>,
    occupied: usize,
}

impl ExtremaTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ExtremaTree capacity must be positive");
        let size = padded(capacity);
        Self {
            capacity,
            size,
            mins: vec![f64::INFINITY; 2 * size],
            maxs: vec![f64::NEG_INFINITY; 2 * size],
            occupied: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        let leaf = self.mins.get(self.size + index).copied()?;
        (index < self.capacity && leaf != f64::INFINITY).then_some(leaf)
    }

    pub fn update(&mut self, index: usize, v: f64) -> Result<()> {
        if index >= self.capacity {
            return Err(Error::IndexOutOfRange {
                index,
                capacity: self.capacity,
            });
        }
        if v.is_nan() {
            return Err(Error::InvalidWeight(v));
        }
        if self.get(index).is_none() {
            self.occupied += 1;
        }
        self.write(index, v, v);
        Ok(())
    }

    /// Marks `index` as unoccupied so it no longer takes part in queries.
    pub fn remove(&mut self, index: usize) -> Result<()> {
        if index >= self.capacity {
            return Err(Error::IndexOutOfRange {
                index,
                capacity: self.capacity,
            });
        }
        if self.get(index).is_some() {
            self.occupied -= 1;
            self.write(index, f64::INFINITY, f64::NEG_INFINITY);
        }
        Ok(())
    }

    fn write(&mut self, index: usize, lo: f64, hi: f64) {
        let mut node = self.size + index;
        self.mins[node] = lo;
        self.maxs[node] = hi;
        while node > 1 {
            node /= 2;
            self.mins[node] = self.mins[2 * node].min(self.mins[2 * node + 1]);
            self.maxs[node] = self.maxs[2 * node].max(self.maxs[2 * node + 1]);
        }
    }

    pub fn query_min(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Empty);
        }
        Ok(self.mins[1])
    }

    pub fn query_max(&self) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Empty);
        }
        Ok(self.maxs[1])
    }
}
