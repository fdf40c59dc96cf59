//! Fixed-capacity experience store with prioritized sampling and
//! prioritized replacement-candidate selection.
//!
//! Raw priorities `p_i = |δ_i| + ε_p` are the single source of truth. Two
//! transformed copies live in prefix-sum trees: `p^α` drives sampling and
//! `p^-γ` drives the choice of replacement candidates, so low-priority
//! experiences are the likely ones to be evicted. Whenever either exponent
//! changes both trees are rebuilt from the raw values.

use std::io::Write;

use rand::Rng;

use crate::environments::Snapshot;
use crate::error::{Error, Result};
use crate::priority_index::{ExtremaTree, PrefixSumTree};

pub const DEFAULT_PRIORITY_EPSILON: f64 = 1e-6;

/// Priority of the very first experience, when there is no maximum to copy.
pub const EMPTY_BUFFER_PRIORITY: f64 = 1.0;

const REBUILD_INTERVAL: u64 = 100_000;

/// One stored transition plus what recycling needs to re-run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    /// Environment state captured at `state`, before `action` was taken.
    pub snapshot: Option<Snapshot>,
    pub birth_step: u64,
    pub priority: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledSlot {
    pub slot: usize,
    /// Importance weight normalized by the buffer-wide maximum, in `(0, 1]`.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct DpsrBuffer {
    capacity: usize,
    slots: Vec<Experience>,
    sample_tree: PrefixSumTree,
    replace_tree: PrefixSumTree,
    sample_min_tree: ExtremaTree,
    priority_max_tree: ExtremaTree,
    alpha: f64,
    gamma: f64,
    epsilon_p: f64,
    updates_since_rebuild: u64,
    rebuilds: u64,
}

fn check_exponent(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWeight(x))
    }
}

fn check_priority(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWeight(p))
    }
}

impl DpsrBuffer {
    pub fn new(capacity: usize, alpha: f64, gamma: f64) -> Result<Self> {
        Self::with_epsilon(capacity, alpha, gamma, DEFAULT_PRIORITY_EPSILON)
    }

    pub fn with_epsilon(capacity: usize, alpha: f64, gamma: f64, epsilon_p: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::State("buffer capacity must be positive".into()));
        }
        check_exponent(alpha)?;
        check_exponent(gamma)?;
        check_priority(epsilon_p)?;
        Ok(Self {
            capacity,
            slots: Vec::with_capacity(capacity),
            sample_tree: PrefixSumTree::new(capacity),
            replace_tree: PrefixSumTree::new(capacity),
            sample_min_tree: ExtremaTree::new(capacity),
            priority_max_tree: ExtremaTree::new(capacity),
            alpha,
            gamma,
            epsilon_p,
            updates_since_rebuild: 0,
            rebuilds: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.capacity
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon_p(&self) -> f64 {
        self.epsilon_p
    }

    /// Number of full rebuilds of the transformed trees so far.
    pub fn rebuild_count(&self) -> u64 {
        self.rebuilds
    }

    pub fn get(&self, slot: usize) -> Option<&Experience> {
        self.slots.get(slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.slots.iter()
    }

    pub fn priorities(&self) -> impl Iterator<Item = f64> + '_ {
        self.slots.iter().map(|e| e.priority)
    }

    /// Current `p^α` leaf for `slot`.
    pub fn sample_weight(&self, slot: usize) -> f64 {
        self.sample_tree.weight(slot)
    }

    /// Current `p^-γ` leaf for `slot`.
    pub fn replace_weight(&self, slot: usize) -> f64 {
        self.replace_tree.weight(slot)
    }

    pub fn sample_total(&self) -> f64 {
        self.sample_tree.total()
    }

    pub fn replace_total(&self) -> f64 {
        self.replace_tree.total()
    }

    pub fn max_priority(&self) -> Option<f64> {
        self.priority_max_tree.query_max().ok()
    }

    /// Priority given to a newly stored experience: the largest priority
    /// currently in the buffer, or [`EMPTY_BUFFER_PRIORITY`] when empty.
    pub fn new_experience_priority(&self) -> f64 {
        self.max_priority().unwrap_or(EMPTY_BUFFER_PRIORITY)
    }

    /// Slot with the smallest birth step; ties go to the lowest slot id.
    pub fn oldest_slot(&self) -> Option<usize> {
        self.slots
            .iter()
            .enumerate()
            .min_by_key(|(slot, e)| (e.birth_step, *slot))
            .map(|(slot, _)| slot)
    }

    pub fn append(&mut self, exp: Experience) -> Result<usize> {
        if self.is_full() {
            return Err(Error::Capacity(self.capacity));
        }
        check_priority(exp.priority)?;
        let slot = self.slots.len();
        let priority = exp.priority;
        self.slots.push(exp);
        self.write_priority(slot, priority);
        Ok(slot)
    }

    pub fn overwrite_slot(&mut self, slot: usize, exp: Experience) -> Result<()> {
        if slot >= self.slots.len() {
            return Err(Error::Slot(slot));
        }
        check_priority(exp.priority)?;
        let priority = exp.priority;
        self.slots[slot] = exp;
        self.write_priority(slot, priority);
        Ok(())
    }

    /// Sets the slot's priority to `abs_td + ε_p`.
    pub fn update_priority(&mut self, slot: usize, abs_td: f64) -> Result<()> {
        if slot >= self.slots.len() {
            return Err(Error::Slot(slot));
        }
        if !abs_td.is_finite() || abs_td < 0.0 {
            return Err(Error::InvalidWeight(abs_td));
        }
        let priority = abs_td + self.epsilon_p;
        self.slots[slot].priority = priority;
        self.write_priority(slot, priority);
        Ok(())
    }

    /// Writes an already-offset priority (e.g. a copied maximum) into `slot`.
    pub fn set_raw_priority(&mut self, slot: usize, priority: f64) -> Result<()> {
        if slot >= self.slots.len() {
            return Err(Error::Slot(slot));
        }
        check_priority(priority)?;
        self.slots[slot].priority = priority;
        self.write_priority(slot, priority);
        Ok(())
    }

    fn write_priority(&mut self, slot: usize, priority: f64) {
        let sampled = priority.powf(self.alpha);
        let replaced = priority.powf(-self.gamma);
        self.sample_tree
            .set_weight(slot, sampled)
            .expect("slot in range and p^alpha finite");
        self.replace_tree
            .set_weight(slot, replaced)
            .expect("slot in range and p^-gamma finite");
        self.sample_min_tree.update(slot, sampled).expect("slot in range");
        self.priority_max_tree.update(slot, priority).expect("slot in range");
        self.updates_since_rebuild += 1;
        if self.updates_since_rebuild >= REBUILD_INTERVAL {
            self.rebuild_transformed();
        }
    }

    /// Changes the sampling and replacement exponents. The transformed trees
    /// are rebuilt only if one of them actually changed.
    pub fn set_exponents(&mut self, alpha: f64, gamma: f64) -> Result<()> {
        check_exponent(alpha)?;
        check_exponent(gamma)?;
        if alpha == self.alpha && gamma == self.gamma {
            return Ok(());
        }
        self.alpha = alpha;
        self.gamma = gamma;
        self.rebuild_transformed();
        Ok(())
    }

    /// Recomputes both transformed trees from the raw priorities.
    pub fn rebuild_transformed(&mut self) {
        self.sample_tree.clear();
        self.replace_tree.clear();
        for (slot, exp) in self.slots.iter().enumerate() {
            let sampled = exp.priority.powf(self.alpha);
            self.sample_tree
                .set_weight(slot, sampled)
                .expect("slot in range and p^alpha finite");
            self.replace_tree
                .set_weight(slot, exp.priority.powf(-self.gamma))
                .expect("slot in range and p^-gamma finite");
            self.sample_min_tree.update(slot, sampled).expect("slot in range");
        }
        self.updates_since_rebuild = 0;
        self.rebuilds += 1;
    }

    /// Probability that one draw of [`sample_batch`](Self::sample_batch) picks `slot`.
    pub fn sample_probability(&self, slot: usize) -> f64 {
        self.sample_tree.weight(slot) / self.sample_tree.total()
    }

    /// Probability that `slot` is the first replacement candidate drawn.
    pub fn replacement_probability(&self, slot: usize) -> f64 {
        self.replace_tree.weight(slot) / self.replace_tree.total()
    }

    /// Draws `k` slots independently with probability `p_i^α / Σ p_j^α`.
    ///
    /// Each weight is `(n·P(i))^-β / max_j (n·P(j))^-β` where `n` is the
    /// occupied count. The maximum belongs to the least likely slot, so this
    /// reduces to `(P(i) / P_min)^-β`.
    pub fn sample_batch<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> Result<Vec<SampledSlot>> {
        if self.is_empty() {
            return Err(Error::Empty);
        }
        check_exponent(beta)?;
        self.set_exponents(alpha, self.gamma)?;
        let total = self.sample_tree.total();
        let min_leaf = self.sample_min_tree.query_min()?;
        (0..k)
            .map(|_| {
                let slot = self.sample_tree.find_prefix(draw_below(total, rng))?;
                let ratio = self.sample_tree.weight(slot) / min_leaf;
                Ok(SampledSlot {
                    slot,
                    weight: ratio.powf(-beta),
                })
            })
            .collect()
    }

    /// Draws `count` distinct slots, each draw proportional to `p^-γ` over the
    /// slots not yet drawn. Requires a full buffer.
    pub fn select_replacement_candidates<R: Rng + ?Sized>(
        &mut self,
        count: usize,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if count == 0 || count > self.capacity {
            return Err(Error::CandidateCount {
                requested: count,
                capacity: self.capacity,
            });
        }
        if !self.is_full() {
            return Err(Error::State(format!(
                "replacement needs a full buffer ({} of {} occupied)",
                self.len(),
                self.capacity
            )));
        }
        self.set_exponents(self.alpha, gamma)?;
        let mut picked = Vec::with_capacity(count);
        let mut outcome = Ok(());
        for _ in 0..count {
            let total = self.replace_tree.total();
            if total <= 0.0 {
                outcome = Err(Error::Empty);
                break;
            }
            let slot = self.replace_tree.find_prefix(draw_below(total, rng))?;
            self.replace_tree.set_weight(slot, 0.0)?;
            picked.push(slot);
        }
        for &slot in &picked {
            let restored = self.slots[slot].priority.powf(-self.gamma);
            self.replace_tree.set_weight(slot, restored)?;
        }
        outcome.map(|_| picked)
    }

    /// Writes one CSV row per occupied slot.
    pub fn write_debug_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "slot,birth_step,priority,action,reward,terminal")?;
        for (slot, e) in self.slots.iter().enumerate() {
            writeln!(
                out,
                "{slot},{},{},{},{},{}",
                e.birth_step, e.priority, e.action, e.reward, e.terminal
            )?;
        }
        Ok(())
    }
}

/// Uniform draw from `[0, total)`.
fn draw_below<R: Rng + ?Sized>(total: f64, rng: &mut R) -> f64 {
    let u = rng.random::<f64>() * total;
    if u < total {
        u
    } else {
        total.next_down()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn exp(priority: f64, birth_step: u64) -> Experience {
        Experience {
            state: vec![birth_step as f64],
            action: 0,
            reward: 0.0,
            next_state: vec![birth_step as f64 + 1.0],
            terminal: false,
            snapshot: None,
            birth_step,
            priority,
        }
    }

    fn filled(priorities: &[f64], alpha: f64, gamma: f64) -> DpsrBuffer {
        let mut buf = DpsrBuffer::new(priorities.len(), alpha, gamma).unwrap();
        for (i, &p) in priorities.iter().enumerate() {
            buf.append(exp(p, i as u64)).unwrap();
        }
        buf
    }

    fn rel_close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn append_tracks_max() {
        let mut buf = DpsrBuffer::new(2, 0.6, 0.3).unwrap();
        assert_eq!(buf.new_experience_priority(), 1.0);
        assert_eq!(buf.append(exp(1.0, 0)).unwrap(), 0);
        assert_eq!(buf.max_priority(), Some(1.0));
        buf.append(exp(2.5, 1)).unwrap();
        assert_eq!(buf.max_priority(), Some(2.5));
        assert!(matches!(buf.append(exp(1.0, 2)), Err(Error::Capacity(2))));
    }

    #[test]
    fn new_priority_is_current_max() {
        let buf = filled(&[0.3, 2.0, 0.7], 0.6, 0.3);
        assert_eq!(buf.new_experience_priority(), 2.0);
        let eps = DEFAULT_PRIORITY_EPSILON;
        let buf = filled(&[eps], 0.6, 0.3);
        assert_eq!(buf.new_experience_priority(), eps);
    }

    #[test]
    fn sampling_probabilities() {
        let mut buf = filled(&[1.0, 3.0], 1.0, 0.0);
        assert_eq!(buf.sample_probability(0), 0.25);
        assert_eq!(buf.sample_probability(1), 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = buf.sample_batch(100_000, 1.0, 0.5, &mut rng).unwrap();
        let ones = draws.iter().filter(|d| d.slot == 1).count() as f64 / 1e5;
        assert!((ones - 0.75).abs() < 0.01);
    }

    #[test]
    fn equal_priorities_give_unit_weights_and_uniform_draws() {
        let mut buf = filled(&[0.4; 8], 0.6, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = buf.sample_batch(80_000, 0.6, 1.0, &mut rng).unwrap();
        assert!(draws.iter().all(|d| d.weight == 1.0));
        let mut counts = [0usize; 8];
        draws.iter().for_each(|d| counts[d.slot] += 1);
        assert!(counts.iter().all(|&c| (c as f64 / 80_000.0 - 0.125).abs() < 0.01));
    }

    #[test]
    fn zero_beta_gives_unit_weights() {
        let mut buf = filled(&[0.1, 5.0, 2.0, 1e-6], 0.6, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = buf.sample_batch(1_000, 0.6, 0.0, &mut rng).unwrap();
        assert!(draws.iter().all(|d| d.weight == 1.0));
    }

    #[test]
    fn zero_alpha_is_uniform() {
        let mut buf = filled(&[0.1, 5.0, 2.0, 1e-3], 0.6, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = buf.sample_batch(100_000, 0.0, 0.4, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        draws.iter().for_each(|d| counts[d.slot] += 1);
        assert!(counts.iter().all(|&c| (c as f64 / 100_000.0 - 0.25).abs() < 0.01));
        assert!(draws.iter().all(|d| d.weight == 1.0));
    }

    #[test]
    fn weights_match_definition() {
        let priorities = [0.5, 1.5, 3.0, 0.05];
        let (alpha, beta) = (0.7, 0.4);
        let mut buf = filled(&priorities, alpha, 0.3);
        let n = priorities.len() as f64;
        let norm: f64 = priorities.iter().map(|p| p.powf(alpha)).sum();
        let raw = |p: f64| (n * p.powf(alpha) / norm).powf(-beta);
        let w_max = priorities.iter().map(|&p| raw(p)).fold(0.0, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in buf.sample_batch(200, alpha, beta, &mut rng).unwrap() {
            let expected = raw(priorities[d.slot]) / w_max;
            assert!((d.weight - expected).abs() < 1e-12);
            assert!(d.weight > 0.0 && d.weight <= 1.0);
        }
    }

    #[test]
    fn empty_buffer_cannot_sample() {
        let mut buf = DpsrBuffer::new(4, 0.6, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample_batch(1, 0.6, 0.4, &mut rng), Err(Error::Empty)));
    }

    #[test]
    fn replacement_probabilities() {
        let mut buf = filled(&[1.0, 4.0], 0.6, 0.5);
        assert!((buf.replacement_probability(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((buf.replacement_probability(1) - 1.0 / 3.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut first = 0;
        for _ in 0..60_000 {
            if buf.select_replacement_candidates(1, 0.5, &mut rng).unwrap()[0] == 0 {
                first += 1;
            }
        }
        assert!((first as f64 / 60_000.0 - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn zero_gamma_candidates_are_uniform() {
        let mut buf = filled(&[0.01, 0.1, 1.0, 10.0], 0.6, 0.7);
        assert!((0..4).all(|s| buf.replacement_probability(s) != 0.25));
        buf.set_exponents(0.6, 0.0).unwrap();
        assert!((0..4).all(|s| buf.replacement_probability(s) == 0.25));
    }

    #[test]
    fn candidates_are_distinct_with_uniform_inclusion() {
        let n = 10;
        let mut buf = filled(&vec![0.5; n], 0.6, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let before = buf.clone();
        let trials = 100_000;
        let c = 3;
        let mut inclusion = vec![0usize; n];
        for _ in 0..trials {
            let picked = buf.select_replacement_candidates(c, 0.3, &mut rng).unwrap();
            let mut sorted = picked.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), c);
            picked.iter().for_each(|&s| inclusion[s] += 1);
        }
        let expected = c as f64 / n as f64;
        assert!(inclusion.iter().all(|&k| (k as f64 / trials as f64 - expected).abs() < 0.01));
        for s in 0..n {
            assert_eq!(buf.replace_weight(s).to_bits(), before.replace_weight(s).to_bits());
        }
        assert_eq!(buf.replace_total().to_bits(), before.replace_total().to_bits());
    }

    #[test]
    fn candidate_preconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut partial = DpsrBuffer::new(3, 0.6, 0.3).unwrap();
        partial.append(exp(1.0, 0)).unwrap();
        assert!(matches!(
            partial.select_replacement_candidates(1, 0.3, &mut rng),
            Err(Error::State(_))
        ));
        let mut full = filled(&[1.0, 2.0, 3.0], 0.6, 0.3);
        assert!(matches!(
            full.select_replacement_candidates(4, 0.3, &mut rng),
            Err(Error::CandidateCount { requested: 4, capacity: 3 })
        ));
        assert!(matches!(
            full.select_replacement_candidates(0, 0.3, &mut rng),
            Err(Error::CandidateCount { .. })
        ));
        let all = full.select_replacement_candidates(3, 0.3, &mut rng).unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn update_priority_offsets_by_epsilon() {
        let mut buf = filled(&[1.0, 2.0], 0.6, 0.3);
        buf.update_priority(0, 0.0).unwrap();
        assert_eq!(buf.get(0).unwrap().priority, DEFAULT_PRIORITY_EPSILON);
        buf.update_priority(1, 0.7).unwrap();
        assert_eq!(buf.get(1).unwrap().priority, 0.7 + 1e-6);
        assert!(rel_close(buf.get(1).unwrap().priority, 0.700001));
        assert_eq!(buf.sample_weight(1), (0.7f64 + 1e-6).powf(0.6));
        assert!(matches!(buf.update_priority(2, 0.1), Err(Error::Slot(2))));
        assert!(matches!(buf.update_priority(0, -0.1), Err(Error::InvalidWeight(_))));
    }

    #[test]
    fn overwrite_round_trip_and_max() {
        let mut buf = filled(&[1.0, 5.0, 2.0], 0.6, 0.3);
        let mut e = exp(3.0, 99);
        e.action = 1;
        e.reward = -2.5;
        e.terminal = true;
        buf.overwrite_slot(0, e.clone()).unwrap();
        assert_eq!(buf.get(0), Some(&e));
        buf.overwrite_slot(2, exp(8.0, 100)).unwrap();
        assert_eq!(buf.max_priority(), Some(8.0));
        buf.overwrite_slot(2, exp(0.1, 101)).unwrap();
        assert_eq!(buf.max_priority(), Some(5.0));
        buf.overwrite_slot(1, exp(0.2, 102)).unwrap();
        assert_eq!(buf.max_priority(), Some(3.0));
        assert!(matches!(buf.overwrite_slot(3, exp(1.0, 0)), Err(Error::Slot(3))));
    }

    #[test]
    fn exponent_changes_rebuild_only_when_needed() {
        let mut buf = filled(&[0.2, 1.3, 4.0], 0.6, 0.3);
        let rebuilds = buf.rebuild_count();
        buf.set_exponents(0.6, 0.3).unwrap();
        assert_eq!(buf.rebuild_count(), rebuilds);
        buf.set_exponents(0.7, 0.3).unwrap();
        assert_eq!(buf.rebuild_count(), rebuilds + 1);
        for s in 0..3 {
            let p = buf.get(s).unwrap().priority;
            assert_eq!(buf.sample_weight(s), p.powf(0.7));
        }
        let raw: Vec<f64> = buf.priorities().collect();
        buf.set_exponents(0.7, 0.5).unwrap();
        assert_eq!(buf.priorities().collect::<Vec<_>>(), raw);
        assert_eq!(buf.replace_weight(2), 4.0f64.powf(-0.5));
    }

    #[test]
    fn oldest_slot_breaks_ties_low() {
        let mut buf = DpsrBuffer::new(3, 0.6, 0.3).unwrap();
        buf.append(exp(1.0, 5)).unwrap();
        buf.append(exp(1.0, 2)).unwrap();
        buf.append(exp(1.0, 2)).unwrap();
        assert_eq!(buf.oldest_slot(), Some(1));
    }

    #[test]
    fn debug_csv_layout() {
        let buf = filled(&[1.5, 0.25], 0.6, 0.3);
        let mut out = Vec::new();
        buf.write_debug_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "slot,birth_step,priority,action,reward,terminal");
        assert_eq!(lines[1], "0,0,1.5,0,0,false");
        assert_eq!(lines.len(), 3);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Append(f64),
        Update(usize, f64),
        Overwrite(usize, f64),
        Exponents(f64, f64),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (1e-6f64..10.0).prop_map(Op::Append),
            (0usize..16, 0.0f64..10.0).prop_map(|(s, d)| Op::Update(s, d)),
            (0usize..16, 1e-6f64..10.0).prop_map(|(s, p)| Op::Overwrite(s, p)),
            (0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, g)| Op::Exponents(a, g)),
        ]
    }

    proptest! {
        #[test]
        fn trees_track_raw_priorities(ops in prop::collection::vec(op(), 1..80)) {
            let mut buf = DpsrBuffer::new(16, 0.6, 0.3).unwrap();
            for (t, op) in ops.into_iter().enumerate() {
                let n = buf.len();
                match op {
                    Op::Append(p) if !buf.is_full() => { buf.append(exp(p, t as u64)).unwrap(); }
                    Op::Update(s, d) if n > 0 => buf.update_priority(s % n, d).unwrap(),
                    Op::Overwrite(s, p) if n > 0 => buf.overwrite_slot(s % n, exp(p, t as u64)).unwrap(),
                    Op::Exponents(a, g) => buf.set_exponents(a, g).unwrap(),
                    _ => {}
                }
                let scan = buf.priorities().fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))));
                prop_assert_eq!(buf.max_priority(), scan);
                for s in 0..buf.len() {
                    let p = buf.get(s).unwrap().priority;
                    prop_assert!(p >= DEFAULT_PRIORITY_EPSILON);
                    prop_assert!(rel_close(buf.sample_weight(s), p.powf(buf.alpha())));
                    prop_assert!(rel_close(buf.replace_weight(s), p.powf(-buf.gamma())));
                }
            }
            let before: Vec<(f64, f64)> = (0..buf.len()).map(|s| (buf.sample_probability(s), buf.replacement_probability(s))).collect();
            buf.rebuild_transformed();
            for (s, (ps, pr)) in before.into_iter().enumerate() {
                prop_assert!(rel_close(buf.sample_probability(s), ps));
                prop_assert!(rel_close(buf.replacement_probability(s), pr));
            }
        }
    }
}
