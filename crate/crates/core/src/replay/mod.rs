//! Proportional prioritized experience replay.
//!
//! Transition `i` with priority `p_i` is drawn with probability
//! `p_i^lambda / sum_k p_k^lambda`. Sampled transitions carry importance
//! weights `(N * P(i))^-mu`, divided by the largest weight in the batch.

mod sum_tree;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use sum_tree::SumTree;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerConfig {
    pub capacity: usize,
    /// Prioritization exponent.
    pub lambda: f64,
    /// Importance-sampling exponent at step 0, annealed linearly to 1.
    pub mu_start: f64,
    pub anneal_steps: u64,
    /// Added to |TD error| so no priority is ever zero.
    pub priority_floor: f64,
}

impl Default for PerConfig {
    fn default() -> Self {
        PerConfig {
            capacity: 50_000,
            lambda: 0.6,
            mu_start: 0.4,
            anneal_steps: 600_000,
            priority_floor: 1e-3,
        }
    }
}

impl PerConfig {
    pub fn validate(&self, batch_size: usize) -> Result<()> {
        if self.capacity <= batch_size {
            return Err(Error::Config(format!(
                "replay capacity {} must exceed batch size {batch_size}",
                self.capacity
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.mu_start) {
            return Err(Error::Config("lambda and mu_start must lie in [0, 1]".into()));
        }
        if !(self.priority_floor > 0.0) {
            return Err(Error::Config("priority floor must be positive".into()));
        }
        Ok(())
    }
}

/// Linear ramp of the importance-sampling exponent from `mu_start` to 1.
pub fn anneal_mu(cfg: &PerConfig, t: u64) -> f64 {
    if cfg.anneal_steps == 0 || t >= cfg.anneal_steps {
        return 1.0;
    }
    cfg.mu_start + (1.0 - cfg.mu_start) * t as f64 / cfg.anneal_steps as f64
}

/// Observations are stored in single precision to halve replay memory.
#[derive(Debug, Clone)]
struct Stored {
    obs: Box<[f32]>,
    next_obs: Box<[f32]>,
    action: u8,
    reward: f64,
    terminal: bool,
}

/// A sampled minibatch with flattened `(n, obs_len)` observation blocks.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminals: Vec<bool>,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferStats {
    pub size: usize,
    pub root_mass: f64,
    pub max_priority: f64,
}

#[derive(Debug, Clone)]
pub struct PrioritizedReplay {
    cfg: PerConfig,
    tree: SumTree,
    priorities: Vec<f64>,
    data: Vec<Stored>,
    next: usize,
    max_priority: f64,
}

impl PrioritizedReplay {
    pub fn new(cfg: PerConfig) -> Self {
        PrioritizedReplay {
            tree: SumTree::new(cfg.capacity),
            priorities: vec![0.0; cfg.capacity],
            data: Vec::with_capacity(cfg.capacity.min(4096)),
            next: 0,
            max_priority: 1.0,
            cfg,
        }
    }

    pub fn config(&self) -> &PerConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    pub fn priority(&self, index: usize) -> f64 {
        self.priorities[index]
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn stats(&self) -> BufferStats {
        BufferStats { size: self.len(), root_mass: self.tree.total(), max_priority: self.max_priority }
    }

    fn mass(&self, p: f64) -> f64 {
        p.powf(self.cfg.lambda)
    }

    /// Stores `t` at the running maximum priority, overwriting the oldest
    /// entry once full. Returns the slot index.
    pub fn push(&mut self, t: Transition) -> usize {
        let stored = Stored {
            obs: t.obs.iter().map(|&x| x as f32).collect(),
            next_obs: t.next_obs.iter().map(|&x| x as f32).collect(),
            action: t.action as u8,
            reward: t.reward,
            terminal: t.terminal,
        };
        let slot = self.next;
        if slot < self.data.len() {
            self.data[slot] = stored;
        } else {
            self.data.push(stored);
        }
        self.next = (self.next + 1) % self.cfg.capacity;
        self.priorities[slot] = self.max_priority;
        let m = self.mass(self.max_priority);
        self.tree.set(slot, m).expect("slot within capacity");
        slot
    }

    /// Probability of drawing slot `i` on a single draw.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    /// Stratified draw of `n` slots: the total mass is split into `n` equal
    /// strata and one point is drawn uniformly inside each.
    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if n == 0 || self.len() < n {
            return Err(Error::InsufficientData { needed: n.max(1), available: self.len() });
        }
        let total = self.tree.total();
        let stratum = total / n as f64;
        (0..n)
            .map(|k| {
                let u: f64 = rng.gen();
                let m = ((k as f64 + u) * stratum).min(total * (1.0 - f64::EPSILON));
                self.tree.query(m)
            })
            .collect()
    }

    pub fn sample_batch(&self, n: usize, mu: f64, rng: &mut impl Rng) -> Result<Batch> {
        let indices = self.sample_indices(n, rng)?;
        let size = self.len() as f64;
        let raw: Vec<f64> = indices.iter().map(|&i| (size * self.probability(i)).powf(-mu)).collect();
        let max = raw.iter().copied().fold(0.0, f64::max);
        let weights = raw.iter().map(|w| w / max).collect();

        let obs_len = self.data[indices[0]].obs.len();
        let mut batch = Batch {
            obs: Vec::with_capacity(n * obs_len),
            next_obs: Vec::with_capacity(n * obs_len),
            actions: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            terminals: Vec::with_capacity(n),
            indices,
            weights,
        };
        for &i in &batch.indices {
            let t = &self.data[i];
            batch.obs.extend(t.obs.iter().map(|&x| x as f64));
            batch.next_obs.extend(t.next_obs.iter().map(|&x| x as f64));
            batch.actions.push(t.action as usize);
            batch.rewards.push(t.reward);
            batch.terminals.push(t.terminal);
        }
        Ok(batch)
    }

    /// Sets `p_i = |delta_i| + floor` for each sampled slot.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        for (&i, d) in indices.iter().zip(td_errors) {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, len: self.len() });
            }
            let p = d.abs() + self.cfg.priority_floor;
            self.priorities[i] = p;
            self.max_priority = self.max_priority.max(p);
            let m = self.mass(p);
            self.tree.set(i, m)?;
        }
        Ok(())
    }
}
