use crate::error::{Error, Result};

/// Complete binary tree of non-negative masses supporting O(log n) updates
/// and prefix-sum lookup.
///
/// Leaves live at `[base, base + capacity)` of a heap-ordered array with the
/// root at index 1. Parents are recomputed from their children on every
/// update, so sums never accumulate incremental drift.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    base: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "sum tree needs at least one leaf");
        let base = capacity.next_power_of_two();
        SumTree { capacity, base, nodes: vec![0.0; 2 * base] }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.base + leaf]
    }

    pub fn set(&mut self, leaf: usize, mass: f64) -> Result<()> {
        if leaf >= self.capacity {
            return Err(Error::IndexOutOfRange { index: leaf, len: self.capacity });
        }
        debug_assert!(mass >= 0.0 && mass.is_finite());
        let mut i = self.base + leaf;
        self.nodes[i] = mass;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
        Ok(())
    }

    /// Leaf whose cumulative interval `[prefix, prefix + mass)` contains `mass`.
    pub fn query(&self, mass: f64) -> Result<usize> {
        let total = self.total();
        if !(mass >= 0.0 && mass < total) {
            return Err(Error::MassOutOfRange { mass, total });
        }
        let mut m = mass;
        let mut i = 1;
        while i < self.base {
            let left = self.nodes[2 * i];
            if m < left || self.nodes[2 * i + 1] <= 0.0 {
                // Rounding can push m just past a left subtree whose right
                // sibling is empty; stay inside the non-empty side.
                if m >= left {
                    m = left * (1.0 - f64::EPSILON);
                }
                i *= 2;
            } else {
                m -= left;
                i = 2 * i + 1;
            }
        }
        Ok(i - self.base)
    }

    /// Largest absolute difference between an internal node and the sum of
    /// its children.
    pub fn consistency_error(&self) -> f64 {
        (1..self.base)
            .map(|i| (self.nodes[i] - self.nodes[2 * i] - self.nodes[2 * i + 1]).abs())
            .fold(0.0, f64::max)
    }
}
