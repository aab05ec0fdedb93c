//! Dueling feed-forward Q-network with hand-written backpropagation.
//!
//! Architecture: a ReLU trunk (input -> 512 -> 512 by default) feeding a
//! scalar value head and a per-action advantage head, aggregated as
//! `Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')`.
//!
//! Batches are row-major `(batch, features)` slices.

pub mod checkpoint;
pub mod optim;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{deserialize_params, read_meta, serialize_params, CheckpointMeta, FORMAT_VERSION};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};

/// Fully connected layer; `weights` is `(inputs, outputs)` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Uniform in +-1/sqrt(fan_in), zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        Dense { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    /// `x (b, inputs) -> (b, outputs)`.
    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            y.extend_from_slice(&self.bias);
        }
        gemm(batch, self.inputs, self.outputs, x, false, &self.weights, false, &mut y, 1.0);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the layer input.
    fn backward(&self, x: &[f64], dy: &[f64], batch: usize, grad: &mut Dense, need_dx: bool) -> Option<Vec<f64>> {
        // dW = x^T dy
        gemm(self.inputs, batch, self.outputs, x, true, dy, false, &mut grad.weights, 1.0);
        for row in dy.chunks_exact(self.outputs) {
            for (g, d) in grad.bias.iter_mut().zip(row) {
                *g += d;
            }
        }
        need_dx.then(|| {
            let mut dx = vec![0.0; batch * self.inputs];
            // dx = dy W^T
            gemm(batch, self.outputs, self.inputs, dy, false, &self.weights, true, &mut dx, 0.0);
            dx
        })
    }
}

/// `c = a' b' + beta c` where `a'` is `(m, k)` and `b'` is `(k, n)`; the
/// flags say whether the stored matrices are transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], beta: f64) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: slice lengths match the (m, k), (k, n), (m, n) shapes and strides above.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelingNet {
    pub trunk: Vec<Dense>,
    pub value: Dense,
    pub advantage: Dense,
}

/// Per-sample network outputs for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct QOutput {
    pub batch: usize,
    pub actions: usize,
    /// `(batch, actions)`.
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    /// `(batch, actions)`.
    pub a: Vec<f64>,
}

impl QOutput {
    pub fn q_row(&self, i: usize) -> &[f64] {
        &self.q[i * self.actions..(i + 1) * self.actions]
    }

    pub fn greedy(&self, i: usize) -> usize {
        argmax(self.q_row(i))
    }
}

/// Index of the largest entry, first on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Result of one loss evaluation over a batch.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: DuelingNet,
    /// `Y_i - Q(s_i, a_i)`.
    pub td_errors: Vec<f64>,
}

struct Activations {
    /// Input to each trunk layer and, last, the trunk output.
    layers: Vec<Vec<f64>>,
    out: QOutput,
}

impl DuelingNet {
    pub fn new(inputs: usize, hidden: &[usize], actions: usize, rng: &mut impl Rng) -> Self {
        let mut trunk = Vec::with_capacity(hidden.len());
        let mut width = inputs;
        for &h in hidden {
            trunk.push(Dense::init(width, h, rng));
            width = h;
        }
        DuelingNet {
            trunk,
            value: Dense::init(width, 1, rng),
            advantage: Dense::init(width, actions, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        DuelingNet {
            trunk: self.trunk.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
            value: Dense::zeros(self.value.inputs, 1),
            advantage: Dense::zeros(self.advantage.inputs, self.advantage.outputs),
        }
    }

    pub fn input_len(&self) -> usize {
        self.trunk.first().map_or(self.value.inputs, |l| l.inputs)
    }

    pub fn actions(&self) -> usize {
        self.advantage.outputs
    }

    /// `(inputs, outputs)` of every layer: trunk, then value, then advantage.
    pub fn shapes(&self) -> Vec<[usize; 2]> {
        self.layers().map(|l| [l.inputs, l.outputs]).collect()
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.trunk.iter().chain([&self.value, &self.advantage])
    }

    /// Parameter slices in a fixed order (weights then bias per layer).
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.trunk
            .iter_mut()
            .chain([&mut self.value, &mut self.advantage])
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, obs: &[f64], batch: usize) -> Result<()> {
        let expected = batch * self.input_len();
        if obs.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: obs.len() });
        }
        Ok(())
    }

    fn activations(&self, obs: &[f64], batch: usize) -> Activations {
        let mut layers = Vec::with_capacity(self.trunk.len() + 1);
        layers.push(obs.to_vec());
        for l in &self.trunk {
            let mut h = l.forward(layers.last().unwrap(), batch);
            for x in &mut h {
                *x = x.max(0.0);
            }
            layers.push(h);
        }
        let h = layers.last().unwrap();
        let v = self.value.forward(h, batch);
        let a = self.advantage.forward(h, batch);
        let n = self.actions();
        let mut q = vec![0.0; batch * n];
        for i in 0..batch {
            let row = &a[i * n..(i + 1) * n];
            // Offsets from the first entry: equal advantages give exactly V.
            let mean = row[0] + row.iter().map(|x| x - row[0]).sum::<f64>() / n as f64;
            for j in 0..n {
                q[i * n + j] = v[i] + (row[j] - mean);
            }
        }
        Activations { layers, out: QOutput { batch, actions: n, q, v, a } }
    }

    /// Batched forward pass; `obs` is `(batch, input_len)`.
    pub fn forward_batch(&self, obs: &[f64], batch: usize) -> Result<QOutput> {
        self.check_input(obs, batch)?;
        Ok(self.activations(obs, batch).out)
    }

    /// Single-observation forward pass.
    pub fn forward(&self, obs: &[f64]) -> Result<QOutput> {
        self.forward_batch(obs, 1)
    }

    /// Importance-weighted mean squared TD error of the taken actions, its
    /// exact gradient, and the TD errors.
    pub fn loss_and_gradients(
        &self,
        obs: &[f64],
        actions: &[usize],
        targets: &[f64],
        weights: &[f64],
    ) -> Result<LossOutput> {
        let batch = actions.len();
        if batch == 0 {
            return Err(Error::ShapeMismatch { expected: 1, got: 0 });
        }
        if targets.len() != batch {
            return Err(Error::ShapeMismatch { expected: batch, got: targets.len() });
        }
        if weights.len() != batch {
            return Err(Error::ShapeMismatch { expected: batch, got: weights.len() });
        }
        self.check_input(obs, batch)?;
        let n = self.actions();
        if let Some(&bad) = actions.iter().find(|&&a| a >= n) {
            return Err(Error::ShapeMismatch { expected: n, got: bad });
        }
        let acts = self.activations(obs, batch);

        let mut loss = 0.0;
        let mut td = Vec::with_capacity(batch);
        let mut dq = vec![0.0; batch * n];
        for i in 0..batch {
            let d = targets[i] - acts.out.q[i * n + actions[i]];
            td.push(d);
            loss += weights[i] * d * d;
            dq[i * n + actions[i]] = -2.0 * weights[i] * d / batch as f64;
        }
        loss /= batch as f64;

        // Through the aggregation: dV = sum_j dQ_j, dA_j = dQ_j - mean(dQ).
        let mut dv = vec![0.0; batch];
        let mut da = vec![0.0; batch * n];
        for i in 0..batch {
            let row = &dq[i * n..(i + 1) * n];
            let s: f64 = row.iter().sum();
            dv[i] = s;
            for j in 0..n {
                da[i * n + j] = row[j] - s / n as f64;
            }
        }

        let mut grads = self.zeros_like();
        let h = acts.layers.last().unwrap();
        let has_trunk = !self.trunk.is_empty();
        let dh_v = self.value.backward(h, &dv, batch, &mut grads.value, has_trunk);
        let dh_a = self.advantage.backward(h, &da, batch, &mut grads.advantage, has_trunk);
        if let (Some(mut dh), Some(dh_a)) = (dh_v, dh_a) {
            for (x, y) in dh.iter_mut().zip(&dh_a) {
                *x += y;
            }
            for k in (0..self.trunk.len()).rev() {
                let out = &acts.layers[k + 1];
                for (g, o) in dh.iter_mut().zip(out) {
                    if *o <= 0.0 {
                        *g = 0.0;
                    }
                }
                let x = &acts.layers[k];
                match self.trunk[k].backward(x, &dh, batch, &mut grads.trunk[k], k > 0) {
                    Some(next) => dh = next,
                    None => break,
                }
            }
        }
        Ok(LossOutput { loss, grads, td_errors: td })
    }

    /// Overwrites `self` with `other`'s parameters (shapes must agree).
    pub fn copy_from(&mut self, other: &DuelingNet) {
        self.clone_from(other);
    }
}

/// Frozen copy of the online network, refreshed every `period` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNet {
    pub params: DuelingNet,
    pub period: u64,
}

impl TargetNet {
    pub fn new(online: &DuelingNet, period: u64) -> Self {
        assert!(period > 0, "target sync period must be positive");
        TargetNet { params: online.clone(), period }
    }

    /// Hard copy when `t` is a multiple of the period. Returns whether it synced.
    pub fn sync(&mut self, online: &DuelingNet, t: u64) -> bool {
        if t % self.period == 0 {
            self.params.copy_from(online);
            true
        } else {
            false
        }
    }
}
