use serde::{Deserialize, Serialize};

use super::DuelingNet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Heavy-ball gradient descent: `v = mu v + g; w -= lr v`.
    Momentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Global L2 norm bound applied to the gradient before the update.
    #[serde(default)]
    pub grad_clip: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Momentum { momentum: 0.9 },
            learning_rate: 1e-4,
            grad_clip: Some(10.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    first: DuelingNet,
    second: Option<DuelingNet>,
    pub steps: u64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, net: &DuelingNet) -> Self {
        assert!(config.learning_rate > 0.0, "learning rate must be positive");
        let second = matches!(config.kind, OptimizerKind::Adam { .. }).then(|| net.zeros_like());
        OptimizerState { config, first: net.zeros_like(), second, steps: 0 }
    }

    /// Applies one descent step to `params` using `grads`.
    pub fn step(&mut self, params: &mut DuelingNet, grads: &DuelingNet) {
        self.steps += 1;
        let lr = self.config.learning_rate;
        let scale = match self.config.grad_clip {
            Some(max) => {
                let norm = grads.slices().iter().flat_map(|s| s.iter()).map(|g| g * g).sum::<f64>().sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let g_all = grads.slices();
        let p_all = params.slices_mut();
        let m_all = self.first.slices_mut();
        match self.config.kind {
            OptimizerKind::Momentum { momentum } => {
                for ((p, g), m) in p_all.into_iter().zip(g_all).zip(m_all) {
                    for ((w, g), v) in p.iter_mut().zip(g).zip(m.iter_mut()) {
                        *v = momentum * *v + scale * g;
                        *w -= lr * *v;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let s_all = self.second.as_mut().expect("adam second moments").slices_mut();
                for (((p, g), m), s) in p_all.into_iter().zip(g_all).zip(m_all).zip(s_all) {
                    for (((w, g), m), s) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(s.iter_mut()) {
                        let g = scale * g;
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *s = beta2 * *s + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*s / c2).sqrt() + epsilon);
                    }
                }
            }
        }
    }
}
