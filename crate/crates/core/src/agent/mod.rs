//! Dueling double DQN agent: exploration schedule with PID-assisted
//! exploration, frame-skip schedule, double-Q targets and the learning step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qnet::{argmax, DuelingNet, OptimizerConfig, OptimizerState, TargetNet};
use crate::replay::{anneal_mu, Batch, PerConfig, PrioritizedReplay, Transition};
use crate::sim::{apply_action, Action, ControlCommand, PidConfig, PidController, VehicleParams, VehicleState, NUM_ACTIONS};

/// `eps(t) = eps_min + (eps_max - eps_min) * exp(-decay * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub eps_min: f64,
    pub eps_max: f64,
    pub decay: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { eps_min: 0.01, eps_max: 1.0, decay: 1e-6 }
    }
}

pub fn epsilon_at(s: &EpsilonSchedule, t: u64) -> f64 {
    s.eps_min + (s.eps_max - s.eps_min) * (-s.decay * t as f64).exp()
}

/// Action repeat: `k = short` while exploration is high, `long` once epsilon
/// falls below `switch_epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSkipSchedule {
    pub short: usize,
    pub long: usize,
    pub switch_epsilon: f64,
}

impl Default for FrameSkipSchedule {
    fn default() -> Self {
        FrameSkipSchedule { short: 1, long: 3, switch_epsilon: 0.3 }
    }
}

pub fn frame_skip_k(s: &FrameSkipSchedule, eps: f64) -> usize {
    if eps >= s.switch_epsilon {
        s.short
    } else {
        s.long
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub batch_size: usize,
    /// Learn once per this many recorded transitions.
    pub learn_every: u64,
    /// Transitions required in replay before learning starts.
    pub warmup: usize,
    /// Target network refresh period, in recorded transitions.
    pub target_period: u64,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerConfig,
    pub pid: PidConfig,
    // The three schedule fields live in the run config's `schedules` section.
    #[serde(skip)]
    pub epsilon: EpsilonSchedule,
    #[serde(skip)]
    pub frame_skip: FrameSkipSchedule,
    /// Fraction of exploring draws handed to the PID controller, times epsilon.
    #[serde(skip, default = "default_pid_share")]
    pub pid_share: f64,
}

fn default_pid_share() -> f64 {
    0.75
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            batch_size: 32,
            learn_every: 4,
            warmup: 1000,
            target_period: 1000,
            hidden: vec![512, 512],
            optimizer: OptimizerConfig::default(),
            pid: PidConfig::default(),
            epsilon: EpsilonSchedule::default(),
            frame_skip: FrameSkipSchedule::default(),
            pid_share: default_pid_share(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.batch_size == 0 || self.learn_every == 0 || self.target_period == 0 {
            return Err(Error::Config("batch_size, learn_every and target_period must be positive".into()));
        }
        if self.target_period % self.learn_every != 0 {
            return Err(Error::Config("target_period must be a multiple of learn_every".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        let e = &self.epsilon;
        if !(0.0 <= e.eps_min && e.eps_min <= e.eps_max && e.eps_max <= 1.0 && e.decay > 0.0) {
            return Err(Error::Config("epsilon schedule must satisfy 0 <= min <= max <= 1, decay > 0".into()));
        }
        if self.frame_skip.short == 0 || self.frame_skip.long < self.frame_skip.short {
            return Err(Error::Config("frame skip must satisfy 1 <= short <= long".into()));
        }
        Ok(())
    }
}

/// Which branch of the exploration rule produced an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Greedy,
    Pid,
    Random,
}

/// The uniform draws consumed by one action selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationDraws {
    pub alpha: f64,
    pub alpha_pid: f64,
    pub random_action: usize,
}

impl ExplorationDraws {
    pub fn sample(rng: &mut impl Rng) -> Self {
        ExplorationDraws {
            alpha: rng.gen(),
            alpha_pid: rng.gen(),
            random_action: rng.gen_range(0..NUM_ACTIONS),
        }
    }
}

/// Explore when `alpha < eps`; an exploring draw goes to the PID controller
/// when `alpha_pid < pid_share * eps`, otherwise to a uniform random action.
pub fn exploration_branch(eps: f64, pid_share: f64, draws: &ExplorationDraws) -> Branch {
    if draws.alpha < eps {
        if draws.alpha_pid < pid_share * eps {
            Branch::Pid
        } else {
            Branch::Random
        }
    } else {
        Branch::Greedy
    }
}

/// Greedy action of `net` at `obs`.
pub fn greedy_action(net: &DuelingNet, obs: &[f64]) -> Result<usize> {
    Ok(argmax(&net.forward(obs)?.q))
}

/// Assisted-exploration action choice followed by the incremental control
/// update from `prev`.
#[allow(clippy::too_many_arguments)]
pub fn select_action(
    net: &DuelingNet,
    obs: &[f64],
    eps: f64,
    pid_share: f64,
    draws: &ExplorationDraws,
    pid: &mut PidController,
    vehicle: &VehicleState,
    params: &VehicleParams,
    dt: f64,
) -> Result<(Action, ControlCommand, Branch)> {
    let branch = exploration_branch(eps, pid_share, draws);
    let action = match branch {
        Branch::Greedy => Action::from_index(greedy_action(net, obs)?).unwrap(),
        Branch::Pid => pid.suggest(vehicle, params, dt)?,
        Branch::Random => Action::from_index(draws.random_action).unwrap(),
    };
    Ok((action, apply_action(vehicle.command, action), branch))
}

/// Double-Q targets: the online net picks the next action, the target net
/// scores it. Terminal transitions do not bootstrap.
pub fn ddqn_target(online: &DuelingNet, target: &DuelingNet, batch: &Batch, gamma: f64) -> Result<Vec<f64>> {
    let n = batch.len();
    let q_online = online.forward_batch(&batch.next_obs, n)?;
    let q_target = target.forward_batch(&batch.next_obs, n)?;
    Ok((0..n)
        .map(|i| {
            if batch.terminals[i] {
                batch.rewards[i]
            } else {
                let a = q_online.greedy(i);
                batch.rewards[i] + gamma * q_target.q_row(i)[a]
            }
        })
        .collect())
}

/// One gradient update on a given batch; returns the loss and TD errors.
pub fn train_on_batch(
    online: &mut DuelingNet,
    target: &DuelingNet,
    opt: &mut OptimizerState,
    batch: &Batch,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    let y = ddqn_target(online, target, batch, gamma)?;
    let out = online.loss_and_gradients(&batch.obs, &batch.actions, &y, &batch.weights)?;
    opt.step(online, &out.grads);
    Ok((out.loss, out.td_errors))
}

/// Learner state for one vehicle.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub cfg: AgentConfig,
    pub online: DuelingNet,
    pub target: TargetNet,
    pub opt: OptimizerState,
    pub buffer: PrioritizedReplay,
    /// Recorded transitions (decision steps); drives epsilon.
    pub steps: u64,
    pub learn_steps: u64,
    /// A frozen agent still acts but neither records nor learns.
    pub frozen: bool,
    pub last_loss: Option<f64>,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
}

impl DqnAgent {
    pub fn new(cfg: AgentConfig, per: PerConfig, input_len: usize, seed: u64) -> Self {
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let online = DuelingNet::new(input_len, &cfg.hidden, NUM_ACTIONS, &mut init_rng);
        DqnAgent::from_params(cfg, per, online, seed)
    }

    pub fn from_params(cfg: AgentConfig, per: PerConfig, online: DuelingNet, seed: u64) -> Self {
        let target = TargetNet::new(&online, cfg.target_period);
        let opt = OptimizerState::new(cfg.optimizer.clone(), &online);
        DqnAgent {
            target,
            opt,
            buffer: PrioritizedReplay::new(per),
            steps: 0,
            learn_steps: 0,
            frozen: false,
            last_loss: None,
            explore_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
            replay_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x2545_f491_4f6c_dd1d),
            online,
            cfg,
        }
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(&self.cfg.epsilon, self.steps)
    }

    pub fn frame_skip(&self) -> usize {
        frame_skip_k(&self.cfg.frame_skip, self.epsilon())
    }

    pub fn mu(&self) -> f64 {
        anneal_mu(self.buffer.config(), self.steps)
    }

    pub fn draws(&mut self) -> ExplorationDraws {
        ExplorationDraws::sample(&mut self.explore_rng)
    }

    /// Records a transition and learns on schedule. Returns the loss when a
    /// learning step ran.
    pub fn observe(&mut self, t: Transition) -> Result<Option<f64>> {
        if self.frozen {
            return Ok(None);
        }
        self.buffer.push(t);
        self.steps += 1;
        if self.steps % self.cfg.learn_every == 0 {
            return self.learn_step();
        }
        Ok(None)
    }

    /// Sample, build double-Q targets, take one optimizer step, refresh
    /// priorities and sync the target network on its period. A no-op
    /// returning `None` until the warmup amount of data is stored.
    pub fn learn_step(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.warmup.max(self.cfg.batch_size) {
            return Ok(None);
        }
        let batch = self.buffer.sample_batch(self.cfg.batch_size, self.mu(), &mut self.replay_rng)?;
        let (loss, td) = train_on_batch(&mut self.online, &self.target.params, &mut self.opt, &batch, self.cfg.gamma)?;
        self.buffer.update_priorities(&batch.indices, &td)?;
        self.learn_steps += 1;
        self.target.sync(&self.online, self.steps);
        self.last_loss = Some(loss);
        Ok(Some(loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_endpoints() {
        let s = EpsilonSchedule::default();
        assert_eq!(epsilon_at(&s, 0), 1.0);
        assert!((epsilon_at(&s, u64::MAX) - 0.01).abs() < 1e-15);
        assert!((epsilon_at(&s, 1_000_000) - 0.374_201).abs() < 1e-5);
    }

    #[test]
    fn frame_skip_switch() {
        let s = FrameSkipSchedule::default();
        assert_eq!(frame_skip_k(&s, 1.0), 1);
        assert_eq!(frame_skip_k(&s, 0.05), 3);
    }

    #[test]
    fn branch_rules() {
        let d = |alpha, alpha_pid| ExplorationDraws { alpha, alpha_pid, random_action: 4 };
        assert_eq!(exploration_branch(0.0, 0.75, &d(0.0, 0.0)), Branch::Greedy);
        assert_eq!(exploration_branch(1.0, 0.75, &d(0.5, 0.5)), Branch::Pid);
        assert_eq!(exploration_branch(1.0, 0.75, &d(0.5, 0.9)), Branch::Random);
        // conditional PID share scales with epsilon itself
        assert_eq!(exploration_branch(0.5, 0.75, &d(0.1, 0.4)), Branch::Random);
    }

    #[test]
    fn config_validation() {
        assert!(AgentConfig::default().validate().is_ok());
        assert!(AgentConfig { gamma: 1.5, ..AgentConfig::default() }.validate().is_err());
    }
}
