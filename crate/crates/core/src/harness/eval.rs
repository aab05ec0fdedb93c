//! Greedy, seeded evaluation of a protagonist on the four scenarios.

use serde::{Deserialize, Serialize};

use super::config::{derive_seed, RunConfig};
use super::episode::{run_episode, Driver, EpisodeContext, EpisodeMetrics};
use super::train::STREAM_EVAL;
use crate::error::Result;
use crate::qnet::DuelingNet;
use crate::sim::{spawn_scenario, ScenarioKind, ScenarioSpec, TrackSpec};

/// Who drives the adversary vehicle in the adversary scenario.
#[derive(Debug, Clone, Copy)]
pub enum AdversaryPolicy<'a> {
    Greedy { net: &'a DuelingNet, frame_skip: usize },
    Random { frame_skip: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct EvalPolicy<'a> {
    pub protagonist: &'a DuelingNet,
    pub frame_skip: usize,
    pub adversary: AdversaryPolicy<'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub scenario: String,
    pub trials: usize,
    pub success_25: f64,
    pub success_50: f64,
    pub success_75: f64,
    pub success_95: f64,
    /// Mean episode duration over all trials, s.
    pub mttf: f64,
    pub mean_distance: f64,
    /// Mean intensity over the trials that ended in a collision; 0 if none did.
    pub mean_ci: f64,
    pub collision_rate: f64,
    pub mean_return: f64,
    /// Fraction of trials with an adversary-protagonist contact (adversary
    /// scenario only).
    pub hit_rate: Option<f64>,
    pub seeds: Vec<u64>,
}

/// Trial seeds shared by every model evaluated on `kind`, so comparisons
/// are paired.
pub fn trial_seeds(base: u64, kind: &ScenarioKind, n: usize) -> Vec<u64> {
    let stream = STREAM_EVAL
        + match kind {
            ScenarioKind::NoTraffic => 0,
            ScenarioKind::AutopilotTraffic { .. } => 1,
            ScenarioKind::StaticObstacles { .. } => 2,
            ScenarioKind::VersusAdversary => 3,
        };
    (0..n as u64).map(|i| derive_seed(base, stream, i)).collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Aggregates per-trial rows. Recomputing from persisted rows gives the
/// same report.
pub fn aggregate(model: &str, scenario: &str, rows: &[EpisodeMetrics]) -> EvaluationReport {
    let rate = |f: &dyn Fn(&EpisodeMetrics) -> bool| mean(rows.iter().map(|m| if f(m) { 1.0 } else { 0.0 }));
    let has_adversary = rows.iter().any(|m| m.adversary_return.is_some());
    EvaluationReport {
        model: model.into(),
        scenario: scenario.into(),
        trials: rows.len(),
        success_25: rate(&|m| m.success_25),
        success_50: rate(&|m| m.success_50),
        success_75: rate(&|m| m.success_75),
        success_95: rate(&|m| m.success_95),
        mttf: mean(rows.iter().map(|m| m.duration)),
        mean_distance: mean(rows.iter().map(|m| m.distance)),
        mean_ci: mean(rows.iter().filter_map(|m| m.collision_intensity)),
        collision_rate: rate(&|m| m.collision_intensity.is_some()),
        mean_return: mean(rows.iter().map(|m| m.episode_return)),
        hit_rate: has_adversary.then(|| rate(&|m| m.adversary_hit)),
        seeds: rows.iter().map(|m| m.seed).collect(),
    }
}

/// Runs one greedy trial per seed. Networks are only read.
pub fn evaluate_scenario(
    cfg: &RunConfig,
    track: &TrackSpec,
    policy: &EvalPolicy,
    kind: &ScenarioKind,
    seeds: &[u64],
) -> Result<Vec<EpisodeMetrics>> {
    let p_rewards = cfg.protagonist_rewards(track);
    let a_rewards = cfg.adversary_rewards(track);
    let mut rows = Vec::with_capacity(seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let spec = ScenarioSpec { kind: kind.clone(), seed, spawn: cfg.world.spawn.clone() };
        let mut world = spawn_scenario(&spec, track, &cfg.world.vehicle, cfg.world.dt)?;
        let ctx = EpisodeContext {
            sensor: &cfg.world.sensor,
            protagonist_rewards: &p_rewards,
            adversary_rewards: &a_rewards,
            max_steps: cfg.world.max_steps,
            seed,
            episode: i as u64,
        };
        let protagonist = Driver::Greedy { net: policy.protagonist, frame_skip: policy.frame_skip };
        let adversary = match (kind, policy.adversary) {
            (ScenarioKind::VersusAdversary, AdversaryPolicy::Greedy { net, frame_skip }) => {
                Some(Driver::Greedy { net, frame_skip })
            }
            (ScenarioKind::VersusAdversary, AdversaryPolicy::Random { frame_skip }) => Some(Driver::Random { frame_skip }),
            _ => None,
        };
        let mut m = run_episode(&mut world, protagonist, adversary, &ctx, None)?;
        m.scenario = kind.name().into();
        rows.push(m);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::episode::TerminalCause;

    fn row(duration: f64, distance: f64, ci: Option<f64>) -> EpisodeMetrics {
        let flags = crate::harness::episode::success_flags(distance);
        EpisodeMetrics {
            episode: 0,
            seed: 1,
            scenario: "static".into(),
            success_25: flags[0],
            success_50: flags[1],
            success_75: flags[2],
            success_95: flags[3],
            reached_goal: distance >= 1.0,
            duration,
            distance,
            cause: if ci.is_some() { TerminalCause::Collision } else { TerminalCause::Goal },
            collision_intensity: ci,
            episode_return: 1.0,
            adversary_return: None,
            adversary_hit: false,
            steps: 10,
        }
    }

    #[test]
    fn mttf_is_mean_duration() {
        let r = aggregate("m", "static", &[row(10.0, 1.0, None), row(20.0, 1.0, None)]);
        assert_eq!(r.mttf, 15.0);
        assert_eq!(r.success_95, 1.0);
        assert_eq!(r.mean_ci, 0.0);
        assert_eq!(r.hit_rate, None);
    }

    #[test]
    fn ci_over_collisions_only() {
        let r = aggregate("m", "static", &[row(10.0, 0.6, Some(4.0)), row(20.0, 1.0, None)]);
        assert_eq!(r.mean_ci, 4.0);
        assert_eq!(r.collision_rate, 0.5);
        assert_eq!(r.success_50, 1.0);
        assert_eq!(r.success_75, 0.5);
    }

    #[test]
    fn seeds_are_paired_and_distinct() {
        let a = trial_seeds(7, &ScenarioKind::StaticObstacles { n: 5 }, 100);
        assert_eq!(a, trial_seeds(7, &ScenarioKind::StaticObstacles { n: 3 }, 100));
        let mut u = a.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 100);
    }
}
