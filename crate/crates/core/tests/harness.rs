use drivelab::harness::episode::success_flags;
use drivelab::harness::{
    aggregate, emit_report, evaluate_scenario, freeze_state, pct_change, report_rows, trial_seeds, train_baseline,
    train_coupled, AdversaryPolicy, AgentRole, EvalPolicy, EvaluationReport, ReportFormat, RunConfig, TerminalCause,
};
use drivelab::agent::EpsilonSchedule;
use drivelab::qnet::DuelingNet;
use drivelab::sim::NUM_ACTIONS;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quick_config() -> RunConfig {
    RunConfig::from_json_str(
        r#"{"seed": 5, "world": {"max_steps": 150}, "agent": {"hidden": [16], "warmup": 32, "target_period": 64},
            "per": {"capacity": 2000}, "training": {"baseline_episodes": 3, "checkpoint_every": 2, "eval_trials": 4}}"#,
    )
    .unwrap()
}

fn random_net(cfg: &RunConfig, seed: u64) -> DuelingNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DuelingNet::new(cfg.world.sensor.layout().len(), &cfg.agent.hidden, NUM_ACTIONS, &mut rng)
}

#[test]
fn freeze_windows_alternate_starting_with_the_adversary() {
    // (protagonist frozen, adversary frozen) over four episodes, window 2.
    let got: Vec<_> = (0..4).map(|e| freeze_state(e, 2, false)).collect();
    assert_eq!(got, [(false, true), (false, true), (true, false), (true, false)]);
    assert!((0..10).all(|e| freeze_state(e, 3, true) == (false, false)));
}

#[test]
fn coupled_protagonist_schedule_falls_back_to_the_baseline_one() {
    let mut cfg = RunConfig::default();
    assert_eq!(cfg.epsilon_schedule(AgentRole::Protagonist, true), cfg.schedules.epsilon);
    let restart = EpsilonSchedule { eps_min: 0.01, eps_max: 0.5, decay: 1e-5 };
    cfg.schedules.coupled_epsilon = Some(restart);
    assert_eq!(cfg.epsilon_schedule(AgentRole::Protagonist, true), restart);
    assert_eq!(cfg.epsilon_schedule(AgentRole::Protagonist, false), cfg.schedules.epsilon);
    assert_eq!(cfg.epsilon_schedule(AgentRole::Adversary, true), cfg.schedules.adversary_epsilon);
}

#[test]
fn unset_optional_training_keys_leave_the_hash_alone() {
    let json = RunConfig::default().to_json_pretty();
    assert!(!json.contains("coupled_epsilon") && !json.contains("rehearsal_every"));
}

#[test]
fn rehearsal_episodes_use_the_empty_road_in_protagonist_windows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json_str(
        r#"{"seed": 5, "world": {"max_steps": 60}, "agent": {"hidden": [16], "warmup": 32, "target_period": 64},
            "per": {"capacity": 2000},
            "training": {"baseline_episodes": 1, "coupled_episodes": 6, "freeze_window": 2, "rehearsal_every": 2,
                         "checkpoint_every": 0, "step_log": false}}"#,
    )
    .unwrap();
    let base = train_baseline(&cfg, dir.path(), false).unwrap();
    let run = train_coupled(&cfg, dir.path(), &base.protagonist, false).unwrap();
    let kinds: Vec<_> = run.metrics.iter().map(|m| m.scenario.as_str()).collect();
    // Protagonist learns in episodes 0-1 and 4-5; the even ones rehearse.
    assert_eq!(kinds, ["none", "adversary", "adversary", "adversary", "none", "adversary"]);
    assert!(run.metrics[0].adversary_return.is_none());
    assert!(run.metrics[1].adversary_return.is_some());
}

#[test]
fn default_config_is_valid_and_hash_is_stable() {
    let cfg = RunConfig::default();
    cfg.validate().unwrap();
    let back = RunConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    let other = RunConfig { seed: 1, ..cfg.clone() };
    assert_ne!(other.hash(), cfg.hash());
}

#[test]
fn bad_configs_are_rejected() {
    for text in [
        r#"{"sede": 1}"#,
        r#"{"agent": {"gamma": 1.5}}"#,
        r#"{"agent": {"learn_every": 4, "target_period": 10}}"#,
        r#"{"world": {"max_steps": 0}}"#,
        r#"{"training": {"freeze_window": 0}}"#,
    ] {
        assert!(RunConfig::from_json_str(text).is_err(), "{text} accepted");
    }
}

#[test]
fn trial_seeds_are_paired_and_distinct_per_scenario() {
    let cfg = RunConfig::default();
    let kinds = cfg.scenario.all();
    let seeds: Vec<Vec<u64>> = kinds.iter().map(|k| trial_seeds(3, k, 20)).collect();
    for (i, s) in seeds.iter().enumerate() {
        assert_eq!(s, &trial_seeds(3, &kinds[i], 20));
        for t in &seeds[i + 1..] {
            assert!(s.iter().all(|x| !t.contains(x)));
        }
    }
}

#[test]
fn evaluation_is_deterministic_and_aggregates_consistently() {
    let cfg = quick_config();
    let track = cfg.track().unwrap();
    let p = random_net(&cfg, 1);
    let a = random_net(&cfg, 2);
    for kind in cfg.scenario.all() {
        let policy = EvalPolicy {
            protagonist: &p,
            frame_skip: 3,
            adversary: AdversaryPolicy::Greedy { net: &a, frame_skip: 3 },
        };
        let seeds = trial_seeds(cfg.seed, &kind, 4);
        let rows = evaluate_scenario(&cfg, &track, &policy, &kind, &seeds).unwrap();
        assert_eq!(rows, evaluate_scenario(&cfg, &track, &policy, &kind, &seeds).unwrap());
        for m in &rows {
            assert_eq!(m.success(), success_flags(m.distance));
            assert!((0.0..=1.0).contains(&m.distance));
            assert!(m.steps <= cfg.world.max_steps);
            assert!((m.duration - m.steps as f64 * cfg.world.dt).abs() < 1e-9);
            assert_eq!(m.reached_goal, m.cause == TerminalCause::Goal);
            assert_eq!(m.collision_intensity.is_some(), m.cause == TerminalCause::Collision);
            assert_eq!(m.adversary_return.is_some(), kind.name() == "adversary");
        }
        let r = aggregate("m", kind.name(), &rows);
        let n = rows.len() as f64;
        assert_eq!(r.trials, rows.len());
        assert!((r.mean_distance - rows.iter().map(|m| m.distance).sum::<f64>() / n).abs() < 1e-12);
        assert!((r.success_95 - rows.iter().filter(|m| m.success_95).count() as f64 / n).abs() < 1e-12);
        assert_eq!(r.hit_rate.is_some(), kind.name() == "adversary");
        assert_eq!(r.seeds, seeds);
    }
}

fn report(model: &str, scenario: &str, mttf: f64) -> EvaluationReport {
    EvaluationReport {
        model: model.into(),
        scenario: scenario.into(),
        trials: 10,
        success_25: 1.0,
        success_50: 0.9,
        success_75: 0.8,
        success_95: 0.7,
        mttf,
        mean_distance: 0.5,
        mean_ci: 2.0,
        collision_rate: 0.3,
        mean_return: -4.0,
        hit_rate: None,
        seeds: vec![1, 2],
    }
}

#[test]
fn report_rows_compare_against_the_baseline_model() {
    let reports = [report("baseline", "static", 38.0), report("coupled", "static", 52.4), report("coupled", "none", 10.0)];
    let rows = report_rows(&reports, "baseline");
    assert_eq!(rows[0].mttf_change_pct, Some(0.0));
    assert!((rows[1].mttf_change_pct.unwrap() - 37.894_736_842).abs() < 1e-6);
    assert_eq!(rows[2].mttf_change_pct, None);

    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    emit_report(&reports, "baseline", ReportFormat::Json, &json).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 3);
    let csv = dir.path().join("r.csv");
    emit_report(&reports, "baseline", ReportFormat::Csv, &csv).unwrap();
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);
}

#[test]
fn baseline_training_writes_logs_and_checkpoints() {
    let cfg = quick_config();
    let dir = tempfile::tempdir().unwrap();
    let s = train_baseline(&cfg, dir.path(), false).unwrap();
    assert_eq!(s.metrics.len(), 3);
    assert_eq!(s.seeds.len(), 3);
    for f in ["episodes.csv", "steps.csv", "protagonist_ep2.ckpt", "protagonist_latest.ckpt", "protagonist.ckpt"] {
        assert!(s.dir.join(f).exists(), "missing {f}");
    }
    let rows = std::fs::read_to_string(s.dir.join("episodes.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);

    // Resuming a finished run adds nothing; a longer budget continues from
    // the latest checkpoint.
    let again = train_baseline(&cfg, dir.path(), true).unwrap();
    assert!(again.metrics.is_empty());
    let more = RunConfig { training: drivelab::harness::config::TrainingConfig { baseline_episodes: 5, ..cfg.training.clone() }, ..cfg };
    let cont = train_baseline(&more, dir.path(), true).unwrap();
    assert_eq!(cont.metrics.first().map(|m| m.episode), Some(3));
    assert_eq!(std::fs::read_to_string(s.dir.join("episodes.csv")).unwrap().lines().count(), 6);
}

proptest! {
    #[test]
    fn success_flags_are_monotone(d1 in 0.0f64..=1.0, d2 in 0.0f64..=1.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (a, b) = (success_flags(lo), success_flags(hi));
        for i in 0..4 {
            prop_assert!(!a[i] || b[i]);
            if i > 0 {
                prop_assert!(!a[i] || a[i - 1]);
            }
        }
    }

    #[test]
    fn pct_change_inverts(base in -100.0f64..100.0, value in -100.0f64..100.0) {
        prop_assume!(base.abs() > 1e-3);
        let c = pct_change(base, value).unwrap();
        prop_assert!((base + c / 100.0 * base.abs() - value).abs() < 1e-9);
    }
}
