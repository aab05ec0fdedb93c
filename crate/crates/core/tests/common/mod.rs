//! Independent oracles and the acceptance checks built on them.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use drivelab::agent::{ddqn_target, epsilon_at, exploration_branch, Branch, EpsilonSchedule, ExplorationDraws};
use drivelab::qnet::{Dense, DuelingNet};
use drivelab::replay::{Batch, PerConfig, PrioritizedReplay, SumTree, Transition};
use drivelab::rewards::{
    adversary_reward, protagonist_reward, AdversaryRewardConfig, CollisionKind, ProtagonistRewardConfig, StepOutcome,
};
use drivelab::sim::{apply_action, Action, ControlCommand};

pub struct Outcome {
    pub ok: bool,
    pub detail: String,
}

impl Outcome {
    fn new(ok: bool, detail: String) -> Self {
        Outcome { ok, detail }
    }
}

/// Runs a check, prints its verdict line and returns whether it passed.
pub fn report(n: usize, name: &str, budget_s: f64, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let secs = t.elapsed().as_secs_f64();
    let ok = o.ok && secs <= budget_s;
    println!(
        "criterion {n:>2} {:<4} {name}: {} ({secs:.1} s, budget {budget_s} s)",
        if ok { "PASS" } else { "FAIL" },
        o.detail
    );
    ok
}

// ---------------------------------------------------------------- control

/// Action index to (throttle delta, steer delta) in units of 0.2, written
/// from the operation table rather than the enum.
pub fn control_oracle(prev: ControlCommand, index: usize) -> ControlCommand {
    let clamp = |x: f64, lo: f64, hi: f64| x.clamp(lo, hi);
    let steer_delta = [0.0, -0.2, 0.2][index % 3];
    let steer = clamp(prev.steer + steer_delta, -1.0, 1.0);
    match index / 3 {
        0 => ControlCommand { steer, throttle: prev.throttle, brake: prev.brake },
        1 => ControlCommand { steer, throttle: clamp(prev.throttle + 0.2, 0.0, 1.0), brake: 0.0 },
        _ => ControlCommand { steer, throttle: clamp(prev.throttle - 0.2, 0.0, 1.0), brake: clamp(prev.brake + 0.2, 0.0, 1.0) },
    }
}

/// Twenty commands on or next to the corners of the admissible box.
pub fn boundary_commands() -> Vec<ControlCommand> {
    let c = ControlCommand::new;
    vec![
        c(-1.0, 0.0, 0.0),
        c(1.0, 0.0, 0.0),
        c(-1.0, 1.0, 0.0),
        c(1.0, 1.0, 1.0),
        c(0.0, 0.0, 1.0),
        c(0.0, 1.0, 1.0),
        c(-0.9, 0.1, 0.9),
        c(0.9, 0.9, 0.1),
        c(-0.8, 0.2, 0.8),
        c(0.8, 0.8, 0.2),
        c(0.0, 0.0, 0.0),
        c(-0.1, 0.05, 0.95),
        c(0.1, 0.95, 0.05),
        c(-1.0, 0.0, 1.0),
        c(1.0, 1.0, 0.0),
        c(0.5, 0.5, 0.5),
        c(-0.95, 0.85, 0.15),
        c(0.95, 0.15, 0.85),
        c(-0.2, 0.4, 0.6),
        c(0.2, 0.6, 0.4),
    ]
}

/// Hand-computed rows: (start, action index, expected).
pub fn control_table() -> Vec<(ControlCommand, usize, ControlCommand)> {
    let c = ControlCommand::new;
    vec![
        (c(1.0, 0.0, 0.0), 2, c(1.0, 0.0, 0.0)),
        (c(1.0, 0.0, 0.0), 1, c(0.8, 0.0, 0.0)),
        (c(-1.0, 1.0, 0.0), 4, c(-1.0, 1.0, 0.0)),
        (c(-1.0, 1.0, 0.0), 8, c(-0.8, 0.8, 0.2)),
        (c(0.0, 0.0, 1.0), 3, c(0.0, 0.2, 0.0)),
        (c(0.0, 0.0, 1.0), 6, c(0.0, 0.0, 1.0)),
        (c(-0.9, 0.1, 0.9), 7, c(-1.0, 0.0, 1.0)),
        (c(0.9, 0.9, 0.1), 5, c(1.0, 1.0, 0.0)),
        (c(0.5, 0.5, 0.5), 0, c(0.5, 0.5, 0.5)),
        (c(0.0, 0.0, 0.0), 6, c(0.0, 0.0, 0.2)),
    ]
}

fn near(a: ControlCommand, b: ControlCommand, tol: f64) -> bool {
    (a.steer - b.steer).abs() <= tol && (a.throttle - b.throttle).abs() <= tol && (a.brake - b.brake).abs() <= tol
}

pub fn random_command(rng: &mut impl Rng) -> ControlCommand {
    ControlCommand::new(rng.gen_range(-1.0..=1.0), rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0))
}

pub fn criterion_control() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut violations = 0usize;
    for _ in 0..100_000 {
        let mut cmd = random_command(&mut rng);
        for _ in 0..8 {
            let i = rng.gen_range(0..9);
            let next = apply_action(cmd, Action::from_index(i).unwrap());
            let invariant = next.is_valid()
                && next == control_oracle(cmd, i)
                && (i / 3 != 1 || next.brake == 0.0)
                && (i / 3 != 0 || (next.throttle == cmd.throttle && next.brake == cmd.brake))
                && (i % 3 != 0 || next.steer == cmd.steer);
            if !invariant {
                violations += 1;
            }
            cmd = next;
        }
    }
    let mut table_mismatch = 0usize;
    for start in boundary_commands() {
        for a in Action::all() {
            if apply_action(start, a) != control_oracle(start, a.index()) {
                table_mismatch += 1;
            }
        }
    }
    for (start, i, want) in control_table() {
        // Decimal literals vs. accumulated sums: equal up to one rounding.
        if !near(apply_action(start, Action::from_index(i).unwrap()), want, 1e-15) {
            table_mismatch += 1;
        }
    }
    Outcome::new(
        violations == 0 && table_mismatch == 0,
        format!("{violations} invariant violations over 1e5 sequences, {table_mismatch} table mismatches over 180+10 cases"),
    )
}

// ---------------------------------------------------------------- qnet

pub fn random_inputs(rng: &mut impl Rng, n: usize, len: usize) -> Vec<f64> {
    (0..n * len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn criterion_dueling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let net = DuelingNet::new(296, &[512, 512], 9, &mut rng);
    let n = 1000;
    let obs = random_inputs(&mut rng, n, 296);
    let out = net.forward_batch(&obs, n).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let row = out.q_row(i);
        let m = row.iter().map(|q| q - out.v[i]).sum::<f64>() / 9.0;
        worst = worst.max(m.abs());
    }
    // Equal advantages: zero advantage weights, one shared bias.
    let mut flat = net.clone();
    let mut equal_ok = true;
    for bias in [0.0, 0.3, -7.25, 1e3] {
        flat.advantage.weights.iter_mut().for_each(|w| *w = 0.0);
        flat.advantage.bias.iter_mut().for_each(|b| *b = bias);
        let o = flat.forward_batch(&obs[..50 * 296], 50).unwrap();
        for i in 0..50 {
            equal_ok &= o.q_row(i).iter().all(|&q| q == o.v[i]);
        }
    }
    Outcome::new(
        worst <= 1e-12 && equal_ok,
        format!("max |mean(Q - V)| = {worst:.2e} over 1e3 inputs, equal advantages give Q = V exactly: {equal_ok}"),
    )
}

/// Loss as a function of the parameters, for finite differences.
fn loss_of(net: &DuelingNet, obs: &[f64], actions: &[usize], targets: &[f64], weights: &[f64]) -> f64 {
    net.loss_and_gradients(obs, actions, targets, weights).unwrap().loss
}

/// Max relative error between analytic and central-difference gradients.
pub fn gradient_check(net: &DuelingNet, rng: &mut impl Rng, batch: usize) -> f64 {
    let obs = random_inputs(rng, batch, net.input_len());
    let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..net.actions())).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let weights: Vec<f64> = (0..batch).map(|_| rng.gen_range(0.1..1.0)).collect();
    let analytic = net.loss_and_gradients(&obs, &actions, &targets, &weights).unwrap().grads;
    let analytic: Vec<f64> = analytic.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let h = 1e-6;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let counts: Vec<usize> = net.slices().iter().map(|s| s.len()).collect();
    for (si, &len) in counts.iter().enumerate() {
        for j in 0..len {
            let orig = probe.slices()[si][j];
            probe.slices_mut()[si][j] = orig + h;
            let up = loss_of(&probe, &obs, &actions, &targets, &weights);
            probe.slices_mut()[si][j] = orig - h;
            let down = loss_of(&probe, &obs, &actions, &targets, &weights);
            probe.slices_mut()[si][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            k += 1;
        }
    }
    worst
}

pub fn small_net(rng: &mut impl Rng) -> DuelingNet {
    let inputs = rng.gen_range(2..7);
    let depth = rng.gen_range(0..3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(3..9)).collect();
    let actions = rng.gen_range(2..10);
    let mut net = DuelingNet::new(inputs, &hidden, actions, rng);
    // Non-zero biases so the check also covers them.
    for s in net.slices_mut() {
        for x in s.iter_mut() {
            if *x == 0.0 {
                *x = rng.gen_range(-0.1..0.1);
            }
        }
    }
    net
}

pub fn criterion_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let nets = 24;
    for _ in 0..nets {
        let net = small_net(&mut rng);
        worst = worst.max(gradient_check(&net, &mut rng, 5));
    }
    Outcome::new(worst < 1e-4, format!("max relative error {worst:.2e} over {nets} nets"))
}

// ---------------------------------------------------------------- replay

pub fn filled_buffer(priorities: &[f64], lambda: f64) -> PrioritizedReplay {
    let cfg = PerConfig { capacity: priorities.len(), lambda, priority_floor: 0.0, ..PerConfig::default() };
    let mut buf = PrioritizedReplay::new(cfg);
    for i in 0..priorities.len() {
        buf.push(Transition { obs: vec![i as f64], action: 0, reward: 0.0, next_obs: vec![0.0], terminal: false });
    }
    let idx: Vec<usize> = (0..priorities.len()).collect();
    buf.update_priorities(&idx, priorities).unwrap();
    buf
}

/// Empirical slot counts over `draws` single draws taken in stratified
/// batches of 32.
pub fn sample_counts(buf: &PrioritizedReplay, draws: usize, rng: &mut impl Rng) -> Vec<u64> {
    let mut counts = vec![0u64; buf.len()];
    let mut taken = 0;
    while taken < draws {
        for i in buf.sample_indices(32, rng).unwrap() {
            counts[i] += 1;
        }
        taken += 32;
    }
    counts
}

/// Pearson chi-square p-value of `counts` against probabilities `p`.
pub fn chi_square_p(counts: &[u64], p: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(p)
        .map(|(&c, &pi)| {
            let e = n as f64 * pi;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Linear-scan oracle for the sum tree: the first leaf whose cumulative
/// interval contains `mass`.
pub fn linear_query(masses: &[f64], mass: f64) -> usize {
    let mut acc = 0.0;
    for (i, m) in masses.iter().enumerate() {
        if mass < acc + m {
            return i;
        }
        acc += m;
    }
    unreachable!("mass beyond total")
}

pub fn sum_tree_ops(seed: u64, ops: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 1000;
    let mut tree = SumTree::new(cap);
    let mut masses = vec![0.0; cap];
    let mut mismatches = 0;
    for _ in 0..ops {
        if rng.gen_bool(0.5) || masses.iter().all(|&m| m == 0.0) {
            // Dyadic masses keep every partial sum exact.
            let i = rng.gen_range(0..cap);
            let m = rng.gen_range(0..1024) as f64 / 1024.0;
            tree.set(i, m).unwrap();
            masses[i] = m;
            if tree.total() != masses.iter().sum::<f64>() {
                mismatches += 1;
            }
        } else {
            let total: f64 = masses.iter().sum();
            let q = rng.gen_range(0..(total * 1024.0) as u64) as f64 / 1024.0;
            if tree.query(q).unwrap() != linear_query(&masses, q) {
                mismatches += 1;
            }
        }
    }
    mismatches
}

pub fn criterion_per() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let alpha = 0.01;
    let lambda = 0.6;
    let mut rejected = 0;
    let mut worst_p: f64 = 1.0;
    for _ in 0..10 {
        let n = rng.gen_range(32..80);
        let pr: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..5.0)).collect();
        let buf = filled_buffer(&pr, lambda);
        let masses: Vec<f64> = pr.iter().map(|p| p.powf(lambda)).collect();
        let total: f64 = masses.iter().sum();
        let expected: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let counts = sample_counts(&buf, 100_000, &mut rng);
        let p = chi_square_p(&counts, &expected);
        worst_p = worst_p.min(p);
        if p < alpha {
            rejected += 1;
        }
    }
    let pr: Vec<f64> = (0..40).map(|_| rng.gen_range(0.01..5.0)).collect();
    let buf = filled_buffer(&pr, 0.0);
    let counts = sample_counts(&buf, 100_000, &mut rng);
    let n: u64 = counts.iter().sum();
    let uniform_dev = counts.iter().map(|&c| (c as f64 / n as f64 - 1.0 / 40.0).abs()).fold(0.0, f64::max);
    let tree_mismatches = sum_tree_ops(405, 10_000);
    Outcome::new(
        rejected == 0 && uniform_dev <= 0.01 && tree_mismatches == 0,
        format!(
            "{rejected}/10 sets rejected at alpha 0.01 (min p {worst_p:.3}), lambda 0 max deviation {uniform_dev:.4}, {tree_mismatches} sum-tree mismatches over 1e4 ops"
        ),
    )
}

// ---------------------------------------------------------------- ddqn

/// A trunk-less net over one-hot states whose Q rows equal `q` exactly.
pub fn tabular_net(q: &[Vec<f64>]) -> DuelingNet {
    let states = q.len();
    let actions = q[0].len();
    let mut value = Dense::zeros(states, 1);
    let mut advantage = Dense::zeros(states, actions);
    for (s, row) in q.iter().enumerate() {
        value.weights[s] = row.iter().sum::<f64>() / actions as f64;
        for (a, &x) in row.iter().enumerate() {
            advantage.weights[s * actions + a] = x;
        }
    }
    DuelingNet { trunk: vec![], value, advantage }
}

pub fn one_hot(s: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

/// Batch of (s, a, r, s', terminal) over one-hot states.
pub fn tabular_batch(rows: &[(usize, usize, f64, usize, bool)], states: usize) -> Batch {
    Batch {
        obs: rows.iter().flat_map(|r| one_hot(r.0, states)).collect(),
        next_obs: rows.iter().flat_map(|r| one_hot(r.3, states)).collect(),
        actions: rows.iter().map(|r| r.1).collect(),
        rewards: rows.iter().map(|r| r.2).collect(),
        terminals: rows.iter().map(|r| r.4).collect(),
        indices: (0..rows.len()).collect(),
        weights: vec![1.0; rows.len()],
    }
}

/// Online and target Q tables for three states. In s1 the online net
/// prefers action 1 while the target net scores action 2 highest.
pub fn ddqn_fixture() -> (DuelingNet, DuelingNet) {
    let online = tabular_net(&[vec![0.5, -1.0, 0.25], vec![1.0, 3.0, 2.0], vec![4.0, -2.0, 0.0]]);
    let target = tabular_net(&[vec![1.5, 0.0, -0.5], vec![5.0, 2.0, 7.0], vec![-1.0, 6.0, 2.5]]);
    (online, target)
}

pub fn criterion_ddqn() -> Outcome {
    let (online, target) = ddqn_fixture();
    let rows = [
        (0, 0, 1.0, 1, false),
        (1, 2, -0.5, 2, false),
        (2, 1, 3.0, 0, false),
        (0, 1, 2.5, 1, true),
        (1, 0, -4.0, 0, true),
    ];
    let batch = tabular_batch(&rows, 3);
    let y = ddqn_target(&online, &target, &batch, 0.9).unwrap();
    // Hand-computed: the online argmax in s1, s2, s0 is 1, 0, 0 and the
    // target scores those 2.0, -1.0, 1.5.
    let want = [1.0 + 0.9 * 2.0, -0.5 + 0.9 * -1.0, 3.0 + 0.9 * 1.5, 2.5, -4.0];
    let fixture_err = y.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let spec_example = (y[0] - 2.8).abs() <= 1e-12;
    let terminal_exact = y[3] == 2.5 && y[4] == -4.0;
    let y0 = ddqn_target(&online, &target, &batch, 0.0).unwrap();
    let gamma_zero = y0.iter().zip(&batch.rewards).all(|(a, b)| a == b);
    Outcome::new(
        fixture_err <= 1e-12 && spec_example && terminal_exact && gamma_zero,
        format!(
            "fixture max error {fixture_err:.1e}, r=1 gamma=0.9 Q'=2 gives {:.12}, terminal Y = r: {terminal_exact}, gamma 0 Y = r: {gamma_zero}",
            y[0]
        ),
    )
}

// ---------------------------------------------------------------- schedules

/// Fractions of exploring draws and of PID draws among the exploring ones.
pub fn branch_frequencies(eps: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut explore, mut pid) = (0usize, 0usize);
    for _ in 0..draws {
        match exploration_branch(eps, 0.75, &ExplorationDraws::sample(&mut rng)) {
            Branch::Pid => {
                explore += 1;
                pid += 1;
            }
            Branch::Random => explore += 1,
            Branch::Greedy => {}
        }
    }
    (explore as f64 / draws as f64, pid as f64 / explore.max(1) as f64)
}

pub fn criterion_schedules() -> Outcome {
    let s = EpsilonSchedule { eps_min: 0.01, eps_max: 1.0, decay: 1e-6 };
    let start = epsilon_at(&s, 0) == 1.0;
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for k in 0..=200 {
        let e = epsilon_at(&s, k * 100_000);
        monotone &= e <= prev && e >= 0.01;
        prev = e;
    }
    let floor = (epsilon_at(&s, 200_000_000) - 0.01).abs() < 1e-12;
    let at_million = epsilon_at(&s, 1_000_000);
    let direct = 0.01 + 0.99 * (-1.0f64).exp();
    let mut branch_err: f64 = 0.0;
    for (k, eps) in [0.2, 0.5, 0.8, 1.0].into_iter().enumerate() {
        let (explore, pid) = branch_frequencies(eps, 100_000, 600 + k as u64);
        branch_err = branch_err.max((explore - eps).abs()).max((pid - 0.75 * eps).abs());
    }
    Outcome::new(
        start && monotone && floor && (at_million - direct).abs() < 1e-5 && branch_err <= 0.01,
        format!(
            "eps(0)=1: {start}, monotone to 0.01: {}, eps(1e6) = {at_million:.6} (direct evaluation {direct:.6}), max branch-frequency error {branch_err:.4}",
            monotone && floor
        ),
    )
}

// ---------------------------------------------------------------- rewards

/// (v, a, st, theta, e_cross, dis_goal, collision, expected), evaluated by
/// hand from the reward equations with the default coefficients and a
/// 300 m route.
pub const PROTAGONIST_FIXTURES: [(f64, f64, f64, f64, f64, f64, bool, f64); 12] = [
    (0.0, 0.0, 0.0, 0.0, 0.0, 300.0, false, -1.000000000000000e+00),
    (0.5, 2.0, 0.2, 0.1, 0.5, 250.0, false, -7.022916666666668e-01),
    (1.0, 0.0, 0.0, 0.0, 0.0, 300.0, false, -1.000000000000000e+00),
    (10.0, 0.0, 0.0, 0.0, 0.0, 150.0, false, 2.000000000000000e+00),
    (10.0, 3.0, 0.4, 0.3, 1.5, 150.0, false, 1.439191282464266e+00),
    (20.0, 6.0, 0.0, -0.2, 2.0, 100.0, false, 1.646127827425694e+00),
    (25.0, 7.0, 1.0, 0.0, 0.0, 50.0, false, 1.666666666666667e-01),
    (15.0, 5.99, -0.6, 0.5, 4.0, 2.9, false, 1.013979022015959e+02),
    (15.0, 1.0, 0.0, 0.0, 0.0, 3.0, false, 3.480000000000000e+00),
    (8.0, 9.0, 0.2, 1.2, 3.0, 120.0, true, -1.008382450651924e+02),
    (12.0, 0.0, -1.0, -0.7, 0.25, 10.0, true, -9.842582351661051e+01),
    (19.5, 2.0, 0.8, 0.05, 3.9, 299.0, false, 5.861452943590281e-01),
];

/// (v, st, theta, e_cross, dis_goal, dis_pro, collision, expected) with the
/// default adversary coefficients and a 40 m route.
pub const ADVERSARY_FIXTURES: [(f64, f64, f64, f64, f64, f64, CollisionKind, f64); 12] = [
    (0.0, 0.0, 0.0, 0.0, 40.0, 60.0, CollisionKind::None, 0.000000000000000e+00),
    (10.0, 0.0, 0.0, 0.0, 20.0, 30.0, CollisionKind::None, 2.500000000000000e+00),
    (10.0, 0.4, 0.3, 1.0, 20.0, 30.0, CollisionKind::None, 2.079816282464266e+00),
    (10.0, 0.4, 0.3, 1.5, 20.0, 30.0, CollisionKind::None, 1.939191282464266e+00),
    (20.0, 0.0, -0.2, 2.0, 10.0, 5.0, CollisionKind::None, 3.729461160759028e+00),
    (25.0, 1.0, 0.0, 0.0, 35.0, 70.0, CollisionKind::None, -4.166666666666667e-01),
    (5.0, 0.0, 0.0, 0.0, 2.9, 1.0, CollisionKind::WithProtagonist, 2.033383333333333e+02),
    (5.0, 0.0, 0.0, 0.5, 15.0, 2.0, CollisionKind::WithProtagonist, 1.027166666666667e+02),
    (7.0, 0.2, 0.9, 3.0, 25.0, 12.0, CollisionKind::Other, -9.914570185894978e+01),
    (12.0, -0.6, -0.4, 0.9, 30.0, 45.0, CollisionKind::Other, -9.879202881796692e+01),
    (18.0, 0.8, 0.1, 1.01, 3.0, 60.0, CollisionKind::None, 3.077551097536156e+00),
    (3.0, -1.0, 1.5, 4.0, 39.0, 0.0, CollisionKind::None, -7.280273354809055e-01),
];

pub fn fixture_protagonist_cfg() -> ProtagonistRewardConfig {
    ProtagonistRewardConfig { route_length: 300.0, ..ProtagonistRewardConfig::default() }
}

pub fn fixture_adversary_cfg() -> AdversaryRewardConfig {
    AdversaryRewardConfig { route_length: 40.0, ..AdversaryRewardConfig::default() }
}

pub fn protagonist_fixture_errors() -> Vec<f64> {
    let cfg = fixture_protagonist_cfg();
    PROTAGONIST_FIXTURES
        .iter()
        .map(|&(v, a, st, theta, e_cross, dis_goal, col, want)| {
            let o = StepOutcome {
                v,
                a,
                st,
                theta,
                e_cross,
                dis_goal,
                dis_pro: None,
                collision: if col { CollisionKind::Other } else { CollisionKind::None },
                reached_goal: dis_goal < cfg.goal_threshold,
            };
            (protagonist_reward(&o, &cfg) - want).abs()
        })
        .collect()
}

pub fn adversary_fixture_errors() -> Vec<f64> {
    let cfg = fixture_adversary_cfg();
    ADVERSARY_FIXTURES
        .iter()
        .map(|&(v, st, theta, e_cross, dis_goal, dis_pro, collision, want)| {
            let o = StepOutcome {
                v,
                a: 0.0,
                st,
                theta,
                e_cross,
                dis_goal,
                dis_pro: Some(dis_pro),
                collision,
                reached_goal: dis_goal < cfg.goal_threshold,
            };
            (adversary_reward(&o, &cfg) - want).abs()
        })
        .collect()
}

pub fn random_outcome(rng: &mut impl Rng) -> StepOutcome {
    StepOutcome {
        v: rng.gen_range(0.0..30.0),
        a: rng.gen_range(0.0..12.0),
        st: rng.gen_range(-1.0..=1.0),
        theta: rng.gen_range(-1.5..1.5),
        e_cross: rng.gen_range(0.0..4.0),
        dis_goal: rng.gen_range(0.0..300.0),
        dis_pro: Some(rng.gen_range(0.0..80.0)),
        collision: CollisionKind::None,
        reached_goal: false,
    }
}

/// Largest deviation from the expected jump when each indicator flips.
pub fn indicator_linearity(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = fixture_protagonist_cfg();
    let q = fixture_adversary_cfg();
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let o = random_outcome(&mut rng);
        let base_p = protagonist_reward(&o, &p);
        let base_a = adversary_reward(&o, &q);
        let crash = StepOutcome { collision: CollisionKind::Other, ..o };
        let hit = StepOutcome { collision: CollisionKind::WithProtagonist, ..o };
        worst = worst.max((protagonist_reward(&crash, &p) - base_p + p.r7).abs());
        worst = worst.max((protagonist_reward(&hit, &p) - base_p + p.r7).abs());
        worst = worst.max((adversary_reward(&crash, &q) - base_a + q.r7).abs());
        worst = worst.max((adversary_reward(&hit, &q) - base_a - q.r10).abs());
        // The acceleration indicator: same outcome just below / at the limit.
        let below = StepOutcome { a: p.a_max * 0.999, ..o };
        let at = StepOutcome { a: p.a_max, ..o };
        worst = worst.max((protagonist_reward(&at, &p) - protagonist_reward(&below, &p) + p.r3).abs());
        // The goal indicator: the bonus adds on top of the linear term.
        let inside = StepOutcome { dis_goal: p.goal_threshold * 0.5, ..o };
        let linear = p.r5 * (1.0 - inside.dis_goal / p.route_length);
        let without_goal = base_p - p.r5 * (1.0 - o.dis_goal / p.route_length)
            - if o.dis_goal < p.goal_threshold { p.r6 } else { 0.0 };
        worst = worst.max((protagonist_reward(&inside, &p) - (without_goal + linear + p.r6)).abs());
    }
    worst
}

pub fn criterion_rewards() -> Outcome {
    let ep = protagonist_fixture_errors().into_iter().fold(0.0, f64::max);
    let ea = adversary_fixture_errors().into_iter().fold(0.0, f64::max);
    let lin = indicator_linearity(1000, 707);
    Outcome::new(
        ep <= 1e-12 && ea <= 1e-12 && lin <= 1e-12,
        format!("max fixture error protagonist {ep:.1e}, adversary {ea:.1e}; indicator linearity {lin:.1e} over 1e3 outcomes"),
    )
}

// ---------------------------------------------------------------- cli runs

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_drivelab")
}

pub fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(bin()).args(args).output().expect("spawn drivelab")
}

pub fn run_ok(args: &[&str]) {
    let out = run_cli(args);
    assert!(
        out.status.success(),
        "drivelab {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Every file under `dir`, relative, sorted.
pub fn list_files(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, d: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Smoke runs keep the default network but shorten episodes and start
/// learning early.
pub const SMOKE_CONFIG: &str = r#"{
  "seed": 11,
  "world": {"max_steps": 500},
  "agent": {"warmup": 64, "target_period": 200},
  "per": {"capacity": 5000},
  "training": {"baseline_episodes": 10, "coupled_episodes": 6, "freeze_window": 2, "checkpoint_every": 5, "eval_trials": 10}
}"#;

pub fn smoke_run(dir: &Path) {
    let cfg = dir.join("smoke.json");
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(&cfg, SMOKE_CONFIG).unwrap();
    let c = cfg.to_str().unwrap();
    let out = dir.join("run");
    let o = out.to_str().unwrap();
    run_ok(&["train-baseline", "--config", c, "--out", o]);
    run_ok(&["eval", "--config", c, "--out", o, "--protagonist", &format!("{o}/baseline/protagonist.ckpt"), "--scenario", "static"]);
}

pub fn criterion_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    smoke_run(&a);
    smoke_run(&b);
    let fa = list_files(&a.join("run"));
    let fb = list_files(&b.join("run"));
    let mut differing = Vec::new();
    for f in &fa {
        if std::fs::read(a.join("run").join(f)).ok() != std::fs::read(b.join("run").join(f)).ok() {
            differing.push(f.display().to_string());
        }
    }
    let ckpts = fa.iter().filter(|f| f.extension().is_some_and(|x| x == "ckpt")).count();
    Outcome::new(
        fa == fb && differing.is_empty() && ckpts > 0,
        format!("{} files compared ({ckpts} checkpoints), differing: {differing:?}", fa.len()),
    )
}
