//! End-to-end acceptance checks. Runs as a plain binary so that the
//! pass/fail lines are always printed; exits nonzero if any check fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use floatnet::model::{random_scenario, RandomScenarioParams};
use floatnet::pathcheck::{
    extract_nondecreasing_segments, linear_fit, lower_bound_admissions, partition_with_lookahead, transform_path_nondecreasing, verify_cumulative_bound,
    verify_interval_lemmas, FakeLookahead, TraceRecord,
};
use floatnet::queues::{standard_update, FloatingQueueState, FlowSplit};
use floatnet::sim::{build_line_network, fake_init_from_gamma, run, LineVariant, Mode, RunConfig, SweepAxis, SweepSpec};
use floatnet::{brute_force_dual, dual_subgradient, dual_value, solve_dual, Scenario, ScenarioSpec, ServiceMatrix, SolverConfig};

const V: f64 = 200.0;
const SLOTS: u64 = 1_000_000;
const BURN_IN: u64 = 2_000;
const BUFFERS: [u64; 5] = [8, 16, 24, 32, 40];
const SEEDS: u64 = 5;
const WINDOWS_PER_TRACE: usize = 100;
const RANDOM_TRACES: usize = 50;
const SEGMENTS_REQUIRED: usize = 1_000;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

/// Per-trace tallies for the sample-path checks.
#[derive(Default)]
struct PathTally {
    traces: usize,
    windows: usize,
    bound_checks: usize,
    bound_violations: usize,
    interval_reports: usize,
    interval_violations: usize,
    pairs_checked: usize,
    pairs_skipped: usize,
    segments: usize,
    segment_failures: usize,
    drop_events: u64,
    drop_growth_violations: u64,
}

impl PathTally {
    fn absorb(&mut self, trace: &TraceRecord, gamma: &[f64], delta_max: u32, rng: &mut ChaCha8Rng, segment_cap: usize) {
        self.traces += 1;
        let len = trace.len();
        let windows: Vec<(usize, usize)> = (0..WINDOWS_PER_TRACE)
            .map(|_| {
                let t0 = rng.gen_range(0..len);
                (t0, rng.gen_range(1..=len - t0))
            })
            .collect();
        self.windows += windows.len();
        let lower = lower_bound_admissions(trace, gamma, delta_max).expect("even buffer, B >= 2 delta_max");
        for &(t0, w) in &windows {
            for bound in verify_cumulative_bound(trace, &lower, t0, w) {
                self.bound_checks += 1;
                self.bound_violations += usize::from(!bound.holds);
            }
        }
        for n in 1..=trace.node_count() {
            let lookahead = FakeLookahead::new(trace, n, 0);
            for &(t0, w) in &windows {
                let partition = partition_with_lookahead(trace, &lookahead, gamma[n - 1], t0, w);
                let report = verify_interval_lemmas(trace, &partition, &lower);
                self.interval_reports += 1;
                self.interval_violations += report.violations.len();
                self.pairs_checked += report.pairs_checked;
                self.pairs_skipped += report.pairs_skipped;
            }
            for segment in extract_nondecreasing_segments(trace, n, 2).into_iter().take(segment_cap) {
                self.segments += 1;
                let ok = transform_path_nondecreasing(&segment, delta_max)
                    .and_then(|s| s.replay())
                    .is_ok();
                self.segment_failures += usize::from(!ok);
            }
        }
    }
}

/// Seed-averaged results at one buffer size.
struct SweepPoint {
    cost: f64,
    hop_drops: f64,
    hop_delay: f64,
    occupancy_delay: f64,
}

fn line(variant: LineVariant) -> Scenario {
    Scenario::from_spec(&build_line_network(0.92, 0.9, variant)).unwrap()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, c) = xs.into_iter().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    s / c as f64
}

/// Sweeps `B` on the power line with traces recorded; returns the per-B
/// averages, every per-seed cost and the slowest per-run time.
fn power_sweep(tally: &mut PathTally, rng: &mut ChaCha8Rng) -> (Vec<SweepPoint>, Vec<f64>, f64) {
    let scenario = line(LineVariant::PowerMin);
    let gamma = solve_dual(V, &scenario, &SolverConfig::default()).gamma;
    let mut base = RunConfig::new(V, BUFFERS[0], SLOTS);
    base.burn_in = Some(BURN_IN);
    base.seed = 2013;
    base.fake_init = Some(fake_init_from_gamma(&gamma));
    let spec = SweepSpec {
        base,
        axis: SweepAxis::BufferSize,
        values: BUFFERS.iter().map(|&b| b as f64).collect(),
        seeds_per_point: SEEDS,
    };
    let mut points = Vec::new();
    let mut costs = Vec::new();
    let mut slowest: f64 = 0.0;
    for i in 0..BUFFERS.len() {
        let started = Instant::now();
        let mut per_seed = Vec::new();
        for s in 0..SEEDS {
            let mut config = spec.row_config(i, s);
            config.record_trace = true;
            let output = run(&scenario, &config).unwrap();
            tally.drop_events += output.drop_events;
            tally.drop_growth_violations += output.drop_growth_violations;
            tally.absorb(output.trace.as_ref().unwrap(), &gamma, scenario.delta_max(), rng, 200);
            per_seed.push(output.floating.unwrap());
        }
        slowest = slowest.max(started.elapsed().as_secs_f64() / SEEDS as f64);
        costs.extend(per_seed.iter().map(|m| m.avg_cost));
        points.push(SweepPoint {
            cost: mean(per_seed.iter().map(|m| m.avg_cost)),
            hop_drops: mean(per_seed.iter().map(|m| m.mean_hop_drops())),
            hop_delay: mean(per_seed.iter().map(|m| m.mean_hop_delay())),
            occupancy_delay: mean(per_seed.iter().map(|m| m.mean_occupancy_delay())),
        });
    }
    (points, costs, slowest)
}

fn power_regression(points: &[SweepPoint], costs: &[f64], slowest: f64) -> Outcome {
    let worst = costs.iter().map(|c| (c - 3.761).abs()).fold(0.0, f64::max);
    let by_b: Vec<String> = BUFFERS.iter().zip(points).map(|(b, p)| format!("B={b}: {:.4}", p.cost)).collect();
    Outcome::new(
        worst <= 0.02,
        format!("mean cost {}; worst seed |cost - 3.761| = {worst:.4}; slowest run {slowest:.2}s", by_b.join(", ")),
    )
}

fn drop_decay(points: &[SweepPoint]) -> Outcome {
    let drops: Vec<f64> = points.iter().map(|p| p.hop_drops).collect();
    let positive_first = drops[0] > 0.0;
    let all_positive = drops.iter().all(|&d| d > 0.0);
    let monotone = drops.windows(2).all(|w| w[1] < w[0]);
    let xs: Vec<f64> = BUFFERS.iter().map(|&b| b as f64).collect();
    let fit = if all_positive { Some(linear_fit(&xs, &drops.iter().map(|d| d.ln()).collect::<Vec<_>>())) } else { None };
    let slope_ok = fit.as_ref().is_some_and(|f| f.slope < 0.0);
    let listed: Vec<String> = drops.iter().map(|d| format!("{d:.3e}")).collect();
    Outcome::new(
        positive_first && all_positive && monotone && slope_ok,
        format!(
            "per-hop drops [{}]; log slope {}",
            listed.join(", "),
            fit.map_or("undefined (zero drops)".into(), |f| format!("{:.4} per packet of buffer (R^2 {:.3})", f.slope, f.r_squared))
        ),
    )
}

fn delay_growth(points: &[SweepPoint]) -> Outcome {
    let xs: Vec<f64> = BUFFERS.iter().map(|&b| b as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.hop_delay).collect();
    let fit = linear_fit(&xs, &ys);
    let listed: Vec<String> = ys.iter().map(|d| format!("{d:.2}")).collect();
    // Occupancy-based delay, reported for information only.
    let occupancy = linear_fit(&xs, &points.iter().map(|p| p.occupancy_delay).collect::<Vec<_>>());
    Outcome::new(
        fit.r_squared >= 0.98 && fit.slope > 0.0,
        format!(
            "per-hop delay [{}]; slope {:.4}, R^2 {:.6} (occupancy delay: slope {:.4}, R^2 {:.4})",
            listed.join(", "),
            fit.slope,
            fit.r_squared,
            occupancy.slope,
            occupancy.r_squared
        ),
    )
}

fn throughput_regression(tally: &mut PathTally, rng: &mut ChaCha8Rng) -> Outcome {
    let scenario = line(LineVariant::ThroughputMax);
    let gamma = solve_dual(V, &scenario, &SolverConfig::default()).gamma;
    let mut config = RunConfig::new(V, 40, SLOTS);
    config.burn_in = Some(BURN_IN);
    config.seed = 2013;
    config.fake_init = Some(fake_init_from_gamma(&gamma));
    config.record_trace = true;
    let output = run(&scenario, &config).unwrap();
    tally.drop_events += output.drop_events;
    tally.drop_growth_violations += output.drop_growth_violations;
    tally.absorb(output.trace.as_ref().unwrap(), &gamma, scenario.delta_max(), rng, 200);
    let m = output.floating.unwrap();
    Outcome::new(
        m.throughput >= 0.88 && m.drop_rate < 0.01,
        format!("throughput {:.4}, drop rate {:.2e}", m.throughput, m.drop_rate),
    )
}

/// Random service matrix on `n` nodes with every node's aggregate inflow and
/// outflow at most `delta`.
fn random_matrix(rng: &mut ChaCha8Rng, n: usize, delta: u32) -> ServiceMatrix {
    let mut mu = ServiceMatrix::zeros(n);
    let mut inflow = vec![0u32; n + 1];
    let mut outflow = vec![0u32; n + 1];
    for _ in 0..rng.gen_range(0..=2 * n) {
        let from = rng.gen_range(0..=n);
        let to = rng.gen_range(0..=n);
        if from == to {
            continue;
        }
        let out_room = if from == 0 { delta } else { delta - outflow[from] };
        let in_room = if to == 0 { delta } else { delta - inflow[to] };
        let room = out_room.min(in_room);
        if room == 0 {
            continue;
        }
        let amount = rng.gen_range(1..=room);
        mu.add(from, to, amount);
        outflow[from] += amount;
        inflow[to] += amount;
    }
    mu
}

fn backlog_identity() -> Outcome {
    const IDENTITY_SEEDS: u64 = 20;
    let mut checked = 0u64;
    let mut violations = 0u64;
    let mut drops = 0u64;
    for seed in 0..IDENTITY_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=5);
        let delta = rng.gen_range(1..=3);
        let buffer = rng.gen_range(1..=8);
        let init: Vec<u64> = (0..n).map(|_| rng.gen_range(0..20)).collect();
        let mut floating = FloatingQueueState::new(buffer, init.clone());
        let mut standard = init;
        let mut split = FlowSplit::new(n);
        for _ in 0..SLOTS {
            let mu = random_matrix(&mut rng, n, delta);
            floating.step_into(&mu, &mut split).unwrap();
            for (k, q) in standard.iter_mut().enumerate() {
                *q = standard_update(*q, mu.inflow(k + 1), mu.outflow(k + 1));
                drops += split.nodes[k].drops as u64;
                checked += 1;
                violations += u64::from(*q != floating.real[k] + floating.fake[k]);
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!("{checked} node-slots over {IDENTITY_SEEDS} seeds, {drops} drops, {violations} mismatches"),
    )
}

fn drop_growth(tally: &PathTally) -> Outcome {
    Outcome::new(
        tally.drop_growth_violations == 0 && tally.drop_events > 0,
        format!("{} slots with drops, {} without fake-backlog growth", tally.drop_events, tally.drop_growth_violations),
    )
}

fn random_traces(tally: &mut PathTally, rng: &mut ChaCha8Rng) {
    for k in 0..RANDOM_TRACES {
        let params = RandomScenarioParams {
            nodes: rng.gen_range(1..=4),
            states: rng.gen_range(1..=5),
            max_actions: rng.gen_range(2..=5),
            delta_max: rng.gen_range(1..=3),
        };
        let scenario = Scenario::from_spec(&random_scenario(rng, params)).unwrap();
        let delta = scenario.delta_max();
        let v = rng.gen_range(1.0..50.0);
        let gamma = solve_dual(v, &scenario, &SolverConfig::default()).gamma;
        let buffer = 2 * delta as u64 + 2 * rng.gen_range(0..6);
        let mut config = RunConfig::new(v, buffer, 20_000);
        config.burn_in = Some(0);
        config.seed = k as u64;
        config.fake_init = Some(if k % 2 == 0 { fake_init_from_gamma(&gamma) } else { vec![0; scenario.node_count()] });
        config.record_trace = true;
        let output = run(&scenario, &config).unwrap();
        tally.drop_events += output.drop_events;
        tally.drop_growth_violations += output.drop_growth_violations;
        tally.absorb(output.trace.as_ref().unwrap(), &gamma, delta, rng, usize::MAX);
    }
}

fn cumulative_bound(tally: &PathTally) -> Outcome {
    Outcome::new(
        tally.bound_violations == 0,
        format!(
            "{} traces, {} windows, {} node-window bounds, {} violations",
            tally.traces, tally.windows, tally.bound_checks, tally.bound_violations
        ),
    )
}

fn interval_suite(tally: &PathTally) -> Outcome {
    Outcome::new(
        tally.interval_violations == 0 && tally.segment_failures == 0 && tally.segments >= SEGMENTS_REQUIRED,
        format!(
            "{} node windows, {} extremum pairs checked ({} skipped), {} violations; {} segments transformed, {} failed replay",
            tally.interval_reports, tally.pairs_checked, tally.pairs_skipped, tally.interval_violations, tally.segments, tally.segment_failures
        ),
    )
}

/// One state, two actions: admit a packet for free, or drain one at cost 2.
/// `g(gamma) = min(gamma, 2V - gamma)` peaks at `gamma = V`.
fn kink_scenario() -> Scenario {
    let spec: ScenarioSpec = serde_json::from_value(serde_json::json!({
        "nodes": 1,
        "states": [{
            "probability": 1.0,
            "actions": [
                { "cost": 0.0, "services": [[0, 1, 1]] },
                { "cost": 2.0, "services": [[1, 0, 1]] }
            ]
        }]
    }))
    .unwrap();
    Scenario::from_spec(&spec).unwrap()
}

fn dual_oracle() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let kink = kink_scenario();
    for v in [10.0, 50.0, 200.0] {
        let solved = solve_dual(v, &kink, &SolverConfig::default());
        let grid = brute_force_dual(v, &kink, 0.25, 4.0 * v).unwrap();
        let err = (solved.gamma[0] - grid.gamma[0]).abs().max((solved.gamma[0] - v).abs());
        ok &= err <= 0.5;
        notes.push(format!("kink V={v}: {:.3}", solved.gamma[0]));
    }
    let power = line(LineVariant::PowerMin);
    let solved = solve_dual(V, &power, &SolverConfig::default());
    let grid = brute_force_dual(V, &power, 0.25, 2.0 * V * 5.0).unwrap();
    let err = solved.gamma.iter().zip(&grid.gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ok &= err <= 0.5;
    notes.push(format!("line-power max coordinate gap {err:.3}"));

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut concave_fail, mut super_fail) = (0, 0);
    const PAIRS: usize = 10_000;
    for _ in 0..PAIRS {
        let params = RandomScenarioParams {
            nodes: rng.gen_range(1..=4),
            states: rng.gen_range(1..=4),
            max_actions: rng.gen_range(1..=5),
            delta_max: rng.gen_range(1..=3),
        };
        let scenario = Scenario::from_spec(&random_scenario(&mut rng, params)).unwrap();
        let n = scenario.node_count();
        let v = rng.gen_range(0.0..100.0);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..500.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..500.0)).collect();
        let lambda: f64 = rng.gen_range(0.0..=1.0);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let (ga, gb, gm) = (dual_value(&a, v, &scenario).value, dual_value(&b, v, &scenario).value, dual_value(&mid, v, &scenario).value);
        let scale = 1.0_f64.max(ga.abs()).max(gb.abs());
        concave_fail += usize::from(gm < lambda * ga + (1.0 - lambda) * gb - 1e-9 * scale);
        let s = dual_subgradient(&a, v, &scenario);
        let linear = ga + s.iter().zip(b.iter().zip(&a)).map(|(si, (bi, ai))| si * (bi - ai)).sum::<f64>();
        super_fail += usize::from(gb > linear + 1e-9 * scale);
    }
    ok &= concave_fail == 0 && super_fail == 0;
    notes.push(format!("{PAIRS} random pairs: {concave_fail} concavity, {super_fail} supergradient failures"));
    Outcome::new(ok, notes.join("; "))
}

fn decision_equivalence() -> Outcome {
    const EQUIV_SLOTS: u64 = 100_000;
    const EQUIV_SEEDS: u64 = 20;
    let mut mismatches = 0;
    let mut identity = 0;
    let mut drops = 0;
    for (variant, buffer) in [(LineVariant::PowerMin, 8), (LineVariant::ThroughputMax, 4)] {
        let scenario = line(variant);
        for s in 0..EQUIV_SEEDS {
            let mut config = RunConfig::new(V, buffer, EQUIV_SLOTS);
            config.mode = Mode::Both;
            config.seed = 7;
            config.stream = s;
            let output = run(&scenario, &config).unwrap();
            mismatches += output.decision_mismatches;
            identity += output.identity_violations;
            drops += output.drop_events;
        }
    }
    Outcome::new(
        mismatches == 0 && identity == 0,
        format!(
            "2 scenarios x {EQUIV_SEEDS} seeds x {EQUIV_SLOTS} slots: {mismatches} action mismatches, {identity} backlog mismatches, {drops} slots with drops"
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tally = PathTally::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    let (points, costs, slowest) = power_sweep(&mut tally, &mut rng);
    results.push((1, "power-minimization regression", power_regression(&points, &costs, slowest)));
    results.push((2, "drop decay with buffer size", drop_decay(&points)));
    results.push((3, "linear delay growth", delay_growth(&points)));
    results.push((4, "throughput regression", throughput_regression(&mut tally, &mut rng)));
    results.push((5, "backlog identity", backlog_identity()));
    results.push((6, "drops raise the fake backlog", drop_growth(&tally)));
    random_traces(&mut tally, &mut rng);
    results.push((7, "cumulative admission bound", cumulative_bound(&tally)));
    results.push((8, "interval and segment-transform checks", interval_suite(&tally)));
    results.push((9, "dual solver oracle", dual_oracle()));
    results.push((10, "decision equivalence", decision_equivalence()));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (k, name, outcome) in &results {
        println!("{} {k:>2} {name}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.detail);
        failed += usize::from(!outcome.passed);
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", results.len() - failed, started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
