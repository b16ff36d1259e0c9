//! The deterministic dual problem and its Lagrange multipliers.
//!
//! `g(gamma) = sum_m pi_m min_x { V f(x, s_m) + sum_n gamma_n (a_n - b_n) }`
//! is concave and piecewise linear. Its maximizer over `gamma >= 0` is the
//! point the drift-plus-penalty backlogs concentrate around.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Scenario;

/// A stationary randomized policy: per state, a distribution over actions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RandomizedPolicy {
    probabilities: Vec<Vec<f64>>,
}

impl RandomizedPolicy {
    pub fn new(probabilities: Vec<Vec<f64>>) -> Result<Self> {
        for (m, dist) in probabilities.iter().enumerate() {
            let total: f64 = dist.iter().sum();
            if dist.iter().any(|&p| p.is_nan() || p < 0.0) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "state {m}: action probabilities must be nonnegative and sum to 1 (sum {total})"
                )));
            }
        }
        Ok(Self { probabilities })
    }

    /// Normalizes nonnegative weights per state; an all-zero row becomes a
    /// point mass on action 0.
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Self {
        let probabilities = weights
            .into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter().map(|w| w / total).collect()
                } else {
                    let mut point = vec![0.0; row.len()];
                    point[0] = 1.0;
                    point
                }
            })
            .collect();
        Self { probabilities }
    }

    pub fn deterministic(scenario: &Scenario, choices: Vec<usize>) -> Self {
        let probabilities = scenario
            .states()
            .iter()
            .zip(choices)
            .map(|(state, k)| {
                let mut row = vec![0.0; state.actions().len()];
                row[k] = 1.0;
                row
            })
            .collect();
        Self { probabilities }
    }

    pub fn probabilities(&self) -> &[Vec<f64>] {
        &self.probabilities
    }

    pub fn expected_cost(&self, scenario: &Scenario) -> f64 {
        scenario
            .states()
            .iter()
            .zip(&self.probabilities)
            .map(|(state, dist)| {
                state.probability()
                    * state
                        .actions()
                        .iter()
                        .zip(dist)
                        .map(|(a, p)| p * a.cost())
                        .sum::<f64>()
            })
            .sum()
    }

    /// `sum_m pi_m sum_k zeta_k (a_n - b_n)` per node.
    pub fn expected_net_arrivals(&self, scenario: &Scenario) -> Vec<f64> {
        let mut net = vec![0.0; scenario.node_count()];
        for (state, dist) in scenario.states().iter().zip(&self.probabilities) {
            for (action, p) in state.actions().iter().zip(dist) {
                let weight = state.probability() * p;
                if weight == 0.0 {
                    continue;
                }
                for (acc, &x) in net.iter_mut().zip(action.net_arrivals()) {
                    *acc += weight * x as f64;
                }
            }
        }
        net
    }

    pub fn is_feasible(&self, scenario: &Scenario, tolerance: f64) -> bool {
        self.expected_net_arrivals(scenario).iter().all(|&x| x <= tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    /// Per-state minimizing action id, lowest id on ties.
    pub minimizers: Vec<usize>,
}

pub fn dual_value(gamma: &[f64], v_param: f64, scenario: &Scenario) -> DualEvaluation {
    let mut minimizers = vec![0; scenario.states().len()];
    let value = evaluate_into(gamma, v_param, scenario, &mut minimizers);
    DualEvaluation { value, minimizers }
}

fn evaluate_into(gamma: &[f64], v_param: f64, scenario: &Scenario, minimizers: &mut [usize]) -> f64 {
    debug_assert_eq!(gamma.len(), scenario.node_count());
    let mut value = 0.0;
    for (state, slot) in scenario.states().iter().zip(minimizers.iter_mut()) {
        let mut best = f64::INFINITY;
        for action in state.actions() {
            let inner = v_param * action.cost()
                + gamma
                    .iter()
                    .zip(action.net_arrivals())
                    .map(|(&g, &net)| g * net as f64)
                    .sum::<f64>();
            if inner < best {
                best = inner;
                *slot = action.id();
            }
        }
        value += state.probability() * best;
    }
    value
}

fn subgradient_into(scenario: &Scenario, minimizers: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (state, &k) in scenario.states().iter().zip(minimizers) {
        let p = state.probability();
        for (acc, &net) in out.iter_mut().zip(state.actions()[k].net_arrivals()) {
            *acc += p * net as f64;
        }
    }
}

/// Expected arrivals minus services at the per-state minimizers of
/// [`dual_value`]; a supergradient of `g` at `gamma`.
pub fn dual_subgradient(gamma: &[f64], v_param: f64, scenario: &Scenario) -> Vec<f64> {
    let eval = dual_value(gamma, v_param, scenario);
    let mut out = vec![0.0; scenario.node_count()];
    subgradient_into(scenario, &eval.minimizers, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `alpha_t = alpha0 / sqrt(t)`; `alpha0` defaults to `max(V, 1) * delta_max`.
    InverseSqrt { alpha0: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step_rule: StepRule,
    pub max_iters: usize,
    /// Defaults to `1e-3 * max(1, V)`.
    pub tolerance: Option<f64>,
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_rule: StepRule::InverseSqrt { alpha0: None },
            max_iters: 1 << 18,
            tolerance: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    pub gamma: Vec<f64>,
    pub dual_value: f64,
    pub iterations: usize,
    /// Change of the averaged iterate between the last two checkpoints
    /// (sup norm, multiplier units).
    pub residual: f64,
    /// Sup norm of the projected averaged supergradient over the last window.
    pub subgradient_norm: f64,
    pub converged: bool,
}

const FIRST_CHECKPOINT: usize = 1 << 10;

/// Projected supergradient ascent on the dual. Iterates are averaged over the
/// second half of each doubling window `(t/2, t]`; the run stops once two
/// consecutive window averages agree within the tolerance.
pub fn solve_dual(v_param: f64, scenario: &Scenario, config: &SolverConfig) -> DualSolution {
    let n = scenario.node_count();
    let delta = scenario.delta_max() as f64;
    let StepRule::InverseSqrt { alpha0 } = config.step_rule;
    let alpha0 = alpha0.unwrap_or(v_param.max(1.0) * delta);
    let tolerance = config.tolerance.unwrap_or(1e-3 * v_param.max(1.0));

    let mut gamma = config.initial.clone().unwrap_or_else(|| vec![0.0; n]);
    gamma.iter_mut().for_each(|g| *g = g.max(0.0));
    let mut minimizers = vec![0; scenario.states().len()];
    let mut grad = vec![0.0; n];

    let mut window_gamma = vec![0.0; n];
    let mut window_grad = vec![0.0; n];
    let mut window_len = 0usize;
    let mut previous_average: Option<Vec<f64>> = None;
    let mut average = gamma.clone();
    let mut residual = f64::INFINITY;
    let mut subgradient_norm = f64::INFINITY;
    let mut converged = false;
    let mut next_checkpoint = FIRST_CHECKPOINT;
    let mut iterations = 0;

    for t in 1..=config.max_iters.max(1) {
        iterations = t;
        evaluate_into(&gamma, v_param, scenario, &mut minimizers);
        subgradient_into(scenario, &minimizers, &mut grad);
        if t > next_checkpoint / 2 {
            for k in 0..n {
                window_gamma[k] += gamma[k];
                window_grad[k] += grad[k];
            }
            window_len += 1;
        }
        let step = alpha0 / (t as f64).sqrt();
        for (g, d) in gamma.iter_mut().zip(&grad) {
            *g = (*g + step * d).max(0.0);
        }

        if t == next_checkpoint {
            let len = window_len as f64;
            average = window_gamma.iter().map(|s| s / len).collect();
            subgradient_norm = window_grad
                .iter()
                .zip(&average)
                .map(|(s, &g)| {
                    let s = s / len;
                    if g <= step { s.max(0.0) } else { s.abs() }
                })
                .fold(0.0, f64::max);
            if let Some(prev) = &previous_average {
                residual = prev
                    .iter()
                    .zip(&average)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if residual < tolerance {
                    converged = true;
                    break;
                }
            }
            previous_average = Some(average.clone());
            window_gamma.iter_mut().for_each(|x| *x = 0.0);
            window_grad.iter_mut().for_each(|x| *x = 0.0);
            window_len = 0;
            next_checkpoint *= 2;
        }
    }

    if previous_average.is_none() || iterations < FIRST_CHECKPOINT {
        // Too few iterations for a checkpoint: report the last iterate.
        average = gamma;
    }
    let dual_value = dual_value(&average, v_param, scenario).value;
    DualSolution {
        gamma: average,
        dual_value,
        iterations,
        residual,
        subgradient_norm,
        converged,
    }
}

const FULL_GRID_LIMIT: f64 = 1e7;
const POINTS_PER_SIDE: i64 = 4;

/// Grid maximization of `g` over `[0, grid_max]^N` at spacing `grid_step`.
///
/// One or two nodes: exhaustive grid. Three or four nodes: a coarse-to-fine
/// pattern search that shrinks the spacing by 4 per level down to
/// `grid_step`, re-centering while the best point sits on the window edge.
pub fn brute_force_dual(v_param: f64, scenario: &Scenario, grid_step: f64, grid_max: f64) -> Result<DualSolution> {
    let n = scenario.node_count();
    if grid_step.is_nan() || grid_step <= 0.0 || grid_max.is_nan() || grid_max < 0.0 {
        return Err(Error::Config("grid step must be positive and grid max nonnegative".into()));
    }
    let per_axis = (grid_max / grid_step).floor() as i64 + 1;
    let mut minimizers = vec![0; scenario.states().len()];
    let mut evaluations = 0usize;
    let mut eval = |gamma: &[f64]| {
        evaluations += 1;
        evaluate_into(gamma, v_param, scenario, &mut minimizers)
    };

    let (gamma, value) = match n {
        1 | 2 => {
            if (per_axis as f64).powi(n as i32) > FULL_GRID_LIMIT {
                return Err(Error::OracleScale(format!("{per_axis}^{n} grid points")));
            }
            let mut best = (vec![0.0; n], f64::NEG_INFINITY);
            let mut index = vec![0i64; n];
            let mut point = vec![0.0; n];
            loop {
                for (p, &i) in point.iter_mut().zip(&index) {
                    *p = i as f64 * grid_step;
                }
                let value = eval(&point);
                if value > best.1 {
                    best = (point.clone(), value);
                }
                if !advance(&mut index, 0, per_axis - 1) {
                    break;
                }
            }
            best
        }
        3 | 4 => pattern_search(n, grid_step, grid_max, &mut eval),
        _ => return Err(Error::OracleScale(format!("{n} nodes (at most 4 supported)"))),
    };

    Ok(DualSolution {
        gamma,
        dual_value: value,
        iterations: evaluations,
        residual: grid_step,
        subgradient_norm: f64::NAN,
        converged: true,
    })
}

/// Odometer increment over `[lo, hi]^n`; false once every index wrapped.
fn advance(index: &mut [i64], lo: i64, hi: i64) -> bool {
    for i in index.iter_mut() {
        if *i < hi {
            *i += 1;
            return true;
        }
        *i = lo;
    }
    false
}

fn pattern_search(n: usize, grid_step: f64, grid_max: f64, eval: &mut impl FnMut(&[f64]) -> f64) -> (Vec<f64>, f64) {
    // Work in integer multiples of grid_step.
    let max_units = (grid_max / grid_step).floor() as i64;
    let mut spacing = 1i64;
    while spacing * 2 * POINTS_PER_SIDE < max_units {
        spacing *= 4;
    }
    let mut center = vec![POINTS_PER_SIDE * spacing; n];
    let mut best = (vec![0i64; n], f64::NEG_INFINITY);
    let mut point = vec![0.0; n];

    loop {
        for _ in 0..64 {
            let mut offsets = vec![-POINTS_PER_SIDE; n];
            let mut on_edge = false;
            let start = best.clone();
            loop {
                let units: Vec<i64> = center.iter().zip(&offsets).map(|(c, o)| c + o * spacing).collect();
                if units.iter().all(|&u| (0..=max_units).contains(&u)) {
                    for (p, &u) in point.iter_mut().zip(&units) {
                        *p = u as f64 * grid_step;
                    }
                    let value = eval(&point);
                    if value > best.1 {
                        best = (units, value);
                    }
                }
                if !advance(&mut offsets, -POINTS_PER_SIDE, POINTS_PER_SIDE) {
                    break;
                }
            }
            for (k, &u) in best.0.iter().enumerate() {
                let offset = (u - center[k]) / spacing;
                if offset.abs() == POINTS_PER_SIDE && u > 0 && u < max_units {
                    on_edge = true;
                }
            }
            center = best.0.clone();
            if !on_edge || best == start {
                break;
            }
        }
        if spacing == 1 {
            break;
        }
        spacing /= 4;
    }
    (best.0.iter().map(|&u| u as f64 * grid_step).collect(), best.1)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::{ActionFile, ScenarioSpec, StateFile};

    fn scenario(nodes: u64, states: Vec<(f64, Vec<(f64, Vec<[f64; 3]>)>)>) -> Scenario {
        Scenario::from_spec(&ScenarioSpec {
            name: None,
            nodes,
            penalty_per_drop: 0.0,
            states: states
                .into_iter()
                .map(|(probability, actions)| StateFile {
                    probability,
                    actions: actions
                        .into_iter()
                        .map(|(cost, services)| ActionFile { cost, services })
                        .collect(),
                })
                .collect(),
        })
        .unwrap()
    }

    /// One state: drain node 1 at cost 1, or idle.
    fn drain_or_idle() -> Scenario {
        scenario(1, vec![(1.0, vec![(1.0, vec![[1.0, 0.0, 1.0]]), (0.0, vec![])])])
    }

    #[test]
    fn zero_multipliers_give_pure_cost_minimum() {
        let s = scenario(
            2,
            vec![
                (0.25, vec![(3.0, vec![]), (1.0, vec![[0.0, 1.0, 1.0]])]),
                (0.75, vec![(2.0, vec![]), (5.0, vec![[1.0, 2.0, 1.0]])]),
            ],
        );
        let eval = dual_value(&[0.0, 0.0], 10.0, &s);
        assert!((eval.value - (0.25 * 10.0 + 0.75 * 20.0)).abs() < 1e-12);
        assert_eq!(eval.minimizers, vec![1, 0]);
    }

    #[test]
    fn drain_or_idle_closed_form() {
        let s = drain_or_idle();
        let v: f64 = 50.0;
        for gamma in [0.0, 10.0, 49.5, 50.0, 50.5, 80.0, 300.0] {
            let expected = (v - gamma).min(0.0);
            assert!((dual_value(&[gamma], v, &s).value - expected).abs() < 1e-12);
        }
        assert_eq!(dual_subgradient(&[0.0], v, &s), vec![0.0]);
        assert_eq!(dual_subgradient(&[1000.0], v, &s), vec![-1.0]);
    }

    #[test]
    fn symmetric_minimizers_share_a_subgradient() {
        let s = scenario(
            2,
            vec![(1.0, vec![(1.0, vec![[1.0, 0.0, 1.0]]), (1.0, vec![[1.0, 0.0, 1.0]])])],
        );
        assert_eq!(dual_subgradient(&[3.0, 4.0], 1.0, &s), vec![-1.0, 0.0]);
    }

    #[test]
    fn unconstrained_optimum_is_zero() {
        // Serving is free and always available: nothing binds.
        let s = scenario(1, vec![(1.0, vec![(0.0, vec![[1.0, 0.0, 1.0]])])]);
        let sol = solve_dual(10.0, &s, &SolverConfig::default());
        assert!(sol.gamma[0].abs() < 1e-9, "{:?}", sol);
    }

    #[test]
    fn one_point_grid() {
        let s = drain_or_idle();
        let sol = brute_force_dual(5.0, &s, 0.25, 0.0).unwrap();
        assert_eq!(sol.gamma, vec![0.0]);
        assert_eq!(sol.dual_value, dual_value(&[0.0], 5.0, &s).value);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let s = scenario(5, vec![(1.0, vec![(0.0, vec![])])]);
        assert!(matches!(brute_force_dual(1.0, &s, 1.0, 10.0), Err(Error::OracleScale(_))));
        let s = scenario(2, vec![(1.0, vec![(0.0, vec![])])]);
        assert!(matches!(brute_force_dual(1.0, &s, 0.01, 1e4), Err(Error::OracleScale(_))));
    }

    #[test]
    fn randomized_policy_validation() {
        assert!(RandomizedPolicy::new(vec![vec![0.5, 0.5]]).is_ok());
        assert!(RandomizedPolicy::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(RandomizedPolicy::new(vec![vec![1.5, -0.5]]).is_err());
    }

    fn two_node_scenario() -> Scenario {
        scenario(
            2,
            vec![
                (
                    0.6,
                    vec![
                        (0.0, vec![[0.0, 1.0, 1.0]]),
                        (1.0, vec![[0.0, 1.0, 1.0], [1.0, 2.0, 1.0]]),
                        (2.0, vec![[0.0, 1.0, 1.0], [1.0, 2.0, 1.0], [2.0, 0.0, 1.0]]),
                    ],
                ),
                (
                    0.4,
                    vec![
                        (0.0, vec![]),
                        (1.0, vec![[2.0, 0.0, 1.0]]),
                        (3.0, vec![[1.0, 2.0, 1.0], [2.0, 0.0, 1.0]]),
                    ],
                ),
            ],
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn dual_is_concave(
            g1 in proptest::collection::vec(0.0f64..20.0, 2),
            g2 in proptest::collection::vec(0.0f64..20.0, 2),
            lambda in 0.0f64..=1.0,
        ) {
            let s = two_node_scenario();
            let mix: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let lhs = dual_value(&mix, 3.0, &s).value;
            let rhs = lambda * dual_value(&g1, 3.0, &s).value + (1.0 - lambda) * dual_value(&g2, 3.0, &s).value;
            prop_assert!(lhs >= rhs - 1e-9);
        }

        #[test]
        fn supergradient_inequality(
            g in proptest::collection::vec(0.0f64..20.0, 2),
            h in proptest::collection::vec(0.0f64..20.0, 2),
        ) {
            let s = two_node_scenario();
            let sub = dual_subgradient(&g, 3.0, &s);
            let bound = dual_value(&g, 3.0, &s).value
                + sub.iter().zip(h.iter().zip(&g)).map(|(d, (a, b))| d * (a - b)).sum::<f64>();
            prop_assert!(dual_value(&h, 3.0, &s).value <= bound + 1e-9);
        }
    }

    #[test]
    fn solver_agrees_with_full_grid_on_two_nodes() {
        let s = two_node_scenario();
        let v = 3.0;
        let sol = solve_dual(v, &s, &SolverConfig::default());
        let oracle = brute_force_dual(v, &s, 0.25, 20.0).unwrap();
        assert!(sol.dual_value >= oracle.dual_value - 1e-3 * v, "{sol:?} vs {oracle:?}");
    }
}
