use serde::Serialize;

use super::Scenario;
use crate::dual::RandomizedPolicy;

/// Best-effort estimate of the Slater slack of a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct SlaterEstimate {
    /// Largest slack found: `-max_n E[a_n - b_n]` under `policy`. A positive
    /// value certifies the Slater condition for this scenario.
    pub eta: f64,
    /// Upper bound on the achievable slack from the min-max dual.
    pub eta_upper: f64,
    #[serde(skip)]
    pub policy: RandomizedPolicy,
    pub iterations: usize,
}

/// Searches for a stationary randomized policy maximizing the minimum
/// per-node drift `E[b_n - a_n]`.
///
/// By the minimax theorem the best slack is `-max_w phi(w)` over node weights
/// `w` in the simplex, where `phi(w) = sum_m pi_m min_k w . (a - b)(k, m)`.
/// The weights are found by projected supergradient ascent; the primal policy
/// is recovered by averaging the per-state minimizers along the way. The
/// per-state min-max deterministic policy is also tried.
pub fn check_slater(scenario: &Scenario, trials: usize) -> SlaterEstimate {
    let n = scenario.node_count();
    let states = scenario.states();
    let step0 = 0.5 / scenario.delta_max() as f64;

    let mut w = vec![1.0 / n as f64; n];
    let mut counts: Vec<Vec<f64>> = states.iter().map(|s| vec![0.0; s.actions().len()]).collect();
    let mut best_phi = f64::NEG_INFINITY;
    let mut grad = vec![0.0; n];
    let iterations = trials.max(1);

    for t in 1..=iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut phi = 0.0;
        for (m, state) in states.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for action in state.actions() {
                let value: f64 = action
                    .net_arrivals()
                    .iter()
                    .zip(&w)
                    .map(|(&net, &wn)| net as f64 * wn)
                    .sum();
                if value < best.0 {
                    best = (value, action.id());
                }
            }
            phi += state.probability() * best.0;
            let chosen = &state.actions()[best.1];
            for (g, &net) in grad.iter_mut().zip(chosen.net_arrivals()) {
                *g += state.probability() * net as f64;
            }
            // Step-size weighted ergodic average of the minimizers.
            counts[m][best.1] += 1.0 / (t as f64).sqrt();
        }
        best_phi = best_phi.max(phi);
        let step = step0 / (t as f64).sqrt();
        for (wn, g) in w.iter_mut().zip(&grad) {
            *wn += step * g;
        }
        project_simplex(&mut w);
    }

    let averaged = RandomizedPolicy::from_weights(counts);
    let minmax = RandomizedPolicy::deterministic(
        scenario,
        states
            .iter()
            .map(|state| {
                let mut best = (i64::MAX, 0);
                for action in state.actions() {
                    let worst = action.net_arrivals().iter().copied().max().unwrap_or(0);
                    if worst < best.0 {
                        best = (worst, action.id());
                    }
                }
                best.1
            })
            .collect(),
    );

    let slack = |policy: &RandomizedPolicy| {
        -policy
            .expected_net_arrivals(scenario)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (eta, policy) = [averaged, minmax]
        .into_iter()
        .map(|p| (slack(&p), p))
        .fold(None, |acc: Option<(f64, RandomizedPolicy)>, cand| match acc {
            Some(best) if best.0 >= cand.0 => Some(best),
            _ => Some(cand),
        })
        .unwrap();

    SlaterEstimate {
        eta,
        eta_upper: -best_phi,
        policy,
        iterations,
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}
