use rand::Rng;

use super::{ActionFile, ScenarioSpec, StateFile};

#[derive(Debug, Clone, Copy)]
pub struct RandomScenarioParams {
    pub nodes: usize,
    pub states: usize,
    pub max_actions: usize,
    pub delta_max: u32,
}

impl Default for RandomScenarioParams {
    fn default() -> Self {
        Self {
            nodes: 3,
            states: 4,
            max_actions: 4,
            delta_max: 2,
        }
    }
}

/// Draws a random valid scenario whose aggregate per-node flows respect
/// `params.delta_max`. Every state contains the idle action (id 0).
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R, params: RandomScenarioParams) -> ScenarioSpec {
    let n = params.nodes.max(1);
    let weights: Vec<f64> = (0..params.states.max(1)).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
    // Push the rounding residue into the last state so the sum is exact
    // enough for validation.
    let head: f64 = probabilities[..probabilities.len() - 1].iter().sum();
    *probabilities.last_mut().unwrap() = (1.0 - head).max(0.0);

    let states = probabilities
        .into_iter()
        .map(|probability| {
            let action_count = rng.gen_range(1..=params.max_actions.max(1));
            let mut actions = vec![ActionFile {
                cost: 0.0,
                services: vec![],
            }];
            for _ in 1..action_count {
                actions.push(random_action(rng, n, params.delta_max.max(1)));
            }
            StateFile {
                probability,
                actions,
            }
        })
        .collect();

    ScenarioSpec {
        name: Some("random".into()),
        nodes: n as u64,
        penalty_per_drop: 0.0,
        states,
    }
}

fn random_action<R: Rng + ?Sized>(rng: &mut R, n: usize, delta_max: u32) -> ActionFile {
    let mut inflow = vec![0u32; n + 1];
    let mut outflow = vec![0u32; n + 1];
    let mut services = Vec::new();
    let mut served = 0.0;
    for _ in 0..rng.gen_range(1..=2 * n) {
        let from = rng.gen_range(0..=n);
        let to = rng.gen_range(0..=n);
        if from == to {
            continue;
        }
        let out_room = if from == 0 { delta_max } else { delta_max - outflow[from] };
        let in_room = if to == 0 { delta_max } else { delta_max - inflow[to] };
        let room = out_room.min(in_room);
        if room == 0 {
            continue;
        }
        let amount = rng.gen_range(1..=room);
        if from != 0 {
            outflow[from] += amount;
            served += amount as f64;
        }
        if to != 0 {
            inflow[to] += amount;
        }
        services.push([from as f64, to as f64, amount as f64]);
    }
    ActionFile {
        cost: (rng.gen_range(0.0..1.0) * (1.0 + served)).round() / 4.0,
        services,
    }
}
