use serde::{Deserialize, Serialize};

use crate::model::{ActionFile, ScenarioSpec, StateFile};

pub const LINE_NODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineVariant {
    /// Every arrival enters; each link may transmit one packet at cost 1 on
    /// a good channel and 2 on a bad one.
    PowerMin,
    /// Arrivals may be rejected; each admission earns one unit (cost -1) and
    /// links transmit only on good channels.
    ThroughputMax,
}

/// A four-node line `0 -> 1 -> 2 -> 3 -> 4 -> 0`.
///
/// The network state packs the arrival indicator and the four channel
/// states: bit `i` (0..4) is set when link `i + 1` is good, bit 4 when a
/// packet arrives. Channels and arrivals are independent Bernoulli draws.
/// Action ids list the idle action first.
pub fn build_line_network(arrival_prob: f64, good_prob: f64, variant: LineVariant) -> ScenarioSpec {
    assert!((0.0..=1.0).contains(&arrival_prob) && (0.0..=1.0).contains(&good_prob));
    let links = LINE_NODES;
    let mut states = Vec::with_capacity(1 << (links + 1));
    for id in 0..1u32 << (links + 1) {
        let arrival = id >> links & 1 == 1;
        let good: Vec<bool> = (0..links).map(|i| id >> i & 1 == 1).collect();
        let mut probability = if arrival { arrival_prob } else { 1.0 - arrival_prob };
        for &g in &good {
            probability *= if g { good_prob } else { 1.0 - good_prob };
        }
        let actions = match variant {
            LineVariant::PowerMin => power_actions(arrival, &good),
            LineVariant::ThroughputMax => throughput_actions(arrival, &good),
        };
        states.push(StateFile { probability, actions });
    }
    let (name, penalty) = match variant {
        LineVariant::PowerMin => ("line-power", 0.0),
        LineVariant::ThroughputMax => ("line-throughput", 1.0),
    };
    ScenarioSpec {
        name: Some(name.to_string()),
        nodes: links as u64,
        penalty_per_drop: penalty,
        states,
    }
}

fn link(i: usize) -> [f64; 3] {
    let to = if i == LINE_NODES { 0 } else { i + 1 };
    [i as f64, to as f64, 1.0]
}

fn power_actions(arrival: bool, good: &[bool]) -> Vec<ActionFile> {
    (0..1usize << good.len())
        .map(|mask| {
            let mut services = Vec::new();
            if arrival {
                services.push([0.0, 1.0, 1.0]);
            }
            let mut cost = 0.0;
            for (i, &g) in good.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    services.push(link(i + 1));
                    cost += if g { 1.0 } else { 2.0 };
                }
            }
            ActionFile { cost, services }
        })
        .collect()
}

fn throughput_actions(arrival: bool, good: &[bool]) -> Vec<ActionFile> {
    let mut actions = Vec::new();
    for admit in 0..=arrival as u32 {
        for mask in 0..1usize << good.len() {
            if (0..good.len()).any(|i| mask >> i & 1 == 1 && !good[i]) {
                continue;
            }
            let mut services = Vec::new();
            if admit == 1 {
                services.push([0.0, 1.0, 1.0]);
            }
            services.extend((0..good.len()).filter(|i| mask >> i & 1 == 1).map(|i| link(i + 1)));
            actions.push(ActionFile {
                cost: if admit == 1 { -1.0 } else { 0.0 },
                services,
            });
        }
    }
    actions
}
