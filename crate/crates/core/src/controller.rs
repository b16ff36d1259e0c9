//! Drift-plus-penalty decision rule.
//!
//! Each slot the controller observes the network state and the backlog
//! vector `Q` and picks the action minimizing
//! `V * f(x, s) + sum_n Q_n * (a_n(x, s) - b_n(x, s))`.
//! With `V = 0` this is MaxWeight / backpressure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionSpec, NetworkState, ServiceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestActionId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub v_param: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl ControllerConfig {
    pub fn new(v_param: f64) -> Self {
        assert!(v_param >= 0.0, "V must be nonnegative");
        Self {
            v_param,
            tie_break: TieBreak::LowestActionId,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Decision<'a> {
    pub action_id: usize,
    pub objective_value: f64,
    action: &'a ActionSpec,
}

impl<'a> Decision<'a> {
    pub fn action(&self) -> &'a ActionSpec {
        self.action
    }

    /// Aggregate arrivals `a_n` under the chosen action.
    pub fn arrivals(&self) -> &'a [u32] {
        self.action.arrivals()
    }

    /// Aggregate services `b_n` under the chosen action.
    pub fn services(&self) -> &'a [u32] {
        self.action.departures()
    }

    pub fn matrix(&self) -> &'a ServiceMatrix {
        self.action.services()
    }

    pub fn cost(&self) -> f64 {
        self.action.cost()
    }
}

/// The drift-plus-penalty weight of one action. Backlogs enter as exact
/// integers; products stay exact in `f64` below 2^53.
pub fn dpp_weight(action: &ActionSpec, backlog: &[u64], config: &ControllerConfig) -> f64 {
    debug_assert_eq!(backlog.len(), action.net_arrivals().len());
    let drift: f64 = backlog
        .iter()
        .zip(action.net_arrivals())
        .map(|(&q, &net)| q as f64 * net as f64)
        .sum();
    config.v_param * action.cost() + drift
}

pub fn decide<'a>(state: &'a NetworkState, backlog: &[u64], config: &ControllerConfig) -> Result<Decision<'a>> {
    let mut best: Option<(f64, &ActionSpec)> = None;
    for action in state.actions() {
        let weight = dpp_weight(action, backlog, config);
        // Strict comparison keeps the first (lowest id) minimizer.
        if best.is_none_or(|(w, _)| weight < w) {
            best = Some((weight, action));
        }
    }
    let (objective_value, action) = best.ok_or(Error::NoFeasibleAction { state: state.id() })?;
    Ok(Decision {
        action_id: action.id(),
        objective_value,
        action,
    })
}
