//! Network instances: nodes, i.i.d. random states, finite per-state action
//! sets, and the cost and integer service tables attached to each action.
//!
//! Node index 0 in every service matrix is the exogenous source (row 0) and
//! the network exit (column 0). Internal nodes are `1..=N`. Per-node vectors
//! (`Q`, arrivals, services) are stored with node `n` at index `n - 1`.

mod random;
mod slater;
mod spec;

pub use random::{random_scenario, RandomScenarioParams};
pub use slater::{check_slater, SlaterEstimate};
pub use spec::{validate_scenario, ActionFile, ScenarioSpec, StateFile, ValidationReport, Violation};

use std::fmt;

use crate::error::{Error, Result};

/// Dense `(N+1) x (N+1)` matrix of integer service amounts `mu[i][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceMatrix {
    dim: usize,
    data: Vec<u32>,
}

impl ServiceMatrix {
    pub fn zeros(node_count: usize) -> Self {
        let dim = node_count + 1;
        Self {
            dim,
            data: vec![0; dim * dim],
        }
    }

    pub fn node_count(&self) -> usize {
        self.dim - 1
    }

    pub fn get(&self, from: usize, to: usize) -> u32 {
        self.data[from * self.dim + to]
    }

    pub fn set(&mut self, from: usize, to: usize, amount: u32) {
        self.data[from * self.dim + to] = amount;
    }

    pub fn add(&mut self, from: usize, to: usize, amount: u32) {
        self.data[from * self.dim + to] += amount;
    }

    pub fn row(&self, from: usize) -> &[u32] {
        &self.data[from * self.dim..(from + 1) * self.dim]
    }

    /// Nonzero entries as `(from, to, amount)`, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &amount)| amount > 0)
            .map(move |(k, &amount)| (k / self.dim, k % self.dim, amount))
    }

    /// Aggregate arrivals `a_n = sum_i mu_in` into internal node `n`.
    pub fn inflow(&self, node: usize) -> u32 {
        (0..self.dim).map(|i| self.get(i, node)).sum()
    }

    /// Aggregate services `b_n = sum_j mu_nj` out of internal node `n`.
    pub fn outflow(&self, node: usize) -> u32 {
        self.row(node).iter().sum()
    }
}

/// One control option available in a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    id: usize,
    cost: f64,
    services: ServiceMatrix,
    inflow: Vec<u32>,
    outflow: Vec<u32>,
    net: Vec<i64>,
}

impl ActionSpec {
    pub fn new(id: usize, cost: f64, services: ServiceMatrix) -> Self {
        let n = services.node_count();
        let inflow: Vec<u32> = (1..=n).map(|node| services.inflow(node)).collect();
        let outflow: Vec<u32> = (1..=n).map(|node| services.outflow(node)).collect();
        let net = inflow
            .iter()
            .zip(&outflow)
            .map(|(&a, &b)| a as i64 - b as i64)
            .collect();
        Self {
            id,
            cost,
            services,
            inflow,
            outflow,
            net,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn services(&self) -> &ServiceMatrix {
        &self.services
    }

    /// `a_n` for every internal node, node `n` at index `n - 1`.
    pub fn arrivals(&self) -> &[u32] {
        &self.inflow
    }

    /// `b_n` for every internal node, node `n` at index `n - 1`.
    pub fn departures(&self) -> &[u32] {
        &self.outflow
    }

    /// `a_n - b_n` for every internal node.
    pub fn net_arrivals(&self) -> &[i64] {
        &self.net
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    id: usize,
    probability: f64,
    actions: Vec<ActionSpec>,
}

impl NetworkState {
    /// Builds a state directly; action ids are reassigned to list positions.
    pub fn new(id: usize, probability: f64, actions: Vec<ActionSpec>) -> Self {
        let actions = actions
            .into_iter()
            .enumerate()
            .map(|(k, mut action)| {
                action.id = k;
                action
            })
            .collect();
        Self {
            id,
            probability,
            actions,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioBounds {
    pub delta_max: u32,
}

/// A validated network instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    name: Option<String>,
    node_count: usize,
    states: Vec<NetworkState>,
    penalty_per_drop: f64,
    bounds: ScenarioBounds,
}

impl Scenario {
    /// Builds a scenario from its file representation, rejecting anything
    /// `validate_scenario` flags.
    pub fn from_spec(spec: &ScenarioSpec) -> Result<Self> {
        let report = validate_scenario(spec);
        if !report.is_valid() {
            return Err(Error::InvalidScenario(report));
        }
        let node_count = spec.nodes as usize;
        let states = spec
            .states
            .iter()
            .enumerate()
            .map(|(m, state)| NetworkState {
                id: m,
                probability: state.probability,
                actions: state
                    .actions
                    .iter()
                    .enumerate()
                    .map(|(k, action)| {
                        let mut services = ServiceMatrix::zeros(node_count);
                        for &[i, j, amount] in &action.services {
                            services.add(i as usize, j as usize, amount as u32);
                        }
                        ActionSpec::new(k, action.cost, services)
                    })
                    .collect(),
            })
            .collect();
        let mut scenario = Self {
            name: spec.name.clone(),
            node_count,
            states,
            penalty_per_drop: spec.penalty_per_drop,
            bounds: ScenarioBounds { delta_max: 1 },
        };
        scenario.bounds = compute_delta_max(&scenario);
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            name: self.name.clone(),
            nodes: self.node_count as u64,
            penalty_per_drop: self.penalty_per_drop,
            states: self
                .states
                .iter()
                .map(|state| StateFile {
                    probability: state.probability,
                    actions: state
                        .actions
                        .iter()
                        .map(|action| ActionFile {
                            cost: action.cost,
                            services: action
                                .services
                                .entries()
                                .map(|(i, j, a)| [i as f64, j as f64, a as f64])
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn states(&self) -> &[NetworkState] {
        &self.states
    }

    pub fn state(&self, id: usize) -> &NetworkState {
        &self.states[id]
    }

    pub fn penalty_per_drop(&self) -> f64 {
        self.penalty_per_drop
    }

    pub fn bounds(&self) -> ScenarioBounds {
        self.bounds
    }

    pub fn delta_max(&self) -> u32 {
        self.bounds.delta_max
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.probability).collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} nodes, {} states, delta_max {})",
            self.name.as_deref().unwrap_or("scenario"),
            self.node_count,
            self.states.len(),
            self.bounds.delta_max
        )
    }
}

/// Smallest `delta_max` bounding every node's aggregate arrivals and services
/// over all state/action pairs. An all-zero scenario reports 1 so that buffer
/// thresholds like `B >= 2 delta_max` stay meaningful.
pub fn compute_delta_max(scenario: &Scenario) -> ScenarioBounds {
    let bound = scenario
        .states
        .iter()
        .flat_map(|state| &state.actions)
        .flat_map(|action| action.inflow.iter().chain(&action.outflow))
        .copied()
        .max()
        .unwrap_or(0);
    ScenarioBounds {
        delta_max: bound.max(1),
    }
}
