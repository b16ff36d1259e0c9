//! Seeded slot-by-slot simulation of the controller over standard and
//! floating queues, parameter sweeps, and trace persistence.
//!
//! Randomness: ChaCha8 seeded with `seed`, on ChaCha stream `stream`. Each
//! slot draws one `f64` and inverts the cumulative state distribution.

mod line;
mod sweep;
mod trace_io;

pub use line::{build_line_network, LineVariant, LINE_NODES};
pub use sweep::{format_sig, parse_values, sweep, write_sweep_csv, SweepAxis, SweepRow, SweepSpec};
pub use trace_io::{read_trace_csv, write_trace_csv, TRACE_COLUMNS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{decide, ControllerConfig};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::pathcheck::{MetricsAccumulator, MetricsReport, TraceRecord};
use crate::queues::{FloatingQueueState, FlowSplit, NodeFlows, StandardQueueState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Standard,
    #[default]
    Floating,
    Both,
}

impl Mode {
    fn floating(self) -> bool {
        matches!(self, Mode::Floating | Mode::Both)
    }

    fn standard(self) -> bool {
        matches!(self, Mode::Standard | Mode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub v_param: f64,
    pub buffer_size: u64,
    /// Total slots simulated, burn-in included.
    pub horizon: u64,
    /// Defaults to `ceil(10 V)`.
    pub burn_in: Option<u64>,
    pub seed: u64,
    pub stream: u64,
    pub mode: Mode,
    /// Initial fake backlogs, which are also the initial standard backlogs.
    /// Defaults to zero.
    pub fake_init: Option<Vec<u64>>,
    pub record_trace: bool,
    /// Multipliers for the deviation tail; no tail is computed without them.
    pub gamma: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(v_param: f64, buffer_size: u64, horizon: u64) -> Self {
        Self {
            v_param,
            buffer_size,
            horizon,
            burn_in: None,
            seed: 0,
            stream: 0,
            mode: Mode::Floating,
            fake_init: None,
            record_trace: false,
            gamma: None,
        }
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or((10.0 * self.v_param).ceil() as u64)
    }

    /// Rejects unusable configurations; returns warnings for usable but
    /// questionable ones.
    pub fn validate(&self, scenario: &Scenario) -> Result<Vec<String>> {
        if !(self.v_param >= 0.0 && self.v_param.is_finite()) {
            return Err(Error::Config(format!("V must be finite and nonnegative, got {}", self.v_param)));
        }
        if self.buffer_size == 0 {
            return Err(Error::Config("buffer size must be positive".into()));
        }
        if self.horizon <= self.burn_in() {
            return Err(Error::EmptyWindow {
                horizon: self.horizon,
                burn_in: self.burn_in(),
            });
        }
        let n = scenario.node_count();
        if let Some(init) = &self.fake_init {
            if init.len() != n {
                return Err(Error::Config(format!("fake_init has {} entries for {n} nodes", init.len())));
            }
        }
        if let Some(gamma) = &self.gamma {
            if gamma.len() != n {
                return Err(Error::Config(format!("gamma has {} entries for {n} nodes", gamma.len())));
            }
        }
        let mut warnings = Vec::new();
        let delta = scenario.delta_max() as u64;
        if self.mode.floating() && self.buffer_size < 2 * delta {
            warnings.push(format!(
                "buffer size {} is below 2 * delta_max = {}; drops may not raise the fake backlog",
                self.buffer_size,
                2 * delta
            ));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub floating: Option<MetricsReport>,
    pub standard: Option<MetricsReport>,
    #[serde(skip)]
    pub trace: Option<TraceRecord>,
    /// Slots where the standard and floating controllers chose different
    /// actions (mode `both`).
    pub decision_mismatches: u64,
    /// Node-slots where `Q != Q^r + Q^f` (mode `both`).
    pub identity_violations: u64,
    /// Node-slots with at least one real drop.
    pub drop_events: u64,
    /// Drop events after which the fake backlog did not grow.
    pub drop_growth_violations: u64,
    pub warnings: Vec<String>,
}

/// Inverse-CDF state sampler.
#[derive(Debug, Clone)]
pub struct StateSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl StateSampler {
    pub fn new(scenario: &Scenario) -> Self {
        let mut acc = 0.0;
        let cumulative = scenario
            .states()
            .iter()
            .map(|s| {
                acc += s.probability();
                acc
            })
            .collect();
        let last_positive = scenario.states().iter().rposition(|s| s.probability() > 0.0).unwrap_or(0);
        Self {
            cumulative,
            last_positive,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let k = self.cumulative.partition_point(|&c| c <= u);
        // Rounding may leave the total a hair below 1; fall back to the last
        // state with positive probability.
        k.min(self.last_positive)
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Initial fake backlogs at the multipliers, rounded to the nearest packet,
/// so that the run starts near its steady state.
pub fn fake_init_from_gamma(gamma: &[f64]) -> Vec<u64> {
    gamma.iter().map(|g| g.max(0.0).round() as u64).collect()
}

pub fn run(scenario: &Scenario, config: &RunConfig) -> Result<RunOutput> {
    let warnings = config.validate(scenario)?;
    let n = scenario.node_count();
    let burn_in = config.burn_in();
    let controller = ControllerConfig::new(config.v_param);
    let init = config.fake_init.clone().unwrap_or_else(|| vec![0; n]);
    let sampler = StateSampler::new(scenario);
    let mut rng = rng_for(config.seed, config.stream);

    let mut floating = FloatingQueueState::new(config.buffer_size, init.clone());
    let mut standard = StandardQueueState::new(init);
    let mut split = FlowSplit::new(n);
    let mut trace = (config.record_trace && config.mode.floating())
        .then(|| TraceRecord::with_capacity(&floating, config.horizon as usize));
    let new_acc = || MetricsAccumulator::new(n, config.buffer_size, scenario.penalty_per_drop(), config.gamma.clone());
    let mut float_acc = new_acc();
    let mut std_acc = new_acc();

    let mut q_total = vec![0u64; n];
    let mut q_real = vec![0u64; n];
    let mut q_fake = vec![0u64; n];
    let mut std_flows = vec![NodeFlows::default(); n];
    let mut out = RunOutput {
        floating: None,
        standard: None,
        trace: None,
        decision_mismatches: 0,
        identity_violations: 0,
        drop_events: 0,
        drop_growth_violations: 0,
        warnings,
    };

    for t in 0..config.horizon {
        let measured = t >= burn_in;
        let m = sampler.sample(&mut rng);
        let state = scenario.state(m);

        let mut floating_action = None;
        if config.mode.floating() {
            floating.total_into(&mut q_total);
            let decision = decide(state, &q_total, &controller)?;
            q_real.copy_from_slice(&floating.real);
            q_fake.copy_from_slice(&floating.fake);
            floating.step_into(decision.matrix(), &mut split)?;
            for (k, flows) in split.nodes.iter().enumerate() {
                if flows.drops > 0 {
                    out.drop_events += 1;
                    if floating.fake[k] <= q_fake[k] {
                        out.drop_growth_violations += 1;
                    }
                }
            }
            if measured {
                let exits = (1..=n).map(|i| split.mu_r.get(i, 0)).sum();
                float_acc.observe(&q_real, &q_total, decision.cost(), &split.nodes, exits);
            }
            if let Some(trace) = trace.as_mut() {
                trace.record(m, decision.action_id, decision.cost(), &split, &floating);
            }
            floating_action = Some(decision.action_id);
        }

        if config.mode.standard() {
            let decision = decide(state, &standard.backlog, &controller)?;
            if floating_action.is_some_and(|id| id != decision.action_id) {
                out.decision_mismatches += 1;
            }
            if measured {
                let mu = decision.matrix();
                let mut exits = 0;
                for (k, flows) in std_flows.iter_mut().enumerate() {
                    let q = standard.backlog[k];
                    let a = decision.arrivals()[k];
                    let b = decision.services()[k];
                    let served = (b as u64).min(q) as u32;
                    *flows = NodeFlows {
                        a_r: a,
                        a_f: 0,
                        a_r_admitted: a,
                        a_f_admitted: 0,
                        b_r: served,
                        b_f: b - served,
                        drops: 0,
                    };
                    // Packets that exist leave by the exit link first.
                    exits += (mu.get(k + 1, 0) as u64).min(q) as u32;
                }
                std_acc.observe(&standard.backlog, &standard.backlog, decision.cost(), &std_flows, exits);
            }
            standard.step(decision.action());
            if config.mode.floating() {
                for k in 0..n {
                    if standard.backlog[k] != floating.real[k] + floating.fake[k] {
                        out.identity_violations += 1;
                    }
                }
            }
        }
    }

    if config.mode.floating() {
        out.floating = Some(float_acc.finish(burn_in)?);
    }
    if config.mode.standard() {
        out.standard = Some(std_acc.finish(burn_in)?);
    }
    out.trace = trace;
    Ok(out)
}
