//! Standard queue dynamics and the floating-queue transformation.
//!
//! A floating queue splits a standard queue into a real queue holding at most
//! `B` actual packets and an unbounded fake-queue counter. Services take real
//! packets first; real arrivals that do not fit in the buffer are dropped and
//! re-enter as fake packets. The sum `Q^r + Q^f` evolves exactly like the
//! standard backlog, so the controller can keep using it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionSpec, ServiceMatrix};

/// `Q(t+1) = max(Q(t) - b, 0) + a`.
pub fn standard_update(q: u64, arrivals: u32, services: u32) -> u64 {
    q.saturating_sub(services as u64) + arrivals as u64
}

/// Real packets are served before fake ones: `b^r = min(Q^r, b)`,
/// `b^f = b - b^r`.
pub fn split_services(q_real: u64, services: u32) -> (u32, u32) {
    let real = q_real.min(services as u64) as u32;
    (real, services - real)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admission {
    pub admitted_real: u32,
    pub drops: u32,
    pub admitted_fake: u32,
}

/// Admits real arrivals up to the headroom `B - Q^r(t)`; the excess is
/// dropped and counted as fake arrivals. Headroom is measured against the
/// backlog at the start of the slot.
pub fn admit_arrivals(q_real: u64, buffer: u64, real: u32, fake: u32) -> Admission {
    let headroom = buffer.saturating_sub(q_real);
    let admitted_real = headroom.min(real as u64) as u32;
    let drops = real - admitted_real;
    Admission {
        admitted_real,
        drops,
        admitted_fake: fake + drops,
    }
}

/// Per-node view of one slot of the floating-queue algorithm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFlows {
    pub a_r: u32,
    pub a_f: u32,
    pub a_r_admitted: u32,
    pub a_f_admitted: u32,
    pub b_r: u32,
    pub b_f: u32,
    pub drops: u32,
}

impl NodeFlows {
    pub fn arrivals(&self) -> u32 {
        self.a_r + self.a_f
    }

    pub fn services(&self) -> u32 {
        self.b_r + self.b_f
    }
}

/// Real/fake decomposition of one slot's flows, node- and link-level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSplit {
    pub nodes: Vec<NodeFlows>,
    pub mu_r: ServiceMatrix,
    pub mu_f: ServiceMatrix,
}

impl FlowSplit {
    pub fn new(node_count: usize) -> Self {
        Self {
            nodes: vec![NodeFlows::default(); node_count],
            mu_r: ServiceMatrix::zeros(node_count),
            mu_f: ServiceMatrix::zeros(node_count),
        }
    }

    /// Real packets leaving the network this slot, `sum_n mu^r_n0`.
    pub fn real_departures(&self) -> u64 {
        (1..=self.nodes.len()).map(|n| self.mu_r.get(n, 0) as u64).sum()
    }

    /// Checks the conservation identities tying node and link views together.
    pub fn check_invariants(&self, mu: &ServiceMatrix) -> Result<()> {
        let n = self.nodes.len();
        for i in 0..=n {
            for j in 0..=n {
                if self.mu_r.get(i, j) + self.mu_f.get(i, j) != mu.get(i, j) {
                    return Err(Error::FlowConservation {
                        node: i,
                        detail: format!("mu_r + mu_f != mu on link ({i}, {j})"),
                    });
                }
            }
            if i > 0 && self.mu_f.get(0, i) != 0 {
                return Err(Error::FlowConservation {
                    node: i,
                    detail: "exogenous arrivals must be real".into(),
                });
            }
        }
        for (k, flows) in self.nodes.iter().enumerate() {
            let node = k + 1;
            let fail = |detail: &str| {
                Err(Error::FlowConservation {
                    node,
                    detail: detail.into(),
                })
            };
            if flows.a_r != self.mu_r.inflow(node) || flows.a_f != self.mu_f.inflow(node) {
                return fail("aggregate arrivals differ from link decomposition");
            }
            if flows.b_r != self.mu_r.outflow(node) || flows.b_f != self.mu_f.outflow(node) {
                return fail("aggregate services differ from link decomposition");
            }
            if flows.a_r_admitted + flows.a_f_admitted != flows.a_r + flows.a_f {
                return fail("admission does not conserve arrivals");
            }
            if flows.drops != flows.a_r - flows.a_r_admitted {
                return fail("drops differ from rejected real arrivals");
            }
        }
        Ok(())
    }
}

/// Splits each internal node's outgoing links into real and fake parts.
///
/// `node_services[n - 1] = (b^r_n, b^f_n)`. Real packets fill outgoing links
/// in ascending target order, exit link first. Exogenous arrivals are real.
pub fn decompose_link_flows(mu: &ServiceMatrix, node_services: &[(u32, u32)]) -> Result<(ServiceMatrix, ServiceMatrix)> {
    let n = mu.node_count();
    let mut mu_r = ServiceMatrix::zeros(n);
    let mut mu_f = ServiceMatrix::zeros(n);
    decompose_into(mu, node_services.iter().copied(), &mut mu_r, &mut mu_f)?;
    Ok((mu_r, mu_f))
}

fn decompose_into(
    mu: &ServiceMatrix,
    node_services: impl Iterator<Item = (u32, u32)>,
    mu_r: &mut ServiceMatrix,
    mu_f: &mut ServiceMatrix,
) -> Result<()> {
    let n = mu.node_count();
    for j in 0..=n {
        mu_r.set(0, j, mu.get(0, j));
        mu_f.set(0, j, 0);
    }
    for (k, (b_r, b_f)) in node_services.enumerate() {
        let node = k + 1;
        let total = mu.outflow(node);
        if total != b_r + b_f {
            return Err(Error::FlowConservation {
                node,
                detail: format!("links carry {total} but b_r + b_f = {}", b_r + b_f),
            });
        }
        let mut real_left = b_r;
        for (j, &amount) in mu.row(node).iter().enumerate() {
            let real = amount.min(real_left);
            real_left -= real;
            mu_r.set(node, j, real);
            mu_f.set(node, j, amount - real);
        }
    }
    Ok(())
}

/// One node's update: split services, admit arrivals, update both
/// counters. Returns the new `(Q^r, Q^f)` and the slot's flows.
pub fn step_floating_node(
    q_real: u64,
    q_fake: u64,
    buffer: u64,
    a_r: u32,
    a_f: u32,
    services: u32,
) -> Result<(u64, u64, NodeFlows)> {
    let (b_r, b_f) = split_services(q_real, services);
    let admission = admit_arrivals(q_real, buffer, a_r, a_f);
    let flows = NodeFlows {
        a_r,
        a_f,
        a_r_admitted: admission.admitted_real,
        a_f_admitted: admission.admitted_fake,
        b_r,
        b_f,
        drops: admission.drops,
    };
    let (real, fake) = apply_node(q_real, q_fake, buffer, &flows).map_err(|detail| Error::Consistency { node: 0, detail })?;
    Ok((real, fake, flows))
}

fn apply_node(q_real: u64, q_fake: u64, buffer: u64, flows: &NodeFlows) -> Result<(u64, u64), String> {
    let real = (q_real + flows.a_r_admitted as u64)
        .checked_sub(flows.b_r as u64)
        .filter(|&r| r <= buffer)
        .ok_or_else(|| {
            format!(
                "real backlog leaves [0, {buffer}]: {q_real} - {} + {}",
                flows.b_r, flows.a_r_admitted
            )
        })?;
    let fake = standard_update(q_fake, flows.a_f_admitted, flows.b_f);
    Ok((real, fake))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StandardQueueState {
    pub backlog: Vec<u64>,
}

impl StandardQueueState {
    pub fn new(backlog: Vec<u64>) -> Self {
        Self { backlog }
    }

    pub fn zeros(node_count: usize) -> Self {
        Self::new(vec![0; node_count])
    }

    pub fn step(&mut self, action: &ActionSpec) {
        for ((q, &a), &b) in self.backlog.iter_mut().zip(action.arrivals()).zip(action.departures()) {
            *q = standard_update(*q, a, b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatingQueueState {
    pub real: Vec<u64>,
    pub fake: Vec<u64>,
    pub buffer_size: u64,
}

impl FloatingQueueState {
    pub fn new(buffer_size: u64, fake_init: Vec<u64>) -> Self {
        assert!(buffer_size >= 1, "buffer size must be positive");
        Self {
            real: vec![0; fake_init.len()],
            fake: fake_init,
            buffer_size,
        }
    }

    pub fn node_count(&self) -> usize {
        self.real.len()
    }

    /// `Q^r + Q^f`, the backlog the controller observes.
    pub fn total(&self) -> Vec<u64> {
        self.real.iter().zip(&self.fake).map(|(r, f)| r + f).collect()
    }

    pub fn total_into(&self, out: &mut [u64]) {
        for ((o, r), f) in out.iter_mut().zip(&self.real).zip(&self.fake) {
            *o = r + f;
        }
    }

    /// Advances one slot under service matrix `mu`.
    pub fn step(&mut self, mu: &ServiceMatrix) -> Result<FlowSplit> {
        let mut split = FlowSplit::new(self.node_count());
        self.step_into(mu, &mut split)?;
        Ok(split)
    }

    /// As [`step`](Self::step), reusing `split`'s storage.
    pub fn step_into(&mut self, mu: &ServiceMatrix, split: &mut FlowSplit) -> Result<()> {
        let n = self.node_count();
        let real = &self.real;
        let services = (1..=n).map(|node| split_services(real[node - 1], mu.outflow(node)));
        decompose_into(mu, services, &mut split.mu_r, &mut split.mu_f)?;
        for node in 1..=n {
            let flows = &mut split.nodes[node - 1];
            flows.b_r = split.mu_r.outflow(node);
            flows.b_f = split.mu_f.outflow(node);
        }
        for node in 1..=n {
            let a_r = split.mu_r.inflow(node);
            let a_f = split.mu_f.inflow(node);
            let q_real = self.real[node - 1];
            let admission = admit_arrivals(q_real, self.buffer_size, a_r, a_f);
            let flows = &mut split.nodes[node - 1];
            flows.a_r = a_r;
            flows.a_f = a_f;
            flows.a_r_admitted = admission.admitted_real;
            flows.a_f_admitted = admission.admitted_fake;
            flows.drops = admission.drops;
        }
        for (k, flows) in split.nodes.iter().enumerate() {
            let (real, fake) = apply_node(self.real[k], self.fake[k], self.buffer_size, flows)
                .map_err(|detail| Error::Consistency { node: k + 1, detail })?;
            self.real[k] = real;
            self.fake[k] = fake;
        }
        Ok(())
    }
}

/// Applies `Q^r <- Q^r - b^r + a^r'` and `Q^f <- max(Q^f - b^f, 0) + a^f'`.
pub fn floating_update(state: &FloatingQueueState, split: &FlowSplit) -> Result<FloatingQueueState> {
    let mut next = state.clone();
    for (k, flows) in split.nodes.iter().enumerate() {
        let (real, fake) = apply_node(state.real[k], state.fake[k], state.buffer_size, flows)
            .map_err(|detail| Error::Consistency { node: k + 1, detail })?;
        next.real[k] = real;
        next.fake[k] = fake;
    }
    Ok(next)
}
