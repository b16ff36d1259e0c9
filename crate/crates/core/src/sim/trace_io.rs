use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathcheck::{NodeTrace, TraceRecord};
use crate::queues::step_floating_node;

pub const TRACE_COLUMNS: [&str; 14] = [
    "t", "n", "state", "action", "a_r", "a_f", "a_r_adm", "a_f_adm", "b_r", "b_f", "q_real", "q_fake", "cost", "drops",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t: u64,
    n: u64,
    state: u32,
    action: u32,
    a_r: u32,
    a_f: u32,
    a_r_adm: u32,
    a_f_adm: u32,
    b_r: u32,
    b_f: u32,
    q_real: u64,
    q_fake: u64,
    cost: f64,
    drops: u32,
}

/// One row per (slot, node), slots outermost. Backlogs are those at the
/// start of the slot.
pub fn write_trace_csv<W: Write>(trace: &TraceRecord, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for t in 0..trace.len() {
        for (k, node) in trace.nodes.iter().enumerate() {
            out.serialize(Row {
                t: t as u64,
                n: k as u64 + 1,
                state: trace.states[t],
                action: trace.actions[t],
                a_r: node.a_r[t],
                a_f: node.a_f[t],
                a_r_adm: node.a_r_adm[t],
                a_f_adm: node.a_f_adm[t],
                b_r: node.b_r[t],
                b_f: node.b_f[t],
                q_real: node.q_real[t],
                q_fake: node.q_fake[t],
                cost: trace.costs[t],
                drops: node.drops(t),
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. The file has no row for the
/// backlog after the last slot, so it is rebuilt by replaying that slot.
pub fn read_trace_csv<R: Read>(reader: R, buffer_size: u64) -> Result<TraceRecord> {
    let mut input = csv::Reader::from_reader(reader);
    let headers = input.headers()?.clone();
    if headers.iter().ne(TRACE_COLUMNS.iter().copied()) {
        return Err(Error::Trace(format!(
            "expected columns {}, found {}",
            TRACE_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows = input.deserialize::<Row>().collect::<std::result::Result<Vec<Row>, _>>()?;
    let n = rows.iter().take_while(|r| r.t == 0).count();
    if n == 0 {
        return Err(Error::Trace("trace has no rows".into()));
    }
    if rows.len() % n != 0 {
        return Err(Error::Trace("last slot is missing node rows".into()));
    }
    let mut trace = TraceRecord {
        buffer_size,
        states: Vec::with_capacity(rows.len() / n),
        actions: Vec::with_capacity(rows.len() / n),
        costs: Vec::with_capacity(rows.len() / n),
        nodes: vec![NodeTrace::default(); n],
    };
    for (i, row) in rows.iter().enumerate() {
        let (t, k) = (i / n, i % n);
        let line = i + 2;
        if row.t != t as u64 || row.n != k as u64 + 1 {
            return Err(Error::Trace(format!(
                "row {line}: expected t={t} n={}, found t={} n={}",
                k + 1,
                row.t,
                row.n
            )));
        }
        if k == 0 {
            trace.states.push(row.state);
            trace.actions.push(row.action);
            trace.costs.push(row.cost);
        } else if trace.states[t] != row.state || trace.actions[t] != row.action || trace.costs[t] != row.cost {
            return Err(Error::Trace(format!("row {line}: slot fields differ between nodes")));
        }
        if row.a_r_adm > row.a_r || row.drops != row.a_r - row.a_r_adm {
            return Err(Error::Trace(format!("row {line}: drops must equal a_r - a_r_adm")));
        }
        let node = &mut trace.nodes[k];
        node.a_r.push(row.a_r);
        node.a_f.push(row.a_f);
        node.a_r_adm.push(row.a_r_adm);
        node.a_f_adm.push(row.a_f_adm);
        node.b_r.push(row.b_r);
        node.b_f.push(row.b_f);
        node.q_real.push(row.q_real);
        node.q_fake.push(row.q_fake);
    }
    for (k, node) in trace.nodes.iter_mut().enumerate() {
        let t = node.len() - 1;
        let (real, fake, _) = step_floating_node(
            node.q_real[t],
            node.q_fake[t],
            buffer_size,
            node.a_r[t],
            node.a_f[t],
            node.b_r[t] + node.b_f[t],
        )
        .map_err(|e| Error::Consistency {
            node: k + 1,
            detail: format!("slot {t}: {e}"),
        })?;
        node.q_real.push(real);
        node.q_fake.push(fake);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scenario;
    use crate::sim::{build_line_network, run, LineVariant, RunConfig};

    fn recorded(horizon: u64) -> TraceRecord {
        let scenario = Scenario::from_spec(&build_line_network(0.92, 0.9, LineVariant::PowerMin)).unwrap();
        let mut config = RunConfig::new(5.0, 4, horizon);
        config.record_trace = true;
        run(&scenario, &config).unwrap().trace.unwrap()
    }

    #[test]
    fn round_trip() {
        let trace = recorded(500);
        let mut bytes = Vec::new();
        write_trace_csv(&trace, &mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_COLUMNS.join(","));
        assert_eq!(text.lines().count(), 1 + 500 * 4);
        let back = read_trace_csv(bytes.as_slice(), trace.buffer_size).unwrap();
        assert_eq!(back, trace);
        back.replay_check().unwrap();
    }

    #[test]
    fn single_slot_round_trip() {
        let trace = recorded(60).slice(59, 60);
        let mut bytes = Vec::new();
        write_trace_csv(&trace, &mut bytes).unwrap();
        assert_eq!(read_trace_csv(bytes.as_slice(), trace.buffer_size).unwrap(), trace);
    }

    #[test]
    fn truncated_and_reordered_files_fail() {
        let trace = recorded(60);
        let mut bytes = Vec::new();
        write_trace_csv(&trace, &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let truncated = lines[..lines.len() - 1].join("\n");
        assert!(read_trace_csv(truncated.as_bytes(), 4).is_err());
        let mut swapped = lines.clone();
        swapped.swap(1, 2);
        assert!(read_trace_csv(swapped.join("\n").as_bytes(), 4).is_err());
        assert!(read_trace_csv("t,n\n".as_bytes(), 4).is_err());
    }
}
