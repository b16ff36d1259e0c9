use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{run, RunConfig};
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::par::{self, Execution};
use crate::pathcheck::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[value(name = "buffer")]
    BufferSize,
    #[value(name = "v")]
    VParam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds_per_point: u64,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        if self.seeds_per_point == 0 {
            return Err(Error::Config("sweep needs at least one seed per point".into()));
        }
        if self.axis == SweepAxis::BufferSize && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::Config("buffer sizes must be positive integers".into()));
        }
        Ok(())
    }

    /// The run for value index `i` and seed index `s`: the axis value
    /// substituted into the base config, ChaCha stream `s`. Rows sharing a
    /// seed index therefore see the same state sequence at every value.
    pub fn row_config(&self, i: usize, s: u64) -> RunConfig {
        let mut config = self.base.clone();
        match self.axis {
            SweepAxis::BufferSize => config.buffer_size = self.values[i] as u64,
            SweepAxis::VParam => config.v_param = self.values[i],
        }
        config.stream = s;
        config.record_trace = false;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub seed: u64,
    pub stream: u64,
    pub metrics: MetricsReport,
}

/// Runs every `(value, seed index)` pair; rows come back ordered by value,
/// then seed index, whatever the execution mode.
pub fn sweep(scenario: &Scenario, spec: &SweepSpec, execution: Execution) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|i| (0..spec.seeds_per_point).map(move |s| (i, s)))
        .collect();
    let results = par::map(jobs, execution, |(i, s)| {
        let config = spec.row_config(i, s);
        let output = run(scenario, &config)?;
        let metrics = output.floating.or(output.standard).expect("a run reports at least one mode");
        Ok(SweepRow {
            axis_value: spec.values[i],
            seed: config.seed,
            stream: s,
            metrics,
        })
    });
    results.into_iter().collect()
}

/// Formats with 9 significant digits, `.` as decimal separator.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-5..15).contains(&magnitude) {
        let decimals = (8 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let n = rows.first().map_or(0, |r| r.metrics.nodes.len());
    let mut header = vec![
        "axis_value".to_string(),
        "seed".into(),
        "stream".into(),
        "avg_cost".into(),
        "penalized_cost".into(),
        "throughput".into(),
        "drop_rate".into(),
    ];
    header.extend((1..=n).map(|k| format!("delay_{k}")));
    header.extend((1..=n).map(|k| format!("occupancy_delay_{k}")));
    header.extend((1..=n).map(|k| format!("drop_rate_{k}")));
    out.write_record(&header)?;
    for row in rows {
        let m = &row.metrics;
        let mut record = vec![
            format_sig(row.axis_value),
            row.seed.to_string(),
            row.stream.to_string(),
            format_sig(m.avg_cost),
            format_sig(m.penalized_cost),
            format_sig(m.throughput),
            format_sig(m.drop_rate),
        ];
        record.extend(m.nodes.iter().map(|x| format_sig(x.per_hop_delay.slots)));
        record.extend(m.nodes.iter().map(|x| format_sig(x.occupancy_delay.slots)));
        record.extend(m.nodes.iter().map(|x| format_sig(x.avg_drops)));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses `"8,12,...,40"` (arithmetic progression from the first two terms)
/// or a plain comma-separated list.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("not a number: {s:?}")))
    };
    if let Some(pos) = parts.iter().position(|&p| p == "...") {
        if pos != 2 || parts.len() != 4 {
            return Err(Error::Config(format!("expected a,b,...,c but got {text:?}")));
        }
        let (a, b, c) = (parse(parts[0])?, parse(parts[1])?, parse(parts[3])?);
        let step = b - a;
        if step <= 0.0 || c < a {
            return Err(Error::Config(format!("range {text:?} must increase")));
        }
        let count = ((c - a) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|k| a + k as f64 * step).collect());
    }
    parts.into_iter().map(parse).collect()
}
