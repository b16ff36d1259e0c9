use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

/// On-disk scenario description. Service triples are kept as raw numbers so
/// that non-integral or negative amounts can be reported instead of rejected
/// by the parser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub nodes: u64,
    #[serde(default)]
    pub penalty_per_drop: f64,
    pub states: Vec<StateFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub probability: f64,
    pub actions: Vec<ActionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionFile {
    pub cost: f64,
    /// `[from, to, amount]` triples; absent pairs are zero.
    #[serde(default, serialize_with = "integral_triples")]
    pub services: Vec<[f64; 3]>,
}

impl ScenarioSpec {
    /// Indented JSON with each service triple kept on one line.
    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        let pretty = serde_json::to_string_pretty(self)?;
        let lines: Vec<&str> = pretty.lines().collect();
        let mut out = String::with_capacity(pretty.len());
        let mut k = 0;
        while k < lines.len() {
            let is_triple = lines[k].trim() == "["
                && k + 4 < lines.len()
                && lines[k + 4].trim().trim_end_matches(',') == "]"
                && lines[k + 1..k + 4].iter().all(|l| l.trim().trim_end_matches(',').parse::<f64>().is_ok());
            if is_triple {
                let items: Vec<&str> = lines[k + 1..k + 4].iter().map(|l| l.trim().trim_end_matches(',')).collect();
                let indent = &lines[k][..lines[k].len() - lines[k].trim_start().len()];
                let close = lines[k + 4].trim();
                out.push_str(&format!("{indent}[{}]{}\n", items.join(", "), &close[1..]));
                k += 5;
            } else {
                out.push_str(lines[k]);
                out.push('\n');
                k += 1;
            }
        }
        Ok(out)
    }
}

fn integral_triples<S: Serializer>(triples: &[[f64; 3]], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;

    let mut seq = s.serialize_seq(Some(triples.len()))?;
    for triple in triples {
        if triple.iter().all(|x| x.fract() == 0.0 && *x >= 0.0 && *x < 2f64.powi(53)) {
            seq.serialize_element(&triple.map(|x| x as u64))?;
        } else {
            seq.serialize_element(triple)?;
        }
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}: {}", v.location, v.message)?;
        }
        Ok(())
    }
}

const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Structural checks: probability normalization, nonempty action sets,
/// finite costs, and integral nonnegative service amounts with zero
/// self-service.
pub fn validate_scenario(spec: &ScenarioSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if spec.nodes < 1 {
        report.push("nodes", "at least one node is required");
    }
    if !spec.penalty_per_drop.is_finite() || spec.penalty_per_drop < 0.0 {
        report.push("penalty_per_drop", "must be a nonnegative real");
    }
    if spec.states.is_empty() {
        report.push("states", "at least one state is required");
    }

    let mut total = 0.0;
    for (m, state) in spec.states.iter().enumerate() {
        let loc = format!("states[{m}]");
        if !(0.0..=1.0).contains(&state.probability) {
            report.push(&loc, format!("probability {} outside [0, 1]", state.probability));
        }
        total += state.probability;
        if state.actions.is_empty() {
            report.push(&loc, "action set is empty");
        }
        for (k, action) in state.actions.iter().enumerate() {
            let loc = format!("{loc}.actions[{k}]");
            if !action.cost.is_finite() {
                report.push(&loc, "cost must be finite");
            }
            for (e, &[from, to, amount]) in action.services.iter().enumerate() {
                let loc = format!("{loc}.services[{e}]");
                for (label, index) in [("source", from), ("target", to)] {
                    if index.fract() != 0.0 || index < 0.0 || index > spec.nodes as f64 {
                        report.push(&loc, format!("{label} index {index} out of range 0..={}", spec.nodes));
                    }
                }
                if from == to && amount != 0.0 {
                    report.push(&loc, "self-service must be zero");
                }
                if amount < 0.0 {
                    report.push(&loc, format!("service amount {amount} must be nonnegative"));
                }
                if amount.fract() != 0.0 || !amount.is_finite() {
                    report.push(&loc, format!("service amount {amount} must be an integer"));
                } else if amount > u32::MAX as f64 {
                    report.push(&loc, format!("service amount {amount} too large"));
                }
            }
        }
    }
    if !spec.states.is_empty() && (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        report.push("states", format!("probabilities sum to {total}"));
    }
    report
}
