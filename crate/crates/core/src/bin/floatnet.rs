use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use floatnet::model::validate_scenario;
use floatnet::pathcheck::{check_trace, MetricsReport, TraceCheckReport};
use floatnet::sim::{
    build_line_network, fake_init_from_gamma, format_sig, parse_values, read_trace_csv, run, sweep, write_sweep_csv, write_trace_csv, LineVariant, Mode, RunConfig, SweepAxis,
    SweepSpec,
};
use floatnet::{solve_dual, Error, Execution, Scenario, SolverConfig};

#[derive(Parser)]
#[command(name = "floatnet", version, about = "Drift-plus-penalty control with floating queues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and print time-average metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "v")]
        v_param: f64,
        #[arg(long)]
        buffer: u64,
        #[arg(long)]
        horizon: u64,
        /// Defaults to ceil(10 V).
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long, value_enum, default_value_t = Mode::Floating)]
        mode: Mode,
        /// Initial fake backlogs, comma separated, or `dual` to start at the
        /// rounded multipliers.
        #[arg(long)]
        fake_init: Option<String>,
        /// Write the floating-queue trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a grid of buffer sizes or V values, several seeds per point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma list, or `a,b,...,c` for an arithmetic range.
        #[arg(long)]
        values: String,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Fixed V for a buffer sweep.
        #[arg(long = "v", default_value_t = 100.0)]
        v_param: f64,
        /// Fixed B for a V sweep.
        #[arg(long, default_value_t = 20)]
        buffer: u64,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// As for `run`; `dual` is only accepted on the buffer axis.
        #[arg(long)]
        fake_init: Option<String>,
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the deterministic dual for the optimal multipliers.
    Dual {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "v")]
        v_param: f64,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Verify the sample-path admission bounds on a recorded trace.
    Check {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "v")]
        v_param: f64,
        #[arg(long)]
        buffer: u64,
        /// Multipliers to check against; solved from the dual when absent.
        #[arg(long)]
        gamma: Option<String>,
        /// Minimum length of the non-decreasing segments to transform.
        #[arg(long, default_value_t = 2)]
        min_segment: usize,
        /// Print every violation, not only the first few per node.
        #[arg(long)]
        verbose: bool,
    },
    /// Write the four-node line network as a scenario file.
    GenLine {
        #[arg(long, value_enum, default_value_t = LineKind::Power)]
        variant: LineKind,
        #[arg(long, default_value_t = 0.92)]
        arrival: f64,
        #[arg(long, default_value_t = 0.9)]
        good: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LineKind {
    Power,
    Throughput,
}

enum Failure {
    Invalid(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let spec = serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let report = validate_scenario(&spec);
    if !report.is_valid() {
        let lines: Vec<String> = report.violations.iter().map(|v| format!("  {}: {}", v.location, v.message)).collect();
        return Err(Failure::Invalid(format!("{} is not a valid scenario:\n{}", path.display(), lines.join("\n"))));
    }
    Ok(Scenario::from_spec(&spec)?)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| Failure::Invalid(format!("{what}: cannot parse {s:?}"))))
        .collect()
}

fn execute(command: Command) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Run {
            config,
            v_param,
            buffer,
            horizon,
            burn_in,
            seed,
            stream,
            mode,
            fake_init,
            trace,
        } => {
            let scenario = load_scenario(&config)?;
            let mut run_config = RunConfig::new(v_param, buffer, horizon);
            run_config.burn_in = burn_in;
            run_config.seed = seed;
            run_config.stream = stream;
            run_config.mode = mode;
            run_config.fake_init = match fake_init.as_deref() {
                None => None,
                Some("dual") => Some(fake_init_from_gamma(&solve_dual(v_param, &scenario, &SolverConfig::default()).gamma)),
                Some(text) => Some(parse_list(text, "--fake-init")?),
            };
            run_config.record_trace = trace.is_some();
            if trace.is_some() && mode == Mode::Standard {
                return Err(Failure::Invalid("--trace records the floating queues; use --mode floating or both".into()));
            }
            let output = run(&scenario, &run_config)?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            writeln!(out, "slots={} burn_in={} seed={} stream={}", horizon, run_config.burn_in(), seed, stream)?;
            if let Some(m) = &output.floating {
                print_metrics(&mut out, "floating", m)?;
                writeln!(out, "floating.drop_events={}", output.drop_events)?;
                writeln!(out, "floating.drop_growth_violations={}", output.drop_growth_violations)?;
            }
            if let Some(m) = &output.standard {
                print_metrics(&mut out, "standard", m)?;
            }
            if mode == Mode::Both {
                writeln!(out, "decision_mismatches={}", output.decision_mismatches)?;
                writeln!(out, "identity_violations={}", output.identity_violations)?;
            }
            if let (Some(path), Some(record)) = (trace, &output.trace) {
                write_trace_csv(record, BufWriter::new(File::create(&path)?))?;
                writeln!(out, "trace={}", path.display())?;
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            v_param,
            buffer,
            horizon,
            burn_in,
            seed,
            fake_init,
            sequential,
            out: path,
        } => {
            let scenario = load_scenario(&config)?;
            let mut base = RunConfig::new(v_param, buffer, horizon);
            base.burn_in = burn_in;
            base.seed = seed;
            base.fake_init = match fake_init.as_deref() {
                None => None,
                Some("dual") if axis == SweepAxis::VParam => {
                    return Err(Failure::Invalid("--fake-init dual depends on V; give explicit values for a V sweep".into()));
                }
                Some("dual") => Some(fake_init_from_gamma(&solve_dual(v_param, &scenario, &SolverConfig::default()).gamma)),
                Some(text) => Some(parse_list(text, "--fake-init")?),
            };
            let spec = SweepSpec {
                base,
                axis,
                values: parse_values(&values)?,
                seeds_per_point: seeds,
            };
            let execution = if sequential { Execution::Sequential } else { Execution::default() };
            let rows = sweep(&scenario, &spec, execution)?;
            write_sweep_csv(&rows, BufWriter::new(File::create(&path)?))?;
            writeln!(out, "rows={} out={}", rows.len(), path.display())?;
        }
        Command::Dual {
            config,
            v_param,
            max_iters,
            tolerance,
        } => {
            let scenario = load_scenario(&config)?;
            let mut solver = SolverConfig {
                tolerance,
                ..SolverConfig::default()
            };
            if let Some(m) = max_iters {
                solver.max_iters = m;
            }
            let solution = solve_dual(v_param, &scenario, &solver);
            let gamma: Vec<String> = solution.gamma.iter().map(|&g| format_sig(g)).collect();
            writeln!(out, "gamma={}", gamma.join(","))?;
            writeln!(out, "dual_value={}", format_sig(solution.dual_value))?;
            writeln!(out, "residual={}", format_sig(solution.residual))?;
            writeln!(out, "subgradient_norm={}", format_sig(solution.subgradient_norm))?;
            writeln!(out, "iterations={}", solution.iterations)?;
            writeln!(out, "converged={}", solution.converged)?;
        }
        Command::Check {
            trace,
            config,
            v_param,
            buffer,
            gamma,
            min_segment,
            verbose,
        } => {
            let scenario = load_scenario(&config)?;
            let file = File::open(&trace).map_err(|e| Failure::Invalid(format!("{}: {e}", trace.display())))?;
            let record = read_trace_csv(BufReader::new(file), buffer)?;
            if record.node_count() != scenario.node_count() {
                return Err(Failure::Invalid(format!(
                    "trace has {} nodes, scenario has {}",
                    record.node_count(),
                    scenario.node_count()
                )));
            }
            let gamma = match gamma {
                Some(text) => parse_list(&text, "--gamma")?,
                None => solve_dual(v_param, &scenario, &SolverConfig::default()).gamma,
            };
            if gamma.len() != scenario.node_count() {
                return Err(Failure::Invalid(format!("--gamma has {} entries for {} nodes", gamma.len(), scenario.node_count())));
            }
            let report = check_trace(&record, &gamma, scenario.delta_max(), &[(0, record.len())], min_segment)?;
            print_check(&mut out, &gamma, &report, verbose)?;
            if !report.passed() {
                return Err(Failure::Violation(format!("{} violation(s)", report.violations())));
            }
        }
        Command::GenLine { variant, arrival, good, out: path } => {
            if !(0.0..=1.0).contains(&arrival) || !(0.0..=1.0).contains(&good) {
                return Err(Failure::Invalid("probabilities must lie in [0, 1]".into()));
            }
            let variant = match variant {
                LineKind::Power => LineVariant::PowerMin,
                LineKind::Throughput => LineVariant::ThroughputMax,
            };
            let text = build_line_network(arrival, good, variant).to_json_pretty().map_err(Error::from)?;
            match path {
                Some(p) => std::fs::write(&p, text)?,
                None => write!(out, "{text}")?,
            }
        }
    }
    Ok(())
}

fn print_metrics(out: &mut impl Write, prefix: &str, m: &MetricsReport) -> io::Result<()> {
    writeln!(out, "{prefix}.avg_cost={}", format_sig(m.avg_cost))?;
    writeln!(out, "{prefix}.penalized_cost={}", format_sig(m.penalized_cost))?;
    writeln!(out, "{prefix}.throughput={}", format_sig(m.throughput))?;
    writeln!(out, "{prefix}.drop_rate={}", format_sig(m.drop_rate))?;
    writeln!(out, "{prefix}.max_total_backlog={}", m.max_total_backlog)?;
    for node in &m.nodes {
        let flag = |f: bool| if f { " (no admissions)" } else { "" };
        writeln!(
            out,
            "{prefix}.node{}: drops={} delay={}{} occupancy_delay={} real_backlog={}",
            node.node,
            format_sig(node.avg_drops),
            format_sig(node.per_hop_delay.slots),
            flag(node.per_hop_delay.flagged),
            format_sig(node.occupancy_delay.slots),
            format_sig(node.avg_real_backlog),
        )?;
    }
    Ok(())
}

fn print_check(out: &mut impl Write, gamma: &[f64], report: &TraceCheckReport, verbose: bool) -> io::Result<()> {
    let pf = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let g: Vec<String> = gamma.iter().map(|&x| format_sig(x)).collect();
    writeln!(out, "slots={} gamma={}", report.slots, g.join(","))?;
    match &report.replay_error {
        None => writeln!(out, "PASS replay")?,
        Some(e) => writeln!(out, "FAIL replay: {e}")?,
    }
    for c in &report.cumulative {
        writeln!(out, "{} cumulative admission bound, node {}: {} >= {}", pf(c.holds), c.node, c.lhs, c.rhs)?;
    }
    for r in &report.intervals {
        writeln!(
            out,
            "{} interval checks, node {} [{}, {}]: low runs {}, pairs {} checked {} skipped {}, violations {}",
            pf(r.passed()),
            r.node,
            r.t0,
            r.end,
            r.low_runs,
            r.pairs,
            r.pairs_checked,
            r.pairs_skipped,
            r.violations.len()
        )?;
        let shown = if verbose { r.violations.len() } else { 5 };
        for v in r.violations.iter().take(shown) {
            writeln!(out, "  {:?} at slot {}: {}", v.kind, v.slot, v.detail)?;
        }
    }
    writeln!(
        out,
        "{} segment transform: {} segments, {} failures",
        pf(report.segment_failures.is_empty()),
        report.segments_checked,
        report.segment_failures.len()
    )?;
    for f in report.segment_failures.iter().take(if verbose { usize::MAX } else { 5 }) {
        writeln!(out, "  {f}")?;
    }
    writeln!(out, "{}", if report.passed() { "PASS" } else { "FAIL" })
}
