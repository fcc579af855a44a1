//! Command-line front end for `coneperc`.
//!
//! [`run_command`] does all the work so that tests can drive it in-process;
//! the binary only forwards `std::env::args` and the standard streams.

use std::ffi::OsString;
use std::fs;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use coneperc::bounds::{survival_bounds, SurvivalBounds};
use coneperc::hetero::{certify_survival, CertificationReport, HeteroEnvironment};
use coneperc::tree_sim::{
    estimate_survival, estimate_survival_with_threads, SimulationConfig, StopPolicy,
    SurvivalEstimate,
};
use coneperc::{parse_dist, RadiusDistribution};
use serde_json::{json, Map, Value};

pub mod args;

use args::{
    Axis, BoundsArgs, Cli, Command, Format, HeteroArgs, Mode, Output, SimFlags, SimulateArgs,
    SweepArgs, GRAMMAR,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_COMPUTE: i32 = 2;

/// Significant digits of every float in a report.
pub const REPORT_DIGITS: usize = 10;

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<coneperc::Error> for Failure {
    fn from(e: coneperc::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

/// Parses `argv` (without the program name), runs the command and writes
/// exactly one report to `out` or to `--output`. Diagnostics go to `err`.
/// Returns the process exit code: 0 on success, 1 on usage errors, 2 on
/// computation errors.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let full = std::iter::once(OsString::from("coneperc")).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(full) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}\n{GRAMMAR}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };

    match execute(cli.command) {
        Ok((text, path)) => {
            let written = match path {
                Some(path) => fs::write(&path, text.as_bytes())
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                    EXIT_COMPUTE
                }
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = write!(err, "error: {msg}\n\n{GRAMMAR}");
            EXIT_USAGE
        }
        Err(Failure::Compute(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_COMPUTE
        }
    }
}

type Rendered = (String, Option<std::path::PathBuf>);

fn execute(command: Command) -> Result<Rendered, Failure> {
    match command {
        Command::Bounds(a) => bounds(a),
        Command::Simulate(a) => simulate(a),
        Command::HeteroCheck(a) => hetero_check(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn usage_dist(spec: &str) -> Result<RadiusDistribution, Failure> {
    parse_dist(spec).map_err(|e| Failure::Usage(format!("invalid --dist {spec:?}: {e}")))
}

fn bounds(a: BoundsArgs) -> Result<Rendered, Failure> {
    let dist = usage_dist(&a.target.dist)?;
    let b = survival_bounds(&dist, a.target.d, a.target.graph)?;
    let mut record = Map::new();
    record.insert("command".into(), json!("bounds"));
    record.insert("graph".into(), json!(a.target.graph));
    record.insert("d".into(), json!(a.target.d));
    record.insert("dist".into(), json!(dist.to_string()));
    record.extend(bounds_fields(&b));
    record.insert(
        "witness".into(),
        serde_json::to_value(b.verdict.witness).expect("witness serializes"),
    );
    let csv_cols = [
        "graph", "d", "dist", "verdict", "rho", "psi", "lower", "upper",
    ];
    finish(record, &csv_cols, &a.output, Format::Json)
}

fn bounds_fields(b: &SurvivalBounds) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("verdict".into(), json!(b.verdict.outcome));
    m.insert("rho".into(), json!(b.rho));
    m.insert("psi".into(), json!(b.psi));
    m.insert("lower".into(), json!(b.lower));
    m.insert("upper".into(), json!(b.upper));
    m
}

fn sim_config(target: &args::Target, sim: &SimFlags) -> Result<SimulationConfig, Failure> {
    let gen_cap = sim.gen_cap.unwrap_or_else(|| sim.depth.saturating_mul(4));
    let policy = StopPolicy::new(sim.depth, gen_cap, sim.node_cap)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(SimulationConfig {
        graph: target.graph,
        d: target.d,
        policy,
        n_runs: sim.runs,
        master_seed: sim.seed,
    })
}

fn run_sim(
    config: &SimulationConfig,
    dist: &RadiusDistribution,
    threads: Option<usize>,
) -> Result<SurvivalEstimate, Failure> {
    Ok(match threads {
        Some(t) => estimate_survival_with_threads(config, dist, t)?,
        None => estimate_survival(config, dist)?,
    })
}

fn simulate(a: SimulateArgs) -> Result<Rendered, Failure> {
    let dist = usage_dist(&a.target.dist)?;
    let config = sim_config(&a.target, &a.sim)?;
    let est = run_sim(&config, &dist, a.sim.threads)?;
    let mut record = Map::new();
    record.insert("command".into(), json!("simulate"));
    record.insert("graph".into(), json!(config.graph));
    record.insert("d".into(), json!(config.d));
    record.insert("dist".into(), json!(dist.to_string()));
    record.insert("depth".into(), json!(config.policy.depth_target));
    record.insert("gen_cap".into(), json!(config.policy.generation_cap));
    record.insert("node_cap".into(), json!(config.policy.node_cap));
    record.insert("seed".into(), json!(config.master_seed));
    record.extend(estimate_fields(&est, true));
    let csv_cols = [
        "graph",
        "d",
        "dist",
        "depth",
        "gen_cap",
        "node_cap",
        "seed",
        "point",
        "ci_low",
        "ci_high",
        "n_runs",
        "reached_depth",
        "frontier_died",
        "cap_hits",
    ];
    finish(record, &csv_cols, &a.output, Format::Json)
}

fn estimate_fields(est: &SurvivalEstimate, full: bool) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("point".into(), json!(est.point));
    m.insert("ci_low".into(), json!(est.ci_low));
    m.insert("ci_high".into(), json!(est.ci_high));
    m.insert("n_runs".into(), json!(est.n_runs));
    if full {
        m.insert("reached_depth".into(), json!(est.reached_depth));
        m.insert("frontier_died".into(), json!(est.frontier_died));
    }
    m.insert("cap_hits".into(), json!(est.cap_hits));
    m
}

fn hetero_check(a: HeteroArgs) -> Result<Rendered, Failure> {
    let env = HeteroEnvironment::from_file(&a.env_file)?;
    let j_max = a
        .j_max
        .unwrap_or_else(|| (env.tail_start() + env.period() as u64).max(1));
    let candidates: Vec<u32> = match a.n {
        Some(n) => vec![n],
        None => (1..=a.n_max).collect(),
    };
    let mut report: Option<CertificationReport> = None;
    for &n in &candidates {
        let r = certify_survival(&env, a.d, n, j_max)?;
        let done = r.certified;
        report = Some(r);
        if done {
            break;
        }
    }
    let report = report.expect("at least one block length is tried");
    let mut record = Map::new();
    record.insert("command".into(), json!("hetero-check"));
    record.insert("env_file".into(), json!(a.env_file.display().to_string()));
    record.insert("d".into(), json!(a.d));
    record.insert("n".into(), json!(report.n));
    record.insert("certified".into(), json!(report.certified));
    record.insert("liminf_estimate".into(), json!(report.liminf_estimate));
    record.insert("tail_start_block".into(), json!(report.tail_start_block));
    record.insert("tail_period".into(), json!(report.tail_period));
    record.insert("j_max".into(), json!(report.j_max));
    record.insert("c_values".into(), json!(report.c_values));
    let csv_cols = [
        "d",
        "n",
        "certified",
        "liminf_estimate",
        "tail_start_block",
        "tail_period",
        "j_max",
    ];
    finish(record, &csv_cols, &a.output, Format::Json)
}

fn sweep(a: SweepArgs) -> Result<Rendered, Failure> {
    let spec = &a.target.dist;
    if spec.matches('?').count() != 1 {
        return Err(Failure::Usage(format!(
            "--dist {spec:?} must contain exactly one '?' placeholder for the swept value"
        )));
    }
    let Axis { name, .. } = &a.axis;
    let values = a.axis.values();
    // Validate every grid point before computing anything.
    let grid = values
        .iter()
        .map(|&v| {
            let text = v.to_string();
            usage_dist(&spec.replace('?', &text)).map(|dist| (text, dist))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let config = match a.mode {
        Mode::Simulate => Some(sim_config(&a.target, &a.sim)?),
        Mode::Bounds => None,
    };

    let mut rows = Vec::with_capacity(grid.len());
    for (text, dist) in &grid {
        let mut row = Map::new();
        let param: f64 = text.parse().expect("grid value round-trips");
        row.insert(name.clone(), json!(param));
        match &config {
            None => row.extend(bounds_fields(&survival_bounds(
                dist,
                a.target.d,
                a.target.graph,
            )?)),
            Some(config) => row.extend(estimate_fields(
                &run_sim(config, dist, a.sim.threads)?,
                false,
            )),
        }
        rows.push(row);
    }

    let columns: Vec<&str> = match a.mode {
        Mode::Bounds => vec![name, "verdict", "rho", "psi", "lower", "upper"],
        Mode::Simulate => vec![name, "point", "ci_low", "ci_high", "n_runs", "cap_hits"],
    };
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = csv_line(columns.iter().map(|c| c.to_string()));
            for row in &rows {
                s.push_str(&csv_line(columns.iter().map(|c| csv_cell(&row[*c]))));
            }
            s
        }
        Format::Json => {
            let mut record = Map::new();
            record.insert("command".into(), json!("sweep"));
            record.insert("graph".into(), json!(a.target.graph));
            record.insert("d".into(), json!(a.target.d));
            record.insert("dist".into(), json!(spec));
            record.insert(
                "mode".into(),
                json!(match a.mode {
                    Mode::Bounds => "bounds",
                    Mode::Simulate => "simulate",
                }),
            );
            record.insert(
                "axis".into(),
                json!({"name": name, "start": a.axis.start, "stop": a.axis.stop, "steps": a.axis.steps}),
            );
            record.insert(
                "rows".into(),
                Value::Array(rows.into_iter().map(Value::Object).collect()),
            );
            json_text(Value::Object(record))
        }
    };
    Ok((text, a.output.output))
}

/// Renders a single-record report in the requested format.
fn finish(
    record: Map<String, Value>,
    csv_cols: &[&str],
    output: &Output,
    default: Format,
) -> Result<Rendered, Failure> {
    let text = match output.format.unwrap_or(default) {
        Format::Json => json_text(Value::Object(record)),
        Format::Csv => {
            let mut s = csv_line(csv_cols.iter().map(|c| c.to_string()));
            s.push_str(&csv_line(csv_cols.iter().map(|c| csv_cell(&record[*c]))));
            s
        }
    };
    Ok((text, output.output.clone()))
}

fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            json!(args::round_sig(x, REPORT_DIGITS))
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect())
        }
        other => other,
    }
}

fn json_text(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_floats(v)).expect("report serializes");
    s.push('\n');
    s
}

/// Plain decimal for moderate magnitudes, scientific otherwise.
fn format_float(x: f64) -> String {
    let x = args::round_sig(x, REPORT_DIGITS);
    if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format_float(x),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_line(cells: impl Iterator<Item = String>) -> String {
    let quoted: Vec<String> = cells
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c
            }
        })
        .collect();
    let mut line = quoted.join(",");
    line.push('\n');
    line
}
