//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ewcell::persist::{export_slice, export_streamlines, extract_slice, load_cell, save_cell, CellFile, Quantity, StreamlineExport};
use ewcell::tracer::{trace_all, FieldSnapshot};
use ewcell::{Error, Execution, SolverState};

use crate::api::parse_axis;

#[derive(Debug, Parser)]
#[command(name = "ewcell", version, about = "Electrowinning cell potential and current-line simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the potential field and write it back to the cell file.
    Simulate(SimulateArgs),
    /// Trace current lines of a solved cell.
    Trace(TraceArgs),
    /// Extract one grid plane of a solved cell.
    Slice(SliceArgs),
    /// Print potential and current density at a point.
    Probe(ProbeArgs),
    /// Serve the HTTP interface.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Start from the stored potential instead of the initial guess.
    #[arg(long)]
    pub warm: bool,
    /// Output file; defaults to rewriting the input.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_arc_uni: Option<f64>,
    #[arg(long)]
    pub max_arc_bip: Option<f64>,
    /// Output file; defaults to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    pub file: PathBuf,
    /// x, y, z or 0, 1, 2.
    #[arg(long, value_parser = axis_arg)]
    pub axis: usize,
    #[arg(long)]
    pub index: usize,
    #[arg(long, value_parser = quantity_arg, default_value = "potential")]
    pub quantity: Quantity,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    pub file: PathBuf,
    /// Position in metres.
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub y: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub z: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "EWCELL_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Cell file to open; a demo cell is used otherwise.
    #[arg(long)]
    pub cell: Option<PathBuf>,
}

fn axis_arg(s: &str) -> Result<usize, String> {
    parse_axis(s).ok_or_else(|| format!("unknown axis {s:?}, expected x, y or z"))
}

fn quantity_arg(s: &str) -> Result<Quantity, String> {
    match s {
        "potential" => Ok(Quantity::Potential),
        "current" => Ok(Quantity::Current),
        _ => Err(format!("unknown quantity {s:?}, expected potential or current")),
    }
}

/// Failure of a command: a core error, or a solve that did not converge.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    NotConverged { iterations: usize, final_max_delta: f64 },
    Server(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::NotConverged {
                iterations,
                final_max_delta,
            } => write!(f, "not converged after {iterations} iterations (max delta {final_max_delta:e})"),
            CliError::Server(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn solved_state(file: &CellFile) -> Result<SolverState, Error> {
    file.state()?.filter(SolverState::has_solution).ok_or(Error::NotSolved)
}

pub fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let mut file = load_cell(&args.file)?;
    if let Some(t) = args.tol {
        file.solver.tolerance = t;
    }
    if let Some(m) = args.max_iter {
        file.solver.max_iterations = m;
    }
    let mut state = match (args.warm, file.state()?) {
        (true, Some(state)) => state,
        _ => SolverState::init(file.cell())?,
    };
    let report = state.solve(&file.solver)?;
    let out = CellFile::from_state(&state).with_configs(file.solver, file.trace);
    save_cell(args.output.as_ref().unwrap_or(&args.file), &out)?;
    log::info!("{} iterations, max delta {:e}", report.iterations, report.final_max_delta);
    if !report.converged {
        return Err(CliError::NotConverged {
            iterations: report.iterations,
            final_max_delta: report.final_max_delta,
        });
    }
    Ok(serde_json::to_string(&json!({
        "converged": report.converged,
        "iterations": report.iterations,
        "final_max_delta": report.final_max_delta,
        "total_iterations": state.iteration_count(),
        "floating": state
            .floating_potentials()
            .into_iter()
            .map(|(id, v)| json!({ "id": id, "metal_potential": v }))
            .collect::<Vec<_>>(),
    }))
    .expect("report serializes"))
}

pub fn trace(args: &TraceArgs) -> Result<String, CliError> {
    let file = load_cell(&args.file)?;
    let state = solved_state(&file)?;
    let mut config = file.trace_config();
    if let Some(d) = args.density {
        config.seed_density = d;
    }
    if let Some(t) = args.tol {
        config.tolerance = t;
    }
    if let Some(a) = args.max_arc_uni {
        config.max_arc_unipolar = a;
    }
    if let Some(a) = args.max_arc_bip {
        config.max_arc_bipolar = a;
    }
    let snapshot = FieldSnapshot::from_state(&state, Execution::Parallel)?;
    let groups = trace_all(&snapshot, &config, Execution::Parallel)?;
    let export = StreamlineExport::new(&groups, None);
    let summary = serde_json::to_string(&export.header).expect("header serializes");
    match &args.output {
        Some(path) => {
            export_streamlines(path, &export)?;
            Ok(summary)
        }
        None => Ok(export.to_json()?),
    }
}

pub fn slice(args: &SliceArgs) -> Result<String, CliError> {
    let file = load_cell(&args.file)?;
    let state = solved_state(&file)?;
    let slice = extract_slice(&state, args.axis, args.index, args.quantity)?;
    match &args.output {
        Some(path) => {
            export_slice(path, &slice)?;
            Ok(serde_json::to_string(&json!({ "axis": slice.axis, "index": slice.index, "dims": slice.dims }))
                .expect("summary serializes"))
        }
        None => Ok(slice.to_json()?),
    }
}

pub fn probe(args: &ProbeArgs) -> Result<String, CliError> {
    let file = load_cell(&args.file)?;
    let state = solved_state(&file)?;
    let snapshot = FieldSnapshot::from_state(&state, Execution::Parallel)?;
    let pos = [args.x, args.y, args.z];
    let grid = &snapshot.cell.grid;
    let sample = (snapshot.potential.sample(grid, pos), snapshot.current.sample(grid, pos));
    let (Ok(potential), Ok(current)) = sample else {
        return Err(Error::InvalidGeometry(format!("position {pos:?} is outside the cell")).into());
    };
    Ok(serde_json::to_string(&json!({
        "position": pos,
        "potential": potential,
        "current": current,
        "magnitude": current.iter().map(|c| c * c).sum::<f64>().sqrt(),
    }))
    .expect("probe serializes"))
}
