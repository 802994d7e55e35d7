//! Single-user simulation session shared by the HTTP handlers.
//!
//! Geometry and the published solver state live behind one mutex; the run
//! status lives behind a second one that is only ever held briefly, so
//! status polling never waits on a solve.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use ewcell::persist::{extract_slice, CellFile, NamedColorMap, Quantity, ShadingRefs, Slice, StreamlineExport};
use ewcell::shade::{autofocus, ColorMap, LightTable, LightingParams, DEFAULT_FOV};
use ewcell::solver::{DepositFace, FluxBalance};
use ewcell::tracer::{trace_all, FieldSnapshot, TraceField};
use ewcell::{
    CellGeometry, Electrode, Error, Execution, GridSpec, IndexBox, PolarizationParams, SolverConfig, SolverState,
    Streamline, TraceConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Idle,
    Stepping,
    Running,
    Converged,
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatingPotential {
    pub id: usize,
    pub metal_potential: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub status: RunStatus,
    pub iteration_count: usize,
    /// Largest change of the latest iteration; absent before the first one.
    pub last_max_delta: Option<f64>,
    pub tolerance: f64,
    /// Whether a potential field is available for result queries.
    pub solved: bool,
    pub floating: Vec<FloatingPotential>,
}

#[derive(Debug)]
pub enum SessionError {
    /// A background run owns the solver.
    Busy,
    NotFound { what: &'static str, id: usize },
    Invalid(String),
    Core(Error),
}

impl std::fmt::Display for SessionError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionError::Busy => f.write_str("a run is in progress"),
            SessionError::NotFound { what, id } => write!(f, "{what} {id} not found"),
            SessionError::Invalid(msg) => f.write_str(msg),
            SessionError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for SessionError {}

impl From<Error> for SessionError {
    fn from(e: Error) -> Self {
        SessionError::Core(e)
    }
}

pub type SessionResult<T> = Result<T, SessionError>;

/// Partial electrode edit. `origin` and `dims` are in grid points and
/// intervals; moving a bipolar electrode moves its split with it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodePatch {
    pub origin: Option<[usize; 3]>,
    pub dims: Option<[usize; 3]>,
    pub metal_potential: Option<f64>,
    pub polarization: Option<PolarizationParams>,
    pub split: Option<usize>,
    pub floating: Option<bool>,
}

impl ElectrodePatch {
    fn apply(&self, e: &mut Electrode) -> SessionResult<()> {
        let lo = self.origin.unwrap_or(e.bounds.lo);
        let dims = self.dims.unwrap_or(e.bounds.intervals());
        if dims.contains(&0) {
            return Err(SessionError::Invalid("electrode dims must be at least 1 interval".into()));
        }
        if let (Some(split), None) = (e.split, self.split) {
            let shifted = (split + lo[0]).checked_sub(e.bounds.lo[0]);
            e.split = shifted.map(|s| s.min(lo[0] + dims[0] - 1));
        }
        e.bounds = IndexBox::new(lo, [lo[0] + dims[0], lo[1] + dims[1], lo[2] + dims[2]]);
        if let Some(v) = self.metal_potential {
            e.metal_potential = v;
        }
        if let Some(p) = self.polarization {
            e.polarization = p;
        }
        if let Some(s) = self.split {
            e.split = Some(s);
        }
        if let Some(f) = self.floating {
            e.floating = f;
        }
        Ok(())
    }
}

/// Overrides applied to the session trace settings for one request.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraceRequest {
    pub density: Option<f64>,
    pub max_arc_unipolar: Option<f64>,
    pub max_arc_bipolar: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub position: [f64; 3],
    pub potential: f64,
    pub current: [f64; 3],
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deposit {
    pub electrode: usize,
    pub faces: Vec<DepositFace>,
    pub flux: FluxBalance,
}

struct Session {
    cell: CellGeometry,
    solver: SolverConfig,
    trace: TraceConfig,
    state: Option<SolverState>,
    snapshot: Option<Arc<FieldSnapshot>>,
    last_trace: Option<Arc<Vec<Vec<Streamline>>>>,
}

impl Session {
    fn invalidate(&mut self) {
        self.state = None;
        self.snapshot = None;
        self.last_trace = None;
    }

    fn publish(&mut self, state: SolverState) {
        self.state = Some(state);
        self.snapshot = None;
        self.last_trace = None;
    }
}

pub struct Shared {
    session: Mutex<Session>,
    status: Mutex<StatusReport>,
    cancel: AtomicBool,
}

/// Outcome of a block of iterations.
enum Chunk {
    Converged,
    Diverged,
    Continue,
}

fn iterate(state: &mut SolverState, count: usize, tolerance: f64) -> Chunk {
    for _ in 0..count {
        match state.run_iteration() {
            Ok(delta) if delta <= tolerance => return Chunk::Converged,
            Ok(_) => {}
            Err(_) => return Chunk::Diverged,
        }
    }
    Chunk::Continue
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn report(status: RunStatus, state: Option<&SolverState>, tolerance: f64) -> StatusReport {
    StatusReport {
        status,
        iteration_count: state.map_or(0, SolverState::iteration_count),
        last_max_delta: state
            .filter(|s| s.iteration_count() > 0)
            .map(SolverState::last_max_delta)
            .filter(|d| d.is_finite()),
        tolerance,
        solved: state.is_some_and(SolverState::has_solution),
        floating: state
            .map(|s| {
                s.floating_potentials()
                    .into_iter()
                    .map(|(id, metal_potential)| FloatingPotential { id, metal_potential })
                    .collect()
            })
            .unwrap_or_default(),
    }
}

/// A small cell with a centred bipolar plate, used when no file is given.
pub fn default_cell() -> CellGeometry {
    CellGeometry::new(GridSpec::new(22, 11, 11, 0.01).expect("valid grid"), 50.0)
        .with_electrode(Electrode::anode(IndexBox::new([0, 0, 0], [1, 10, 10]), 3.0))
        .with_electrode(Electrode::cathode(IndexBox::new([20, 0, 0], [21, 10, 10]), 0.0))
        .with_electrode(
            Electrode::bipolar(IndexBox::new([10, 2, 2], [11, 8, 8]), 10)
                .with_polarization(PolarizationParams::new(0.89, 1e-5, 1e-5)),
        )
}

impl Shared {
    /// Session over a cell file; a stored potential becomes the warm state.
    pub fn new(file: CellFile) -> SessionResult<Arc<Self>> {
        file.validate()?;
        file.solver.validate()?;
        let cell = file.cell();
        let trace = file.trace_config();
        trace.validate(cell.grid.h)?;
        let state = file.state()?;
        let status = report(RunStatus::Idle, state.as_ref(), file.solver.tolerance);
        Ok(Arc::new(Shared {
            session: Mutex::new(Session {
                cell,
                solver: file.solver,
                trace,
                state,
                snapshot: None,
                last_trace: None,
            }),
            status: Mutex::new(status),
            cancel: AtomicBool::new(false),
        }))
    }

    pub fn status(&self) -> StatusReport {
        lock(&self.status).clone()
    }

    fn set_status(&self, session: &Session, status: RunStatus) -> StatusReport {
        let r = report(status, session.state.as_ref(), session.solver.tolerance);
        *lock(&self.status) = r.clone();
        r
    }

    fn running(&self) -> bool {
        lock(&self.status).status == RunStatus::Running
    }

    /// Locks the session for a geometry change, refusing while a run is active.
    fn edit(&self) -> SessionResult<MutexGuard<'_, Session>> {
        let session = lock(&self.session);
        if self.running() {
            return Err(SessionError::Busy);
        }
        Ok(session)
    }

    fn commit(&self, session: &mut Session, cell: CellGeometry) -> SessionResult<()> {
        cell.validate()?;
        session.cell = cell;
        session.invalidate();
        self.set_status(session, RunStatus::Idle);
        Ok(())
    }

    /// Geometry, configs and progress, with the potential field on request.
    pub fn cell_file(&self, with_field: bool) -> CellFile {
        let session = lock(&self.session);
        let file = match (&session.state, with_field) {
            (Some(state), true) => CellFile::from_state(state),
            (Some(state), false) => {
                let mut f = CellFile::from_cell(state.cell());
                f.progress = CellFile::from_state(state).progress;
                f
            }
            (None, _) => CellFile::from_cell(&session.cell),
        };
        file.with_configs(session.solver, Some(session.trace))
    }

    pub fn replace(&self, file: CellFile) -> SessionResult<StatusReport> {
        let mut session = self.edit()?;
        file.validate()?;
        file.solver.validate()?;
        let cell = file.cell();
        let trace = file.trace_config();
        trace.validate(cell.grid.h)?;
        let state = file.state()?;
        session.cell = cell;
        session.solver = file.solver;
        session.trace = trace;
        session.invalidate();
        session.state = state;
        Ok(self.set_status(&session, RunStatus::Idle))
    }

    pub fn add_electrode(&self, electrode: Electrode) -> SessionResult<usize> {
        let mut session = self.edit()?;
        let cell = session.cell.clone().with_electrode(electrode);
        let id = cell.electrodes.len() - 1;
        self.commit(&mut session, cell)?;
        Ok(id)
    }

    pub fn patch_electrode(&self, id: usize, patch: &ElectrodePatch) -> SessionResult<Electrode> {
        let mut session = self.edit()?;
        let mut cell = session.cell.clone();
        let e = cell
            .electrodes
            .get_mut(id)
            .ok_or(SessionError::NotFound { what: "electrode", id })?;
        patch.apply(e)?;
        let updated = e.clone();
        self.commit(&mut session, cell)?;
        Ok(updated)
    }

    pub fn delete_electrode(&self, id: usize) -> SessionResult<()> {
        let mut session = self.edit()?;
        let mut cell = session.cell.clone();
        if id >= cell.electrodes.len() {
            return Err(SessionError::NotFound { what: "electrode", id });
        }
        cell.electrodes.remove(id);
        self.commit(&mut session, cell)
    }

    fn working_state(session: &Session) -> SessionResult<SolverState> {
        match &session.state {
            Some(s) => Ok(s.clone()),
            None => Ok(SolverState::init(session.cell.clone())?),
        }
    }

    /// One step cycle of `inner_steps` iterations, stopping early on convergence.
    pub fn step(&self) -> SessionResult<StatusReport> {
        let mut session = self.edit()?;
        let mut state = Self::working_state(&session)?;
        self.set_status(&session, RunStatus::Stepping);
        let config = session.solver;
        let outcome = iterate(&mut state, config.inner_steps, config.tolerance);
        session.publish(state);
        Ok(self.set_status(&session, settled(outcome)))
    }

    /// Starts a background run. The returned handle finishes when the run ends.
    pub fn start_run(self: &Arc<Self>) -> SessionResult<(StatusReport, JoinHandle<()>)> {
        let session = self.edit()?;
        let state = Self::working_state(&session)?;
        self.cancel.store(false, Ordering::SeqCst);
        let config = session.solver;
        let started = {
            let r = report(RunStatus::Running, Some(&state), config.tolerance);
            *lock(&self.status) = r.clone();
            r
        };
        drop(session);
        let shared = Arc::clone(self);
        let handle = std::thread::spawn(move || shared.run_worker(state, config));
        Ok((started, handle))
    }

    fn run_worker(&self, mut state: SolverState, config: SolverConfig) {
        let mut done = 0;
        let final_status = loop {
            if self.cancel.swap(false, Ordering::SeqCst) {
                break RunStatus::Idle;
            }
            let n = config.inner_steps.min(config.max_iterations - done);
            let outcome = iterate(&mut state, n, config.tolerance);
            done += n;
            let status = match outcome {
                Chunk::Continue if done < config.max_iterations => RunStatus::Running,
                other => settled(other),
            };
            let mut session = lock(&self.session);
            session.publish(state.clone());
            self.set_status(&session, status);
            if status != RunStatus::Running {
                log::info!("run finished: {status:?} after {} iterations", state.iteration_count());
                return;
            }
        };
        let session = lock(&self.session);
        self.set_status(&session, final_status);
        log::info!("run cancelled at iteration {}", state.iteration_count());
    }

    /// Requests a running solve to stop after its current block.
    pub fn cancel(&self) -> StatusReport {
        if self.running() {
            self.cancel.store(true, Ordering::SeqCst);
        }
        self.status()
    }

    /// Immutable field snapshot of the published state, built on first use.
    pub fn snapshot(&self) -> SessionResult<Arc<FieldSnapshot>> {
        let mut session = lock(&self.session);
        if let Some(s) = &session.snapshot {
            return Ok(Arc::clone(s));
        }
        let state = session.state.as_ref().ok_or(Error::NotSolved)?;
        let snapshot = Arc::new(FieldSnapshot::from_state(state, Execution::Parallel)?);
        session.snapshot = Some(Arc::clone(&snapshot));
        Ok(snapshot)
    }

    fn with_state<T>(&self, f: impl FnOnce(&SolverState) -> SessionResult<T>) -> SessionResult<T> {
        let session = lock(&self.session);
        let state = session.state.as_ref().filter(|s| s.has_solution()).ok_or(Error::NotSolved)?;
        f(state)
    }

    pub fn trace(&self, request: TraceRequest) -> SessionResult<StreamlineExport> {
        let snapshot = self.snapshot()?;
        let mut config = lock(&self.session).trace;
        if let Some(d) = request.density {
            config.seed_density = d;
        }
        if let Some(a) = request.max_arc_unipolar {
            config.max_arc_unipolar = a;
        }
        if let Some(a) = request.max_arc_bipolar {
            config.max_arc_bipolar = a;
        }
        let groups = Arc::new(trace_all(&snapshot, &config, Execution::Parallel)?);
        let export = StreamlineExport::new(&groups, None);
        let mut session = lock(&self.session);
        // keep the set only if no newer state was published meanwhile
        if session.snapshot.as_ref().is_some_and(|s| Arc::ptr_eq(s, &snapshot)) {
            session.last_trace = Some(groups);
        }
        Ok(export)
    }

    /// Streamlines of the most recent trace on the current state.
    pub fn last_trace(&self) -> Option<Arc<Vec<Vec<Streamline>>>> {
        lock(&self.session).last_trace.clone()
    }

    pub fn slice(&self, axis: usize, index: usize, quantity: Quantity) -> SessionResult<Slice> {
        self.with_state(|s| Ok(extract_slice(s, axis, index, quantity)?))
    }

    pub fn probe(&self, position: [f64; 3]) -> SessionResult<Probe> {
        let snapshot = self.snapshot()?;
        let (Some(potential), Some(current)) = (snapshot.potential(position), snapshot.current(position)) else {
            return Err(SessionError::Invalid(format!("position {position:?} is outside the cell")));
        };
        Ok(Probe {
            position,
            potential,
            current,
            magnitude: current.iter().map(|c| c * c).sum::<f64>().sqrt(),
        })
    }

    pub fn deposit(&self, id: usize) -> SessionResult<Deposit> {
        self.with_state(|s| {
            if id >= s.cell().electrodes.len() {
                return Err(SessionError::NotFound { what: "electrode", id });
            }
            Ok(Deposit {
                electrode: id,
                faces: s.surface_normal_current(id),
                flux: s.net_flux(id),
            })
        })
    }

    /// Light table, colormaps and an autofocus on the cell or one electrode.
    pub fn shading(&self, electrode: Option<usize>, resolution: Option<usize>) -> SessionResult<ShadingRefs> {
        let cell = lock(&self.session).cell.clone();
        let (lo, hi) = match electrode {
            Some(id) => cell
                .electrodes
                .get(id)
                .ok_or(SessionError::NotFound { what: "electrode", id })?
                .physical_box(cell.grid.h),
            None => ([0.0; 3], cell.grid.extent()),
        };
        let table = LightTable::build(LightingParams::default(), resolution.unwrap_or(LightTable::DEFAULT_RESOLUTION))?;
        Ok(ShadingRefs {
            light_table: table,
            colormaps: ColorMap::ALL.iter().copied().map(NamedColorMap::from).collect(),
            autofocus: Some(autofocus(lo, hi, DEFAULT_FOV, 1.0, 1.0)?),
        })
    }
}

fn settled(outcome: Chunk) -> RunStatus {
    match outcome {
        Chunk::Converged => RunStatus::Converged,
        Chunk::Diverged => RunStatus::Diverged,
        Chunk::Continue => RunStatus::Idle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shared() -> Arc<Shared> {
        let mut file = CellFile::from_cell(&default_cell());
        file.solver.tolerance = 1e-5;
        Shared::new(file).unwrap()
    }

    #[test]
    fn step_until_converged_then_idempotent() {
        let s = shared();
        assert!(!s.status().solved);
        let mut last = s.step().unwrap();
        while last.status != RunStatus::Converged {
            assert_eq!(last.status, RunStatus::Idle);
            last = s.step().unwrap();
        }
        assert!(last.last_max_delta.unwrap() <= 1e-5);
        let again = s.step().unwrap();
        assert_eq!(again.status, RunStatus::Converged);
        assert_eq!(again.iteration_count, last.iteration_count + 1);
    }

    #[test]
    fn run_completes_and_publishes() {
        let s = shared();
        let (started, handle) = s.start_run().unwrap();
        assert_eq!(started.status, RunStatus::Running);
        handle.join().unwrap();
        let st = s.status();
        assert_eq!(st.status, RunStatus::Converged);
        assert!(st.solved);
        assert_eq!(st.floating.len(), 1);
        assert!(s.snapshot().is_ok());
    }

    #[test]
    fn edits_invalidate_results() {
        let s = shared();
        s.step().unwrap();
        assert!(s.slice(0, 3, Quantity::Potential).is_ok());
        s.patch_electrode(
            0,
            &ElectrodePatch {
                metal_potential: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(s.slice(0, 3, Quantity::Potential), Err(SessionError::Core(Error::NotSolved))));
        assert!(!s.status().solved);
    }

    #[test]
    fn moving_a_bipolar_moves_its_split() {
        let s = shared();
        let e = s
            .patch_electrode(
                2,
                &ElectrodePatch {
                    origin: Some([8, 2, 2]),
                    ..Default::default()
                },
            )
            .unwrap();
        assert_eq!(e.bounds.lo, [8, 2, 2]);
        assert_eq!(e.bounds.hi, [9, 8, 8]);
        assert_eq!(e.split, Some(8));
    }

    #[test]
    fn invalid_edits_leave_geometry_untouched() {
        let s = shared();
        let before = s.cell_file(false);
        let bad = ElectrodePatch {
            origin: Some([19, 2, 2]),
            ..Default::default()
        };
        assert!(matches!(s.patch_electrode(2, &bad), Err(SessionError::Core(_))));
        assert!(matches!(s.delete_electrode(9), Err(SessionError::NotFound { .. })));
        assert_eq!(s.cell_file(false), before);
    }
}
