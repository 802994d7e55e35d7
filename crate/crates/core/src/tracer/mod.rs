//! Streamline generation: surface seeding, integration direction, adaptive
//! RK4 integration of the normalized current field and truncation rules.

mod seed;

pub use seed::{generate_seeds, seed_counts, seed_counts_raw, seed_total, seeds_with_counts};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{CellGeometry, ElectrodeKind, ScalarField, VectorField};
use crate::solver::SolverState;

/// Integration controls, lengths in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Per-step error bound.
    pub tolerance: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Step-controller safety factor.
    pub safety: f64,
    /// Direction probe distance in units of `h`.
    pub probe: f64,
    /// Seeds per `h^2` of electrode surface.
    pub seed_density: f64,
    /// Arc-length caps by source kind; 0 disables.
    pub max_arc_unipolar: f64,
    pub max_arc_bipolar: f64,
    pub max_vertices: usize,
}

impl TraceConfig {
    pub fn for_spacing(h: f64) -> Self {
        TraceConfig {
            tolerance: 1e-4 * h,
            d_min: 0.05 * h,
            d_max: h,
            safety: 0.9,
            probe: 0.2,
            seed_density: 0.05,
            max_arc_unipolar: 0.0,
            max_arc_bipolar: 0.0,
            max_vertices: 10_000,
        }
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        let fail = |msg: &str| Err(Error::Configuration(format!("trace: {msg}")));
        let all = [
            self.tolerance,
            self.d_min,
            self.d_max,
            self.safety,
            self.probe,
            self.seed_density,
            self.max_arc_unipolar,
            self.max_arc_bipolar,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("parameters must be finite");
        }
        if self.tolerance <= 0.0 {
            return fail("tolerance must be positive");
        }
        if !(0.0 < self.d_min && self.d_min < self.d_max) {
            return fail("need 0 < d_min < d_max");
        }
        if self.d_max > h * (1.0 + 1e-12) {
            return fail("d_max must not exceed the grid spacing");
        }
        if !(0.0 < self.safety && self.safety < 1.0) {
            return fail("safety factor must lie in (0, 1)");
        }
        if !(0.0 < self.probe && self.probe < 1.0) {
            return fail("direction probe must lie in (0, 1)");
        }
        if self.seed_density <= 0.0 {
            return fail("seed density must be positive");
        }
        if self.max_arc_unipolar < 0.0 || self.max_arc_bipolar < 0.0 {
            return fail("arc caps must be non-negative");
        }
        if self.max_vertices == 0 {
            return fail("max_vertices must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Termination {
    BelowDMin,
    Zigzag,
    EnteredElectrode,
    ArcLimit,
    LeftDomain,
    VertexLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub position: [f64; 3],
    pub tangent: [f64; 3],
    pub magnitude: f64,
    pub potential: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Streamline {
    pub source: usize,
    pub orientation: Orientation,
    pub vertices: Vec<Vertex>,
    pub termination: Termination,
    /// Electrode whose interior stopped the line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entered: Option<usize>,
}

impl Streamline {
    pub fn arc_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| norm(sub(w[1].position, w[0].position))).sum()
    }
}

/// What the integrator needs from a field.
pub trait TraceField: Sync {
    /// Current density at `pos`, `None` outside the domain.
    fn current(&self, pos: [f64; 3]) -> Option<[f64; 3]>;
    fn potential(&self, pos: [f64; 3]) -> Option<f64>;
    /// Electrode strictly containing `pos`.
    fn electrode_at(&self, pos: [f64; 3]) -> Option<usize>;
    /// Electrode whose interior the step `from -> to` enters.
    fn electrode_on_step(&self, from: [f64; 3], to: [f64; 3]) -> Option<usize> {
        let _ = from;
        self.electrode_at(to)
    }
    /// Magnitudes at or below this count as a null field.
    fn null_threshold(&self) -> f64 {
        0.0
    }
}

/// Immutable potential and current fields of a solved cell.
#[derive(Clone, Debug)]
pub struct FieldSnapshot {
    pub cell: CellGeometry,
    pub potential: ScalarField,
    pub current: VectorField,
    max_current: f64,
}

impl FieldSnapshot {
    pub fn new(cell: CellGeometry, potential: ScalarField, current: VectorField) -> Self {
        let max_current = current.as_slice().iter().map(|j| norm(*j)).fold(0.0, f64::max);
        FieldSnapshot {
            cell,
            potential,
            current,
            max_current,
        }
    }

    /// Snapshot of a state that has been iterated or loaded with a solution.
    pub fn from_state(state: &SolverState, exec: Execution) -> Result<Self> {
        if !state.has_solution() {
            return Err(Error::NotSolved);
        }
        let mut finalized = state.clone();
        finalized.finalize();
        let current = finalized.current_field_with(exec);
        let cell = finalized.cell().clone();
        Ok(Self::new(cell, finalized.potential().clone(), current))
    }

    pub fn max_current(&self) -> f64 {
        self.max_current
    }
}

impl TraceField for FieldSnapshot {
    fn current(&self, pos: [f64; 3]) -> Option<[f64; 3]> {
        self.current.sample(&self.cell.grid, pos).ok()
    }

    fn potential(&self, pos: [f64; 3]) -> Option<f64> {
        self.potential.sample(&self.cell.grid, pos).ok()
    }

    fn electrode_at(&self, pos: [f64; 3]) -> Option<usize> {
        self.cell.electrode_at(pos)
    }

    fn electrode_on_step(&self, from: [f64; 3], to: [f64; 3]) -> Option<usize> {
        self.cell.electrode_on_segment(from, to)
    }

    fn null_threshold(&self) -> f64 {
        1e-12 * self.max_current
    }
}

#[inline]
fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector along `v`, or zero for a null vector.
#[inline]
pub fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = norm(v);
    if n > 0.0 {
        scale(v, 1.0 / n)
    } else {
        [0.0; 3]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rk4Step {
    pub next: [f64; 3],
    /// Error estimate: fourth-order minus third-order increment.
    pub error: [f64; 3],
}

/// One RK4 step of length `d` (negative for backward) along the unit
/// tangent field `f`. `None` when any evaluation point is outside.
pub fn rk4_step<F>(f: &F, x: [f64; 3], d: f64) -> Option<Rk4Step>
where
    F: Fn([f64; 3]) -> Option<[f64; 3]>,
{
    let k1 = scale(f(x)?, d);
    let k2 = scale(f(add(x, scale(k1, 0.5)))?, d);
    let k3 = scale(f(add(x, scale(k2, 0.5)))?, d);
    let k4 = scale(f(add(x, k3))?, d);
    let dx = add(add(scale(k1, 1.0 / 6.0), scale(k2, 1.0 / 3.0)), add(scale(k3, 1.0 / 3.0), scale(k4, 1.0 / 6.0)));
    let next = add(x, dx);
    let f2 = scale(f(next)?, d);
    Some(Rk4Step {
        next,
        error: scale(sub(k4, f2), 1.0 / 6.0),
    })
}

/// Step length suggested by the error controller for a fifth-order error term.
#[inline]
pub fn optimal_step(d: f64, error: f64, tolerance: f64, safety: f64) -> f64 {
    (safety * tolerance / error).powf(0.2) * d
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepControl {
    /// Keep the step and continue with this length.
    Accept(f64),
    /// Recompute the step with this length.
    Retry(f64),
    /// The suggested length fell below `d_min`.
    Underflow,
}

/// Accept or retry decision for a step of length `d` (magnitude).
pub fn adapt_step(d: f64, error: f64, config: &TraceConfig) -> StepControl {
    if error == 0.0 {
        return StepControl::Accept(config.d_max);
    }
    let d_star = optimal_step(d, error, config.tolerance, config.safety);
    if error > config.tolerance {
        if d_star < config.d_min {
            StepControl::Underflow
        } else {
            StepControl::Retry(d_star.min(config.d_max))
        }
    } else {
        StepControl::Accept(d_star.clamp(config.d_min, config.d_max))
    }
}

/// Forward unless a short probe along the field lands inside an electrode.
pub fn integration_direction<T: TraceField>(field: &T, seed: [f64; 3], probe: f64, h: f64) -> Option<Orientation> {
    let j = field.current(seed)?;
    if norm(j) <= field.null_threshold() {
        return None;
    }
    let probe_pos = add(seed, scale(unit(j), probe * h));
    Some(if field.electrode_at(probe_pos).is_some() {
        Orientation::Backward
    } else {
        Orientation::Forward
    })
}

/// Integrates one line from `seed` until the first truncation rule fires.
pub fn trace_streamline<T: TraceField>(
    field: &T,
    seed: [f64; 3],
    orientation: Orientation,
    source: usize,
    max_arc: f64,
    config: &TraceConfig,
) -> Streamline {
    let sign = match orientation {
        Orientation::Forward => 1.0,
        Orientation::Backward => -1.0,
    };
    let floor = field.null_threshold();
    let tangent_at = |p: [f64; 3]| field.current(p).map(unit);
    let vertex_at = |p: [f64; 3]| -> Option<Vertex> {
        let j = field.current(p)?;
        Some(Vertex {
            position: p,
            tangent: unit(j),
            magnitude: norm(j),
            potential: field.potential(p)?,
        })
    };

    let mut line = Streamline {
        source,
        orientation,
        vertices: Vec::new(),
        termination: Termination::LeftDomain,
        entered: None,
    };
    let Some(first) = vertex_at(seed) else {
        return line;
    };
    line.vertices.push(first);

    let mut x = seed;
    let mut d = config.d_max;
    let mut arc = 0.0;
    line.termination = loop {
        if line.vertices.len() >= config.max_vertices {
            break Termination::VertexLimit;
        }
        let Some(step) = rk4_step(&tangent_at, x, sign * d) else {
            // shorten towards the wall so boundary electrodes are still reached
            if 0.5 * d >= config.d_min {
                d *= 0.5;
                continue;
            }
            break Termination::LeftDomain;
        };
        let next_d = match adapt_step(d, norm(step.error), config) {
            StepControl::Accept(next) => next,
            StepControl::Retry(shorter) => {
                d = shorter;
                continue;
            }
            StepControl::Underflow => break Termination::BelowDMin,
        };
        let Some(v) = vertex_at(step.next) else {
            break Termination::LeftDomain;
        };
        if let Some(id) = field.electrode_on_step(x, step.next) {
            line.entered = Some(id);
            break Termination::EnteredElectrode;
        }
        if v.magnitude <= floor {
            break Termination::BelowDMin;
        }
        let prev = line.vertices.last().expect("line has a vertex").tangent;
        if dot(prev, v.tangent) < 0.0 {
            break Termination::Zigzag;
        }
        arc += norm(sub(step.next, x));
        if max_arc > 0.0 && arc > max_arc {
            break Termination::ArcLimit;
        }
        line.vertices.push(v);
        x = step.next;
        d = next_d;
    };
    line
}

/// Seeds, orients and traces every electrode's lines. Seeds on faces flush
/// with a domain wall are dropped. Groups follow electrode order and lines
/// within a group follow seed order.
pub fn trace_all(snapshot: &FieldSnapshot, config: &TraceConfig, exec: Execution) -> Result<Vec<Vec<Streamline>>> {
    let grid = snapshot.cell.grid;
    config.validate(grid.h)?;
    let jobs: Vec<(usize, [f64; 3])> = snapshot
        .cell
        .electrodes
        .iter()
        .enumerate()
        .flat_map(|(id, e)| {
            generate_seeds(e, &grid, config.seed_density)
                .into_iter()
                .filter(move |p| !e.contains_strictly(*p, &grid))
                .map(move |p| (id, p))
        })
        .collect();
    let traced = exec.map_slice(&jobs, |&(id, seed)| {
        let orientation = integration_direction(snapshot, seed, config.probe, grid.h)?;
        let cap = match snapshot.cell.electrodes[id].kind {
            ElectrodeKind::Bipolar => config.max_arc_bipolar,
            _ => config.max_arc_unipolar,
        };
        Some(trace_streamline(snapshot, seed, orientation, id, cap, config))
    });
    let mut groups = vec![Vec::new(); snapshot.cell.electrodes.len()];
    for ((id, _), line) in jobs.iter().zip(traced) {
        if let Some(line) = line {
            groups[*id].push(line);
        }
    }
    Ok(groups)
}
