//! Steady-state potential and current-density simulation of electrowinning
//! cells with unipolar and floating bipolar electrodes, plus automatic
//! streamline generation and the shading data used to display them.

pub mod error;
pub mod exec;
pub mod grid;
pub mod persist;
pub mod shade;
pub mod solver;
pub mod tracer;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{
    CellGeometry, Direction, Electrode, ElectrodeKind, Field3, GridSpec, IndexBox, Mask, PointClass,
    PolarizationParams, ScalarField, Section, SurfaceElement, VectorField,
};
pub use solver::{ConvergenceReport, SolverConfig, SolverState};
pub use tracer::{Streamline, Termination, TraceConfig, Vertex};
