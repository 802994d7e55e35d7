//! JSON cell files, streamline export and slice export.
//!
//! Cell files store geometry, parameters and optionally the potential
//! field; current density and streamlines are never stored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellGeometry, Electrode, GridSpec, ScalarField};
use crate::shade::{Autofocus, ColorMap, LightTable};
use crate::solver::{SolverConfig, SolverState};
use crate::tracer::{Streamline, TraceConfig};

pub const FORMAT_VERSION: u32 = 1;
pub const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredField {
    pub dims: [usize; 3],
    pub order: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub iterations: usize,
    pub last_max_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFile {
    pub version: u32,
    pub grid: GridSpec,
    pub conductivity: f64,
    pub electrodes: Vec<Electrode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<StoredField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress: Option<Progress>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceConfig>,
}

impl CellFile {
    /// Geometry only.
    pub fn from_cell(cell: &CellGeometry) -> Self {
        CellFile {
            version: FORMAT_VERSION,
            grid: cell.grid,
            conductivity: cell.conductivity,
            electrodes: cell.electrodes.clone(),
            potential: None,
            progress: None,
            solver: SolverConfig::default(),
            trace: None,
        }
    }

    /// Geometry with current metal potentials, plus the potential field.
    pub fn from_state(state: &SolverState) -> Self {
        let mut file = Self::from_cell(state.cell());
        if state.has_solution() {
            let mut finalized = state.clone();
            finalized.finalize();
            file.potential = Some(StoredField {
                dims: state.cell().grid.dims(),
                order: ORDER_X_FASTEST.into(),
                values: finalized.potential().as_slice().to_vec(),
            });
            file.progress = Some(Progress {
                iterations: state.iteration_count(),
                last_max_delta: state.last_max_delta(),
            });
        }
        file
    }

    pub fn with_configs(mut self, solver: SolverConfig, trace: Option<TraceConfig>) -> Self {
        self.solver = solver;
        self.trace = trace;
        self
    }

    pub fn cell(&self) -> CellGeometry {
        CellGeometry {
            grid: self.grid,
            conductivity: self.conductivity,
            electrodes: self.electrodes.clone(),
        }
    }

    /// Trace settings, defaulting from the grid spacing.
    pub fn trace_config(&self) -> TraceConfig {
        self.trace.unwrap_or_else(|| TraceConfig::for_spacing(self.grid.h))
    }

    /// Checks version, geometry and field layout.
    pub fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: FORMAT_VERSION,
            });
        }
        self.cell().validate()?;
        if let Some(field) = &self.potential {
            if field.order != ORDER_X_FASTEST {
                return Err(Error::Malformed(format!("unsupported value order {:?}", field.order)));
            }
            let expected = self.grid.len();
            if field.dims != self.grid.dims() {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: field.dims.iter().product(),
                });
            }
            if field.values.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: field.values.len(),
                });
            }
        }
        Ok(())
    }

    /// Solver state when a potential field is stored.
    pub fn state(&self) -> Result<Option<SolverState>> {
        self.validate()?;
        let Some(field) = &self.potential else {
            return Ok(None);
        };
        let values = ScalarField::from_vec(field.dims, field.values.clone()).ok_or(Error::DimensionMismatch {
            expected: self.grid.len(),
            found: field.values.len(),
        })?;
        let mut state = SolverState::with_potential(self.cell(), values)?;
        if let Some(p) = self.progress {
            state.set_progress(p.iterations, p.last_max_delta);
        }
        Ok(Some(state))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CellFile = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }
}

pub fn save_cell(path: impl AsRef<Path>, file: &CellFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_cell(path: impl AsRef<Path>) -> Result<CellFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CellFile::from_json(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedColorMap {
    pub name: String,
    pub control_points: Vec<[f64; 3]>,
}

impl From<ColorMap> for NamedColorMap {
    fn from(c: ColorMap) -> Self {
        NamedColorMap {
            name: c.name().into(),
            control_points: c.control_points().to_vec(),
        }
    }
}

/// Shading data shipped alongside exported lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadingRefs {
    pub light_table: LightTable,
    pub colormaps: Vec<NamedColorMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autofocus: Option<Autofocus>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportHeader {
    pub groups: usize,
    pub lines: usize,
    pub vertices: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamlineExport {
    pub version: u32,
    pub header: ExportHeader,
    /// Line count per source electrode.
    pub group_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shading: Option<ShadingRefs>,
    pub lines: Vec<Streamline>,
}

impl StreamlineExport {
    pub fn new(groups: &[Vec<Streamline>], shading: Option<ShadingRefs>) -> Self {
        let lines: Vec<Streamline> = groups.iter().flatten().cloned().collect();
        StreamlineExport {
            version: FORMAT_VERSION,
            header: ExportHeader {
                groups: groups.len(),
                lines: lines.len(),
                vertices: lines.iter().map(|l| l.vertices.len()).sum(),
            },
            group_sizes: groups.iter().map(Vec::len).collect(),
            shading,
            lines,
        }
    }

    /// Lines regrouped by source electrode.
    pub fn groups(&self) -> Vec<Vec<Streamline>> {
        let mut out = Vec::with_capacity(self.group_sizes.len());
        let mut it = self.lines.iter().cloned();
        for &n in &self.group_sizes {
            out.push(it.by_ref().take(n).collect());
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let export: StreamlineExport = serde_json::from_str(text)?;
        if export.version != FORMAT_VERSION {
            return Err(Error::Version {
                found: export.version,
                expected: FORMAT_VERSION,
            });
        }
        let total: usize = export.group_sizes.iter().sum();
        if total != export.lines.len() || export.header.lines != export.lines.len() {
            return Err(Error::DimensionMismatch {
                expected: export.header.lines,
                found: export.lines.len(),
            });
        }
        Ok(export)
    }
}

pub fn export_streamlines(path: impl AsRef<Path>, export: &StreamlineExport) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, export.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn import_streamlines(path: impl AsRef<Path>) -> Result<StreamlineExport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    StreamlineExport::from_json(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// Potential, volts.
    Potential,
    /// Current-density magnitude, A/m^2.
    Current,
}

/// Values on the grid plane `axis = index`, row-major over the two
/// remaining axes `(a, b)` in increasing order: index `ia * dims[1] + ib`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub axis: usize,
    pub index: usize,
    pub quantity: Quantity,
    pub dims: [usize; 2],
    pub values: Vec<f64>,
}

impl Slice {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Slice = serde_json::from_str(text)?;
        if s.values.len() != s.dims[0] * s.dims[1] {
            return Err(Error::DimensionMismatch {
                expected: s.dims[0] * s.dims[1],
                found: s.values.len(),
            });
        }
        Ok(s)
    }
}

pub fn extract_slice(state: &SolverState, axis: usize, index: usize, quantity: Quantity) -> Result<Slice> {
    if axis > 2 {
        return Err(Error::OutOfRange {
            what: "axis",
            index: axis,
            limit: 2,
        });
    }
    let grid = state.cell().grid;
    let dims = grid.dims();
    if index >= dims[axis] {
        return Err(Error::OutOfRange {
            what: "slice",
            index,
            limit: dims[axis] - 1,
        });
    }
    if quantity == Quantity::Current && !state.has_solution() {
        return Err(Error::NotSolved);
    }
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut values = Vec::with_capacity(dims[a] * dims[b]);
    for ia in 0..dims[a] {
        for ib in 0..dims[b] {
            let mut p = [0; 3];
            p[axis] = index;
            p[a] = ia;
            p[b] = ib;
            let idx = grid.index(p[0], p[1], p[2]);
            values.push(match quantity {
                Quantity::Potential => value_with_interiors(state, idx),
                Quantity::Current => {
                    let j = state.current_at(idx);
                    (j[0] * j[0] + j[1] * j[1] + j[2] * j[2]).sqrt()
                }
            });
        }
    }
    Ok(Slice {
        axis,
        index,
        quantity,
        dims: [dims[a], dims[b]],
        values,
    })
}

/// Potential with electrode interiors reading their metal potential.
fn value_with_interiors(state: &SolverState, idx: usize) -> f64 {
    match state.mask().class_at(idx) {
        crate::grid::PointClass::Interior(id) => state.metal_potential(id),
        _ => state.potential().as_slice()[idx],
    }
}

pub fn export_slice(path: impl AsRef<Path>, slice: &Slice) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, slice.to_json()?).map_err(|e| Error::io(path, e))
}
