//! Discretized cell domain: grid, electrode boxes, field storage and
//! point classification.

mod field;
pub(crate) mod mask;

pub use field::{sample_scalar, sample_vector, FieldValue, Field3, OutsideDomain, ScalarField, VectorField};
pub use mask::{surface_elements, Direction, Mask, PointClass, SurfaceElement};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular grid of `nx * ny * nz` points spaced `h` metres apart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, h: f64) -> Result<Self> {
        let grid = GridSpec { nx, ny, nz, h };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || self.nz < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points per axis, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {}", self.h)));
        }
        Ok(())
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        [i, j, k]
    }

    /// Physical extent `(n - 1) * h` along each axis.
    pub fn extent(&self) -> [f64; 3] {
        let h = self.h;
        [
            (self.nx - 1) as f64 * h,
            (self.ny - 1) as f64 * h,
            (self.nz - 1) as f64 * h,
        ]
    }

    #[inline]
    pub fn position(&self, p: [usize; 3]) -> [f64; 3] {
        [p[0] as f64 * self.h, p[1] as f64 * self.h, p[2] as f64 * self.h]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectrodeKind {
    Anode,
    Cathode,
    Bipolar,
}

/// Which linear polarization law applies at an electrode surface point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Section {
    Anodic,
    Cathodic,
}

/// Inclusive grid-index ranges of an electrode box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl IndexBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        IndexBox { lo, hi }
    }

    #[inline]
    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= p[a] && p[a] <= self.hi[a])
    }

    /// True when `p` is in the box and on at least one of its faces.
    #[inline]
    pub fn on_boundary(&self, p: [usize; 3]) -> bool {
        self.contains(p) && (0..3).any(|a| p[a] == self.lo[a] || p[a] == self.hi[a])
    }

    pub fn point_count(&self) -> usize {
        (0..3).map(|a| self.hi[a] - self.lo[a] + 1).product()
    }

    /// Box size in grid intervals.
    pub fn intervals(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0],
            self.hi[1] - self.lo[1],
            self.hi[2] - self.lo[2],
        ]
    }
}

/// Linear polarization parameters.
///
/// `equilibrium` is the magnitude of the zero-current potential jump; the
/// slopes are the anodic and cathodic polarization resistances in ohm square
/// metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationParams {
    pub equilibrium: f64,
    pub anodic_slope: f64,
    pub cathodic_slope: f64,
}

impl PolarizationParams {
    pub const IDEAL: PolarizationParams = PolarizationParams {
        equilibrium: 0.0,
        anodic_slope: 0.0,
        cathodic_slope: 0.0,
    };

    pub fn new(equilibrium: f64, anodic_slope: f64, cathodic_slope: f64) -> Self {
        PolarizationParams {
            equilibrium,
            anodic_slope,
            cathodic_slope,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let all = [self.equilibrium, self.anodic_slope, self.cathodic_slope];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("polarization parameters must be finite".into());
        }
        if all.iter().any(|v| *v < 0.0) {
            return Err("polarization parameters must be non-negative".into());
        }
        Ok(())
    }
}

impl Default for PolarizationParams {
    fn default() -> Self {
        Self::IDEAL
    }
}

/// An axis-aligned box electrode.
///
/// Bipolar electrodes carry a `split` index: points with `i <= split` belong
/// to the left (cathodic) section and points with `i > split` to the right
/// (anodic) section, so the divide sits at `(split + 1/2) * h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub kind: ElectrodeKind,
    pub bounds: IndexBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
    #[serde(default)]
    pub polarization: PolarizationParams,
    pub metal_potential: f64,
    pub floating: bool,
}

impl Electrode {
    pub fn anode(bounds: IndexBox, metal_potential: f64) -> Self {
        Electrode {
            kind: ElectrodeKind::Anode,
            bounds,
            split: None,
            polarization: PolarizationParams::IDEAL,
            metal_potential,
            floating: false,
        }
    }

    pub fn cathode(bounds: IndexBox, metal_potential: f64) -> Self {
        Electrode {
            kind: ElectrodeKind::Cathode,
            bounds,
            split: None,
            polarization: PolarizationParams::IDEAL,
            metal_potential,
            floating: false,
        }
    }

    /// Floating bipolar electrode with its section divide at `split`.
    pub fn bipolar(bounds: IndexBox, split: usize) -> Self {
        Electrode {
            kind: ElectrodeKind::Bipolar,
            bounds,
            split: Some(split),
            polarization: PolarizationParams::IDEAL,
            metal_potential: 0.0,
            floating: true,
        }
    }

    pub fn with_polarization(mut self, polarization: PolarizationParams) -> Self {
        self.polarization = polarization;
        self
    }

    pub fn with_floating(mut self, floating: bool) -> Self {
        self.floating = floating;
        self
    }

    pub fn with_metal_potential(mut self, metal_potential: f64) -> Self {
        self.metal_potential = metal_potential;
        self
    }

    /// Polarization law at grid column `i`.
    pub fn section_at(&self, i: usize) -> Section {
        match self.kind {
            ElectrodeKind::Anode => Section::Anodic,
            ElectrodeKind::Cathode => Section::Cathodic,
            ElectrodeKind::Bipolar => match self.split {
                Some(split) if i > split => Section::Anodic,
                _ => Section::Cathodic,
            },
        }
    }

    /// Physical box corners in metres.
    pub fn physical_box(&self, h: f64) -> ([f64; 3], [f64; 3]) {
        let lo = self.bounds.lo.map(|v| v as f64 * h);
        let hi = self.bounds.hi.map(|v| v as f64 * h);
        (lo, hi)
    }

    /// Centre of the box along x, used to order electrodes.
    pub fn center_x(&self, h: f64) -> f64 {
        0.5 * (self.bounds.lo[0] + self.bounds.hi[0]) as f64 * h
    }

    /// Physical box with every face that lies on a domain wall pushed one
    /// spacing outward, so wall positions under the electrode count as metal.
    pub fn solid_box(&self, grid: &GridSpec) -> ([f64; 3], [f64; 3]) {
        let (mut lo, mut hi) = self.physical_box(grid.h);
        let dims = grid.dims();
        for a in 0..3 {
            if self.bounds.lo[a] == 0 {
                lo[a] -= grid.h;
            }
            if self.bounds.hi[a] + 1 == dims[a] {
                hi[a] += grid.h;
            }
        }
        (lo, hi)
    }

    /// Strict-interior containment of a physical position in [`Self::solid_box`].
    pub fn contains_strictly(&self, pos: [f64; 3], grid: &GridSpec) -> bool {
        let (lo, hi) = self.solid_box(grid);
        (0..3).all(|a| lo[a] < pos[a] && pos[a] < hi[a])
    }

    #[allow(clippy::needless_range_loop)]
    fn validate(&self, grid: &GridSpec) -> std::result::Result<(), String> {
        let dims = grid.dims();
        for a in 0..3 {
            if self.bounds.lo[a] >= self.bounds.hi[a] {
                return Err(format!(
                    "box must span at least one interval on axis {a} ({}..{})",
                    self.bounds.lo[a], self.bounds.hi[a]
                ));
            }
            if self.bounds.hi[a] >= dims[a] {
                return Err(format!(
                    "box exceeds grid on axis {a} ({} >= {})",
                    self.bounds.hi[a], dims[a]
                ));
            }
        }
        match (self.kind, self.split) {
            (ElectrodeKind::Bipolar, Some(split)) => {
                if split < self.bounds.lo[0] || split >= self.bounds.hi[0] {
                    return Err(format!(
                        "bipolar split {split} must satisfy {} <= split < {}",
                        self.bounds.lo[0], self.bounds.hi[0]
                    ));
                }
            }
            (ElectrodeKind::Bipolar, None) => return Err("bipolar electrode needs a split index".into()),
            (_, Some(_)) => return Err("only bipolar electrodes take a split index".into()),
            _ => {}
        }
        if !self.metal_potential.is_finite() {
            return Err("metal potential must be finite".into());
        }
        self.polarization.validate()
    }
}

/// Cell description: grid, electrolyte conductivity and electrodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub grid: GridSpec,
    /// Electrolyte conductivity in 1/(ohm m).
    pub conductivity: f64,
    pub electrodes: Vec<Electrode>,
}

impl CellGeometry {
    pub fn new(grid: GridSpec, conductivity: f64) -> Self {
        CellGeometry {
            grid,
            conductivity,
            electrodes: Vec::new(),
        }
    }

    pub fn with_electrode(mut self, electrode: Electrode) -> Self {
        self.electrodes.push(electrode);
        self
    }

    /// Checks the grid, every electrode box and pairwise separation.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.conductivity.is_finite() && self.conductivity > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "conductivity must be positive, got {}",
                self.conductivity
            )));
        }
        for (id, e) in self.electrodes.iter().enumerate() {
            e.validate(&self.grid)
                .map_err(|msg| Error::InvalidGeometry(format!("electrode {id}: {msg}")))?;
        }
        for (a, ea) in self.electrodes.iter().enumerate() {
            for (b, eb) in self.electrodes.iter().enumerate().skip(a + 1) {
                check_separation(a, &ea.bounds, b, &eb.bounds)?;
            }
        }
        Ok(())
    }

    /// First electrode (along the segment) whose open solid box the segment
    /// `a -> b` passes through.
    pub fn electrode_on_segment(&self, a: [f64; 3], b: [f64; 3]) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (id, e) in self.electrodes.iter().enumerate() {
            let (lo, hi) = e.solid_box(&self.grid);
            if let Some(t) = segment_entry(a, b, lo, hi) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, id));
                }
            }
        }
        best.map(|(_, id)| id)
    }

    /// Id of the electrode whose solid box strictly contains `pos`.
    pub fn electrode_at(&self, pos: [f64; 3]) -> Option<usize> {
        self.electrodes.iter().position(|e| e.contains_strictly(pos, &self.grid))
    }
}

/// Parameter in `[0, 1]` where the segment enters the open box, if it does.
fn segment_entry(a: [f64; 3], b: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> Option<f64> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for ax in 0..3 {
        let d = b[ax] - a[ax];
        if d == 0.0 {
            if !(lo[ax] < a[ax] && a[ax] < hi[ax]) {
                return None;
            }
            continue;
        }
        let (ta, tb) = ((lo[ax] - a[ax]) / d, (hi[ax] - a[ax]) / d);
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 < t1).then_some(t0)
}

/// Electrode boxes whose projections overlap on two axes must be at least two
/// grid intervals apart on the third.
fn check_separation(a: usize, ba: &IndexBox, b: usize, bb: &IndexBox) -> Result<()> {
    let gap = |axis: usize| -> isize {
        let g1 = bb.lo[axis] as isize - ba.hi[axis] as isize;
        let g2 = ba.lo[axis] as isize - bb.hi[axis] as isize;
        g1.max(g2)
    };
    let gaps = [gap(0), gap(1), gap(2)];
    if gaps.iter().all(|&g| g <= 0) {
        return Err(Error::ElectrodeConflict {
            first: a,
            second: b,
            reason: "overlap",
        });
    }
    for axis in 0..3 {
        let others_overlap = (0..3).filter(|&o| o != axis).all(|o| gaps[o] <= 0);
        if others_overlap && gaps[axis] < 2 {
            return Err(Error::ElectrodeConflict {
                first: a,
                second: b,
                reason: "are closer than two grid intervals",
            });
        }
    }
    Ok(())
}
