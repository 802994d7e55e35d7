use serde::{Deserialize, Serialize};

use super::{CellGeometry, Electrode, GridSpec};
use crate::error::Result;

/// One of the six axis directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    pub axis: usize,
    pub positive: bool,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction { axis: 0, positive: false },
        Direction { axis: 0, positive: true },
        Direction { axis: 1, positive: false },
        Direction { axis: 1, positive: true },
        Direction { axis: 2, positive: false },
        Direction { axis: 2, positive: true },
    ];

    pub fn unit(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[self.axis] = if self.positive { 1.0 } else { -1.0 };
        v
    }

    /// Bit used in direction sets.
    #[inline]
    pub fn bit(self) -> u8 {
        1 << (self.axis * 2 + self.positive as usize)
    }

    /// Neighbouring grid point in this direction, if it exists.
    #[inline]
    pub fn step(self, p: [usize; 3], dims: [usize; 3]) -> Option<[usize; 3]> {
        let mut q = p;
        if self.positive {
            if p[self.axis] + 1 >= dims[self.axis] {
                return None;
            }
            q[self.axis] += 1;
        } else {
            if p[self.axis] == 0 {
                return None;
            }
            q[self.axis] -= 1;
        }
        Some(q)
    }
}

/// Classification of a grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Electrolyte,
    /// Strictly inside electrode `id`.
    Interior(usize),
    /// On the boundary of electrode `id`'s box.
    Interface(usize),
}

/// Per-point classification of the whole grid.
#[derive(Clone, Debug)]
pub struct Mask {
    dims: [usize; 3],
    classes: Vec<PointClass>,
}

impl Mask {
    /// Classifies every grid point. Fails when the geometry is invalid.
    pub fn build(cell: &CellGeometry) -> Result<Self> {
        cell.validate()?;
        let grid = &cell.grid;
        let mut classes = vec![PointClass::Electrolyte; grid.len()];
        for (id, e) in cell.electrodes.iter().enumerate() {
            let b = e.bounds;
            for k in b.lo[2]..=b.hi[2] {
                for j in b.lo[1]..=b.hi[1] {
                    for i in b.lo[0]..=b.hi[0] {
                        let p = [i, j, k];
                        classes[grid.index(i, j, k)] = if b.on_boundary(p) {
                            PointClass::Interface(id)
                        } else {
                            PointClass::Interior(id)
                        };
                    }
                }
            }
        }
        Ok(Mask {
            dims: grid.dims(),
            classes,
        })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn class_at(&self, idx: usize) -> PointClass {
        self.classes[idx]
    }

    #[inline]
    pub fn get(&self, p: [usize; 3]) -> PointClass {
        self.classes[p[0] + self.dims[0] * (p[1] + self.dims[1] * p[2])]
    }

    pub fn classes(&self) -> &[PointClass] {
        &self.classes
    }

    pub fn count(&self, pred: impl Fn(PointClass) -> bool) -> usize {
        self.classes.iter().filter(|c| pred(**c)).count()
    }
}

/// A surface element centred on an electrode face point, of area
/// `area_factor * h^2`, with unit normal pointing into the electrolyte.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceElement {
    pub point: [usize; 3],
    pub normal: Direction,
    pub area_factor: f64,
}

/// True when the face of `e` with outward normal `dir` lies on the cell wall.
pub(crate) fn face_is_tangent(e: &Electrode, dir: Direction, dims: [usize; 3]) -> bool {
    if dir.positive {
        e.bounds.hi[dir.axis] + 1 >= dims[dir.axis]
    } else {
        e.bounds.lo[dir.axis] == 0
    }
}

/// Surface elements on every face of `e` not lying on the cell wall.
///
/// Face-interior points weigh 1, face-edge points 1/2 and face corners 1/4,
/// so the weights of one face sum to its area in `h^2` units. A point shared
/// by two non-tangent faces emits one element per face.
pub fn surface_elements(e: &Electrode, grid: &GridSpec) -> Vec<SurfaceElement> {
    let dims = grid.dims();
    let b = e.bounds;
    let mut out = Vec::new();
    for dir in Direction::ALL {
        if face_is_tangent(e, dir, dims) {
            continue;
        }
        let a = dir.axis;
        let (u, v) = ((a + 1) % 3, (a + 2) % 3);
        let fixed = if dir.positive { b.hi[a] } else { b.lo[a] };
        for pv in b.lo[v]..=b.hi[v] {
            for pu in b.lo[u]..=b.hi[u] {
                let wu = if pu == b.lo[u] || pu == b.hi[u] { 0.5 } else { 1.0 };
                let wv = if pv == b.lo[v] || pv == b.hi[v] { 0.5 } else { 1.0 };
                let mut point = [0; 3];
                point[a] = fixed;
                point[u] = pu;
                point[v] = pv;
                out.push(SurfaceElement {
                    point,
                    normal: dir,
                    area_factor: wu * wv,
                });
            }
        }
    }
    out
}
