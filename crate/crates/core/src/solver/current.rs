use serde::{Deserialize, Serialize};

use super::SolverState;
use crate::exec::Execution;
use crate::grid::{Direction, ElectrodeKind, PointClass, Section, VectorField};

/// Normal-current map on one principal (x-normal) face of an electrode.
///
/// `values` is row-major over `(y, z)` with `dims = [ny_face, nz_face]`,
/// index `jj * dims[1] + kk`. Cathodic faces map `-J.n`, anodic faces `J.n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepositFace {
    pub normal: Direction,
    pub section: SectionLabel,
    pub origin: [usize; 3],
    pub dims: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionLabel {
    Anodic,
    Cathodic,
}

impl From<Section> for SectionLabel {
    fn from(s: Section) -> Self {
        match s {
            Section::Anodic => SectionLabel::Anodic,
            Section::Cathodic => SectionLabel::Cathodic,
        }
    }
}

/// Surface integrals of `J.n` over an electrode, amperes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxBalance {
    /// `sum kS h^2 J.n`
    pub net: f64,
    /// `sum kS h^2 |J.n|`
    pub absolute: f64,
    /// `sum kS h^2`
    pub area: f64,
}

impl FluxBalance {
    /// `|net| / (mean|J.n| * area)`; zero when no current crosses the surface.
    pub fn normalized(&self) -> f64 {
        if self.absolute > 0.0 {
            self.net.abs() / self.absolute
        } else {
            0.0
        }
    }
}

impl SolverState {
    /// `J = -sigma grad V` at every grid point.
    pub fn current_field(&self) -> VectorField {
        self.current_field_with(Execution::default())
    }

    pub fn current_field_with(&self, exec: Execution) -> VectorField {
        let dims = self.cell.grid.dims();
        let data = exec.map_range(self.cell.grid.len(), |idx| self.current_at(idx));
        VectorField::from_vec(dims, data).expect("one value per grid point")
    }

    /// Current density at grid point `idx` with the electrode-aware stencils.
    pub fn current_at(&self, idx: usize) -> [f64; 3] {
        let grid = &self.cell.grid;
        let p = grid.coords(idx);
        let dims = grid.dims();
        let v = self.potential.as_slice();
        let h = grid.h;
        let sigma = self.cell.conductivity;
        let stride = [1, dims[0], dims[0] * dims[1]];

        let owner = match self.mask.class_at(idx) {
            PointClass::Interior(_) => return [0.0; 3],
            PointClass::Interface(id) => {
                if self.open[idx] == 0 {
                    return [0.0; 3];
                }
                Some(id)
            }
            PointClass::Electrolyte => None,
        };

        let mut e = [0.0; 3];
        for a in 0..3 {
            let back = Direction { axis: a, positive: false };
            let fwd = Direction { axis: a, positive: true };
            let at_wall = p[a] == 0 || p[a] + 1 == dims[a];
            e[a] = match owner {
                None => {
                    if at_wall {
                        0.0
                    } else {
                        (v[idx - stride[a]] - v[idx + stride[a]]) / (2.0 * h)
                    }
                }
                Some(id) => {
                    let open = self.open[idx];
                    if open & back.bit() != 0 {
                        (v[idx - stride[a]] - v[idx]) / h
                    } else if open & fwd.bit() != 0 {
                        (v[idx] - v[idx + stride[a]]) / h
                    } else if at_wall {
                        0.0
                    } else {
                        let el = &self.cell.electrodes[id];
                        let split_axis = a == 0 && el.kind == ElectrodeKind::Bipolar;
                        let here = el.section_at(p[0]);
                        if split_axis && el.section_at(p[0] - 1) != here {
                            (v[idx] - v[idx + 1]) / h
                        } else if split_axis && el.section_at(p[0] + 1) != here {
                            (v[idx - 1] - v[idx]) / h
                        } else {
                            (v[idx - stride[a]] - v[idx + stride[a]]) / (2.0 * h)
                        }
                    }
                }
            };
        }
        e.map(|c| sigma * c)
    }

    /// Normal current on the non-tangent x-normal faces of electrode `id`,
    /// from the one-sided difference into the electrolyte.
    pub fn surface_normal_current(&self, id: usize) -> Vec<DepositFace> {
        let e = &self.cell.electrodes[id];
        let grid = &self.cell.grid;
        let v = self.potential.as_slice();
        let sigma = self.cell.conductivity;
        let h = grid.h;
        let b = e.bounds;
        let tangent = self.tangent_faces(id);
        let mut out = Vec::new();
        for (slot, dir) in Direction::ALL.into_iter().enumerate().take(2) {
            if tangent[slot] {
                continue;
            }
            let i = if dir.positive { b.hi[0] } else { b.lo[0] };
            let section = e.section_at(i);
            let ni = if dir.positive { i + 1 } else { i - 1 };
            let fd = [b.hi[1] - b.lo[1] + 1, b.hi[2] - b.lo[2] + 1];
            let mut values = Vec::with_capacity(fd[0] * fd[1]);
            for j in b.lo[1]..=b.hi[1] {
                for k in b.lo[2]..=b.hi[2] {
                    let here = v[grid.index(i, j, k)];
                    let there = v[grid.index(ni, j, k)];
                    // J.n = -sigma dV/dn
                    let jn = -sigma * (there - here) / h;
                    values.push(match section {
                        Section::Cathodic => -jn,
                        Section::Anodic => jn,
                    });
                }
            }
            out.push(DepositFace {
                normal: dir,
                section: section.into(),
                origin: [i, b.lo[1], b.lo[2]],
                dims: fd,
                values,
            });
        }
        out
    }

    /// Area-weighted `J.n` sums over every non-tangent surface element.
    pub fn net_flux(&self, id: usize) -> FluxBalance {
        let plan = &self.plans[id];
        let v = self.potential.as_slice();
        let h = self.cell.grid.h;
        let sigma = self.cell.conductivity;
        let mut fb = FluxBalance {
            net: 0.0,
            absolute: 0.0,
            area: 0.0,
        };
        for el in &plan.elements {
            let jn = -sigma * (v[el.neighbor] - v[el.idx]) / h;
            let da = el.weight * h * h;
            fb.net += da * jn;
            fb.absolute += da * jn.abs();
            fb.area += da;
        }
        fb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellGeometry, Electrode, GridSpec, IndexBox};
    use crate::solver::SolverConfig;

    fn cell() -> CellGeometry {
        CellGeometry::new(GridSpec::new(16, 9, 9, 0.01).unwrap(), 50.0)
            .with_electrode(Electrode::anode(IndexBox::new([0, 0, 0], [1, 8, 8]), 1.0))
            .with_electrode(Electrode::cathode(IndexBox::new([14, 0, 0], [15, 8, 8]), 0.0))
            .with_electrode(Electrode::bipolar(IndexBox::new([6, 3, 3], [9, 6, 6]), 7))
    }

    #[test]
    fn linear_potential_gives_uniform_current() {
        let mut s = SolverState::init(cell()).unwrap();
        let g = s.cell().grid;
        let a = 7.0;
        for idx in 0..g.len() {
            let [i, _, _] = g.coords(idx);
            s.potential_mut().as_mut_slice()[idx] = a * i as f64 * g.h;
        }
        let j = s.current_field_with(Execution::Sequential);
        for idx in 0..g.len() {
            let c = s.mask().class_at(idx);
            let got = j.as_slice()[idx];
            match c {
                PointClass::Interior(_) => assert_eq!(got, [0.0; 3]),
                _ if s.open_set(idx) == 0 && c != PointClass::Electrolyte => assert_eq!(got, [0.0; 3]),
                _ => {
                    assert!((got[0] + 50.0 * a).abs() < 1e-9, "{idx} {got:?}");
                    assert_eq!(got[1], 0.0);
                    assert_eq!(got[2], 0.0);
                }
            }
        }
    }

    #[test]
    fn constant_potential_has_no_current() {
        let mut s = SolverState::init(cell()).unwrap();
        s.potential_mut().as_mut_slice().iter_mut().for_each(|v| *v = 0.4);
        let j = s.current_field();
        assert!(j.as_slice().iter().all(|c| *c == [0.0; 3]));
        assert_eq!(s.net_flux(2).net, 0.0);
        assert_eq!(s.net_flux(2).normalized(), 0.0);
        for face in s.surface_normal_current(2) {
            assert!(face.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let mut s = SolverState::init(cell()).unwrap();
        s.solve(&SolverConfig {
            tolerance: 1e-5,
            ..SolverConfig::default()
        })
        .unwrap();
        assert_eq!(
            s.current_field_with(Execution::Sequential),
            s.current_field_with(Execution::Parallel)
        );
    }

    #[test]
    fn deposit_faces_of_bipolar() {
        let s = SolverState::init(cell()).unwrap();
        let faces = s.surface_normal_current(2);
        assert_eq!(faces.len(), 2);
        assert_eq!(faces[0].section, SectionLabel::Cathodic);
        assert_eq!(faces[1].section, SectionLabel::Anodic);
        assert_eq!(faces[0].dims, [4, 4]);
        // wall-flush anode exposes only its +x face
        let anode = s.surface_normal_current(0);
        assert_eq!(anode.len(), 1);
        assert!(anode[0].normal.positive);
    }
}
