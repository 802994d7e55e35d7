//! Per-electrode update plans, resolved once from the tangency of each face.

use std::collections::HashMap;

use crate::grid::{mask::face_is_tangent, surface_elements, Direction, Electrode, GridSpec, Section};

/// Interface point whose outward normal is defined (one open direction).
#[derive(Clone, Debug)]
pub(crate) struct DefinedPoint {
    pub idx: usize,
    pub neighbor: usize,
    pub section: Section,
}

/// Edge or vertex point with several open directions; its jump is the mean
/// of the jumps at `sources` (indices into the defined list). When no such
/// neighbour exists, the jump is averaged over its own open directions.
#[derive(Clone, Debug)]
pub(crate) struct AveragedPoint {
    pub idx: usize,
    pub sources: Vec<usize>,
    pub fallback: Vec<usize>,
    pub section: Section,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ElementRef {
    pub idx: usize,
    pub neighbor: usize,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct InterfacePlan {
    pub defined: Vec<DefinedPoint>,
    pub averaged: Vec<AveragedPoint>,
    /// Points touching only the cell wall: they take the metal potential.
    pub metal: Vec<usize>,
    pub interior: Vec<usize>,
    pub elements: Vec<ElementRef>,
    pub weight_sum: f64,
    pub dv_scratch: Vec<f64>,
}

/// Set of directions in which `p` (on the box of `e`) faces electrolyte.
pub(crate) fn open_directions(e: &Electrode, p: [usize; 3], dims: [usize; 3]) -> u8 {
    let mut set = 0u8;
    for dir in Direction::ALL {
        let on_face = if dir.positive {
            p[dir.axis] == e.bounds.hi[dir.axis]
        } else {
            p[dir.axis] == e.bounds.lo[dir.axis]
        };
        if on_face && !face_is_tangent(e, dir, dims) {
            set |= dir.bit();
        }
    }
    set
}

pub(crate) fn directions_in(set: u8) -> impl Iterator<Item = Direction> {
    Direction::ALL.into_iter().filter(move |d| set & d.bit() != 0)
}

impl InterfacePlan {
    pub fn build(e: &Electrode, grid: &GridSpec) -> Self {
        let dims = grid.dims();
        let b = e.bounds;
        let mut defined = Vec::new();
        let mut lookup = HashMap::new();
        let mut multi = Vec::new();
        let mut metal = Vec::new();
        let mut interior = Vec::new();

        for k in b.lo[2]..=b.hi[2] {
            for j in b.lo[1]..=b.hi[1] {
                for i in b.lo[0]..=b.hi[0] {
                    let p = [i, j, k];
                    let idx = grid.index(i, j, k);
                    if !b.on_boundary(p) {
                        interior.push(idx);
                        continue;
                    }
                    let open = open_directions(e, p, dims);
                    match open.count_ones() {
                        0 => metal.push(idx),
                        1 => {
                            let dir = directions_in(open).next().unwrap();
                            let nb = dir.step(p, dims).expect("open face has a neighbour");
                            lookup.insert(p, defined.len());
                            defined.push(DefinedPoint {
                                idx,
                                neighbor: grid.index(nb[0], nb[1], nb[2]),
                                section: e.section_at(i),
                            });
                        }
                        _ => multi.push((p, idx, open)),
                    }
                }
            }
        }

        let averaged = multi
            .into_iter()
            .map(|(p, idx, open)| {
                let mut sources = Vec::new();
                for dk in -1isize..=1 {
                    for dj in -1isize..=1 {
                        for di in -1isize..=1 {
                            let q = [p[0] as isize + di, p[1] as isize + dj, p[2] as isize + dk];
                            if q.iter().any(|&c| c < 0) {
                                continue;
                            }
                            let q = q.map(|c| c as usize);
                            if q == p || !b.on_boundary(q) {
                                continue;
                            }
                            if let Some(&pos) = lookup.get(&q) {
                                let qopen = open_directions(e, q, dims);
                                if qopen & open != 0 {
                                    sources.push(pos);
                                }
                            }
                        }
                    }
                }
                let fallback = directions_in(open)
                    .map(|d| {
                        let nb = d.step(p, dims).expect("open face has a neighbour");
                        grid.index(nb[0], nb[1], nb[2])
                    })
                    .collect();
                AveragedPoint {
                    idx,
                    sources,
                    fallback,
                    section: e.section_at(p[0]),
                }
            })
            .collect();

        let elements: Vec<ElementRef> = surface_elements(e, grid)
            .into_iter()
            .map(|s| {
                let nb = s.normal.step(s.point, dims).expect("non-tangent face has a neighbour");
                ElementRef {
                    idx: grid.index(s.point[0], s.point[1], s.point[2]),
                    neighbor: grid.index(nb[0], nb[1], nb[2]),
                    weight: s.area_factor,
                }
            })
            .collect();
        let weight_sum = elements.iter().map(|e| e.weight).sum();
        let dv_scratch = vec![0.0; defined.len()];

        InterfacePlan {
            defined,
            averaged,
            metal,
            interior,
            elements,
            weight_sum,
            dv_scratch,
        }
    }
}
