//! Initial guess: piecewise-linear ramp in x between energized electrodes,
//! lowered by the zero-current jump of every floating electrode crossed.

use super::SolverState;
use crate::error::{Error, Result};
use crate::grid::ElectrodeKind;

struct Ramp {
    /// Energized electrodes sorted by centre x: `(xc, Vm)`.
    anchors: Vec<(f64, f64)>,
    /// Floating electrodes: `(xc, 2 eR)`.
    jumps: Vec<(f64, f64)>,
}

impl Ramp {
    fn jump_between(&self, lo: f64, hi: f64) -> f64 {
        self.jumps.iter().filter(|(x, _)| *x > lo && *x < hi).map(|(_, j)| j).sum()
    }

    /// Electrolyte potential at `x`, counting only jumps strictly left of `x`.
    fn at(&self, x: f64) -> f64 {
        let n = self.anchors.len();
        let seg = self.anchors.windows(2).position(|w| x <= w[1].0).unwrap_or(n - 2);
        let (xa, va) = self.anchors[seg];
        let (xb, vb) = self.anchors[seg + 1];
        let x = x.clamp(xa, xb);
        let total = self.jump_between(xa, xb);
        let ohmic = va - vb - total;
        let t = if xb > xa { (x - xa) / (xb - xa) } else { 0.0 };
        va - ohmic * t - self.jump_between(xa, x)
    }
}

pub(super) fn apply(state: &mut SolverState) -> Result<()> {
    let cell = &state.cell;
    let h = cell.grid.h;
    let energized = cell.electrodes.iter().filter(|e| !e.floating);
    let has = |kind| energized.clone().any(|e| e.kind == kind);
    if !has(ElectrodeKind::Anode) || !has(ElectrodeKind::Cathode) {
        return Err(Error::Configuration("cell needs an energized anode and an energized cathode".into()));
    }
    let mut anchors: Vec<(f64, f64)> = energized.map(|e| (e.center_x(h), e.metal_potential)).collect();
    anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
    let jumps = cell
        .electrodes
        .iter()
        .filter(|e| e.floating)
        .map(|e| (e.center_x(h), 2.0 * e.polarization.equilibrium))
        .collect();
    let ramp = Ramp { anchors, jumps };

    let grid = cell.grid;
    let profile: Vec<f64> = (0..grid.nx).map(|i| ramp.at(i as f64 * h)).collect();
    for (idx, v) in state.potential.as_mut_slice().iter_mut().enumerate() {
        *v = profile[idx % grid.nx];
    }
    for e in state.cell.electrodes.iter_mut().filter(|e| e.floating) {
        let xc = e.center_x(h);
        e.metal_potential = ramp.at(xc) - e.polarization.equilibrium;
    }
    Ok(())
}
