//! Gauss-Seidel solution of the Laplace problem with polarized electrode
//! boundaries, floating metal potentials and current-density derivation.

mod current;
mod plan;
mod polarization;
mod predictor;

pub use current::{DepositFace, FluxBalance, SectionLabel};
pub use polarization::electrode_dv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mask::face_is_tangent, CellGeometry, Direction, Mask, PointClass, ScalarField};
use plan::InterfacePlan;

/// Iteration controls. The electrolyte conductivity lives in the geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the largest per-iteration change, volts.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iterations per step cycle.
    pub inner_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_iterations: 100_000,
            inner_steps: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Configuration(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.inner_steps == 0 {
            return Err(Error::Configuration("inner steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_max_delta: f64,
}

/// Mutable solution state of one cell.
#[derive(Clone, Debug)]
pub struct SolverState {
    cell: CellGeometry,
    mask: Mask,
    /// Open-direction set of every interface point, 0 elsewhere.
    open: Vec<u8>,
    plans: Vec<InterfacePlan>,
    /// Non-interface electrolyte points with their mirrored 6-neighbourhood.
    stencils: Vec<(usize, [usize; 6])>,
    potential: ScalarField,
    iteration_count: usize,
    last_max_delta: f64,
    /// Set once the field has been iterated or loaded from a solution.
    solved: bool,
}

impl SolverState {
    /// Builds the state and fills it with the linear predictor.
    pub fn init(cell: CellGeometry) -> Result<Self> {
        let mut state = Self::bare(cell)?;
        predictor::apply(&mut state)?;
        Ok(state)
    }

    /// Builds the state around a stored potential field (warm start).
    /// Metal potentials come from the electrode records.
    pub fn with_potential(cell: CellGeometry, potential: ScalarField) -> Result<Self> {
        let mut state = Self::bare(cell)?;
        if potential.dims() != state.cell.grid.dims() {
            return Err(Error::DimensionMismatch {
                expected: state.cell.grid.len(),
                found: potential.as_slice().len(),
            });
        }
        if potential.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("potential contains non-finite values".into()));
        }
        state.potential = potential;
        state.solved = true;
        Ok(state)
    }

    fn bare(cell: CellGeometry) -> Result<Self> {
        let mask = Mask::build(&cell)?;
        let grid = cell.grid;
        let dims = grid.dims();
        let h = grid.h;

        let plans: Vec<InterfacePlan> = cell.electrodes.iter().map(|e| InterfacePlan::build(e, &grid)).collect();
        for (id, (e, plan)) in cell.electrodes.iter().zip(&plans).enumerate() {
            if e.floating && plan.weight_sum <= 0.0 {
                return Err(Error::Configuration(format!(
                    "floating electrode {id} has no surface facing the electrolyte"
                )));
            }
            let k = e.polarization.anodic_slope.max(e.polarization.cathodic_slope);
            let ratio = k * cell.conductivity / h;
            if ratio >= 1.0 {
                log::warn!(
                    "electrode {id}: polarization ratio k*sigma/h = {ratio:.3} is large; the iteration may diverge"
                );
            }
        }

        let mut open = vec![0u8; grid.len()];
        for (idx, class) in mask.classes().iter().enumerate() {
            if let PointClass::Interface(id) = *class {
                open[idx] = plan::open_directions(&cell.electrodes[id], grid.coords(idx), dims);
            }
        }

        let [nx, ny, nz] = dims;
        let mut stencils = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = grid.index(i, j, k);
                    if mask.class_at(idx) != PointClass::Electrolyte {
                        continue;
                    }
                    let (im, ip) = mirror(i, nx);
                    let (jm, jp) = mirror(j, ny);
                    let (km, kp) = mirror(k, nz);
                    stencils.push((
                        idx,
                        [
                            grid.index(im, j, k),
                            grid.index(ip, j, k),
                            grid.index(i, jm, k),
                            grid.index(i, jp, k),
                            grid.index(i, j, km),
                            grid.index(i, j, kp),
                        ],
                    ));
                }
            }
        }

        Ok(SolverState {
            potential: ScalarField::zeros(dims),
            cell,
            mask,
            open,
            plans,
            stencils,
            iteration_count: 0,
            last_max_delta: 0.0,
            solved: false,
        })
    }

    pub fn cell(&self) -> &CellGeometry {
        &self.cell
    }

    pub fn into_cell(self) -> CellGeometry {
        self.cell
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    /// Direct access to the iterate; callers own consistency.
    pub fn potential_mut(&mut self) -> &mut ScalarField {
        &mut self.potential
    }

    pub fn iteration_count(&self) -> usize {
        self.iteration_count
    }

    pub fn last_max_delta(&self) -> f64 {
        self.last_max_delta
    }

    /// Restores counters from a saved session.
    pub fn set_progress(&mut self, iteration_count: usize, last_max_delta: f64) {
        self.iteration_count = iteration_count;
        self.last_max_delta = last_max_delta;
    }

    /// True after at least one iteration or when built from a stored field.
    pub fn has_solution(&self) -> bool {
        self.solved
    }

    pub fn metal_potential(&self, id: usize) -> f64 {
        self.cell.electrodes[id].metal_potential
    }

    /// `(id, Vm)` of every floating electrode.
    pub fn floating_potentials(&self) -> Vec<(usize, f64)> {
        self.cell
            .electrodes
            .iter()
            .enumerate()
            .filter(|(_, e)| e.floating)
            .map(|(id, e)| (id, e.metal_potential))
            .collect()
    }

    /// Wall-tangency of the six faces of electrode `id`, in `Direction::ALL` order.
    pub fn tangent_faces(&self, id: usize) -> [bool; 6] {
        let e = &self.cell.electrodes[id];
        let dims = self.cell.grid.dims();
        Direction::ALL.map(|d| face_is_tangent(e, d, dims))
    }

    #[cfg(test)]
    pub(crate) fn open_set(&self, idx: usize) -> u8 {
        self.open[idx]
    }

    /// Sets the interface potentials of electrode `id` from the lagged jump
    /// law. Returns the largest change.
    pub fn update_interface_potentials(&mut self, id: usize) -> f64 {
        let e = &self.cell.electrodes[id];
        let vm = e.metal_potential;
        let params = e.polarization;
        let sigma = self.cell.conductivity;
        let h = self.cell.grid.h;
        let plan = &mut self.plans[id];
        let v = self.potential.as_mut_slice();

        for (slot, p) in plan.dv_scratch.iter_mut().zip(&plan.defined) {
            *slot = electrode_dv(p.section, &params, sigma, (v[p.neighbor] - v[p.idx]) / h);
        }
        let averaged: Vec<f64> = plan
            .averaged
            .iter()
            .map(|a| {
                if a.sources.is_empty() {
                    let sum: f64 = a
                        .fallback
                        .iter()
                        .map(|&nb| electrode_dv(a.section, &params, sigma, (v[nb] - v[a.idx]) / h))
                        .sum();
                    sum / a.fallback.len() as f64
                } else {
                    a.sources.iter().map(|&s| plan.dv_scratch[s]).sum::<f64>() / a.sources.len() as f64
                }
            })
            .collect();

        let mut max_delta = 0.0f64;
        let mut assign = |idx: usize, value: f64| {
            max_delta = nan_max(max_delta, (value - v[idx]).abs());
            v[idx] = value;
        };
        for (p, dv) in plan.defined.iter().zip(&plan.dv_scratch) {
            assign(p.idx, vm - dv);
        }
        for (a, dv) in plan.averaged.iter().zip(&averaged) {
            assign(a.idx, vm - dv);
        }
        for &idx in &plan.metal {
            assign(idx, vm);
        }
        max_delta
    }

    /// One Gauss-Seidel sweep over the non-interface electrolyte points.
    pub fn relax_electrolyte(&mut self) -> f64 {
        let v = self.potential.as_mut_slice();
        let mut max_delta = 0.0f64;
        for (idx, nb) in &self.stencils {
            let new = (v[nb[0]] + v[nb[1]] + v[nb[2]] + v[nb[3]] + v[nb[4]] + v[nb[5]]) / 6.0;
            max_delta = nan_max(max_delta, (new - v[*idx]).abs());
            v[*idx] = new;
        }
        max_delta
    }

    /// Moves a floating electrode's metal potential by the area-weighted mean
    /// of the neighbour-minus-interface differences. Returns the new value.
    pub fn update_floating_potential(&mut self, id: usize) -> f64 {
        let plan = &self.plans[id];
        let v = self.potential.as_slice();
        let sum: f64 = plan.elements.iter().map(|el| el.weight * (v[el.neighbor] - v[el.idx])).sum();
        let e = &mut self.cell.electrodes[id];
        e.metal_potential += sum / plan.weight_sum;
        e.metal_potential
    }

    /// Interface update, electrolyte sweep and floating update, in order.
    pub fn run_iteration(&mut self) -> Result<f64> {
        let mut max_delta = 0.0f64;
        for id in 0..self.plans.len() {
            max_delta = nan_max(max_delta, self.update_interface_potentials(id));
        }
        max_delta = nan_max(max_delta, self.relax_electrolyte());
        for id in 0..self.plans.len() {
            if self.cell.electrodes[id].floating {
                let old = self.cell.electrodes[id].metal_potential;
                let new = self.update_floating_potential(id);
                max_delta = nan_max(max_delta, (new - old).abs());
            }
        }
        self.iteration_count += 1;
        self.last_max_delta = max_delta;
        self.solved = true;
        if !max_delta.is_finite() {
            return Err(Error::Divergence {
                iterations: self.iteration_count,
            });
        }
        Ok(max_delta)
    }

    /// Iterates until the largest change is within tolerance or the budget
    /// is spent, then writes metal potentials into electrode interiors.
    pub fn solve(&mut self, config: &SolverConfig) -> Result<ConvergenceReport> {
        config.validate()?;
        let mut report = ConvergenceReport {
            converged: false,
            iterations: 0,
            final_max_delta: self.last_max_delta,
        };
        while report.iterations < config.max_iterations {
            let delta = self.run_iteration()?;
            report.iterations += 1;
            report.final_max_delta = delta;
            if delta <= config.tolerance {
                report.converged = true;
                break;
            }
        }
        self.finalize();
        Ok(report)
    }

    /// Writes each electrode's metal potential into its interior points.
    pub fn finalize(&mut self) {
        let v = self.potential.as_mut_slice();
        for (e, plan) in self.cell.electrodes.iter().zip(&self.plans) {
            for &idx in &plan.interior {
                v[idx] = e.metal_potential;
            }
        }
    }

    /// Largest `|V - mean(6 neighbours)|` over non-interface electrolyte points.
    pub fn laplace_residual(&self) -> f64 {
        let v = self.potential.as_slice();
        self.stencils
            .iter()
            .map(|(idx, nb)| {
                let mean = (v[nb[0]] + v[nb[1]] + v[nb[2]] + v[nb[3]] + v[nb[4]] + v[nb[5]]) / 6.0;
                (v[*idx] - mean).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Maximum that keeps NaN, so a non-finite update is never masked.
#[inline]
fn nan_max(a: f64, b: f64) -> f64 {
    if a >= b || a.is_nan() {
        a
    } else {
        b
    }
}

/// Neighbour indices along one axis with the wall ghost mirrored inward.
#[inline]
fn mirror(i: usize, n: usize) -> (usize, usize) {
    let lo = if i == 0 { 1 } else { i - 1 };
    let hi = if i + 1 == n { n - 2 } else { i + 1 };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Electrode, GridSpec, IndexBox, PolarizationParams};

    pub(crate) fn plates(nx: usize, n: usize, va: f64, vc: f64) -> CellGeometry {
        CellGeometry::new(GridSpec::new(nx, n, n, 0.01).unwrap(), 50.0)
            .with_electrode(Electrode::anode(IndexBox::new([0, 0, 0], [1, n - 1, n - 1]), va))
            .with_electrode(Electrode::cathode(IndexBox::new([nx - 2, 0, 0], [nx - 1, n - 1, n - 1]), vc))
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn relax_takes_neighbour_mean() {
        let cell = CellGeometry::new(GridSpec::new(5, 5, 5, 1.0).unwrap(), 1.0);
        let mut s = SolverState::bare(cell).unwrap();
        s.potential.set([2, 2, 3], 6.0);
        // the first visited neighbour-sum at (2,2,2) reads the 6 only
        let v = s.potential.clone();
        let g = s.cell.grid;
        let idx = g.index(2, 2, 2);
        let (_, nb) = s.stencils.iter().find(|(i, _)| *i == idx).unwrap();
        let mean: f64 = nb.iter().map(|&n| v.as_slice()[n]).sum::<f64>() / 6.0;
        assert_eq!(mean, 1.0);
    }

    #[test]
    fn constant_field_is_fixed_point() {
        let mut s = SolverState::init(plates(8, 4, 2.0, 2.0)).unwrap();
        assert_eq!(s.relax_electrolyte(), 0.0);
        assert!(s.potential.as_slice().iter().all(|&v| v == 2.0));
        assert_eq!(s.run_iteration().unwrap(), 0.0);
    }

    #[test]
    fn mirror_closure_on_walls() {
        assert_eq!(mirror(0, 5), (1, 1));
        assert_eq!(mirror(4, 5), (3, 3));
        assert_eq!(mirror(2, 5), (1, 3));
    }

    #[test]
    fn ideal_interfaces_take_metal_potential() {
        let mut s = SolverState::init(plates(10, 5, 1.0, 0.0)).unwrap();
        s.potential.as_mut_slice().iter_mut().for_each(|v| *v = 0.3);
        s.update_interface_potentials(0);
        s.update_interface_potentials(1);
        for idx in 0..s.cell.grid.len() {
            match s.mask.class_at(idx) {
                PointClass::Interface(0) => assert_eq!(s.potential.as_slice()[idx], 1.0),
                PointClass::Interface(1) => assert_eq!(s.potential.as_slice()[idx], 0.0),
                _ => {}
            }
        }
    }

    #[test]
    fn uniform_gradient_gives_uniform_face() {
        let pol = PolarizationParams::new(0.1, 1e-4, 1e-4);
        let mut cell = plates(10, 5, 1.0, 0.0);
        cell.electrodes[0].polarization = pol;
        let mut s = SolverState::init(cell).unwrap();
        let g = s.cell.grid;
        // V = 1 - x: gradient -1/h per interval along x everywhere
        for idx in 0..g.len() {
            let [i, _, _] = g.coords(idx);
            s.potential.as_mut_slice()[idx] = 1.0 - i as f64 * 0.05;
        }
        s.update_interface_potentials(0);
        let expected = 1.0 - electrode_dv(crate::grid::Section::Anodic, &pol, 50.0, -0.05 / 0.01);
        for j in 0..5 {
            for k in 0..5 {
                let got = s.potential.get([1, j, k]);
                assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
            }
        }
    }

    #[test]
    fn edge_point_averages_adjacent_faces() {
        let g = GridSpec::new(12, 12, 12, 1.0).unwrap();
        let pol = PolarizationParams::new(0.0, 0.1, 0.1);
        let cell = CellGeometry::new(g, 1.0)
            .with_electrode(Electrode::anode(IndexBox::new([0, 0, 0], [1, 11, 11]), 1.0))
            .with_electrode(Electrode::cathode(IndexBox::new([10, 0, 0], [11, 11, 11]), 0.0))
            .with_electrode(Electrode::anode(IndexBox::new([4, 4, 4], [7, 7, 7]), 2.0).with_polarization(pol));
        let mut s = SolverState::init(cell).unwrap();
        s.potential.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        // -x face neighbours at 1.0, -y face neighbours at 3.0
        for j in 4..=7 {
            for k in 4..=7 {
                s.potential.set([3, j, k], 1.0);
            }
        }
        for i in 4..=7 {
            for k in 4..=7 {
                s.potential.set([i, 3, k], 3.0);
            }
        }
        s.update_interface_potentials(2);
        let a = electrode_dv(crate::grid::Section::Anodic, &pol, 1.0, 1.0);
        let b = electrode_dv(crate::grid::Section::Anodic, &pol, 1.0, 3.0);
        let got = s.potential.get([4, 4, 5]);
        // edge point (4,4,5): sources (4,5,5),(4,5,6) on -x and (5,4,5),(5,4,6) on -y
        let expected = 2.0 - (a + b) / 2.0;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn floating_update_is_weighted_mean() {
        let g = GridSpec::new(14, 8, 8, 1.0).unwrap();
        let cell = CellGeometry::new(g, 1.0)
            .with_electrode(Electrode::anode(IndexBox::new([0, 0, 0], [1, 7, 7]), 1.0))
            .with_electrode(Electrode::cathode(IndexBox::new([12, 0, 0], [13, 7, 7]), 0.0))
            .with_electrode(Electrode::bipolar(IndexBox::new([6, 2, 2], [7, 5, 5]), 6));
        let mut s = SolverState::init(cell).unwrap();
        let vm = s.metal_potential(2);
        // uniform offset c between every element and its neighbour
        let plan = s.plans[2].clone();
        for el in &plan.elements {
            s.potential.as_mut_slice()[el.idx] = 0.2;
        }
        for el in &plan.elements {
            s.potential.as_mut_slice()[el.neighbor] = 0.45;
        }
        let new = s.update_floating_potential(2);
        assert!((new - (vm + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn floating_without_exposed_surface_rejected() {
        let g = GridSpec::new(4, 4, 4, 1.0).unwrap();
        let cell = CellGeometry::new(g, 1.0).with_electrode(Electrode::bipolar(IndexBox::new([0, 0, 0], [3, 3, 3]), 1));
        let err = SolverState::with_potential(cell, ScalarField::zeros([4, 4, 4])).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn zero_iterations_budget() {
        let mut s = SolverState::init(plates(8, 4, 1.0, 0.0)).unwrap();
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        let r = s.solve(&cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn equal_plates_converge_in_one_iteration() {
        let mut s = SolverState::init(plates(8, 4, 0.7, 0.7)).unwrap();
        let r = s.solve(&SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn divergence_is_reported() {
        let mut s = SolverState::init(plates(8, 4, 1.0, 0.0)).unwrap();
        s.potential.set([4, 2, 2], f64::NAN);
        let err = s.run_iteration().unwrap_err();
        assert!(matches!(err, Error::Divergence { iterations: 1 }));
    }

    #[test]
    fn warm_start_is_idempotent() {
        let mut s = SolverState::init(plates(12, 5, 1.0, 0.0)).unwrap();
        let cfg = SolverConfig {
            tolerance: 1e-9,
            ..SolverConfig::default()
        };
        assert!(s.solve(&cfg).unwrap().converged);
        let before = s.potential.clone();
        let r = s.solve(&cfg).unwrap();
        assert!(r.converged && r.iterations <= 2);
        for (a, b) in before.as_slice().iter().zip(s.potential.as_slice()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn interiors_hold_metal_potential_after_solve() {
        let g = GridSpec::new(14, 8, 8, 1.0).unwrap();
        let cell = CellGeometry::new(g, 1.0)
            .with_electrode(Electrode::anode(IndexBox::new([0, 0, 0], [2, 7, 7]), 1.0))
            .with_electrode(Electrode::cathode(IndexBox::new([11, 0, 0], [13, 7, 7]), 0.0))
            .with_electrode(Electrode::bipolar(IndexBox::new([5, 2, 2], [8, 5, 5]), 6));
        let mut s = SolverState::init(cell).unwrap();
        s.solve(&SolverConfig {
            tolerance: 1e-8,
            ..SolverConfig::default()
        })
        .unwrap();
        let vm = s.metal_potential(2);
        assert_eq!(s.potential.get([6, 3, 3]), vm);
        assert_eq!(s.potential.get([1, 4, 4]), 1.0);
    }
}
