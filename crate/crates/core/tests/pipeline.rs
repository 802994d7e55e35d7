use ewcell::persist::{
    export_slice, export_streamlines, extract_slice, import_streamlines, load_cell, save_cell, CellFile, NamedColorMap,
    Quantity, ShadingRefs, Slice, StreamlineExport,
};
use ewcell::shade::{autofocus, ColorMap, LightTable, LightingParams, DEFAULT_FOV};
use ewcell::tracer::{trace_all, FieldSnapshot};
use ewcell::{
    CellGeometry, Electrode, Error, Execution, GridSpec, IndexBox, PolarizationParams, SolverConfig, SolverState,
    Termination,
};

fn cell() -> CellGeometry {
    CellGeometry::new(GridSpec::new(24, 11, 11, 0.01).unwrap(), 30.0)
        .with_electrode(Electrode::anode(IndexBox::new([0, 0, 0], [1, 10, 10]), 3.0))
        .with_electrode(Electrode::cathode(IndexBox::new([22, 0, 0], [23, 10, 10]), 0.0))
        .with_electrode(
            Electrode::bipolar(IndexBox::new([11, 1, 1], [12, 9, 9]), 11)
                .with_polarization(PolarizationParams::new(0.6, 1e-5, 1e-5)),
        )
}

#[test]
fn geometry_file_to_exported_lines() {
    let dir = tempfile::tempdir().unwrap();
    let geometry = dir.path().join("geometry.json");
    save_cell(&geometry, &CellFile::from_cell(&cell())).unwrap();

    let loaded = load_cell(&geometry).unwrap();
    assert!(loaded.potential.is_none());
    assert!(loaded.state().unwrap().is_none());

    let config = SolverConfig {
        tolerance: 1e-6,
        ..loaded.solver
    };
    let mut state = SolverState::init(loaded.cell()).unwrap();
    let report = state.solve(&config).unwrap();
    assert!(report.converged);

    let solved = dir.path().join("solved.json");
    save_cell(&solved, &CellFile::from_state(&state).with_configs(config, None)).unwrap();
    let resumed = load_cell(&solved).unwrap().state().unwrap().unwrap();
    assert_eq!(resumed.iteration_count(), state.iteration_count());
    assert_eq!(resumed.metal_potential(2), state.metal_potential(2));

    let snapshot = FieldSnapshot::from_state(&resumed, Execution::Parallel).unwrap();
    let trace = load_cell(&solved).unwrap().trace_config();
    let groups = trace_all(&snapshot, &trace, Execution::Parallel).unwrap();
    assert_eq!(groups.len(), 3);
    assert!(groups.iter().all(|g| !g.is_empty()));
    assert!(groups[0]
        .iter()
        .any(|l| l.termination == Termination::EnteredElectrode && l.entered == Some(2)));

    let (lo, hi) = resumed.cell().electrodes[2].physical_box(resumed.cell().grid.h);
    let shading = ShadingRefs {
        light_table: LightTable::build(LightingParams::default(), LightTable::DEFAULT_RESOLUTION).unwrap(),
        colormaps: ColorMap::ALL.iter().copied().map(NamedColorMap::from).collect(),
        autofocus: Some(autofocus(lo, hi, DEFAULT_FOV, 1.0, 1.0).unwrap()),
    };
    let export = StreamlineExport::new(&groups, Some(shading));
    let lines = dir.path().join("lines.json");
    export_streamlines(&lines, &export).unwrap();
    let imported = import_streamlines(&lines).unwrap();
    assert_eq!(imported, export);
    assert_eq!(imported.groups(), groups);

    let slice = extract_slice(&resumed, 2, 5, Quantity::Potential).unwrap();
    let path = dir.path().join("slice.json");
    export_slice(&path, &slice).unwrap();
    let back = Slice::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, slice);
    assert_eq!(back.dims, [24, 11]);
    assert_eq!(back.values[11 * 11 + 5], resumed.potential().get([11, 5, 5]));
}

#[test]
fn unsolved_cells_refuse_current_queries() {
    let state = SolverState::init(cell()).unwrap();
    assert!(matches!(
        extract_slice(&state, 0, 3, Quantity::Current),
        Err(Error::NotSolved)
    ));
    let bare = CellFile::from_cell(state.cell());
    assert!(bare.state().unwrap().is_none());
}

#[test]
fn damaged_files_are_rejected() {
    let mut state = SolverState::init(cell()).unwrap();
    state.run_iteration().unwrap();
    let good = CellFile::from_state(&state);

    let mut wrong_version = good.clone();
    wrong_version.version += 1;
    let text = wrong_version.to_json().unwrap();
    assert!(matches!(CellFile::from_json(&text), Err(Error::Version { .. })));

    let mut short = good.clone();
    short.potential.as_mut().unwrap().values.pop();
    let text = short.to_json().unwrap();
    assert!(matches!(CellFile::from_json(&text), Err(Error::DimensionMismatch { .. })));

    assert!(matches!(CellFile::from_json("{\"version\": 1"), Err(Error::Malformed(_))));
    assert!(matches!(load_cell("/nonexistent/cell.json"), Err(Error::Io { .. })));
}
