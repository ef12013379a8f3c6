#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use qpm_core::{
    solve_design_point, DesignOptions, Dispersion, DispersionModel, ProcessConfig, WaveguideSpec,
    WorkingPoint,
};

pub fn model() -> Arc<dyn Dispersion> {
    Arc::new(DispersionModel::bundled())
}

pub fn waveguide(period_um: f64) -> WaveguideSpec {
    WaveguideSpec {
        poling_period_um: period_um,
        ..Default::default()
    }
}

/// Working point of the 6.3 um grating, solved once per test binary.
pub fn design() -> &'static (WorkingPoint, ProcessConfig) {
    static CELL: OnceLock<(WorkingPoint, ProcessConfig)> = OnceLock::new();
    CELL.get_or_init(|| {
        let wg = waveguide(6.3);
        let wp = solve_design_point(model(), &wg, &DesignOptions::default()).unwrap();
        let cfg = wp.process_config(model(), &wg).unwrap();
        (wp, cfg)
    })
}
