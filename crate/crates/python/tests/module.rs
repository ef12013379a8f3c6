use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use qpm::qpm as qpm_module;

fn with_module<R>(f: impl FnOnce(Python<'_>, Bound<'_, PyModule>) -> R) -> R {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(qpm_module);
        Python::initialize();
    });
    Python::attach(|py| {
        let m = py.import("qpm").expect("module imports");
        f(py, m)
    })
}

#[test]
fn design_point_through_python() {
    with_module(|py, m| {
        let wg = PyDict::new(py);
        wg.set_item("poling_period_um", 6.3).unwrap();
        let wp = m
            .getattr("solve_design_point")
            .unwrap()
            .call1((wg,))
            .unwrap();
        let t: f64 = wp.get_item("temperature_c").unwrap().extract().unwrap();
        assert!((t - 205.575).abs() < 0.01, "{t}");
        assert!(wp
            .get_item("within_tolerances")
            .unwrap()
            .extract::<bool>()
            .unwrap());
    });
}

#[test]
fn errors_raise_module_exceptions() {
    with_module(|py, m| {
        let err = m
            .getattr("loss_from_contrast")
            .unwrap()
            .call1((0.5, 0.1406, 4.0))
            .unwrap_err();
        assert!(err.get_type(py).is(m.getattr("MetrologyError").unwrap()));
        let opts = PyDict::new(py);
        opts.set_item("temperature_range_c", vec![20.0, 60.0])
            .unwrap();
        let kwargs = PyDict::new(py);
        kwargs.set_item("options", opts).unwrap();
        let err = m
            .getattr("solve_design_point")
            .unwrap()
            .call((), Some(&kwargs))
            .unwrap_err();
        assert!(err.get_type(py).is(m.getattr("NoRootError").unwrap()));
    });
}

#[test]
fn brightness_and_model_methods() {
    with_module(|py, m| {
        let kwargs = PyDict::new(py);
        kwargs.set_item("coupling_efficiency", 0.2).unwrap();
        let b = m
            .getattr("brightness_lower_bound")
            .unwrap()
            .call((1.25e8, 1.0, 25_000.0), Some(&kwargs))
            .unwrap();
        assert_eq!(
            b.get_item("lower_bound").unwrap().extract::<f64>().unwrap(),
            5e3
        );
        let model = m.getattr("Model").unwrap().call_method0("bundled").unwrap();
        let n: f64 = model
            .call_method1("refractive_index", (1550.0, 25.0, "tm"))
            .unwrap()
            .extract()
            .unwrap();
        assert!(n > 2.1 && n < 2.2, "{n}");
        assert!(model
            .call_method1("refractive_index", (1550.0, 25.0, "x"))
            .is_err());
    });
}
