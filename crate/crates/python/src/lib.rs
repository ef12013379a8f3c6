//! Python bindings. Structured inputs (waveguide, design options) are plain
//! dicts with the same keys as the TOML configuration; results come back as
//! dicts and lists.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use qpm_core::metrology::{
    brightness_lower_bound as brightness_core, fresnel_reflectivity as fresnel_core,
};
use qpm_core::tuning::bandwidth_report;
use qpm_core::{
    correlation_time, marginal_spectrum, Arm, BrightnessInput, DesignOptions, Dispersion,
    DispersionModel, Error, FringeScan, Polarization, ProcessConfig, SpectralGrid, WaveguideSpec,
};
use serde::de::DeserializeOwned;

create_exception!(qpm, QpmError, PyValueError, "Base class of all qpm errors.");
create_exception!(
    qpm,
    ConfigError,
    QpmError,
    "Invalid configuration, model or input."
);
create_exception!(
    qpm,
    ValidityError,
    QpmError,
    "Outside the model validity range."
);
create_exception!(qpm, NoRootError, QpmError, "No root in a solver bracket.");
create_exception!(
    qpm,
    AmbiguousRootError,
    QpmError,
    "Multiple, non-unique or degenerate roots."
);
create_exception!(
    qpm,
    ConvergenceError,
    QpmError,
    "A numerical method did not converge."
);
create_exception!(
    qpm,
    SpectrumError,
    QpmError,
    "A spectrum could not be normalized or measured."
);
create_exception!(
    qpm,
    MetrologyError,
    QpmError,
    "Fringe or brightness analysis failed."
);
create_exception!(
    qpm,
    NonPhysicalError,
    QpmError,
    "Non-physical index, wavelength or mismatch."
);
create_exception!(qpm, QpmIoError, QpmError, "A file could not be read.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Io { .. } => QpmIoError::new_err(msg),
        Error::NoRootInBracket { .. } => NoRootError::new_err(msg),
        Error::InvalidConfig(_)
        | Error::ModelParse { .. }
        | Error::UnknownPolarization(_)
        | Error::UnknownWidth { .. }
        | Error::InvalidOrder(_) => ConfigError::new_err(msg),
        Error::OutOfValidityRange { .. } | Error::StencilOutOfRange { .. } => {
            ValidityError::new_err(msg)
        }
        Error::MultipleRoots { .. } | Error::NonUnique { .. } | Error::DegenerateRoot { .. } => {
            AmbiguousRootError::new_err(msg)
        }
        Error::NonConverged { .. } => ConvergenceError::new_err(msg),
        Error::Normalization(_)
        | Error::DegenerateSpectrum(_)
        | Error::EmptySpectrum
        | Error::FractionOutOfRange(_)
        | Error::InsufficientRange(_) => SpectrumError::new_err(msg),
        Error::NoFringeFound(_)
        | Error::GainImplied { .. }
        | Error::InvalidReflectivity(_)
        | Error::InvalidContrast(_)
        | Error::InvalidIndex(_)
        | Error::NegativeNetRate { .. } => MetrologyError::new_err(msg),
        Error::NonPhysical(_)
        | Error::NonPhysicalIndex { .. }
        | Error::NonPositiveMismatch { .. } => NonPhysicalError::new_err(msg),
    }
}

fn to_python<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?
        .call_method1("loads", (value.to_string(),))
}

/// A dict (or None for defaults) decoded through its JSON form.
fn from_python<T: DeserializeOwned + Default>(
    py: Python<'_>,
    value: Option<&Bound<'_, PyAny>>,
) -> PyResult<T> {
    match value {
        None => Ok(T::default()),
        Some(v) => {
            let text: String = py.import("json")?.call_method1("dumps", (v,))?.extract()?;
            serde_json::from_str(&text).map_err(|e| ConfigError::new_err(e.to_string()))
        }
    }
}

/// Dispersion model: temperature-dependent ordinary and extraordinary indices.
#[pyclass(frozen, module = "qpm")]
struct Model {
    inner: Arc<DispersionModel>,
}

#[pymethods]
impl Model {
    /// The bundled Ti-indiffused LiNbO3 waveguide model.
    #[staticmethod]
    fn bundled() -> Self {
        Self {
            inner: Arc::new(DispersionModel::bundled()),
        }
    }

    /// Bulk congruent LiNbO3, without waveguide correction.
    #[staticmethod]
    fn bulk() -> Self {
        Self {
            inner: Arc::new(DispersionModel::bundled_bulk()),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(DispersionModel::load(path).map_err(to_py)?),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (text, origin = "<string>"))]
    fn from_toml(text: &str, origin: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(DispersionModel::from_toml_str(text, origin).map_err(to_py)?),
        })
    }

    fn with_width(&self, width_um: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(self.inner.with_width(width_um).map_err(to_py)?),
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn version(&self) -> String {
        self.inner.version().to_string()
    }

    /// Index at a vacuum wavelength (nm) and temperature (C); polarization "o"/"e"/"te"/"tm".
    fn refractive_index(
        &self,
        wavelength_nm: f64,
        temperature_c: f64,
        polarization: &str,
    ) -> PyResult<f64> {
        let pol: Polarization = polarization.parse().map_err(to_py)?;
        self.inner
            .refractive_index(wavelength_nm, temperature_c, pol)
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(name={:?}, version={:?})",
            self.inner.name(),
            self.inner.version()
        )
    }
}

/// Model used when none is given: the bundled one at the waveguide's width.
fn resolve_model(
    model: Option<&Model>,
    waveguide: &WaveguideSpec,
) -> PyResult<Arc<dyn Dispersion>> {
    let base = match model {
        Some(m) => m.inner.clone(),
        None => Arc::new(DispersionModel::bundled()),
    };
    Ok(Arc::new(
        base.with_width(waveguide.width_um).map_err(to_py)?,
    ))
}

/// Working point of the waveguide's poling period.
#[pyfunction]
#[pyo3(signature = (waveguide = None, model = None, options = None))]
fn solve_design_point<'py>(
    py: Python<'py>,
    waveguide: Option<&Bound<'py, PyAny>>,
    model: Option<PyRef<'py, Model>>,
    options: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let wg: WaveguideSpec = from_python(py, waveguide)?;
    let opts: DesignOptions = from_python(py, options)?;
    let m = resolve_model(model.as_deref(), &wg)?;
    let wp = py
        .detach(|| qpm_core::solve_design_point(m, &wg, &opts))
        .map_err(to_py)?;
    let mut v = serde_json::to_value(&wp).expect("working point serializes");
    v["within_tolerances"] = wp.within_tolerances().into();
    to_python(py, &v)
}

/// JSA, signal/idler marginals, FW-at-fraction report and correlation time.
#[pyfunction]
#[pyo3(signature = (pump_nm, signal_nm, temperature_c, waveguide = None, model = None, half_span_thz = 40.0, points = 4097, fraction = 0.8))]
#[allow(clippy::too_many_arguments)]
fn jsa<'py>(
    py: Python<'py>,
    pump_nm: f64,
    signal_nm: f64,
    temperature_c: f64,
    waveguide: Option<&Bound<'py, PyAny>>,
    model: Option<PyRef<'py, Model>>,
    half_span_thz: f64,
    points: usize,
    fraction: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let wg: WaveguideSpec = from_python(py, waveguide)?;
    let m = resolve_model(model.as_deref(), &wg)?;
    let value = py
        .detach(|| -> qpm_core::Result<serde_json::Value> {
            let cfg = ProcessConfig::from_wavelengths(m, wg, pump_nm, signal_nm, temperature_c)?;
            let result = qpm_core::jsa(&cfg, &SpectralGrid::from_thz(half_span_thz, points)?)?;
            let signal = marginal_spectrum(&result, Arm::Signal, false)?;
            let idler = marginal_spectrum(&result, Arm::Idler, false)?;
            Ok(serde_json::json!({
                "delta_omega_rad_s": result.delta_omega,
                "delta_beta_rad_per_m": result.delta_beta,
                "re": result.amplitude.iter().map(|f| f.re).collect::<Vec<_>>(),
                "im": result.amplitude.iter().map(|f| f.im).collect::<Vec<_>>(),
                "length_m": result.length_m,
                "idler_wavelength_nm": cfg.idler_wavelength_nm(),
                "signal": signal,
                "idler": idler,
                "signal_bandwidth": bandwidth_report(&signal, fraction)?,
                "idler_bandwidth": bandwidth_report(&idler, fraction)?,
                "correlation_time_fs": correlation_time(&signal)?,
            }))
        })
        .map_err(to_py)?;
    to_python(py, &value)
}

/// Full width of `values` at `fraction` of the maximum, in units of `axis`.
#[pyfunction]
#[pyo3(signature = (axis, values, fraction = 0.8))]
fn bandwidth_fw_at_fraction<'py>(
    py: Python<'py>,
    axis: Vec<f64>,
    values: Vec<f64>,
    fraction: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let w = qpm_core::bandwidth_fw_at_fraction(&axis, &values, fraction).map_err(to_py)?;
    to_python(
        py,
        &serde_json::json!({
            "width": w.width,
            "lower": w.lower,
            "upper": w.upper,
            "side_lobe": w.side_lobe,
            "uncertainty": w.uncertainty,
        }),
    )
}

#[pyfunction]
fn fringe_contrast(
    axis: Vec<f64>,
    power: Vec<f64>,
    reflectivity: f64,
    length_cm: f64,
) -> PyResult<f64> {
    let scan = FringeScan::new(axis, power, reflectivity, length_cm).map_err(to_py)?;
    qpm_core::fringe_contrast(&scan).map_err(to_py)
}

/// Propagation loss (dB/cm) from fringe contrast, facet reflectivity and length.
#[pyfunction]
fn loss_from_contrast(contrast: f64, reflectivity: f64, length_cm: f64) -> PyResult<f64> {
    qpm_core::loss_from_contrast(contrast, reflectivity, length_cm).map_err(to_py)
}

#[pyfunction]
fn fresnel_reflectivity(n: f64) -> PyResult<f64> {
    fresnel_core(n).map_err(to_py)
}

/// Brightness lower bound, counts/(s mW GHz).
#[pyfunction]
#[pyo3(signature = (detected_rate_cps, pump_power_mw, bandwidth_ghz, background_rate_cps = 0.0, coupling_efficiency = None, calibration_scale = 1.0))]
fn brightness_lower_bound<'py>(
    py: Python<'py>,
    detected_rate_cps: f64,
    pump_power_mw: f64,
    bandwidth_ghz: f64,
    background_rate_cps: f64,
    coupling_efficiency: Option<f64>,
    calibration_scale: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let mut input = BrightnessInput::new(
        detected_rate_cps,
        background_rate_cps,
        pump_power_mw,
        bandwidth_ghz,
    );
    input.coupling_efficiency = coupling_efficiency;
    input.calibration_scale = calibration_scale;
    let report = brightness_core(&input).map_err(to_py)?;
    to_python(
        py,
        &serde_json::to_value(report).expect("report serializes"),
    )
}

#[pymodule]
pub fn qpm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(solve_design_point, m)?)?;
    m.add_function(wrap_pyfunction!(jsa, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth_fw_at_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(fringe_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(loss_from_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(fresnel_reflectivity, m)?)?;
    m.add_function(wrap_pyfunction!(brightness_lower_bound, m)?)?;
    m.add("QpmError", py.get_type::<QpmError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("ValidityError", py.get_type::<ValidityError>())?;
    m.add("NoRootError", py.get_type::<NoRootError>())?;
    m.add("AmbiguousRootError", py.get_type::<AmbiguousRootError>())?;
    m.add("ConvergenceError", py.get_type::<ConvergenceError>())?;
    m.add("SpectrumError", py.get_type::<SpectrumError>())?;
    m.add("MetrologyError", py.get_type::<MetrologyError>())?;
    m.add("NonPhysicalError", py.get_type::<NonPhysicalError>())?;
    m.add("QpmIoError", py.get_type::<QpmIoError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
