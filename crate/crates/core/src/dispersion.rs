//! Material and waveguide dispersion: refractive index, propagation constant
//! and its frequency derivatives.
//!
//! Models are loaded from TOML files (see `docs/model-format.md`). Anything
//! implementing [`Dispersion`] can be fed to the phase-matching code, which is
//! how the tests inject artificial models with known analytic derivatives.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::optics::{wavelength_nm_from_omega, Polarization, SPEED_OF_LIGHT};

/// Bundled Ti-indiffused congruent lithium niobate model (20 um width correction).
pub const BUNDLED_MODEL_TOML: &str = include_str!("../data/lithium_niobate_ti_waveguide.toml");
/// The same bulk coefficients without any waveguide correction.
pub const BULK_MODEL_TOML: &str = include_str!("../data/lithium_niobate_bulk.toml");

/// A source of refractive index and propagation constant.
pub trait Dispersion: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn version(&self) -> &str {
        ""
    }

    /// Refractive index at a vacuum wavelength (nm) and temperature (°C).
    fn refractive_index(
        &self,
        wavelength_nm: f64,
        temperature_c: f64,
        pol: Polarization,
    ) -> Result<f64>;

    /// Propagation constant β = n(ω)·ω/c in rad/m.
    fn beta(&self, omega: f64, temperature_c: f64, pol: Polarization) -> Result<f64> {
        let n = self.refractive_index(wavelength_nm_from_omega(omega), temperature_c, pol)?;
        Ok(n * omega / SPEED_OF_LIGHT)
    }
}

/// Functional forms understood by the model loader.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum IndexForm {
    /// n² = a1 + (a2 + b1 F)/(λ² − (a3 + b2 F)²) + b3 F − a4 λ²,
    /// F = (T − T0)(T + T0 + 546).
    EdwardsLawrence(EdwardsLawrence),
    /// n² = a1 + b1 f + (a2 + b2 f)/(λ² − (a3 + b3 f)²) + (a4 + b4 f)/(λ² − a5²) − a6 λ²,
    /// f = (T − T0)(T + T0 + 546.32).
    Jundt(Jundt),
    /// n² = 1 + Σ Aₖ λ²/(λ² − Bₖ) at the reference temperature, plus a linear
    /// thermo-optic term.
    Sellmeier(Sellmeier),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdwardsLawrence {
    #[serde(default = "default_reference_temperature")]
    pub reference_temperature_c: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jundt {
    #[serde(default = "default_reference_temperature")]
    pub reference_temperature_c: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sellmeier {
    #[serde(default = "default_reference_temperature")]
    pub reference_temperature_c: f64,
    /// `[A, B]` pairs, B in µm².
    pub terms: Vec<[f64; 2]>,
    #[serde(default)]
    pub thermo_optic_per_k: f64,
}

fn default_reference_temperature() -> f64 {
    24.5
}

impl IndexForm {
    /// Bulk index at λ (µm) and T (°C). Returns NaN where n² ≤ 0.
    fn index(&self, lambda_um: f64, temperature_c: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        match self {
            IndexForm::EdwardsLawrence(c) => {
                let t0 = c.reference_temperature_c;
                let f = (temperature_c - t0) * (temperature_c + t0 + 546.0);
                let pole = c.a3 + c.b2 * f;
                let n2 = c.a1 + (c.a2 + c.b1 * f) / (l2 - pole * pole) + c.b3 * f - c.a4 * l2;
                n2.sqrt()
            }
            IndexForm::Jundt(c) => {
                let t0 = c.reference_temperature_c;
                let f = (temperature_c - t0) * (temperature_c + t0 + 546.32);
                let pole = c.a3 + c.b3 * f;
                let n2 = c.a1
                    + c.b1 * f
                    + (c.a2 + c.b2 * f) / (l2 - pole * pole)
                    + (c.a4 + c.b4 * f) / (l2 - c.a5 * c.a5)
                    - c.a6 * l2;
                n2.sqrt()
            }
            IndexForm::Sellmeier(c) => {
                let n2 = 1.0 + c.terms.iter().map(|[a, b]| a * l2 / (l2 - b)).sum::<f64>();
                n2.sqrt() + c.thermo_optic_per_k * (temperature_c - c.reference_temperature_c)
            }
        }
    }
}

/// Additive effective-index correction for one waveguide width.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideCorrection {
    pub width_um: f64,
    /// Polynomial coefficients in vacuum wavelength (µm), constant term first.
    pub ordinary: Vec<f64>,
    pub extraordinary: Vec<f64>,
}

impl WaveguideCorrection {
    pub fn offset(&self, lambda_um: f64, pol: Polarization) -> f64 {
        let coeffs = match pol {
            Polarization::Ordinary => &self.ordinary,
            Polarization::Extraordinary => &self.extraordinary,
        };
        coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda_um + c)
    }
}

/// Temperature-dependent index model for a birefringent crystal waveguide.
///
/// Immutable once loaded; [`DispersionModel::with_width`] returns a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel {
    name: String,
    version: String,
    source: String,
    origin: String,
    wavelength_range_nm: (f64, f64),
    temperature_range_c: (f64, f64),
    ordinary: IndexForm,
    extraordinary: IndexForm,
    corrections: Vec<WaveguideCorrection>,
    active: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    #[serde(default)]
    version: String,
    #[serde(default)]
    source: String,
    validity: Spanned<ValidityFile>,
    ordinary: Spanned<IndexForm>,
    extraordinary: Spanned<IndexForm>,
    #[serde(default)]
    waveguide: Option<Spanned<WaveguideFile>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidityFile {
    wavelength_nm: [f64; 2],
    temperature_c: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveguideFile {
    #[serde(default)]
    default_width_um: Option<f64>,
    #[serde(default)]
    correction: Vec<CorrectionFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrectionFile {
    width_um: f64,
    #[serde(default)]
    ordinary: Vec<f64>,
    #[serde(default)]
    extraordinary: Vec<f64>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

const WIDTH_MATCH_UM: f64 = 1e-9;

impl DispersionModel {
    /// The bundled Ti-indiffused congruent LiNbO₃ model.
    pub fn bundled() -> Self {
        Self::from_toml_str(
            BUNDLED_MODEL_TOML,
            "builtin:lithium_niobate_ti_waveguide.toml",
        )
        .expect("bundled model is valid")
    }

    /// Bulk congruent LiNbO₃ without waveguide correction.
    pub fn bundled_bulk() -> Self {
        Self::from_toml_str(BULK_MODEL_TOML, "builtin:lithium_niobate_bulk.toml")
            .expect("bundled bulk model is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&src, &path.display().to_string())
    }

    /// Parse a model file. `origin` names the file in error messages.
    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::ModelParse {
            path: origin.to_string(),
            line,
            message,
        };
        let file: ModelFile = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of(src, s.start)).unwrap_or(0);
            parse_err(line, e.message().to_string())
        })?;

        let validity_line = line_of(src, file.validity.span().start);
        let validity = file.validity.into_inner();
        let [wmin, wmax] = validity.wavelength_nm;
        let [tmin, tmax] = validity.temperature_c;
        if !(wmin.is_finite() && wmax.is_finite() && 0.0 < wmin && wmin < wmax) {
            return Err(parse_err(
                validity_line,
                format!("invalid wavelength range [{wmin}, {wmax}] nm"),
            ));
        }
        if !(tmin.is_finite() && tmax.is_finite() && tmin < tmax) {
            return Err(parse_err(
                validity_line,
                format!("invalid temperature range [{tmin}, {tmax}] C"),
            ));
        }

        let mut corrections = Vec::new();
        let mut active = None;
        if let Some(wg) = file.waveguide {
            let wg_line = line_of(src, wg.span().start);
            let wg = wg.into_inner();
            for c in wg.correction {
                if !(c.width_um.is_finite() && c.width_um > 0.0) {
                    return Err(parse_err(
                        wg_line,
                        format!("invalid correction width {} um", c.width_um),
                    ));
                }
                if c.ordinary
                    .iter()
                    .chain(&c.extraordinary)
                    .any(|v| !v.is_finite())
                {
                    return Err(parse_err(
                        wg_line,
                        "non-finite correction coefficient".into(),
                    ));
                }
                corrections.push(WaveguideCorrection {
                    width_um: c.width_um,
                    ordinary: c.ordinary,
                    extraordinary: c.extraordinary,
                });
            }
            if let Some(w) = wg.default_width_um {
                active = Some(
                    corrections
                        .iter()
                        .position(|c| (c.width_um - w).abs() <= WIDTH_MATCH_UM)
                        .ok_or_else(|| {
                            parse_err(
                                wg_line,
                                format!("default width {w} um has no correction entry"),
                            )
                        })?,
                );
            }
        }

        let ordinary_line = line_of(src, file.ordinary.span().start);
        let extraordinary_line = line_of(src, file.extraordinary.span().start);
        let model = DispersionModel {
            name: file.name,
            version: file.version,
            source: file.source,
            origin: origin.to_string(),
            wavelength_range_nm: (wmin, wmax),
            temperature_range_c: (tmin, tmax),
            ordinary: file.ordinary.into_inner(),
            extraordinary: file.extraordinary.into_inner(),
            corrections,
            active,
        };
        model.check_physical(Polarization::Ordinary, ordinary_line, origin)?;
        model.check_physical(Polarization::Extraordinary, extraordinary_line, origin)?;
        Ok(model)
    }

    /// Scan the validity box and reject models whose index is not real and > 1.
    fn check_physical(&self, pol: Polarization, line: usize, origin: &str) -> Result<()> {
        const NL: usize = 97;
        const NT: usize = 9;
        let (wmin, wmax) = self.wavelength_range_nm;
        let (tmin, tmax) = self.temperature_range_c;
        let widths: Vec<Option<usize>> = if self.corrections.is_empty() {
            vec![None]
        } else {
            (0..self.corrections.len()).map(Some).collect()
        };
        for w in widths {
            for i in 0..NL {
                let lambda = wmin + (wmax - wmin) * i as f64 / (NL - 1) as f64;
                for j in 0..NT {
                    let t = tmin + (tmax - tmin) * j as f64 / (NT - 1) as f64;
                    let n = self.index_unchecked(lambda, t, pol, w);
                    if !(n.is_finite() && n > 1.0) {
                        return Err(Error::ModelParse {
                            path: origin.to_string(),
                            line,
                            message: format!(
                                "{pol} index {n} at {lambda} nm, {t} C is not real and > 1"
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn index_unchecked(
        &self,
        wavelength_nm: f64,
        temperature_c: f64,
        pol: Polarization,
        correction: Option<usize>,
    ) -> f64 {
        let lambda_um = wavelength_nm * 1e-3;
        let bulk = match pol {
            Polarization::Ordinary => self.ordinary.index(lambda_um, temperature_c),
            Polarization::Extraordinary => self.extraordinary.index(lambda_um, temperature_c),
        };
        match correction {
            Some(i) => bulk + self.corrections[i].offset(lambda_um, pol),
            None => bulk,
        }
    }

    /// A copy of this model with the correction for `width_um` selected.
    ///
    /// Models without any corrections accept every width and stay bulk.
    pub fn with_width(&self, width_um: f64) -> Result<Self> {
        if self.corrections.is_empty() {
            return Ok(self.clone());
        }
        let idx = self
            .corrections
            .iter()
            .position(|c| (c.width_um - width_um).abs() <= WIDTH_MATCH_UM)
            .ok_or_else(|| Error::UnknownWidth {
                model: self.name.clone(),
                width_um,
            })?;
        let mut m = self.clone();
        m.active = Some(idx);
        Ok(m)
    }

    /// Width of the active waveguide correction, `None` for bulk.
    pub fn active_width_um(&self) -> Option<f64> {
        self.active.map(|i| self.corrections[i].width_um)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// File path or `builtin:` tag the model was loaded from.
    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn wavelength_range_nm(&self) -> (f64, f64) {
        self.wavelength_range_nm
    }

    pub fn temperature_range_c(&self) -> (f64, f64) {
        self.temperature_range_c
    }

    pub fn form(&self, pol: Polarization) -> &IndexForm {
        match pol {
            Polarization::Ordinary => &self.ordinary,
            Polarization::Extraordinary => &self.extraordinary,
        }
    }

    pub fn check_range(&self, wavelength_nm: f64, temperature_c: f64) -> Result<()> {
        let (wmin, wmax) = self.wavelength_range_nm;
        if !(wavelength_nm >= wmin && wavelength_nm <= wmax) {
            return Err(Error::OutOfValidityRange {
                model: self.name.clone(),
                quantity: "wavelength (nm)",
                value: wavelength_nm,
                min: wmin,
                max: wmax,
            });
        }
        let (tmin, tmax) = self.temperature_range_c;
        if !(temperature_c >= tmin && temperature_c <= tmax) {
            return Err(Error::OutOfValidityRange {
                model: self.name.clone(),
                quantity: "temperature (C)",
                value: temperature_c,
                min: tmin,
                max: tmax,
            });
        }
        Ok(())
    }
}

impl Dispersion for DispersionModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn refractive_index(
        &self,
        wavelength_nm: f64,
        temperature_c: f64,
        pol: Polarization,
    ) -> Result<f64> {
        self.check_range(wavelength_nm, temperature_c)?;
        let n = self.index_unchecked(wavelength_nm, temperature_c, pol, self.active);
        if !(n.is_finite() && n > 1.0) {
            return Err(Error::NonPhysicalIndex {
                model: self.name.clone(),
                index: n,
                wavelength_nm,
                temperature_c,
            });
        }
        Ok(n)
    }
}

/// Step and tolerance policy for [`beta_derivative_with`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
pub struct DerivativeOptions {
    /// Relative agreement required between step-halved estimates, per order.
    pub rel_tol: [f64; 3],
    /// Initial half-width of the stencil relative to ω, per order.
    pub initial_step: [f64; 3],
    pub max_halvings: u32,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        Self {
            rel_tol: [1e-6, 1e-6, 1e-4],
            initial_step: [1e-2, 1e-2, 4e-2],
            max_halvings: 12,
        }
    }
}

/// `order`-th derivative of β with respect to ω (rad·s^order/m).
pub fn beta_derivative(
    model: &dyn Dispersion,
    omega: f64,
    temperature_c: f64,
    pol: Polarization,
    order: u8,
) -> Result<f64> {
    beta_derivative_with(
        model,
        omega,
        temperature_c,
        pol,
        order,
        &DerivativeOptions::default(),
    )
}

/// Central finite differences with step halving and one Richardson step.
///
/// The estimate is accepted once two successive step sizes agree to the
/// relative tolerance; the returned value is the Richardson extrapolation of
/// that pair, which is exact for polynomials of degree ≤ 3 in ω.
pub fn beta_derivative_with(
    model: &dyn Dispersion,
    omega: f64,
    temperature_c: f64,
    pol: Polarization,
    order: u8,
    opts: &DerivativeOptions,
) -> Result<f64> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    let k = (order - 1) as usize;
    let center = model.beta(omega, temperature_c, pol)?;
    let at = |w: f64| -> Result<f64> {
        model.beta(w, temperature_c, pol).map_err(|e| match e {
            Error::OutOfValidityRange { .. } | Error::NonPhysicalIndex { .. } => {
                Error::StencilOutOfRange { order, omega }
            }
            other => other,
        })
    };
    let stencil = |h: f64| -> Result<f64> {
        Ok(match order {
            1 => (at(omega + h)? - at(omega - h)?) / (2.0 * h),
            2 => (at(omega + h)? - 2.0 * center + at(omega - h)?) / (h * h),
            _ => {
                (at(omega + 2.0 * h)? - 2.0 * at(omega + h)? + 2.0 * at(omega - h)?
                    - at(omega - 2.0 * h)?)
                    / (2.0 * h * h * h)
            }
        })
    };
    // Absolute floor so that vanishing derivatives (dispersionless models) converge.
    let floor = 1e-3 * center.abs() / omega.powi(order as i32);
    let mut h = omega * opts.initial_step[k];
    let mut coarse = stencil(h)?;
    let mut previous: Option<f64> = None;
    let mut disagreement = f64::INFINITY;
    for _ in 0..opts.max_halvings {
        h *= 0.5;
        let fine = stencil(h)?;
        // All three stencils have a leading h² error term.
        let extrapolated = fine + (fine - coarse) / 3.0;
        let tol = opts.rel_tol[k] * extrapolated.abs().max(floor);
        // Raw agreement covers exact (polynomial) cases at the largest step,
        // where roundoff is smallest; otherwise successive extrapolations must agree.
        disagreement = match previous {
            Some(p) => (fine - coarse).abs().min((extrapolated - p).abs()),
            None => (fine - coarse).abs(),
        };
        if disagreement <= tol {
            return Ok(extrapolated);
        }
        previous = Some(extrapolated);
        coarse = fine;
    }
    Err(Error::NonConverged {
        what: format!("order-{order} derivative of beta at omega = {omega:e} rad/s"),
        residual: disagreement,
    })
}
