//! Units, polarization and the wavelength/frequency bookkeeping shared by all modules.
//!
//! Wavelengths are vacuum wavelengths in nm at every public boundary; the
//! expansions are carried out in angular frequency (rad/s).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const TWO_PI_C_NM: f64 = 2.0 * PI * SPEED_OF_LIGHT * 1e9;

/// Angular frequency (rad/s) of a vacuum wavelength given in nm.
#[inline]
pub fn omega_from_wavelength_nm(wavelength_nm: f64) -> f64 {
    TWO_PI_C_NM / wavelength_nm
}

/// Vacuum wavelength (nm) of an angular frequency given in rad/s.
#[inline]
pub fn wavelength_nm_from_omega(omega: f64) -> f64 {
    TWO_PI_C_NM / omega
}

/// Angular frequency to ordinary frequency in THz.
#[inline]
pub fn rad_per_s_to_thz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e12)
}

#[inline]
pub fn thz_to_rad_per_s(thz: f64) -> f64 {
    thz * 2.0 * PI * 1e12
}

/// Principal polarization of a field relative to the crystal axes.
///
/// For a z-cut crystal the guided TE mode is ordinary and TM is extraordinary,
/// which is the mapping used when parsing `te`/`tm`.
///
/// Deserializes from any spelling accepted by [`FromStr`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

impl Polarization {
    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::Ordinary => Polarization::Extraordinary,
            Polarization::Extraordinary => Polarization::Ordinary,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Polarization::Ordinary => "o",
            Polarization::Extraordinary => "e",
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::Ordinary => f.write_str("ordinary"),
            Polarization::Extraordinary => f.write_str("extraordinary"),
        }
    }
}

impl FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "o" | "ordinary" | "te" => Ok(Polarization::Ordinary),
            "e" | "extraordinary" | "tm" => Ok(Polarization::Extraordinary),
            _ => Err(Error::UnknownPolarization(s.to_string())),
        }
    }
}

impl<'de> Deserialize<'de> for Polarization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A monochromatic field: polarization plus vacuum wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalField {
    pub polarization: Polarization,
    wavelength_nm: f64,
}

impl OpticalField {
    pub fn new(polarization: Polarization, wavelength_nm: f64) -> Result<Self> {
        if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
            return Err(Error::NonPhysical(format!(
                "wavelength must be positive, got {wavelength_nm} nm"
            )));
        }
        Ok(Self {
            polarization,
            wavelength_nm,
        })
    }

    pub fn from_omega(polarization: Polarization, omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::NonPhysical(format!(
                "angular frequency must be positive, got {omega} rad/s"
            )));
        }
        Self::new(polarization, wavelength_nm_from_omega(omega))
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.wavelength_nm
    }

    pub fn omega(&self) -> f64 {
        omega_from_wavelength_nm(self.wavelength_nm)
    }
}
