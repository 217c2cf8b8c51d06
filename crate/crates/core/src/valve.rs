//! Cantilever check-valve mechanics.
//!
//! A PDMS flap clamped at one end is reduced to a single degree-of-freedom
//! oscillator `m·y'' + c·y' + k·y = F(t)` for its tip opening `y`. The tip
//! stiffness of an end-loaded cantilever is `k = 3·E·I / L³` with the
//! rectangular section `I = b·h³ / 12`. The mass is the full flap mass and the
//! natural frequency is the in-vacuum value `√(k/m)`; neither includes the
//! added mass of the surrounding liquid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Young's modulus assumed for PDMS when none is configured [Pa].
pub const PDMS_ELASTIC_MODULUS: f64 = 750.0e3;
/// Density assumed for cured PDMS when none is configured [kg/m³].
pub const PDMS_DENSITY: f64 = 970.0;

const STANDARD_LENGTH: f64 = 5.0e-3;
const STANDARD_WIDTH: f64 = 3.0e-3;
const NARROW_WIDTH: f64 = 2.0e-3;
const SHORT_LENGTH: f64 = 4.0e-3;
const DEFAULT_THICKNESS: f64 = 0.5e-3;

/// Geometry preset tag. The numeric fields of [`ValveSpec`] govern; the tag
/// only records which preset they started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValveShape {
    #[default]
    Standard,
    Narrow,
    Short,
}

impl ValveShape {
    pub fn as_str(self) -> &'static str {
        match self {
            ValveShape::Standard => "standard",
            ValveShape::Narrow => "narrow",
            ValveShape::Short => "short",
        }
    }
}

impl fmt::Display for ValveShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValveShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ValveShape::Standard),
            "narrow" => Ok(ValveShape::Narrow),
            "short" => Ok(ValveShape::Short),
            other => Err(Error::invalid(
                "valve shape",
                format!("expected standard, narrow or short, got {other:?}"),
            )),
        }
    }
}

/// Check-valve geometry and material, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValveSpec {
    /// Free length from clamp to tip [m].
    pub length: f64,
    /// Width across the flow passage [m].
    pub width: f64,
    /// Flap thickness [m].
    pub thickness: f64,
    /// Young's modulus [Pa].
    pub elastic_modulus: f64,
    /// Material density [kg/m³].
    pub density: f64,
    pub shape: ValveShape,
}

impl ValveSpec {
    /// Preset geometry, 0.5 mm thick, with PDMS material defaults.
    ///
    /// `standard` is 5 mm × 3 mm, `narrow` shrinks the width to 2 mm and
    /// `short` shrinks the length to 4 mm.
    pub fn preset(shape: ValveShape) -> Self {
        let (length, width) = match shape {
            ValveShape::Standard => (STANDARD_LENGTH, STANDARD_WIDTH),
            ValveShape::Narrow => (STANDARD_LENGTH, NARROW_WIDTH),
            ValveShape::Short => (SHORT_LENGTH, STANDARD_WIDTH),
        };
        ValveSpec {
            length,
            width,
            thickness: DEFAULT_THICKNESS,
            elastic_modulus: PDMS_ELASTIC_MODULUS,
            density: PDMS_DENSITY,
            shape,
        }
    }

    pub fn standard() -> Self {
        Self::preset(ValveShape::Standard)
    }

    pub fn narrow() -> Self {
        Self::preset(ValveShape::Narrow)
    }

    pub fn with_thickness(mut self, thickness: f64) -> Self {
        self.thickness = thickness;
        self
    }

    /// Flap face area `L·b` on which chamber pressure acts [m²].
    pub fn face_area(&self) -> f64 {
        self.length * self.width
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("valve length", self.length)?;
        require_positive("valve width", self.width)?;
        require_positive("valve thickness", self.thickness)?;
        require_positive("valve elastic modulus", self.elastic_modulus)?;
        require_positive("valve density", self.density)
    }
}

impl Default for ValveSpec {
    fn default() -> Self {
        Self::standard()
    }
}

/// Lumped oscillator parameters of one valve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedValveParams {
    /// [kg]
    pub mass: f64,
    /// Tip stiffness [N/m].
    pub spring_constant: f64,
    /// Second moment of the cross-section [m⁴].
    pub second_moment: f64,
    /// In-vacuum natural frequency [rad/s].
    pub natural_frequency: f64,
    /// Viscous damping [N·s/m].
    pub damping_coefficient: f64,
    /// `c / (2√(k·m))`, dimensionless.
    pub damping_factor: f64,
}

impl LumpedValveParams {
    pub fn natural_frequency_hz(&self) -> f64 {
        self.natural_frequency / (2.0 * PI)
    }

    /// Damping coefficient that yields damping factor `zeta` for this valve.
    pub fn critical_fraction(&self, zeta: f64) -> f64 {
        2.0 * zeta * (self.spring_constant * self.mass).sqrt()
    }

    /// Same valve with a different damping coefficient.
    pub fn with_damping(&self, c: f64) -> Self {
        LumpedValveParams {
            damping_coefficient: c,
            damping_factor: c / (2.0 * (self.spring_constant * self.mass).sqrt()),
            ..*self
        }
    }
}

/// Reduces a valve to its lumped mass, tip stiffness, natural frequency and
/// damping factor for the viscous damping `c`.
pub fn derive_lumped_params(spec: &ValveSpec, c: f64) -> Result<LumpedValveParams> {
    spec.validate()?;
    require_non_negative("valve damping coefficient", c)?;

    let second_moment = spec.width * spec.thickness.powi(3) / 12.0;
    let spring_constant = 3.0 * spec.elastic_modulus * second_moment / spec.length.powi(3);
    let mass = spec.density * spec.length * spec.width * spec.thickness;
    let natural_frequency = (spring_constant / mass).sqrt();
    let damping_factor = c / (2.0 * (spring_constant * mass).sqrt());

    Ok(LumpedValveParams {
        mass,
        spring_constant,
        second_moment,
        natural_frequency,
        damping_coefficient: c,
        damping_factor,
    })
}

/// Steady-state amplitude of the contact-free oscillator under `F·sin(ω·t)`.
pub fn steady_state_amplitude(params: &LumpedValveParams, force: f64, omega: f64) -> Result<f64> {
    require_non_negative("forcing amplitude", force)?;
    require_positive("angular frequency", omega)?;
    if force == 0.0 {
        return Ok(0.0);
    }
    let reactive = params.spring_constant - params.mass * omega * omega;
    let resistive = params.damping_coefficient * omega;
    let denominator = reactive.hypot(resistive);
    if denominator == 0.0 {
        return Err(Error::UnboundedAmplitude);
    }
    Ok(force / denominator)
}

/// Phase by which the steady-state response lags the forcing [rad], in `[0, π]`.
pub fn steady_state_phase(params: &LumpedValveParams, omega: f64) -> f64 {
    (params.damping_coefficient * omega).atan2(params.spring_constant - params.mass * omega * omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn standard_half_millimetre_valve() {
        let p = derive_lumped_params(&ValveSpec::standard(), 0.0).unwrap();
        assert!(rel(p.second_moment, 3.125e-14) < 1e-12);
        assert!(rel(p.spring_constant, 0.5625) < 1e-12);
        assert!(rel(p.mass, 7.275e-6) < 1e-12);
        assert!((p.natural_frequency - 278.06).abs() < 0.01);
        assert_eq!(p.damping_factor, 0.0);
        assert!((p.spring_constant - p.natural_frequency.powi(2) * p.mass).abs() < 1e-12 * p.spring_constant);
    }

    #[test]
    fn doubling_thickness_scaling() {
        let thin = derive_lumped_params(&ValveSpec::standard(), 1e-3).unwrap();
        let thick = derive_lumped_params(&ValveSpec::standard().with_thickness(1.0e-3), 1e-3).unwrap();
        assert!(rel(thick.second_moment, 8.0 * thin.second_moment) < 1e-14);
        assert!(rel(thick.spring_constant, 8.0 * thin.spring_constant) < 1e-14);
        assert!(rel(thick.mass, 2.0 * thin.mass) < 1e-14);
        assert!(rel(thick.natural_frequency, 2.0 * thin.natural_frequency) < 1e-14);
    }

    #[test]
    fn rejects_bad_fields_by_name() {
        let mut spec = ValveSpec::standard();
        spec.width = 0.0;
        match derive_lumped_params(&spec, 0.0) {
            Err(Error::InvalidSpec { field, .. }) => assert_eq!(field, "valve width"),
            other => panic!("unexpected {other:?}"),
        }
        spec = ValveSpec::standard();
        spec.elastic_modulus = -1.0;
        assert!(matches!(
            derive_lumped_params(&spec, 0.0),
            Err(Error::InvalidSpec { field, .. }) if field == "valve elastic modulus"
        ));
        assert!(derive_lumped_params(&ValveSpec::standard(), -1e-3).is_err());
        spec = ValveSpec::standard();
        spec.length = f64::NAN;
        assert!(derive_lumped_params(&spec, 0.0).is_err());
    }

    #[test]
    fn amplitude_reference_value() {
        let p = derive_lumped_params(&ValveSpec::standard(), 2e-3).unwrap();
        let a = steady_state_amplitude(&p, 0.01, 2.0 * PI * 130.0).unwrap();
        // k - m w^2 = -4.29115..., c w = 1.63363...
        assert!((a - 2.1779e-3).abs() < 1e-6, "{a}");
    }

    #[test]
    fn amplitude_limits() {
        let p = derive_lumped_params(&ValveSpec::standard(), 2e-3).unwrap();
        assert_eq!(steady_state_amplitude(&p, 0.0, 100.0).unwrap(), 0.0);
        let quasi_static = steady_state_amplitude(&p, 0.01, 1e-6).unwrap();
        assert!(rel(quasi_static, 0.01 / p.spring_constant) < 1e-9);
    }

    #[test]
    fn undamped_resonance_is_an_error() {
        let p = derive_lumped_params(&ValveSpec::standard(), 0.0).unwrap();
        let mut tuned = p;
        tuned.mass = p.spring_constant;
        assert_eq!(steady_state_amplitude(&tuned, 1.0, 1.0), Err(Error::UnboundedAmplitude));
    }

    #[test]
    fn presets_differ_only_where_named() {
        let s = ValveSpec::standard();
        let n = ValveSpec::narrow();
        let t = ValveSpec::preset(ValveShape::Short);
        assert_eq!((n.length, n.width), (5e-3, 2e-3));
        assert_eq!((t.length, t.width), (4e-3, 3e-3));
        assert_eq!(s.thickness, n.thickness);
        assert_eq!("narrow".parse::<ValveShape>().unwrap(), ValveShape::Narrow);
        assert!("wide".parse::<ValveShape>().is_err());
    }
}
