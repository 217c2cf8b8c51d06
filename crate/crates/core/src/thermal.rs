//! Affine CPU power → core temperature map for the closed cooling loop.
//!
//! `T = a + b·P` through two measured operating points. The intercept `a`
//! lumps ambient temperature with the fixed part of the loop's thermal
//! resistance; it is not the lab ambient.

use crate::error::{Error, Result};

/// Bench points of the water-cooled loop: (power [W], core temperature [°C]).
pub const BENCH_POINTS: [(f64, f64); 2] = [(30.0, 48.0), (60.0, 73.6)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalModel {
    /// [°C]
    pub offset: f64,
    /// [K/W]
    pub slope: f64,
    /// Power span covered by the fit points [W].
    pub valid_power_range: (f64, f64),
    fit_points: [(f64, f64); 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreTemperature {
    /// [°C]
    pub celsius: f64,
    /// Power lay outside the fitted range.
    pub extrapolated: bool,
}

/// Solves `T = a + b·P` through exactly two points.
pub fn fit_thermal_model(points: &[(f64, f64)]) -> Result<ThermalModel> {
    let [(p1, t1), (p2, t2)] = match points {
        [a, b] => [*a, *b],
        _ => {
            return Err(Error::invalid(
                "thermal fit points",
                format!("need exactly 2, got {}", points.len()),
            ))
        }
    };
    if [p1, t1, p2, t2].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("thermal fit points".into()));
    }
    if p1 == p2 {
        return Err(Error::SingularFit(format!("both points at {p1} W")));
    }
    let slope = (t2 - t1) / (p2 - p1);
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "core temperature must rise with power, slope = {slope} K/W"
        )));
    }
    let offset = t1 - slope * p1;
    Ok(ThermalModel {
        offset,
        slope,
        valid_power_range: (p1.min(p2), p1.max(p2)),
        fit_points: [(p1, t1), (p2, t2)],
    })
}

/// Predicted core temperature at `power` [W].
///
/// The two fit powers return their measured temperatures exactly rather than
/// the rounded affine evaluation.
pub fn core_temperature(model: &ThermalModel, power: f64) -> CoreTemperature {
    let (lo, hi) = model.valid_power_range;
    let celsius = model
        .fit_points
        .iter()
        .find(|(p, _)| *p == power)
        .map(|&(_, t)| t)
        .unwrap_or(model.offset + model.slope * power);
    CoreTemperature {
        celsius,
        extrapolated: !(lo..=hi).contains(&power),
    }
}

impl ThermalModel {
    pub fn bench() -> Self {
        fit_thermal_model(&BENCH_POINTS).expect("bench points are a valid fit")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_fit() {
        let m = ThermalModel::bench();
        assert!((m.offset - 22.4).abs() < 1e-12);
        assert!((m.slope - 0.853_333_333_333).abs() < 1e-9);
        assert_eq!(core_temperature(&m, 30.0).celsius, 48.0);
        assert_eq!(core_temperature(&m, 60.0).celsius, 73.6);
        assert!((core_temperature(&m, 45.0).celsius - 60.8).abs() < 1e-12);
        assert!(!core_temperature(&m, 45.0).extrapolated);
        assert!(core_temperature(&m, 80.0).extrapolated);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_thermal_model(&[(30.0, 48.0), (60.0, 48.0)]),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_thermal_model(&[(30.0, 48.0), (30.0, 50.0)]),
            Err(Error::SingularFit(_))
        ));
        assert!(fit_thermal_model(&[(30.0, 48.0)]).is_err());
    }
}
