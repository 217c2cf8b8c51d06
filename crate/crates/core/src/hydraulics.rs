//! Head-loss accounting, pump and system curves, and their intersection.
//!
//! Heads are metres of fluid column. Flows are m³/s internally; the pump
//! curve also offers an ml/min view because bench data is quoted that way.

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::units::{m3_per_s, ml_per_min};

/// Result of the reduced Bernoulli balance between a free surface and an
/// open outlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadLoss {
    /// [m]
    pub head: f64,
    /// Set when the inputs imply a negative loss, which no real line has.
    pub negative: bool,
}

/// Total head loss for a free surface at elevation `z1` draining to an
/// open outlet at zero elevation with exit velocity `v2`, both ends at
/// atmospheric pressure and the surface velocity neglected.
pub fn total_head_loss(z1: f64, v2: f64, g: f64) -> Result<HeadLoss> {
    require_positive("gravity", g)?;
    if !z1.is_finite() || !v2.is_finite() {
        return Err(Error::NonFinite("head loss inputs".into()));
    }
    let head = z1 - v2 * v2 / (2.0 * g);
    Ok(HeadLoss {
        head,
        negative: head < 0.0,
    })
}

/// Pump-internal resistance left after removing the cold plate and the
/// piping from the whole-loop loss.
pub fn decompose_pump_resistance(total: f64, cold_plate: f64, pipe_other: f64) -> Result<f64> {
    require_non_negative("total head loss", total)?;
    require_non_negative("cold plate head loss", cold_plate)?;
    require_non_negative("pipe and fittings head loss", pipe_other)?;
    let remainder = total - cold_plate - pipe_other;
    if remainder < 0.0 {
        return Err(Error::NegativeDecomposition { remainder });
    }
    Ok(remainder)
}

/// One measured (velocity, head loss) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadLossSample {
    /// [m/s]
    pub velocity: f64,
    /// [m]
    pub head: f64,
}

impl HeadLossSample {
    pub fn new(velocity: f64, head: f64) -> Result<Self> {
        require_non_negative("sample velocity", velocity)?;
        require_non_negative("sample head", head)?;
        Ok(HeadLossSample { velocity, head })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearLossFit {
    /// Slope of `H = a·V` [m per m/s].
    pub coefficient: f64,
    /// RMS of `H − a·V` over the samples [m].
    pub rms_residual: f64,
}

/// Least-squares line through the origin, `H = a·V`.
pub fn fit_linear_loss(samples: &[HeadLossSample]) -> Result<LinearLossFit> {
    if samples.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: samples.len(),
        });
    }
    for s in samples {
        require_non_negative("sample velocity", s.velocity)?;
        require_non_negative("sample head", s.head)?;
    }
    let first = samples[0].velocity;
    if samples.iter().all(|s| s.velocity == first) {
        return Err(Error::DegenerateFit(
            "all samples share one velocity".into(),
        ));
    }
    let svv: f64 = samples.iter().map(|s| s.velocity * s.velocity).sum();
    let svh: f64 = samples.iter().map(|s| s.velocity * s.head).sum();
    let coefficient = svh / svv;
    let sse: f64 = samples
        .iter()
        .map(|s| (s.head - coefficient * s.velocity).powi(2))
        .sum();
    Ok(LinearLossFit {
        coefficient,
        rms_residual: (sse / samples.len() as f64).sqrt(),
    })
}

/// Straight-line pump characteristic between its shutoff head and its
/// free-delivery flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCurve {
    /// Head at zero flow [m].
    pub shutoff_head: f64,
    /// Flow at zero head [m³/s].
    pub max_flow: f64,
}

impl PumpCurve {
    pub fn new(shutoff_head: f64, max_flow: f64) -> Result<Self> {
        require_positive("pump shutoff head", shutoff_head)?;
        require_positive("pump max flow", max_flow)?;
        Ok(PumpCurve {
            shutoff_head,
            max_flow,
        })
    }

    pub fn from_ml_per_min(shutoff_head: f64, max_flow_ml_per_min: f64) -> Result<Self> {
        Self::new(shutoff_head, m3_per_s(max_flow_ml_per_min))
    }

    pub fn max_flow_ml_per_min(&self) -> f64 {
        ml_per_min(self.max_flow)
    }

    /// Head delivered at `flow` [m³/s]; `None` outside `[0, max_flow]`.
    pub fn head_at(&self, flow: f64) -> Option<f64> {
        (0.0..=self.max_flow)
            .contains(&flow)
            .then(|| self.shutoff_head * (1.0 - flow / self.max_flow))
    }

    /// Flow delivered against `head` [m]; `None` outside `[0, shutoff_head]`.
    pub fn flow_at(&self, head: f64) -> Option<f64> {
        (0.0..=self.shutoff_head)
            .contains(&head)
            .then(|| self.max_flow * (1.0 - head / self.shutoff_head))
    }

    pub fn flow_at_ml_per_min(&self, head: f64) -> Option<f64> {
        self.flow_at(head).map(ml_per_min)
    }

    fn validate(&self) -> Result<()> {
        require_positive("pump shutoff head", self.shutoff_head)?;
        require_positive("pump max flow", self.max_flow)
    }
}

/// Linear loop resistance `H = a·Q`, split by component. Coefficients are
/// metres of head per m³/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemCurve {
    pub pump_internal: f64,
    pub cold_plate: f64,
    pub pipe_other: f64,
}

impl SystemCurve {
    pub fn new(pump_internal: f64, cold_plate: f64, pipe_other: f64) -> Result<Self> {
        let curve = SystemCurve {
            pump_internal,
            cold_plate,
            pipe_other,
        };
        curve.validate()?;
        Ok(curve)
    }

    /// Whole-loop curve with a single lumped coefficient.
    pub fn lumped(coefficient: f64) -> Result<Self> {
        Self::new(0.0, 0.0, coefficient)
    }

    /// Converts per-velocity loss slopes [m per m/s] to per-flow slopes
    /// through a pipe of cross-section `pipe_area` [m²].
    pub fn from_velocity_slopes(
        pump_internal: f64,
        cold_plate: f64,
        pipe_other: f64,
        pipe_area: f64,
    ) -> Result<Self> {
        require_positive("pipe area", pipe_area)?;
        Self::new(
            pump_internal / pipe_area,
            cold_plate / pipe_area,
            pipe_other / pipe_area,
        )
    }

    pub fn total(&self) -> f64 {
        self.pump_internal + self.cold_plate + self.pipe_other
    }

    pub fn head_at(&self, flow: f64) -> f64 {
        self.total() * flow
    }

    fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("system pump-internal coefficient", self.pump_internal),
            ("system cold plate coefficient", self.cold_plate),
            ("system pipe coefficient", self.pipe_other),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidSpec {
                    field: name.into(),
                    reason: format!("invalid system curve: must be >= 0, got {value}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// [m³/s]
    pub flow: f64,
    /// [m]
    pub head: f64,
}

impl OperatingPoint {
    pub fn flow_ml_per_min(&self) -> f64 {
        ml_per_min(self.flow)
    }
}

/// Intersection of the pump line with the loop's resistance line.
pub fn operating_point(pump: &PumpCurve, system: &SystemCurve) -> Result<OperatingPoint> {
    pump.validate()?;
    system.validate()?;
    let a = system.total();
    let slope = pump.shutoff_head / pump.max_flow;
    let flow = pump.shutoff_head / (a + slope);
    Ok(OperatingPoint {
        flow,
        head: a * flow,
    })
}

/// Mean velocity in a pipe of cross-section `area` carrying `flow`.
pub fn velocity(flow: f64, area: f64) -> Result<f64> {
    require_positive("pipe area", area)?;
    Ok(flow / area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_bernoulli() {
        let h = total_head_loss(0.3, 1.0, 9.81).unwrap();
        assert!((h.head - 0.249_031_6).abs() < 1e-6);
        assert!(!h.negative);
        assert_eq!(total_head_loss(0.3, 0.0, 9.81).unwrap().head, 0.3);
        assert_eq!(total_head_loss(0.0, 0.0, 9.81).unwrap().head, 0.0);
        assert!(total_head_loss(0.01, 2.0, 9.81).unwrap().negative);
        assert!(total_head_loss(0.3, 1.0, 0.0).is_err());
    }

    #[test]
    fn decomposition() {
        assert!((decompose_pump_resistance(0.30, 0.05, 0.03).unwrap() - 0.22).abs() < 1e-15);
        assert_eq!(decompose_pump_resistance(0.4, 0.0, 0.0).unwrap(), 0.4);
        assert!(matches!(
            decompose_pump_resistance(0.10, 0.08, 0.05),
            Err(Error::NegativeDecomposition { .. })
        ));
        assert!(decompose_pump_resistance(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_fit_exact_and_degenerate() {
        let samples: Vec<_> = [0.1, 0.2, 0.3]
            .iter()
            .map(|&v| HeadLossSample::new(v, 0.4 * v).unwrap())
            .collect();
        let fit = fit_linear_loss(&samples).unwrap();
        assert!((fit.coefficient - 0.4).abs() < 1e-15);
        assert!(fit.rms_residual < 1e-15);

        let same = vec![HeadLossSample::new(0.2, 0.1).unwrap(); 3];
        assert!(matches!(fit_linear_loss(&same), Err(Error::DegenerateFit(_))));
        assert!(fit_linear_loss(&samples[..1]).is_err());
        assert!(HeadLossSample::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn pump_curve_from_bench_endpoints() {
        let pump = PumpCurve::from_ml_per_min(0.52, 72.0).unwrap();
        assert_eq!(pump.flow_at_ml_per_min(0.26), Some(36.0));
        assert_eq!(pump.flow_at(0.52), Some(0.0));
        assert_eq!(pump.head_at(0.0), Some(0.52));
        assert_eq!(pump.flow_at(0.6), None);
        assert!(PumpCurve::new(0.0, 1.0).is_err());
    }

    #[test]
    fn operating_point_reference() {
        let pump = PumpCurve::from_ml_per_min(0.52, 72.0).unwrap();
        // 0.002 m per ml/min
        let system = SystemCurve::lumped(0.002 * 6.0e7).unwrap();
        let op = operating_point(&pump, &system).unwrap();
        // 0.52 / (0.002 + 0.52/72) and 0.002 times that
        assert!((op.flow_ml_per_min() - 56.385_542_168_67).abs() < 1e-9, "{}", op.flow_ml_per_min());
        assert!((op.head - 0.112_771_084_337).abs() < 1e-11, "{}", op.head);
    }

    #[test]
    fn operating_point_limits() {
        let pump = PumpCurve::from_ml_per_min(0.52, 72.0).unwrap();
        let free = operating_point(&pump, &SystemCurve::default()).unwrap();
        assert_eq!(free.flow, pump.max_flow);
        assert_eq!(free.head, 0.0);
        let dead = operating_point(&pump, &SystemCurve::lumped(1e20).unwrap()).unwrap();
        assert!(dead.flow_ml_per_min() < 1e-9);
        assert!((dead.head - 0.52).abs() < 1e-9);
        let bad = SystemCurve {
            pump_internal: -1.0,
            ..Default::default()
        };
        assert!(operating_point(&pump, &bad).is_err());
        assert!(SystemCurve::new(1.0, -2.0, 0.0).is_err());
    }

    #[test]
    fn velocity_slopes_convert_through_pipe_area() {
        let area = 1e-5;
        let s = SystemCurve::from_velocity_slopes(0.3, 0.1, 0.05, area).unwrap();
        assert!((s.total() - 0.45 / area).abs() < 1e-9);
        assert!(SystemCurve::from_velocity_slopes(0.3, 0.1, 0.05, 0.0).is_err());
    }
}
