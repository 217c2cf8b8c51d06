//! Head loss bookkeeping: energy balance, linear loss fit, and the share of
//! the loop resistance that sits inside the pump.

use micropump::hydraulics::{
    decompose_pump_resistance, fit_linear_loss, operating_point, total_head_loss, HeadLossSample,
    PumpCurve, SystemCurve,
};

fn main() -> micropump::Result<()> {
    let h = total_head_loss(0.30, 0.4, 9.81)?;
    println!("reservoir 0.30 m, exit 0.4 m/s: total head loss {:.4} m", h.head);

    let samples: Vec<_> = [(0.05, 0.061), (0.10, 0.118), (0.15, 0.183), (0.20, 0.239)]
        .into_iter()
        .map(|(v, h)| HeadLossSample::new(v, h))
        .collect::<Result<_, _>>()?;
    let fit = fit_linear_loss(&samples)?;
    println!("fitted slope {:.4} m per m/s, rms residual {:.2e} m", fit.coefficient, fit.rms_residual);

    let pump_part = decompose_pump_resistance(0.40, 0.12, 0.08)?;
    println!("pump internal head {pump_part:.2} m of 0.40 m");

    let area = std::f64::consts::PI * 1.5e-3_f64.powi(2);
    let system = SystemCurve::from_velocity_slopes(0.0, 0.0, fit.coefficient, area)?;
    let op = operating_point(&PumpCurve::from_ml_per_min(0.52, 72.0)?, &system)?;
    println!("operating point {:.2} ml/min at {:.4} m", op.flow_ml_per_min(), op.head);
    Ok(())
}
