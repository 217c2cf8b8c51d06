//! Linear pump curve against a few linear loop resistances.

use micropump::hydraulics::{operating_point, PumpCurve, SystemCurve};

fn main() -> micropump::Result<()> {
    let pump = PumpCurve::from_ml_per_min(0.52, 72.0)?;
    for h in [0.0, 0.13, 0.26, 0.39, 0.52] {
        println!("H = {h:.2} m  Q = {:.1} ml/min", pump.flow_at_ml_per_min(h).unwrap_or(f64::NAN));
    }
    println!();
    for k in [0.0, 1e5, 4e5, 1e6, 4e6] {
        let op = operating_point(&pump, &SystemCurve::lumped(k)?)?;
        println!("a = {k:8.1e} m per m3/s  ->  {:6.2} ml/min at {:.4} m", op.flow_ml_per_min(), op.head);
    }
    Ok(())
}
