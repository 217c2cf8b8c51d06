//! Straight-line core temperature model from two bench points.

use micropump::thermal::{core_temperature, fit_thermal_model, BENCH_POINTS};

fn main() -> micropump::Result<()> {
    let model = fit_thermal_model(&BENCH_POINTS)?;
    println!("T = {:.3} C + {:.4} K/W * P", model.offset, model.slope);
    for p in [20.0, 30.0, 40.0, 50.0, 60.0, 80.0] {
        let t = core_temperature(&model, p);
        println!("{p:5.1} W  {:6.2} C{}", t.celsius, if t.extrapolated { "  (extrapolated)" } else { "" });
    }
    Ok(())
}
