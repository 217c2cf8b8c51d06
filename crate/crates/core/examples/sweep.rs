//! Flow against drive frequency for both valve shapes, with detected peaks.

use micropump::dynamics::{PumpConfig, SolverOptions};
use micropump::performance::{find_peaks, frequency_sweep, SweepSpec};
use micropump::valve::ValveSpec;

fn main() -> micropump::Result<()> {
    let sweep = SweepSpec::default();
    let solver = SolverOptions::default();
    for (name, valve) in [("standard", ValveSpec::standard()), ("narrow", ValveSpec::narrow())] {
        let mut cfg = PumpConfig::default();
        cfg.inlet_valve.spec = valve;
        cfg.outlet_valve.spec = valve;
        let curve = frequency_sweep(&cfg, &sweep, &solver)?;
        println!("{name}:");
        for p in &curve.points {
            println!("  {:5.0} Hz  {:8.3} ml/min{}", p.frequency, p.flow, if p.abnormal { "  *" } else { "" });
        }
        for peak in find_peaks(&curve)? {
            println!("  peak at {} Hz", peak.frequency);
        }
    }
    println!("* abnormal actuation (heavy backflow or no net flow)");
    Ok(())
}
