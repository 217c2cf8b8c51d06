//! One pump run at 100 Hz: valve openings and flows over the final cycle.

use micropump::dynamics::{diagnose_actuation, simulate, PumpConfig, SolverOptions};

fn main() -> micropump::Result<()> {
    let cfg = PumpConfig::default().with_frequency(100.0);
    let r = simulate(&cfg, &SolverOptions::default())?;
    let d = diagnose_actuation(&r)?;

    println!("converged after {} cycles: {}", r.cycles, r.converged);
    println!("net flow   {:.3} ml/min", r.net_flow_ml_per_min());
    println!("backflow   {:.3}", d.backflow_fraction);
    println!("outlet lag {:.3} rad  ({:?})", d.outlet_phase_lag, d.classification);

    println!("\n   t/T     y_in [um]  y_out [um]  q_out [ml/min]");
    let stride = r.len() / 16;
    for i in (0..r.len()).step_by(stride.max(1)) {
        println!(
            "{:6.3}  {:10.3}  {:10.3}  {:14.3}",
            i as f64 / r.len() as f64,
            r.y_in[i] * 1e6,
            r.y_out[i] * 1e6,
            micropump::units::ml_per_min(r.q_out[i])
        );
    }
    Ok(())
}
