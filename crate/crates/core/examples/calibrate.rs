//! Generates a noisy sweep from known constants and fits them back from a
//! generic starting point. Pass a budget as the first argument (default 300).

use micropump::dynamics::PumpConfig;
use micropump::performance::{
    add_multiplicative_noise, calibrate, frequency_sweep, CalibrationOptions, CalibrationParams,
    SweepSpec,
};

fn main() -> micropump::Result<()> {
    let budget = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(300);
    let truth = PumpConfig::default();
    let options = CalibrationOptions::default();
    let clean = frequency_sweep(&truth, &SweepSpec::default(), &options.solver)?;
    let measured = add_multiplicative_noise(&clean, 0.03, 7);

    let r = calibrate(&measured, &truth, &CalibrationParams::seed(), budget, &options)?;
    let want = CalibrationParams::from_config(&truth).as_array();
    let got = r.params.as_array();
    for (name, (w, g)) in ["c_in", "c_out", "kappa_F", "kappa_V"].iter().zip(want.iter().zip(got)) {
        println!("{name:>8}: true {w:.4e}  fitted {g:.4e}  ({:+.1}%)", 100.0 * (g / w - 1.0));
    }
    println!(
        "objective {:.4} (seed {:.4}) after {} evaluations",
        r.objective, r.seed_objective, r.evaluations
    );
    Ok(())
}
