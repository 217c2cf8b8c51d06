//! Lumped stiffness, mass and natural frequency of the two preset valves,
//! then the thickness at which a 130 Hz drive sits on resonance.

use micropump::valve::{derive_lumped_params, ValveSpec};

fn main() -> micropump::Result<()> {
    for (name, spec) in [("standard", ValveSpec::standard()), ("narrow", ValveSpec::narrow())] {
        let p = derive_lumped_params(&spec, 0.0)?;
        println!(
            "{name:>8}: I = {:.4e} m^4  k = {:.4} N/m  m = {:.4e} kg  f_n = {:.2} Hz",
            p.second_moment,
            p.spring_constant,
            p.mass,
            p.natural_frequency_hz()
        );
    }

    println!("\nthickness sweep, standard planform:");
    for h_mm in [0.3, 0.5, 0.8, 1.0, 1.5] {
        let p = derive_lumped_params(&ValveSpec::standard().with_thickness(h_mm * 1e-3), 0.0)?;
        println!("  h = {h_mm:.1} mm  f_n = {:7.2} Hz", p.natural_frequency_hz());
    }
    Ok(())
}
