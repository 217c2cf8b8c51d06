//! Reproduction runs: each check recomputes one headline result of the
//! model and compares it with its reference value.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::dynamics::{fundamental, simulate, ForcingMode, PumpConfig, SolverOptions};
use crate::error::Result;
use crate::hydraulics::{operating_point, PumpCurve, SystemCurve};
use crate::io::{calibration_report, provenance_line, write_table, FLOW_COLUMNS};
use crate::performance::{
    add_multiplicative_noise, calibrate, find_peaks, frequency_sweep, CalibrationParams,
    FlowFrequencyCurve,
};
use crate::thermal::{core_temperature, ThermalModel, BENCH_POINTS};
use crate::valve::{derive_lumped_params, steady_state_amplitude, ValveShape, ValveSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl Outcome {
    fn new(id: u8, name: &'static str, pass: bool, detail: String) -> Self {
        Outcome {
            id,
            name,
            status: if pass { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReproOptions {
    /// Seed for synthetic noise and random system curves.
    pub seed: u64,
    /// Digitized bench curve of the narrow 0.5 mm valve, if any.
    pub digitized: Option<FlowFrequencyCurve>,
}

/// Outcomes in check order plus the files to write, as (name, contents).
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub outcomes: Vec<Outcome>,
    pub files: Vec<(String, String)>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.status != Status::Fail)
    }

    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            s.push_str(&format!("{:>2}  {:<7}  {:<31}  {}\n", o.id, o.status, o.name, o.detail));
        }
        s
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn lumped_parameters() -> Outcome {
    let Ok(p) = derive_lumped_params(&ValveSpec::standard(), 0.0) else {
        return Outcome::new(1, "lumped valve parameters", false, "derivation failed".into());
    };
    let checks = [
        rel(p.second_moment, 3.125e-14),
        rel(p.spring_constant, 0.5625),
        rel(p.mass, 7.275e-6),
        rel(p.natural_frequency, (0.5625_f64 / 7.275e-6).sqrt()),
    ];
    let worst = checks.iter().cloned().fold(0.0, f64::max);
    Outcome::new(
        1,
        "lumped valve parameters",
        worst <= 1e-12,
        format!(
            "k = {} N/m, m = {:e} kg, wn = {:.4} rad/s, worst rel err {worst:.1e}",
            p.spring_constant, p.mass, p.natural_frequency
        ),
    )
}

pub fn oscillator_oracle(template: &PumpConfig) -> Outcome {
    let name = "forced oscillator oracle";
    let opts = SolverOptions {
        max_cycles: 400,
        convergence_tol: 1e-13,
        ..SolverOptions::default()
    };
    let mut worst: f64 = 0.0;
    for zeta in [0.1, 0.5, 1.0, 2.0] {
        for ratio in [0.5, 1.0, 2.0] {
            let mut cfg = *template;
            cfg.forcing = ForcingMode::Prescribed;
            cfg.seat_contact = false;
            let Ok(base) = cfg.outlet_valve.lumped() else {
                return Outcome::new(2, name, false, "invalid valve".into());
            };
            let c = base.critical_fraction(zeta);
            cfg.inlet_valve.damping = c;
            cfg.outlet_valve.damping = c;
            let omega = ratio * base.natural_frequency;
            let cfg = cfg.with_frequency(omega / (2.0 * PI));
            let r = match simulate(&cfg, &opts) {
                Ok(r) => r,
                Err(e) => return Outcome::new(2, name, false, e.to_string()),
            };
            let p = base.with_damping(c);
            let Ok(want) = steady_state_amplitude(&p, cfg.drive.force(), omega) else {
                return Outcome::new(2, name, false, "closed form failed".into());
            };
            let want_phase = crate::valve::steady_state_phase(&p, omega);
            let (amp, lag) = fundamental(&r.time, &r.y_out, omega);
            worst = worst.max(rel(amp, want)).max(rel(lag, want_phase));
        }
    }
    Outcome::new(2, name, worst <= 1e-6, format!("worst rel err {worst:.1e} over 12 cases"))
}

pub fn rectification(cfg: &RunConfig) -> Outcome {
    let name = "check-valve rectification";
    let curve = match frequency_sweep(&cfg.pump, &cfg.sweep, &cfg.solver) {
        Ok(c) => c,
        Err(e) => return Outcome::new(3, name, false, e.to_string()),
    };
    let min_flow = curve
        .points
        .iter()
        .map(|p| p.flow)
        .fold(f64::INFINITY, f64::min);
    let all_positive = curve.points.iter().all(|p| p.flow > 0.0);

    let mut open = cfg.pump.with_voltage(cfg.sweep.voltage);
    open.check_valves = false;
    let mut worst: f64 = 0.0;
    for f in cfg.sweep.frequencies() {
        match simulate(&open.with_frequency(f), &cfg.solver) {
            Ok(r) => {
                let peak = r.q_out.iter().fold(0.0_f64, |m, q| m.max(q.abs()));
                worst = worst.max(r.net_flow_rate.abs() / peak);
            }
            Err(e) => return Outcome::new(3, name, false, e.to_string()),
        }
    }
    Outcome::new(
        3,
        name,
        all_positive && worst < 1e-3,
        format!("min Q = {min_flow:.3} ml/min; open ports |Q|/peak <= {worst:.1e}"),
    )
}

pub fn pump_curve(seed: u64) -> Outcome {
    let name = "linear P-Q and operating point";
    let Ok(pump) = PumpCurve::from_ml_per_min(0.52, 72.0) else {
        return Outcome::new(4, name, false, "pump curve rejected".into());
    };
    let half = pump.flow_at_ml_per_min(0.26).unwrap_or(f64::NAN);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = pump.shutoff_head / pump.max_flow;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut coef = || scale * 10f64.powf(rng.random_range(-3.0..3.0)) / 3.0;
        let Ok(system) = SystemCurve::new(coef(), coef(), coef()) else {
            return Outcome::new(4, name, false, "system curve rejected".into());
        };
        let Ok(op) = operating_point(&pump, &system) else {
            return Outcome::new(4, name, false, "no operating point".into());
        };
        let on_pump = pump.shutoff_head * (1.0 - op.flow / pump.max_flow);
        let on_system = system.total() * op.flow;
        worst = worst.max(rel(on_pump, op.head)).max(rel(on_system, op.head));
    }
    Outcome::new(
        4,
        name,
        half == 36.0 && worst <= 1e-9,
        format!("Q(0.26 m) = {half} ml/min; worst residual {worst:.1e} over 100 systems"),
    )
}

/// Relative error of each fitted parameter against the truth.
fn param_errors(fit: &CalibrationParams, truth: &CalibrationParams) -> [f64; 4] {
    let (a, b) = (fit.as_array(), truth.as_array());
    [rel(a[0], b[0]), rel(a[1], b[1]), rel(a[2], b[2]), rel(a[3], b[3])]
}

fn fmt_errors(e: &[f64; 4]) -> String {
    e.iter().map(|v| format!("{:.2}%", 100.0 * v)).collect::<Vec<_>>().join("/")
}

pub fn calibration_round_trip(cfg: &RunConfig, seed: u64, files: &mut Vec<(String, String)>) -> Outcome {
    let name = "calibration round trip";
    let truth = CalibrationParams::from_config(&cfg.pump);
    let template = cfg.pump.with_voltage(cfg.sweep.voltage);
    let data = match frequency_sweep(&cfg.pump, &cfg.sweep, &cfg.calibration.solver) {
        Ok(c) => c,
        Err(e) => return Outcome::new(5, name, false, e.to_string()),
    };
    let scale: f64 = data.points.iter().map(|p| p.flow * p.flow).sum();
    let noisy = add_multiplicative_noise(&data, 0.03, seed);
    let start = CalibrationParams::seed();
    let comment = provenance_line(&cfg.hash());

    let mut details = Vec::new();
    let mut pass = true;
    for (label, measured, limit) in [("noiseless", &data, 0.01), ("noisy", &noisy, 0.10)] {
        let r = match calibrate(measured, &template, &start, cfg.budget, &cfg.calibration) {
            Ok(r) => r,
            Err(e) => return Outcome::new(5, name, false, e.to_string()),
        };
        files.push((format!("calibration_{label}.txt"), calibration_report(&comment, &r)));
        let errors = param_errors(&r.params, &truth);
        let mut ok = errors.iter().all(|&e| e <= limit) && r.objective <= r.seed_objective;
        if label == "noiseless" {
            ok &= r.objective < 1e-6 * scale;
        }
        pass &= ok;
        details.push(format!("{label} err {} obj {:.2e}", fmt_errors(&errors), r.objective));
    }
    Outcome::new(5, name, pass, details.join("; "))
}

pub fn resonance_targets(cfg: &RunConfig, digitized: Option<&FlowFrequencyCurve>) -> Outcome {
    let name = "resonance peaks 130/180 Hz";
    let Some(measured) = digitized else {
        return Outcome {
            id: 6,
            name,
            status: Status::Skipped,
            detail: "no digitized curve supplied".into(),
        };
    };
    let mut template = cfg.pump.with_voltage(cfg.sweep.voltage);
    for v in [&mut template.inlet_valve, &mut template.outlet_valve] {
        v.spec = ValveSpec::preset(ValveShape::Narrow).with_thickness(0.5e-3);
    }
    let seed = CalibrationParams::from_config(&template);
    let fit = match calibrate(measured, &template, &seed, cfg.budget, &cfg.calibration) {
        Ok(r) => r,
        Err(e) => return Outcome::new(6, name, false, e.to_string()),
    };
    let sweep = crate::performance::SweepSpec {
        f_min: measured.points[0].frequency,
        f_max: measured.points[measured.len() - 1].frequency,
        ..cfg.sweep
    };
    let peaks = frequency_sweep(&fit.params.apply(&template), &sweep, &cfg.solver)
        .and_then(|c| find_peaks(&c));
    let peaks = match peaks {
        Ok(p) => p,
        Err(e) => return Outcome::new(6, name, false, e.to_string()),
    };
    let top: Vec<f64> = peaks.iter().take(2).map(|p| p.frequency).collect();
    let hit = |target: f64| top.iter().any(|f| (f - target).abs() <= 10.0);
    Outcome::new(
        6,
        name,
        top.len() == 2 && hit(130.0) && hit(180.0),
        format!("top peaks at {top:?} Hz"),
    )
}

pub fn thermal_fit() -> Outcome {
    let m = ThermalModel::bench();
    let exact = BENCH_POINTS
        .iter()
        .all(|&(p, t)| core_temperature(&m, p).celsius == t);
    let temps: Vec<f64> = (0..=30)
        .map(|i| core_temperature(&m, 30.0 + i as f64).celsius)
        .collect();
    let rising = temps.windows(2).all(|w| w[1] > w[0]);
    Outcome::new(
        7,
        "thermal two-point fit",
        exact && rising,
        format!("T = {} + {:.5}·P; exact at fit points: {exact}; rising: {rising}", m.offset, m.slope),
    )
}

pub fn thickness_monotonicity(cfg: &RunConfig) -> Outcome {
    let name = "amplitude falls with thickness";
    let omega = 2.0 * PI * 130.0;
    let force = cfg.pump.drive.force();
    let mut amps = Vec::new();
    for h in [0.3e-3, 0.5e-3, 0.8e-3, 1.0e-3] {
        let spec = cfg.pump.outlet_valve.spec.with_thickness(h);
        let amp = derive_lumped_params(&spec, cfg.pump.outlet_valve.damping)
            .and_then(|p| steady_state_amplitude(&p, force, omega));
        match amp {
            Ok(a) => amps.push(a),
            Err(e) => return Outcome::new(8, name, false, e.to_string()),
        }
    }
    let falling = amps.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = amps.iter().map(|a| format!("{a:.4e}")).collect();
    Outcome::new(8, name, falling, format!("amplitudes [m] at h = 0.3/0.5/0.8/1.0 mm: {}", shown.join(", ")))
}

/// Runs every check and collects the curves it produced.
pub fn run(cfg: &RunConfig, options: &ReproOptions) -> Result<Report> {
    let comment = provenance_line(&cfg.hash());
    let mut files = Vec::new();

    let curve = frequency_sweep(&cfg.pump, &cfg.sweep, &cfg.solver)?;
    let mut buf = Vec::new();
    write_table(
        &mut buf,
        &comment,
        &FLOW_COLUMNS,
        curve.points.iter().map(|p| vec![p.frequency, p.flow]),
    )?;
    files.push(("sweep.csv".into(), String::from_utf8_lossy(&buf).into_owned()));

    let outcomes = vec![
        lumped_parameters(),
        oscillator_oracle(&cfg.pump),
        rectification(cfg),
        pump_curve(options.seed),
        calibration_round_trip(cfg, options.seed, &mut files),
        resonance_targets(cfg, options.digitized.as_ref()),
        thermal_fit(),
        thickness_monotonicity(cfg),
    ];
    let mut report = Report { outcomes, files };
    let table = format!("{comment}\n{}", report.table());
    report.files.push(("repro.txt".into(), table));
    Ok(report)
}
