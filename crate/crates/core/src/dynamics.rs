//! Time-domain model of the two-valve pump chamber.
//!
//! The piezo-driven diaphragm changes the chamber volume by
//! `ΔV₀·sin(ω·t)`. Each check valve is a lumped oscillator (see
//! [`crate::valve`]) whose tip opening `y ≥ 0` sets a gap area `b·y` in
//! series with its port. Flow follows the quasi-steady orifice law
//! `q = C_d·A·√(2|Δp|/ρ)`.
//!
//! Check behaviour: a seated flap (`y = 0`) blocks reverse flow and opens a
//! small cracking area to forward flow; an open flap passes flow both ways
//! through its gap, so a valve that lags the diaphragm lets fluid back
//! through. With the chamber incompressible, inflow minus outflow equals the
//! volume rate, which fixes the chamber pressure in closed form at every
//! instant.
//!
//! Two forcing modes:
//! - [`ForcingMode::Prescribed`]: each valve sees only the actuator force,
//!   `+F·sin(ω·t)` on the outlet and `−F·sin(ω·t)` on the inlet.
//! - [`ForcingMode::PressureCoupled`]: the chamber pressure acting on the
//!   flap face `L·b` is added, opening the outlet under over-pressure and the
//!   inlet under suction.
//!
//! Integration is classical RK4 at a fixed step that divides the drive period
//! exactly; seat contact is an inelastic projection after each step.

use std::f64::consts::PI;

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::units::M3_PER_S_TO_ML_PER_MIN;
use crate::valve::{derive_lumped_params, LumpedValveParams, ValveSpec};

/// Steps per drive period when no explicit step is requested.
pub const DEFAULT_STEPS_PER_CYCLE: usize = 2000;
/// The step must resolve the drive period at least this finely.
pub const MIN_STEPS_PER_CYCLE: f64 = 50.0;

/// Sinusoidal piezo actuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSignal {
    /// Voltage amplitude [V].
    pub voltage: f64,
    /// Drive frequency [Hz].
    pub frequency: f64,
    /// Actuator force on a valve per volt [N/V].
    pub force_per_volt: f64,
    /// Chamber stroke volume amplitude per volt [m³/V].
    pub stroke_volume_per_volt: f64,
}

impl DriveSignal {
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// Force amplitude `F` [N].
    pub fn force(&self) -> f64 {
        self.force_per_volt * self.voltage
    }

    /// Volume stroke amplitude `ΔV₀` [m³].
    pub fn stroke_volume(&self) -> f64 {
        self.stroke_volume_per_volt * self.voltage
    }

    pub fn validate(&self) -> Result<()> {
        // Zero voltage is allowed: it is the idle pump.
        require_non_negative("drive voltage", self.voltage)?;
        require_positive("drive frequency", self.frequency)?;
        require_positive("drive force per volt", self.force_per_volt)?;
        require_positive("drive stroke volume per volt", self.stroke_volume_per_volt)
    }
}

impl Default for DriveSignal {
    fn default() -> Self {
        DriveSignal {
            voltage: 50.0,
            frequency: 130.0,
            force_per_volt: 2.4e-4,
            stroke_volume_per_volt: 4.2e-10,
        }
    }
}

/// Pump chamber and port geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamberSpec {
    /// Cross-section width [m].
    pub width: f64,
    /// Cross-section length [m].
    pub length: f64,
    /// Inlet port area [m²].
    pub inlet_orifice_area: f64,
    /// Outlet port area [m²].
    pub outlet_orifice_area: f64,
    /// Orifice discharge coefficient, in (0, 1].
    pub discharge_coefficient: f64,
    /// Forward flow area of a seated valve as a fraction of its port area.
    pub crack_fraction: f64,
}

impl ChamberSpec {
    pub fn validate(&self) -> Result<()> {
        require_positive("chamber width", self.width)?;
        require_positive("chamber length", self.length)?;
        require_positive("chamber inlet orifice area", self.inlet_orifice_area)?;
        require_positive("chamber outlet orifice area", self.outlet_orifice_area)?;
        require_positive("chamber discharge coefficient", self.discharge_coefficient)?;
        if self.discharge_coefficient > 1.0 {
            return Err(Error::invalid("chamber discharge coefficient", "must be <= 1"));
        }
        require_positive("chamber crack fraction", self.crack_fraction)?;
        if self.crack_fraction > 1.0 {
            return Err(Error::invalid("chamber crack fraction", "must be <= 1"));
        }
        Ok(())
    }
}

impl Default for ChamberSpec {
    fn default() -> Self {
        // 3.3 mm bore
        let port = PI * 1.65e-3 * 1.65e-3;
        ChamberSpec {
            width: 5.0e-3,
            length: 28.0e-3,
            inlet_orifice_area: port,
            outlet_orifice_area: port,
            discharge_coefficient: 0.6,
            crack_fraction: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSpec {
    /// [kg/m³]
    pub density: f64,
    /// [m/s²]
    pub gravity: f64,
}

impl FluidSpec {
    pub fn water() -> Self {
        FluidSpec {
            density: 998.0,
            gravity: 9.81,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("fluid density", self.density)?;
        require_positive("fluid gravity", self.gravity)
    }
}

impl Default for FluidSpec {
    fn default() -> Self {
        Self::water()
    }
}

/// A valve together with its viscous damping coefficient [N·s/m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValveSetup {
    pub spec: ValveSpec,
    pub damping: f64,
}

impl ValveSetup {
    pub fn lumped(&self) -> Result<LumpedValveParams> {
        derive_lumped_params(&self.spec, self.damping)
    }
}

impl Default for ValveSetup {
    fn default() -> Self {
        ValveSetup {
            spec: ValveSpec::standard(),
            damping: 2.0e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcingMode {
    Prescribed,
    #[default]
    PressureCoupled,
}

impl ForcingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ForcingMode::Prescribed => "prescribed",
            ForcingMode::PressureCoupled => "pressure_coupled",
        }
    }
}

impl std::str::FromStr for ForcingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prescribed" => Ok(ForcingMode::Prescribed),
            "pressure_coupled" => Ok(ForcingMode::PressureCoupled),
            other => Err(Error::invalid(
                "forcing mode",
                format!("expected prescribed or pressure_coupled, got {other:?}"),
            )),
        }
    }
}

/// Full pump description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpConfig {
    pub inlet_valve: ValveSetup,
    pub outlet_valve: ValveSetup,
    pub chamber: ChamberSpec,
    pub fluid: FluidSpec,
    pub drive: DriveSignal,
    pub forcing: ForcingMode,
    /// Diagnostic switch. When off, both ports are plain bidirectional
    /// orifices and the flaps no longer gate the flow.
    pub check_valves: bool,
    /// Diagnostic switch. When off, the flaps swing freely through the seat.
    pub seat_contact: bool,
}

impl PumpConfig {
    pub fn validate(&self) -> Result<()> {
        self.inlet_valve.lumped()?;
        self.outlet_valve.lumped()?;
        self.chamber.validate()?;
        self.fluid.validate()?;
        self.drive.validate()
    }

    pub fn with_frequency(mut self, frequency: f64) -> Self {
        self.drive.frequency = frequency;
        self
    }

    pub fn with_voltage(mut self, voltage: f64) -> Self {
        self.drive.voltage = voltage;
        self
    }
}

/// Fitted inlet valve damping of the default pump [N·s/m].
pub const DEFAULT_INLET_DAMPING: f64 = 1.6e-2;
/// Fitted outlet valve damping of the default pump [N·s/m].
pub const DEFAULT_OUTLET_DAMPING: f64 = 3.6e-2;

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            inlet_valve: ValveSetup {
                damping: DEFAULT_INLET_DAMPING,
                ..ValveSetup::default()
            },
            outlet_valve: ValveSetup {
                damping: DEFAULT_OUTLET_DAMPING,
                ..ValveSetup::default()
            },
            chamber: ChamberSpec::default(),
            fluid: FluidSpec::default(),
            drive: DriveSignal::default(),
            forcing: ForcingMode::default(),
            check_valves: true,
            seat_contact: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Time step [s]; `None` means `period / steps_per_cycle`. The step
    /// actually used is the largest that divides the period evenly without
    /// exceeding this value.
    pub dt: Option<f64>,
    /// Steps per period when `dt` is `None`; at least 50.
    pub steps_per_cycle: usize,
    pub max_cycles: usize,
    /// Relative per-cycle change below which the periodic state counts as
    /// reached.
    pub convergence_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dt: None,
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            max_cycles: 200,
            convergence_tol: 1e-4,
        }
    }
}

impl SolverOptions {
    fn steps_per_cycle(&self, frequency: f64) -> Result<usize> {
        let period = 1.0 / frequency;
        let limit = period / MIN_STEPS_PER_CYCLE;
        match self.dt {
            None if (self.steps_per_cycle as f64) < MIN_STEPS_PER_CYCLE => Err(Error::invalid(
                "solver steps_per_cycle",
                format!("must be >= {MIN_STEPS_PER_CYCLE}, got {}", self.steps_per_cycle),
            )),
            None => Ok(self.steps_per_cycle),
            Some(dt) if !(dt > 0.0) || !dt.is_finite() => {
                Err(Error::invalid("solver dt", format!("must be > 0, got {dt}")))
            }
            Some(dt) if dt >= limit => Err(Error::StepTooLarge { dt, frequency, limit }),
            // slack so that dt = period / n round-trips to n
            Some(dt) => Ok(((period / dt) * (1.0 - 1e-9)).ceil() as usize),
        }
    }
}

/// Final-cycle time series and cycle-averaged outputs of one simulation.
///
/// All series hold one sample per step of the last simulated cycle,
/// `t = t₀ + i·dt` for `i` in `0..N`, with `N·dt` exactly one period.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub frequency: f64,
    pub time: Vec<f64>,
    pub y_in: Vec<f64>,
    pub y_out: Vec<f64>,
    /// Chamber gauge pressure [Pa].
    pub chamber_pressure: Vec<f64>,
    /// Flow into the chamber through the inlet valve [m³/s].
    pub q_in: Vec<f64>,
    /// Flow out of the chamber through the outlet valve [m³/s].
    pub q_out: Vec<f64>,
    /// Cycle-averaged delivered flow [m³/s].
    pub net_flow_rate: f64,
    pub backflow_fraction: f64,
    /// Lag of the outlet flap's fundamental behind `sin(ω·t)` [rad], in `(−π, π]`.
    pub outlet_phase_lag: f64,
    pub converged: bool,
    pub cycles: usize,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn net_flow_ml_per_min(&self) -> f64 {
        self.net_flow_rate * M3_PER_S_TO_ML_PER_MIN
    }

    /// Volume rate `dV/dt` of the diaphragm at each sample [m³/s].
    pub fn volume_rate(&self, drive: &DriveSignal) -> Vec<f64> {
        let w = drive.omega();
        let dv = drive.stroke_volume();
        self.time.iter().map(|&t| dv * w * (w * t).cos()).collect()
    }
}

/// Chamber pressure and port flows at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChamberState {
    /// Chamber gauge pressure [Pa].
    pub pressure: f64,
    /// [m³/s]
    pub q_in: f64,
    /// [m³/s]
    pub q_out: f64,
    /// Pressure difference across the inlet flap, positive when it pushes
    /// the flap open [Pa].
    pub inlet_load: f64,
    /// Same for the outlet flap [Pa].
    pub outlet_load: f64,
}

/// Precomputed quantities for one configuration.
#[derive(Debug, Clone, Copy)]
pub struct PumpModel {
    inlet: LumpedValveParams,
    outlet: LumpedValveParams,
    inlet_width: f64,
    outlet_width: f64,
    inlet_face: f64,
    outlet_face: f64,
    inlet_port: f64,
    outlet_port: f64,
    crack: f64,
    cd: f64,
    rho: f64,
    omega: f64,
    force: f64,
    stroke: f64,
    forcing: ForcingMode,
    check_valves: bool,
}

impl PumpModel {
    pub fn new(config: &PumpConfig) -> Result<Self> {
        config.validate()?;
        Ok(PumpModel {
            inlet: config.inlet_valve.lumped()?,
            outlet: config.outlet_valve.lumped()?,
            inlet_width: config.inlet_valve.spec.width,
            outlet_width: config.outlet_valve.spec.width,
            inlet_face: config.inlet_valve.spec.face_area(),
            outlet_face: config.outlet_valve.spec.face_area(),
            inlet_port: config.chamber.inlet_orifice_area,
            outlet_port: config.chamber.outlet_orifice_area,
            crack: config.chamber.crack_fraction,
            cd: config.chamber.discharge_coefficient,
            rho: config.fluid.density,
            omega: config.drive.omega(),
            force: config.drive.force(),
            stroke: config.drive.stroke_volume(),
            forcing: config.forcing,
            check_valves: config.check_valves,
        })
    }

    pub fn inlet_params(&self) -> &LumpedValveParams {
        &self.inlet
    }

    pub fn outlet_params(&self) -> &LumpedValveParams {
        &self.outlet
    }

    /// Diaphragm volume rate `dV/dt` [m³/s].
    pub fn volume_rate(&self, t: f64) -> f64 {
        self.stroke * self.omega * (self.omega * t).cos()
    }

    fn phase(&self, t: f64) -> Phase {
        let (sin, cos) = (self.omega * t).sin_cos();
        Phase { sin, cos }
    }

    /// Effective flow area of one valve in one direction and the share of
    /// the pressure difference that falls across the flap gap.
    ///
    /// The gap `b·y` (plus the cracking area, forward only) sits in series
    /// with the port: `A = (A_gap⁻² + A_port⁻²)^(−1/2)`, and the gap carries
    /// `(A / A_gap)²` of the drop. A seated flap under reverse pressure
    /// passes nothing and carries the whole drop.
    fn passage(&self, y: f64, width: f64, port: f64, forward: bool) -> (f64, f64) {
        if !self.check_valves {
            return (port, 1.0);
        }
        let crack = if forward { self.crack * port } else { 0.0 };
        let gap = width * y.max(0.0) + crack;
        if gap <= 0.0 {
            return (0.0, 1.0);
        }
        let port_sq = port * port;
        let sum_sq = gap * gap + port_sq;
        (gap * port / sum_sq.sqrt(), port_sq / sum_sq)
    }

    /// Solves incompressible continuity `q_in − q_out = dV/dt` for the
    /// chamber pressure given both valve openings.
    pub fn chamber_state(&self, t: f64, y_in: f64, y_out: f64) -> ChamberState {
        self.chamber_state_at(self.phase(t), y_in, y_out)
    }

    fn chamber_state_at(&self, phase: Phase, y_in: f64, y_out: f64) -> ChamberState {
        let rate = self.stroke * self.omega * phase.cos;
        if rate == 0.0 {
            return ChamberState::default();
        }
        // Suction draws forward through the inlet and back through the
        // outlet; compression the other way round.
        let suction = rate > 0.0;
        let (a_in, share_in) = self.passage(y_in, self.inlet_width, self.inlet_port, suction);
        let (a_out, share_out) = self.passage(y_out, self.outlet_width, self.outlet_port, !suction);
        let speed = rate.abs() / (self.cd * (a_in + a_out));
        let drop = 0.5 * self.rho * speed * speed;
        let (q_in, q_out) = (self.cd * a_in * speed, self.cd * a_out * speed);
        if suction {
            ChamberState {
                pressure: -drop,
                q_in,
                q_out: -q_out,
                inlet_load: drop * share_in,
                outlet_load: -drop * share_out,
            }
        } else {
            ChamberState {
                pressure: drop,
                q_in: -q_in,
                q_out,
                inlet_load: -drop * share_in,
                outlet_load: drop * share_out,
            }
        }
    }

    /// Opening forces (inlet, outlet) on the flaps [N].
    pub fn valve_forces(&self, t: f64, y_in: f64, y_out: f64) -> (f64, f64) {
        self.valve_forces_at(self.phase(t), y_in, y_out)
    }

    fn valve_forces_at(&self, phase: Phase, y_in: f64, y_out: f64) -> (f64, f64) {
        let drive = self.force * phase.sin;
        match self.forcing {
            ForcingMode::Prescribed => (-drive, drive),
            ForcingMode::PressureCoupled => {
                let c = self.chamber_state_at(phase, y_in, y_out);
                (
                    -drive + c.inlet_load * self.inlet_face,
                    drive + c.outlet_load * self.outlet_face,
                )
            }
        }
    }

    fn derivative(&self, phase: Phase, s: &[f64; 4]) -> [f64; 4] {
        let (f_in, f_out) = self.valve_forces_at(phase, s[0], s[2]);
        let a_in = (f_in
            - self.inlet.damping_coefficient * s[1]
            - self.inlet.spring_constant * s[0])
            / self.inlet.mass;
        let a_out = (f_out
            - self.outlet.damping_coefficient * s[3]
            - self.outlet.spring_constant * s[2])
            / self.outlet.mass;
        [s[1], a_in, s[3], a_out]
    }

    /// One RK4 step from phase `start` through `mid` to `end`.
    fn rk4_step(&self, dt: f64, s: &[f64; 4], start: Phase, mid: Phase, end: Phase) -> [f64; 4] {
        let shift = |k: &[f64; 4], h: f64| {
            let mut out = *s;
            for (o, d) in out.iter_mut().zip(k) {
                *o += h * d;
            }
            out
        };
        let k1 = self.derivative(start, s);
        let k2 = self.derivative(mid, &shift(&k1, 0.5 * dt));
        let k3 = self.derivative(mid, &shift(&k2, 0.5 * dt));
        let k4 = self.derivative(end, &shift(&k3, dt));
        let mut next = *s;
        for i in 0..4 {
            next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        next
    }
}

#[derive(Debug, Clone, Copy)]
struct Phase {
    sin: f64,
    cos: f64,
}

fn settled(previous: f64, current: f64, tol: f64) -> bool {
    previous == current || (current - previous).abs() <= tol * previous.abs().max(current.abs())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Amplitude and lag of the fundamental of one uniformly sampled period of
/// `signal` relative to `sin(ω·t)`.
pub fn fundamental(time: &[f64], signal: &[f64], omega: f64) -> (f64, f64) {
    let n = signal.len() as f64;
    let (mut a, mut b) = (0.0, 0.0);
    for (&t, &y) in time.iter().zip(signal) {
        a += y * (omega * t).cos();
        b += y * (omega * t).sin();
    }
    let (a, b) = (2.0 * a / n, 2.0 * b / n);
    // y ≈ A·sin(ωt − φ) = A·cos φ·sin ωt − A·sin φ·cos ωt
    (a.hypot(b), (-a).atan2(b))
}

pub(crate) fn backflow_fraction(q_out: &[f64]) -> f64 {
    let reverse: f64 = q_out.iter().map(|q| (-q).max(0.0)).sum();
    let total: f64 = q_out.iter().map(|q| q.abs()).sum();
    if total > 0.0 {
        reverse / total
    } else {
        0.0
    }
}

/// Integrates the pump until its cycle-averaged behaviour repeats, then
/// returns the last cycle.
///
/// Periodicity is judged on the per-cycle mean outflow and the per-cycle RMS
/// opening of both valves. A run that exhausts `max_cycles` is still
/// returned, with `converged = false`.
pub fn simulate(config: &PumpConfig, options: &SolverOptions) -> Result<SimResult> {
    let model = PumpModel::new(config)?;
    let frequency = config.drive.frequency;
    let steps = options.steps_per_cycle(frequency)?;
    if options.max_cycles < 2 {
        return Err(Error::invalid("solver max_cycles", "must be >= 2"));
    }
    require_non_negative("solver convergence_tol", options.convergence_tol)?;

    let period = config.drive.period();
    let dt = period / steps as f64;
    let mut state = [0.0_f64; 4];

    let mut time = vec![0.0; steps];
    let mut y_in = vec![0.0; steps];
    let mut y_out = vec![0.0; steps];
    let mut pressure = vec![0.0; steps];
    let mut q_in = vec![0.0; steps];
    let mut q_out = vec![0.0; steps];

    // Drive phase at every half step of one period; the table wraps.
    let phases: Vec<Phase> = (0..=2 * steps)
        .map(|j| model.phase(j as f64 * 0.5 * dt))
        .collect();

    let mut previous: Option<[f64; 3]> = None;
    let mut converged = false;
    let mut cycles = 0;

    while cycles < options.max_cycles {
        let base = cycles * steps;
        for i in 0..steps {
            let t = (base + i) as f64 * dt;
            let chamber = model.chamber_state_at(phases[2 * i], state[0], state[2]);
            time[i] = t;
            y_in[i] = state[0];
            y_out[i] = state[2];
            pressure[i] = chamber.pressure;
            q_in[i] = chamber.q_in;
            q_out[i] = chamber.q_out;

            state = model.rk4_step(dt, &state, phases[2 * i], phases[2 * i + 1], phases[2 * i + 2]);
            if config.seat_contact {
                for k in [0, 2] {
                    if state[k] < 0.0 {
                        state[k] = 0.0;
                        state[k + 1] = 0.0;
                    }
                }
            }
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "valve state at t = {t:e} s ({frequency} Hz)"
                )));
            }
        }
        cycles += 1;

        let signature = [mean(&q_out), rms(&y_in), rms(&y_out)];
        if let Some(prev) = previous {
            if prev
                .iter()
                .zip(&signature)
                .all(|(&p, &c)| settled(p, c, options.convergence_tol))
            {
                converged = true;
                break;
            }
        }
        previous = Some(signature);
    }

    let net_flow_rate = mean(&q_out);
    let (_, outlet_phase_lag) = fundamental(&time, &y_out, model.omega);
    Ok(SimResult {
        frequency,
        backflow_fraction: backflow_fraction(&q_out),
        time,
        y_in,
        y_out,
        chamber_pressure: pressure,
        q_in,
        q_out,
        net_flow_rate,
        outlet_phase_lag,
        converged,
        cycles,
    })
}

/// Mean outflow over the stored cycle [m³/s].
pub fn net_flow_rate(result: &SimResult) -> Result<f64> {
    if result.q_out.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(mean(&result.q_out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actuation {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnosis {
    pub classification: Actuation,
    pub backflow_fraction: f64,
    pub outlet_phase_lag: f64,
}

/// Backflow fraction above which actuation counts as abnormal.
pub const ABNORMAL_BACKFLOW: f64 = 0.25;

/// Flags cycles where the outlet flap lets a large share of the flow back
/// in, or where no net flow is delivered.
pub fn diagnose_actuation(result: &SimResult) -> Result<Diagnosis> {
    if result.q_out.is_empty() {
        return Err(Error::EmptySeries);
    }
    let backflow = backflow_fraction(&result.q_out);
    let omega = 2.0 * PI * result.frequency;
    let (_, lag) = fundamental(&result.time, &result.y_out, omega);
    let net = mean(&result.q_out);
    let classification = if backflow > ABNORMAL_BACKFLOW || net <= 0.0 {
        Actuation::Abnormal
    } else {
        Actuation::Normal
    };
    Ok(Diagnosis {
        classification,
        backflow_fraction: backflow,
        outlet_phase_lag: lag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valve::{steady_state_amplitude, steady_state_phase};

    fn quick() -> SolverOptions {
        SolverOptions {
            max_cycles: 60,
            convergence_tol: 1e-6,
            ..Default::default()
        }
    }

    #[test]
    fn zero_voltage_is_quiescent() {
        let r = simulate(&PumpConfig::default().with_voltage(0.0), &quick()).unwrap();
        assert!(r.y_in.iter().chain(&r.y_out).all(|&y| y == 0.0));
        assert!(r.q_out.iter().chain(&r.q_in).all(|&q| q == 0.0));
        assert_eq!(r.net_flow_rate, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn oscillator_matches_closed_form() {
        let opts = SolverOptions {
            max_cycles: 400,
            convergence_tol: 1e-13,
            ..Default::default()
        };
        for zeta in [0.1, 0.5, 1.0, 2.0] {
            for ratio in [0.5, 1.0, 2.0] {
                let mut cfg = PumpConfig::default();
                cfg.forcing = ForcingMode::Prescribed;
                cfg.seat_contact = false;
                let base = cfg.outlet_valve.lumped().unwrap();
                let c = 2.0 * zeta * (base.spring_constant * base.mass).sqrt();
                cfg.inlet_valve.damping = c;
                cfg.outlet_valve.damping = c;
                let omega = ratio * base.natural_frequency;
                let cfg = cfg.with_frequency(omega / (2.0 * PI));
                let r = simulate(&cfg, &opts).unwrap();

                let p = base.with_damping(c);
                let want_amp = steady_state_amplitude(&p, cfg.drive.force(), omega).unwrap();
                let want_phase = steady_state_phase(&p, omega);
                let (amp, lag) = fundamental(&r.time, &r.y_out, omega);
                assert!(
                    (amp - want_amp).abs() <= 1e-6 * want_amp,
                    "zeta={zeta} ratio={ratio}: {amp} vs {want_amp}"
                );
                assert!(
                    (lag - want_phase).abs() <= 1e-6 * want_phase.abs(),
                    "zeta={zeta} ratio={ratio}: {lag} vs {want_phase}"
                );
            }
        }
    }

    #[test]
    fn flaps_never_penetrate_the_seat() {
        let r = simulate(&PumpConfig::default(), &quick()).unwrap();
        assert!(r.y_in.iter().chain(&r.y_out).all(|&y| y >= 0.0));
    }

    #[test]
    fn continuity_holds_every_step() {
        let cfg = PumpConfig::default();
        let r = simulate(&cfg, &quick()).unwrap();
        let rate = r.volume_rate(&cfg.drive);
        // 1e-9 m3/s is 0.06 ml/min, four decades below the flow peaks
        let floor = 1e-9;
        for i in 0..r.len() {
            let residual = r.q_in[i] - r.q_out[i] - rate[i];
            let scale = r.q_in[i].abs().max(r.q_out[i].abs()).max(rate[i].abs()).max(floor);
            assert!(residual.abs() < 1e-9 * scale, "step {i}: {residual}");
        }
    }

    #[test]
    fn open_ports_pump_nothing() {
        let mut cfg = PumpConfig::default();
        cfg.check_valves = false;
        let r = simulate(&cfg, &quick()).unwrap();
        let peak = r.q_out.iter().fold(0.0_f64, |m, q| m.max(q.abs()));
        assert!(peak > 0.0);
        assert!(r.net_flow_rate.abs() < 1e-3 * peak);
        let d = diagnose_actuation(&r).unwrap();
        assert_eq!(d.classification, Actuation::Abnormal);
    }

    #[test]
    fn halving_the_step_barely_moves_net_flow() {
        let cfg = PumpConfig::default();
        let opts = SolverOptions::default();
        let coarse = simulate(&cfg, &opts).unwrap();
        let fine = simulate(
            &cfg,
            &SolverOptions {
                dt: Some(0.5 * cfg.drive.period() / DEFAULT_STEPS_PER_CYCLE as f64),
                ..opts
            },
        )
        .unwrap();
        assert_eq!(fine.len(), 2 * coarse.len());
        let rel = (fine.net_flow_rate - coarse.net_flow_rate).abs() / coarse.net_flow_rate.abs();
        assert!(rel < 5e-3, "{rel}");
    }

    #[test]
    fn step_must_resolve_the_period() {
        let cfg = PumpConfig::default();
        let opts = SolverOptions {
            dt: Some(cfg.drive.period() / 10.0),
            ..Default::default()
        };
        assert!(matches!(simulate(&cfg, &opts), Err(Error::StepTooLarge { .. })));
        let opts = SolverOptions {
            dt: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(simulate(&cfg, &opts), Err(Error::InvalidSpec { .. })));
    }

    fn synthetic(q_out: Vec<f64>) -> SimResult {
        let n = q_out.len();
        let frequency = 100.0;
        let time: Vec<f64> = (0..n).map(|i| i as f64 / (n as f64 * frequency)).collect();
        SimResult {
            frequency,
            y_in: vec![0.0; n],
            y_out: vec![0.0; n],
            chamber_pressure: vec![0.0; n],
            q_in: vec![0.0; n],
            net_flow_rate: mean(&q_out),
            backflow_fraction: backflow_fraction(&q_out),
            time,
            q_out,
            outlet_phase_lag: 0.0,
            converged: true,
            cycles: 1,
        }
    }

    #[test]
    fn net_flow_of_rectified_sine() {
        let n = 4000;
        let q0 = 3e-6;
        let half: Vec<f64> = (0..n)
            .map(|i| q0 * (2.0 * PI * i as f64 / n as f64).sin().max(0.0))
            .collect();
        let q = net_flow_rate(&synthetic(half.clone())).unwrap();
        // sampled half-wave: the mean of max(sin, 0) over n points is cot(pi/n)/n
        let exact = q0 / (n as f64 * (PI / n as f64).tan());
        assert!((q - exact).abs() < 1e-12 * q0);
        assert!((q - q0 / PI).abs() < 1e-6 * q0);
        assert_eq!(net_flow_rate(&synthetic(vec![0.0; 8])).unwrap(), 0.0);
        assert_eq!(net_flow_rate(&synthetic(vec![])), Err(Error::EmptySeries));

        let d = diagnose_actuation(&synthetic(half)).unwrap();
        assert_eq!(d.backflow_fraction, 0.0);
        assert_eq!(d.classification, Actuation::Normal);
    }

    #[test]
    fn pure_sine_is_half_backflow() {
        let n = 4000;
        let sine: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let d = diagnose_actuation(&synthetic(sine)).unwrap();
        assert!((d.backflow_fraction - 0.5).abs() < 1e-12);
        assert_eq!(d.classification, Actuation::Abnormal);
    }

    #[test]
    fn fundamental_recovers_amplitude_and_lag() {
        let n = 1000;
        let w = 2.0 * PI * 50.0;
        let time: Vec<f64> = (0..n).map(|i| i as f64 / (n as f64 * 50.0)).collect();
        let y: Vec<f64> = time.iter().map(|t| 2.5 * (w * t - 0.7).sin() + 0.3).collect();
        let (a, lag) = fundamental(&time, &y, w);
        assert!((a - 2.5).abs() < 1e-12);
        assert!((lag - 0.7).abs() < 1e-12);
    }

    #[test]
    fn forcing_mode_parses() {
        assert_eq!("prescribed".parse::<ForcingMode>().unwrap(), ForcingMode::Prescribed);
        assert_eq!(
            "pressure_coupled".parse::<ForcingMode>().unwrap(),
            ForcingMode::PressureCoupled
        );
        assert!("coupled".parse::<ForcingMode>().is_err());
    }
}
