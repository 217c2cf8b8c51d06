//! Flow–frequency sweeps, peak picking and calibration of the unmeasured
//! model constants against bench curves.
//!
//! Flows in this module are ml/min, the unit bench curves are recorded in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{diagnose_actuation, simulate, Actuation, PumpConfig, SolverOptions};
use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::simplex::{self, SimplexOptions};

/// Frequency grid and drive voltage of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub f_min: f64,
    pub f_max: f64,
    pub step: f64,
    pub voltage: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            f_min: 70.0,
            f_max: 180.0,
            step: 10.0,
            voltage: 50.0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        require_positive("sweep f_min", self.f_min)?;
        require_positive("sweep step", self.step)?;
        require_non_negative("sweep voltage", self.voltage)?;
        if !(self.f_max > self.f_min) {
            return Err(Error::invalid("sweep f_max", "must exceed f_min"));
        }
        Ok(())
    }

    /// A sweep holding a single frequency.
    pub fn single(frequency: f64, voltage: f64) -> Self {
        SweepSpec {
            f_min: frequency,
            f_max: frequency,
            step: 1.0,
            voltage,
        }
    }

    /// Grid frequencies `f_min + i·step` up to and including `f_max`.
    pub fn frequencies(&self) -> Vec<f64> {
        let span = (self.f_max - self.f_min) / self.step;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.f_min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPoint {
    /// [Hz]
    pub frequency: f64,
    /// Net delivered flow, clipped at zero [ml/min].
    pub flow: f64,
    /// Backflow or non-positive delivery at this frequency.
    pub abnormal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency: f64,
    pub flow: f64,
}

/// Net flow against drive frequency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowFrequencyCurve {
    pub points: Vec<FlowPoint>,
    pub peaks: Vec<Peak>,
}

impl FlowFrequencyCurve {
    /// Builds a curve from measured `(frequency, flow)` pairs.
    pub fn from_measurements(pairs: &[(f64, f64)]) -> Result<Self> {
        let points = pairs
            .iter()
            .map(|&(frequency, flow)| FlowPoint {
                frequency,
                flow,
                abnormal: false,
            })
            .collect();
        let curve = FlowFrequencyCurve {
            points,
            peaks: Vec::new(),
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if !(w[1].frequency > w[0].frequency) {
                return Err(Error::invalid(
                    "curve frequencies",
                    format!("must increase strictly ({} then {})", w[0].frequency, w[1].frequency),
                ));
            }
        }
        for p in &self.points {
            require_positive("curve frequency", p.frequency)?;
            require_non_negative("curve flow", p.flow)?;
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency).collect()
    }

    pub fn flows(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.flow).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fills `peaks` from the current points.
    pub fn with_peaks(mut self) -> Result<Self> {
        self.peaks = find_peaks(&self)?;
        Ok(self)
    }
}

fn net_flows(config: &PumpConfig, frequencies: &[f64], options: &SolverOptions) -> Result<Vec<(f64, bool)>> {
    frequencies
        .par_iter()
        .map(|&f| {
            let run = || -> Result<(f64, bool)> {
                let result = simulate(&config.with_frequency(f), options)?;
                let abnormal = diagnose_actuation(&result)?.classification == Actuation::Abnormal;
                Ok((result.net_flow_ml_per_min(), abnormal))
            };
            run().map_err(|e| Error::Sweep {
                frequency: f,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Simulates the pump at every grid frequency of `sweep`, at the sweep's
/// voltage. Each frequency is an independent run from rest.
pub fn frequency_sweep(
    config: &PumpConfig,
    sweep: &SweepSpec,
    options: &SolverOptions,
) -> Result<FlowFrequencyCurve> {
    if sweep.f_max != sweep.f_min {
        sweep.validate()?;
    }
    let config = config.with_voltage(sweep.voltage);
    let frequencies = sweep.frequencies();
    let flows = net_flows(&config, &frequencies, options)?;
    let points = frequencies
        .iter()
        .zip(flows)
        .map(|(&frequency, (q, abnormal))| FlowPoint {
            frequency,
            flow: q.max(0.0),
            abnormal: abnormal || q <= 0.0 && sweep.voltage > 0.0,
        })
        .collect();
    Ok(FlowFrequencyCurve {
        points,
        peaks: Vec::new(),
    })
}

/// Strict local maxima of the curve, highest flow first.
///
/// An end point counts when it strictly exceeds its only neighbour.
pub fn find_peaks(curve: &FlowFrequencyCurve) -> Result<Vec<Peak>> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: pts.len(),
        });
    }
    let last = pts.len() - 1;
    let mut peaks: Vec<Peak> = (0..=last)
        .filter(|&i| {
            let left = i == 0 || pts[i].flow > pts[i - 1].flow;
            let right = i == last || pts[i].flow > pts[i + 1].flow;
            left && right
        })
        .map(|i| Peak {
            frequency: pts[i].frequency,
            flow: pts[i].flow,
        })
        .collect();
    peaks.sort_by(|a, b| b.flow.total_cmp(&a.flow).then(a.frequency.total_cmp(&b.frequency)));
    Ok(peaks)
}

/// Net flow at fixed frequency for each voltage, as `(V, ml/min)`.
pub fn voltage_response(
    config: &PumpConfig,
    voltages: &[f64],
    frequency: f64,
    options: &SolverOptions,
) -> Result<Vec<(f64, f64)>> {
    for &v in voltages {
        require_non_negative("voltage", v)?;
    }
    voltages
        .par_iter()
        .map(|&v| {
            let cfg = config.with_voltage(v).with_frequency(frequency);
            simulate(&cfg, options).map(|r| (v, r.net_flow_ml_per_min()))
        })
        .collect()
}

/// The four constants the bench data has to supply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    /// Inlet valve damping [N·s/m].
    pub c_in: f64,
    /// Outlet valve damping [N·s/m].
    pub c_out: f64,
    /// [N/V]
    pub force_per_volt: f64,
    /// [m³/V]
    pub stroke_volume_per_volt: f64,
}

impl CalibrationParams {
    /// Generic starting point when nothing is known about the pump.
    pub fn seed() -> Self {
        CalibrationParams {
            c_in: 2.0e-3,
            c_out: 2.0e-3,
            force_per_volt: 2.0e-4,
            stroke_volume_per_volt: 2.0e-10,
        }
    }

    pub fn from_config(config: &PumpConfig) -> Self {
        CalibrationParams {
            c_in: config.inlet_valve.damping,
            c_out: config.outlet_valve.damping,
            force_per_volt: config.drive.force_per_volt,
            stroke_volume_per_volt: config.drive.stroke_volume_per_volt,
        }
    }

    pub fn apply(&self, template: &PumpConfig) -> PumpConfig {
        let mut cfg = *template;
        cfg.inlet_valve.damping = self.c_in;
        cfg.outlet_valve.damping = self.c_out;
        cfg.drive.force_per_volt = self.force_per_volt;
        cfg.drive.stroke_volume_per_volt = self.stroke_volume_per_volt;
        cfg
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.c_in, self.c_out, self.force_per_volt, self.stroke_volume_per_volt]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        CalibrationParams {
            c_in: v[0],
            c_out: v[1],
            force_per_volt: v[2],
            stroke_volume_per_volt: v[3],
        }
    }

    fn validate(&self) -> Result<()> {
        require_positive("seed c_in", self.c_in)?;
        require_positive("seed c_out", self.c_out)?;
        require_positive("seed force_per_volt", self.force_per_volt)?;
        require_positive("seed stroke_volume_per_volt", self.stroke_volume_per_volt)
    }

    fn to_log(self) -> Vec<f64> {
        self.as_array().iter().map(|v| v.log10()).collect()
    }

    fn from_log(x: &[f64]) -> Self {
        Self::from_array([10f64.powf(x[0]), 10f64.powf(x[1]), 10f64.powf(x[2]), 10f64.powf(x[3])])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub params: CalibrationParams,
    /// Sum of squared flow errors [(ml/min)²].
    pub objective: f64,
    /// Objective at the seed.
    pub seed_objective: f64,
    pub iterations: usize,
    /// Objective evaluations spent, not counting the seed.
    pub evaluations: usize,
    /// False when nothing better than the seed was found.
    pub improved: bool,
}

/// Search settings for [`calibrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Grid points per parameter, log-spaced and centred on the seed.
    pub grid_points: usize,
    /// Half-width of the grid in decades.
    pub grid_decades: f64,
    /// Initial simplex edge in decades.
    pub simplex_step: f64,
    /// Solver used while refining.
    pub solver: SolverOptions,
    /// Cheaper solver used to rank grid points.
    pub grid_solver: SolverOptions,
    /// Best grid points kept as simplex starts.
    pub starts: usize,
    /// Evaluations given to each start before the best is refined.
    pub probe_evaluations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            grid_points: 5,
            grid_decades: 2.0,
            simplex_step: 0.1,
            solver: SolverOptions {
                convergence_tol: 1e-7,
                max_cycles: 400,
                ..SolverOptions::default()
            },
            grid_solver: SolverOptions {
                steps_per_cycle: 400,
                convergence_tol: 1e-4,
                max_cycles: 60,
                ..SolverOptions::default()
            },
            starts: 4,
            probe_evaluations: 80,
        }
    }
}

/// Default number of objective evaluations for [`calibrate`].
pub const DEFAULT_BUDGET: usize = 2000;

/// Sum of squared differences between simulated and measured flows, with
/// negative simulated flows left as they are.
pub fn calibration_objective(
    measured: &FlowFrequencyCurve,
    template: &PumpConfig,
    params: &CalibrationParams,
    options: &SolverOptions,
) -> Result<f64> {
    let cfg = params.apply(template);
    let flows = net_flows(&cfg, &measured.frequencies(), options)?;
    Ok(measured
        .points
        .iter()
        .zip(flows)
        .map(|(m, (q, _))| (q - m.flow).powi(2))
        .sum())
}

/// Like [`calibration_objective`], but runs the frequencies in order and
/// stops as soon as the partial sum exceeds `bound`, returning that partial
/// sum. Failed simulations count as infinite.
fn bounded_objective(
    measured: &FlowFrequencyCurve,
    template: &PumpConfig,
    params: &CalibrationParams,
    options: &SolverOptions,
    bound: f64,
) -> f64 {
    let cfg = params.apply(template);
    let mut sum = 0.0;
    for m in &measured.points {
        match simulate(&cfg.with_frequency(m.frequency), options) {
            Ok(r) => sum += (r.net_flow_ml_per_min() - m.flow).powi(2),
            Err(_) => return f64::INFINITY,
        }
        if !(sum <= bound) {
            break;
        }
    }
    if sum.is_nan() {
        f64::INFINITY
    } else {
        sum
    }
}

/// Grid points scored per parallel batch.
const GRID_BATCH: usize = 16;

/// Fits the valve damping coefficients and the two actuator gains so that
/// simulated net flow matches `measured` in the least-squares sense.
///
/// The search first scans a coarse log-spaced grid around `seed`, nearest
/// points first, with a cheaper solver. The seed and the best few grid
/// points each get a short Nelder–Mead run in log space, and the best of
/// those is refined with what is left of the budget. `budget` caps the
/// number of objective evaluations; the seed's own evaluation is not
/// counted. The template's drive voltage is
/// the voltage the measurements were taken at.
pub fn calibrate(
    measured: &FlowFrequencyCurve,
    template: &PumpConfig,
    seed: &CalibrationParams,
    budget: usize,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if measured.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: measured.len(),
        });
    }
    measured.validate()?;
    seed.validate()?;
    seed.apply(template).validate()?;

    let solver = options.solver;
    let evaluate = |p: &CalibrationParams| -> f64 {
        calibration_objective(measured, template, p, &solver).unwrap_or(f64::INFINITY)
    };

    let seed_objective = calibration_objective(measured, template, seed, &solver)?;
    if !seed_objective.is_finite() {
        return Err(Error::NonFinite("calibration objective at the seed".into()));
    }

    let center = seed.to_log();
    let mut best = (center.clone(), seed_objective);
    let mut used = 0;

    // Grid points are ranked with the cheaper solver and the best few are
    // kept as starting points.
    let grid: Vec<Vec<f64>> = grid_offsets(options.grid_points, options.grid_decades)
        .into_iter()
        .filter(|o| o.iter().any(|&v| v != 0.0))
        .take(budget)
        .map(|o| center.iter().zip(&o).map(|(c, v)| c + v).collect())
        .collect();
    let keep = options.starts.max(1);
    let mut ranked: Vec<(Vec<f64>, f64)> = Vec::new();
    for batch in grid.chunks(GRID_BATCH) {
        let bound = if ranked.len() < keep {
            f64::INFINITY
        } else {
            ranked[keep - 1].1
        };
        let scores: Vec<f64> = batch
            .par_iter()
            .map(|x| {
                let p = CalibrationParams::from_log(x);
                bounded_objective(measured, template, &p, &options.grid_solver, bound)
            })
            .collect();
        used += batch.len();
        for (x, v) in batch.iter().zip(scores) {
            if v.is_finite() {
                ranked.push((x.clone(), v));
            }
        }
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        ranked.truncate(keep);
    }

    // Each start, plus the seed, gets a short simplex run with the
    // refining solver; the most promising one then gets the rest.
    let mut starts = vec![best.clone()];
    for (x, _) in ranked {
        if used >= budget {
            break;
        }
        let value = evaluate(&CalibrationParams::from_log(&x));
        used += 1;
        starts.push((x, value));
    }
    let mut iterations = 0;
    let run = |start: &(Vec<f64>, f64), evaluations: usize, restarts: usize| {
        simplex::minimize(
            |x: &[f64]| evaluate(&CalibrationParams::from_log(x)),
            &start.0,
            start.1,
            &SimplexOptions {
                max_evaluations: evaluations,
                initial_step: options.simplex_step,
                f_tol: 1e-12 * seed_objective.max(1e-300),
                x_tol: 1e-6,
                restarts,
            },
        )
    };
    let mut probed = Vec::with_capacity(starts.len());
    for start in &starts {
        let r = run(start, options.probe_evaluations.min(budget - used), 0);
        used += r.evaluations;
        iterations += r.iterations;
        probed.push((r.x, r.value));
    }
    if let Some(lead) = probed.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
        if lead.1 < best.1 {
            best = lead;
        }
    }
    let refine = run(&best, budget - used, 3);
    used += refine.evaluations;
    iterations += refine.iterations;
    if refine.value < best.1 {
        best = (refine.x, refine.value);
    }

    let improved = best.1 < seed_objective;
    let params = if improved {
        CalibrationParams::from_log(&best.0)
    } else {
        *seed
    };
    Ok(CalibrationResult {
        params,
        objective: if improved { best.1 } else { seed_objective },
        seed_objective,
        iterations,
        evaluations: used,
        improved,
    })
}

/// Grid offsets in decades, ordered nearest-first so a small budget still
/// samples around the seed.
fn grid_offsets(points: usize, decades: f64) -> Vec<[f64; 4]> {
    if points < 2 {
        return Vec::new();
    }
    let levels: Vec<f64> = (0..points)
        .map(|i| -decades + 2.0 * decades * i as f64 / (points - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(points.pow(4));
    for &a in &levels {
        for &b in &levels {
            for &c in &levels {
                for &d in &levels {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out.sort_by(|x, y| {
        let n = |v: &[f64; 4]| v.iter().map(|o| o * o).sum::<f64>();
        n(x).total_cmp(&n(y))
    });
    out
}

/// Applies uniform multiplicative noise `flow·(1 + u)`, `u ∈ [−amplitude,
/// amplitude]`, reproducibly from `seed`.
pub fn add_multiplicative_noise(curve: &FlowFrequencyCurve, amplitude: f64, seed: u64) -> FlowFrequencyCurve {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = curve
        .points
        .iter()
        .map(|p| FlowPoint {
            flow: p.flow * (1.0 + amplitude * (2.0 * rng.random::<f64>() - 1.0)),
            ..*p
        })
        .collect();
    FlowFrequencyCurve {
        points,
        peaks: Vec::new(),
    }
}
