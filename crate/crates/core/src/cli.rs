//! `micropump` command line.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure
//! (including a reproduction check that fails).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::dynamics::{diagnose_actuation, simulate};
use crate::error::{Error, Result};
use crate::hydraulics::{
    decompose_pump_resistance, fit_linear_loss, operating_point, total_head_loss, SystemCurve,
};
use crate::io::{
    calibration_report, provenance_line, read_flow_curve, read_head_loss_samples,
    read_thermal_points, write_sim_result, write_table, FLOW_COLUMNS, THERMAL_COLUMNS,
};
use crate::performance::{
    add_multiplicative_noise, calibrate, find_peaks, frequency_sweep, CalibrationParams,
};
use crate::repro::{self, ReproOptions};
use crate::thermal::{core_temperature, fit_thermal_model, ThermalModel};
use crate::units::ml_per_min;
use crate::valve::LumpedValveParams;

#[derive(Parser, Debug)]
#[command(
    name = "micropump",
    version,
    about = "Piezo diaphragm micro-pump simulation and calibration",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for synthetic noise.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Format {
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lumped parameters of both valves.
    Mech(Common),
    /// One simulation at the configured drive; writes the last cycle.
    Sim(Common),
    /// Net flow across the configured frequency grid.
    Sweep(Common),
    /// Pump curve, head queries and operating point.
    Pq {
        #[command(flatten)]
        common: Common,
        /// Head [m] to look up the delivered flow at; repeatable.
        #[arg(long)]
        head: Vec<f64>,
    },
    /// Linear loss fit from measured velocity/head samples.
    Loss {
        #[command(flatten)]
        common: Common,
        /// CSV with columns velocity_m_per_s,head_m.
        #[arg(long)]
        data: PathBuf,
        /// Whole-loop, cold-plate and pipe heads [m] to split.
        #[arg(long, value_delimiter = ',')]
        decompose: Option<Vec<f64>>,
        /// Free-surface elevation [m] and exit velocity [m/s].
        #[arg(long, value_delimiter = ',')]
        bernoulli: Option<Vec<f64>>,
    },
    /// Power to core temperature fit and queries.
    Thermal {
        #[command(flatten)]
        common: Common,
        /// CSV with columns power_w,core_temp_c; bench points otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        /// CPU power [W] to predict at; repeatable.
        #[arg(long)]
        power: Vec<f64>,
    },
    /// Fit damping and actuator gains to a flow-frequency curve.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// CSV with columns frequency_hz,flow_ml_per_min. Without it the
        /// configured pump generates the data.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Multiplicative noise amplitude for generated data.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Start from the configured constants instead of the generic seed.
        #[arg(long)]
        from_config: bool,
    },
    /// Run every reproduction check and print a pass/fail table.
    Repro {
        #[command(flatten)]
        common: Common,
        /// Digitized narrow-valve curve (frequency_hz,flow_ml_per_min).
        #[arg(long)]
        digitized: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Mech(c) | Command::Sim(c) | Command::Sweep(c) => c,
            Command::Pq { common, .. }
            | Command::Loss { common, .. }
            | Command::Thermal { common, .. }
            | Command::Calibrate { common, .. }
            | Command::Repro { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Mech(_) => "mech",
            Command::Sim(_) => "sim",
            Command::Sweep(_) => "sweep",
            Command::Pq { .. } => "pq",
            Command::Loss { .. } => "loss",
            Command::Thermal { .. } => "thermal",
            Command::Calibrate { .. } => "calibrate",
            Command::Repro { .. } => "repro",
        }
    }

    fn required_keys(&self) -> &'static [&'static str] {
        match self {
            Command::Loss { .. } => &["hydraulics.pipe_area_m2"],
            _ => &[],
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// reports to `stdout` and diagnostics to `stderr`. Returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    1
                } else {
                    0
                }
            };
        }
    };
    match execute(&cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

struct Output {
    dir: PathBuf,
    comment: String,
}

impl Output {
    fn file(&self, name: &str) -> Result<fs::File> {
        Ok(fs::File::create(self.dir.join(name))?)
    }

    fn text(&self, name: &str, body: &str) -> Result<()> {
        Ok(fs::write(self.dir.join(name), body)?)
    }
}

fn execute(command: &Command, stdout: &mut dyn Write) -> Result<i32> {
    let common = command.common();
    let cfg = RunConfig::load(common.config.as_deref(), command.required_keys())?;
    fs::create_dir_all(&common.out)?;
    let out = Output {
        dir: common.out.clone(),
        comment: provenance_line(&cfg.hash()),
    };
    out.text(
        "resolved_config.toml",
        &format!("{}\n# command: {}\n{}", out.comment, command.name(), cfg.dump()),
    )?;

    match command {
        Command::Mech(_) => mech(&cfg, &out, stdout),
        Command::Sim(_) => sim(&cfg, &out, stdout),
        Command::Sweep(_) => sweep(&cfg, &out, stdout),
        Command::Pq { head, .. } => pq(&cfg, head, &out, stdout),
        Command::Loss {
            data,
            decompose,
            bernoulli,
            ..
        } => loss(&cfg, data, decompose.as_deref(), bernoulli.as_deref(), &out, stdout),
        Command::Thermal { data, power, .. } => thermal(data.as_deref(), power, &out, stdout),
        Command::Calibrate {
            data,
            noise,
            from_config,
            common,
        } => calibrate_cmd(&cfg, data.as_deref(), *noise, *from_config, common.seed, &out, stdout),
        Command::Repro {
            digitized, common, ..
        } => repro_cmd(&cfg, digitized.as_deref(), common.seed, &out, stdout),
    }
}

fn valve_lines(label: &str, p: &LumpedValveParams) -> String {
    format!(
        "{label}.second_moment_m4 = {:e}\n\
         {label}.spring_constant_n_per_m = {}\n\
         {label}.mass_kg = {:e}\n\
         {label}.natural_frequency_rad_per_s = {}\n\
         {label}.natural_frequency_hz = {}\n\
         {label}.damping_coefficient_n_s_per_m = {}\n\
         {label}.damping_factor = {}\n",
        p.second_moment,
        p.spring_constant,
        p.mass,
        p.natural_frequency,
        p.natural_frequency_hz(),
        p.damping_coefficient,
        p.damping_factor
    )
}

fn mech(cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> Result<i32> {
    let body = format!(
        "{}{}",
        valve_lines("inlet_valve", &cfg.pump.inlet_valve.lumped()?),
        valve_lines("outlet_valve", &cfg.pump.outlet_valve.lumped()?)
    );
    out.text("mech.txt", &format!("{}\n{body}", out.comment))?;
    write!(stdout, "{body}")?;
    Ok(0)
}

fn sim(cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> Result<i32> {
    let r = simulate(&cfg.pump, &cfg.solver)?;
    write_sim_result(out.file("sim.csv")?, &out.comment, &r)?;
    let d = diagnose_actuation(&r)?;
    writeln!(
        stdout,
        "frequency_hz = {}\nnet_flow_ml_per_min = {}\nbackflow_fraction = {}\n\
         outlet_phase_lag_rad = {}\nactuation = {:?}\nconverged = {}\ncycles = {}",
        r.frequency,
        r.net_flow_ml_per_min(),
        d.backflow_fraction,
        d.outlet_phase_lag,
        d.classification,
        r.converged,
        r.cycles
    )?;
    Ok(0)
}

fn sweep(cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> Result<i32> {
    let curve = frequency_sweep(&cfg.pump, &cfg.sweep, &cfg.solver)?;
    write_table(
        out.file("sweep.csv")?,
        &out.comment,
        &["frequency_hz", "flow_ml_per_min", "abnormal"],
        curve
            .points
            .iter()
            .map(|p| vec![p.frequency, p.flow, f64::from(u8::from(p.abnormal))]),
    )?;
    for p in &curve.points {
        let flag = if p.abnormal { "  abnormal" } else { "" };
        writeln!(stdout, "{:>7} Hz  {:>10.4} ml/min{flag}", p.frequency, p.flow)?;
    }
    if curve.len() >= 3 {
        for peak in find_peaks(&curve)? {
            writeln!(stdout, "peak {} Hz  {:.4} ml/min", peak.frequency, peak.flow)?;
        }
    }
    Ok(0)
}

fn pq(cfg: &RunConfig, heads: &[f64], out: &Output, stdout: &mut dyn Write) -> Result<i32> {
    let pump = cfg.pump_curve()?;
    let n = 26;
    write_table(
        out.file("pq.csv")?,
        &out.comment,
        &["head_m", "flow_ml_per_min"],
        (0..=n).map(|i| {
            let h = pump.shutoff_head * i as f64 / n as f64;
            vec![h, pump.flow_at_ml_per_min(h).unwrap_or(0.0)]
        }),
    )?;
    for &h in heads {
        match pump.flow_at_ml_per_min(h) {
            Some(q) => writeln!(stdout, "head {h} m -> {q} ml/min")?,
            None => {
                return Err(Error::invalid(
                    "--head",
                    format!("{h} m is outside [0, {}] m", pump.shutoff_head),
                ))
            }
        }
    }
    let op = operating_point(&pump, &cfg.system)?;
    writeln!(
        stdout,
        "operating point: {} ml/min at {} m (system {} m per m3/s)",
        op.flow_ml_per_min(),
        op.head,
        cfg.system.total()
    )?;
    Ok(0)
}

fn loss(
    cfg: &RunConfig,
    data: &Path,
    decompose: Option<&[f64]>,
    bernoulli: Option<&[f64]>,
    out: &Output,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let samples = read_head_loss_samples(data)?;
    let fit = fit_linear_loss(&samples)?;
    let area = cfg
        .pipe_area
        .ok_or_else(|| Error::Config(vec!["hydraulics.pipe_area_m2: required, no default".into()]))?;
    let system = SystemCurve::from_velocity_slopes(0.0, 0.0, fit.coefficient, area)?;
    write_table(
        out.file("loss.csv")?,
        &out.comment,
        &["velocity_m_per_s", "head_m", "fitted_head_m"],
        samples
            .iter()
            .map(|s| vec![s.velocity, s.head, fit.coefficient * s.velocity]),
    )?;
    writeln!(
        stdout,
        "loss_coefficient_m_per_m_per_s = {}\nrms_residual_m = {}\nsystem_coefficient_s_per_m2 = {}",
        fit.coefficient,
        fit.rms_residual,
        system.total()
    )?;
    if let Some(values) = decompose {
        let &[total, cold, pipe] = values else {
            return Err(Error::invalid("--decompose", "expects three comma-separated heads"));
        };
        let pump_head = decompose_pump_resistance(total, cold, pipe)?;
        writeln!(stdout, "pump_internal_head_m = {pump_head}")?;
    }
    if let Some(values) = bernoulli {
        let &[z1, v2] = values else {
            return Err(Error::invalid("--bernoulli", "expects elevation,velocity"));
        };
        let h = total_head_loss(z1, v2, cfg.pump.fluid.gravity)?;
        writeln!(stdout, "total_head_loss_m = {}", h.head)?;
        if h.negative {
            writeln!(stdout, "warning: negative head loss, inputs are inconsistent")?;
        }
    }
    let op = operating_point(&cfg.pump_curve()?, &system)?;
    writeln!(
        stdout,
        "operating point with fitted loop: {} ml/min at {} m",
        ml_per_min(op.flow),
        op.head
    )?;
    Ok(0)
}

fn thermal(data: Option<&Path>, powers: &[f64], out: &Output, stdout: &mut dyn Write) -> Result<i32> {
    let model = match data {
        Some(path) => fit_thermal_model(&read_thermal_points(path)?)?,
        None => ThermalModel::bench(),
    };
    let (lo, hi) = model.valid_power_range;
    let n = 30;
    write_table(
        out.file("thermal.csv")?,
        &out.comment,
        &THERMAL_COLUMNS,
        (0..=n).map(|i| {
            let p = lo + (hi - lo) * i as f64 / n as f64;
            vec![p, core_temperature(&model, p).celsius]
        }),
    )?;
    writeln!(
        stdout,
        "offset_c = {}\nslope_k_per_w = {}\nvalid_power_w = [{lo}, {hi}]",
        model.offset, model.slope
    )?;
    for &p in powers {
        let t = core_temperature(&model, p);
        let note = if t.extrapolated { "  (extrapolated)" } else { "" };
        writeln!(stdout, "{p} W -> {} C{note}", t.celsius)?;
    }
    Ok(0)
}

fn calibrate_cmd(
    cfg: &RunConfig,
    data: Option<&Path>,
    noise: f64,
    from_config: bool,
    seed: u64,
    out: &Output,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let template = cfg.pump.with_voltage(cfg.sweep.voltage);
    let measured = match data {
        Some(path) => read_flow_curve(path)?,
        None => {
            if !(0.0..1.0).contains(&noise) {
                return Err(Error::invalid("--noise", "must lie in [0, 1)"));
            }
            let clean = frequency_sweep(&cfg.pump, &cfg.sweep, &cfg.calibration.solver)?;
            add_multiplicative_noise(&clean, noise, seed)
        }
    };
    let start = if from_config {
        CalibrationParams::from_config(&cfg.pump)
    } else {
        CalibrationParams::seed()
    };
    let r = calibrate(&measured, &template, &start, cfg.budget, &cfg.calibration)?;
    let report = calibration_report(&out.comment, &r);
    out.text("calibration.txt", &report)?;

    let fitted = frequency_sweep(&r.params.apply(&template), &cfg.sweep, &cfg.calibration.solver);
    let fitted_flows: Vec<f64> = match &fitted {
        Ok(c) if c.len() == measured.len() => c.flows(),
        _ => measured
            .points
            .iter()
            .map(|p| {
                simulate(&r.params.apply(&template).with_frequency(p.frequency), &cfg.calibration.solver)
                    .map(|s| s.net_flow_ml_per_min())
                    .unwrap_or(f64::NAN)
            })
            .collect(),
    };
    write_table(
        out.file("calibration.csv")?,
        &out.comment,
        &[FLOW_COLUMNS[0], "measured_ml_per_min", "fitted_ml_per_min"],
        measured
            .points
            .iter()
            .zip(&fitted_flows)
            .map(|(p, &q)| vec![p.frequency, p.flow, q]),
    )?;
    let body = report.lines().skip(1).collect::<Vec<_>>().join("\n");
    writeln!(stdout, "{body}")?;
    if !r.improved {
        writeln!(stdout, "warning: no improvement over the seed within the budget")?;
    }
    Ok(0)
}

fn repro_cmd(
    cfg: &RunConfig,
    digitized: Option<&Path>,
    seed: u64,
    out: &Output,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let digitized = digitized.map(read_flow_curve).transpose()?;
    let report = repro::run(cfg, &ReproOptions { seed, digitized })?;
    for (name, body) in &report.files {
        out.text(name, body)?;
    }
    write!(stdout, "{}", report.table())?;
    Ok(if report.all_passed() { 0 } else { 2 })
}
