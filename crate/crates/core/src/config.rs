//! Flat run configuration with SI units in every key name.
//!
//! Files are TOML; sections and dotted keys are flattened, so
//! `[drive]\nvoltage_v = 40` and `drive.voltage_v = 40` are the same entry.
//! Unknown keys are rejected and every problem is reported in one error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::dynamics::{ForcingMode, PumpConfig, SolverOptions};
use crate::error::{Error, Result};
use crate::hydraulics::{PumpCurve, SystemCurve};
use crate::performance::{CalibrationOptions, SweepSpec, DEFAULT_BUDGET};
use crate::valve::{ValveShape, ValveSpec};

/// Everything a CLI run can be configured with.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pump: PumpConfig,
    pub solver: SolverOptions,
    pub sweep: SweepSpec,
    /// Shutoff head [m].
    pub shutoff_head: f64,
    /// Zero-head flow [ml/min].
    pub max_flow_ml_per_min: f64,
    /// Linear system-curve coefficients [m per m³/s].
    pub system: SystemCurve,
    /// Pipe cross-section [m²]; no default.
    pub pipe_area: Option<f64>,
    pub calibration: CalibrationOptions,
    pub budget: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pump: PumpConfig::default(),
            solver: SolverOptions::default(),
            sweep: SweepSpec::default(),
            shutoff_head: 0.52,
            max_flow_ml_per_min: 72.0,
            system: SystemCurve {
                pump_internal: 0.0,
                cold_plate: 0.0,
                pipe_other: 0.0,
            },
            pipe_area: None,
            calibration: CalibrationOptions::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Copy)]
enum Rule {
    Positive,
    NonNegative,
    UnitInterval,
}

type FloatAccess = fn(&mut RunConfig) -> &mut f64;
type OptAccess = fn(&mut RunConfig) -> &mut Option<f64>;
type CountAccess = fn(&mut RunConfig) -> &mut usize;
type FlagAccess = fn(&mut RunConfig) -> &mut bool;

enum Field {
    Float(Rule, FloatAccess),
    OptFloat(OptAccess),
    Count(usize, CountAccess),
    Flag(FlagAccess),
    Shape(fn(&mut RunConfig) -> &mut ValveSpec),
    Forcing,
}

macro_rules! valve_fields {
    ($v:ident, $p:literal) => {
        [
            (concat!($p, ".shape"), Field::Shape(|c| &mut c.pump.$v.spec)),
            (concat!($p, ".length_m"), Field::Float(Rule::Positive, |c| &mut c.pump.$v.spec.length)),
            (concat!($p, ".width_m"), Field::Float(Rule::Positive, |c| &mut c.pump.$v.spec.width)),
            (concat!($p, ".thickness_m"), Field::Float(Rule::Positive, |c| &mut c.pump.$v.spec.thickness)),
            (
                concat!($p, ".elastic_modulus_pa"),
                Field::Float(Rule::Positive, |c| &mut c.pump.$v.spec.elastic_modulus),
            ),
            (
                concat!($p, ".density_kg_per_m3"),
                Field::Float(Rule::Positive, |c| &mut c.pump.$v.spec.density),
            ),
            (
                concat!($p, ".damping_n_s_per_m"),
                Field::Float(Rule::NonNegative, |c| &mut c.pump.$v.damping),
            ),
        ]
    };
}

fn fields() -> Vec<(&'static str, Field)> {
    use Field::*;
    use Rule::*;
    let mut f: Vec<(&'static str, Field)> = Vec::new();
    f.extend(valve_fields!(inlet_valve, "inlet_valve"));
    f.extend(valve_fields!(outlet_valve, "outlet_valve"));
    f.extend([
        ("chamber.width_m", Float(Positive, |c| &mut c.pump.chamber.width)),
        ("chamber.length_m", Float(Positive, |c| &mut c.pump.chamber.length)),
        (
            "chamber.inlet_orifice_area_m2",
            Float(Positive, |c| &mut c.pump.chamber.inlet_orifice_area),
        ),
        (
            "chamber.outlet_orifice_area_m2",
            Float(Positive, |c| &mut c.pump.chamber.outlet_orifice_area),
        ),
        (
            "chamber.discharge_coefficient",
            Float(UnitInterval, |c| &mut c.pump.chamber.discharge_coefficient),
        ),
        ("chamber.crack_fraction", Float(UnitInterval, |c| &mut c.pump.chamber.crack_fraction)),
        ("fluid.density_kg_per_m3", Float(Positive, |c| &mut c.pump.fluid.density)),
        ("fluid.gravity_m_per_s2", Float(Positive, |c| &mut c.pump.fluid.gravity)),
        ("drive.voltage_v", Float(NonNegative, |c| &mut c.pump.drive.voltage)),
        ("drive.frequency_hz", Float(Positive, |c| &mut c.pump.drive.frequency)),
        ("drive.force_per_volt_n_per_v", Float(Positive, |c| &mut c.pump.drive.force_per_volt)),
        (
            "drive.stroke_volume_per_volt_m3_per_v",
            Float(Positive, |c| &mut c.pump.drive.stroke_volume_per_volt),
        ),
        ("model.forcing_mode", Forcing),
        ("model.check_valves", Flag(|c| &mut c.pump.check_valves)),
        ("model.seat_contact", Flag(|c| &mut c.pump.seat_contact)),
        ("solver.dt_s", OptFloat(|c| &mut c.solver.dt)),
        ("solver.max_cycles", Count(2, |c| &mut c.solver.max_cycles)),
        ("solver.convergence_tol", Float(NonNegative, |c| &mut c.solver.convergence_tol)),
        ("sweep.f_min_hz", Float(Positive, |c| &mut c.sweep.f_min)),
        ("sweep.f_max_hz", Float(Positive, |c| &mut c.sweep.f_max)),
        ("sweep.step_hz", Float(Positive, |c| &mut c.sweep.step)),
        ("sweep.voltage_v", Float(NonNegative, |c| &mut c.sweep.voltage)),
        ("pump_curve.shutoff_head_m", Float(Positive, |c| &mut c.shutoff_head)),
        ("pump_curve.max_flow_ml_per_min", Float(Positive, |c| &mut c.max_flow_ml_per_min)),
        (
            "system.pump_internal_s_per_m2",
            Float(NonNegative, |c| &mut c.system.pump_internal),
        ),
        ("system.cold_plate_s_per_m2", Float(NonNegative, |c| &mut c.system.cold_plate)),
        ("system.pipe_other_s_per_m2", Float(NonNegative, |c| &mut c.system.pipe_other)),
        ("hydraulics.pipe_area_m2", OptFloat(|c| &mut c.pipe_area)),
        ("calibration.budget", Count(0, |c| &mut c.budget)),
        ("calibration.grid_points", Count(1, |c| &mut c.calibration.grid_points)),
        ("calibration.grid_decades", Float(NonNegative, |c| &mut c.calibration.grid_decades)),
        (
            "calibration.simplex_step_decades",
            Float(Positive, |c| &mut c.calibration.simplex_step),
        ),
        (
            "calibration.solver_max_cycles",
            Count(2, |c| &mut c.calibration.solver.max_cycles),
        ),
        (
            "calibration.solver_convergence_tol",
            Float(NonNegative, |c| &mut c.calibration.solver.convergence_tol),
        ),
    ]);
    f
}

/// Every key a configuration file may contain.
pub fn known_keys() -> Vec<&'static str> {
    fields().into_iter().map(|(k, _)| k).collect()
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn as_float(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn check(rule: Rule, x: f64) -> std::result::Result<(), &'static str> {
    let ok = x.is_finite()
        && match rule {
            Rule::Positive => x > 0.0,
            Rule::NonNegative => x >= 0.0,
            Rule::UnitInterval => x > 0.0 && x <= 1.0,
        };
    if ok {
        Ok(())
    } else {
        Err(match rule {
            Rule::Positive => "must be > 0",
            Rule::NonNegative => "must be >= 0",
            Rule::UnitInterval => "must lie in (0, 1]",
        })
    }
}

impl RunConfig {
    /// Parses TOML text. `required` lists keys that must be present even
    /// though they have no default; all problems are gathered into one
    /// [`Error::Config`].
    pub fn from_toml_str(text: &str, required: &[&str]) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(vec![format!("syntax: {}", e.message())]))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        Self::from_entries(flat, required)
    }

    pub fn load(path: Option<&Path>, required: &[&str]) -> Result<Self> {
        match path {
            None => Self::from_entries(BTreeMap::new(), required),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Parse {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                Self::from_toml_str(&text, required)
            }
        }
    }

    fn from_entries(mut flat: BTreeMap<String, toml::Value>, required: &[&str]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut problems = Vec::new();
        let fields = fields();

        // Shape presets go first so explicit dimensions override them.
        let (shapes, rest): (Vec<_>, Vec<_>) =
            fields.iter().partition(|(_, f)| matches!(f, Field::Shape(_)));
        for (key, field) in shapes.into_iter().chain(rest) {
            let Some(value) = flat.remove(*key) else {
                continue;
            };
            let type_err = |want: &str| format!("{key}: expected {want}, got `{value}`");
            match field {
                Field::Float(rule, access) => match as_float(&value) {
                    Some(x) => match check(*rule, x) {
                        Ok(()) => *access(&mut cfg) = x,
                        Err(why) => problems.push(format!("{key}: {why}, got {x}")),
                    },
                    None => problems.push(type_err("a number")),
                },
                Field::OptFloat(access) => match as_float(&value) {
                    Some(x) if x > 0.0 && x.is_finite() => *access(&mut cfg) = Some(x),
                    Some(x) => problems.push(format!("{key}: must be > 0, got {x}")),
                    None => problems.push(type_err("a number")),
                },
                Field::Count(min, access) => match value.as_integer() {
                    Some(n) if n >= *min as i64 => *access(&mut cfg) = n as usize,
                    Some(n) => problems.push(format!("{key}: must be >= {min}, got {n}")),
                    None => problems.push(type_err("an integer")),
                },
                Field::Flag(access) => match value.as_bool() {
                    Some(b) => *access(&mut cfg) = b,
                    None => problems.push(type_err("true or false")),
                },
                Field::Shape(access) => match value.as_str().map(str::parse::<ValveShape>) {
                    Some(Ok(shape)) => {
                        let spec = access(&mut cfg);
                        *spec = ValveSpec {
                            elastic_modulus: spec.elastic_modulus,
                            density: spec.density,
                            ..ValveSpec::preset(shape)
                        };
                    }
                    _ => problems.push(type_err("one of standard, narrow, short")),
                },
                Field::Forcing => match value.as_str().map(str::parse::<ForcingMode>) {
                    Some(Ok(mode)) => cfg.pump.forcing = mode,
                    _ => problems.push(type_err("prescribed or pressure_coupled")),
                },
            }
        }
        for key in flat.keys() {
            problems.push(format!("{key}: unknown key"));
        }
        for key in required {
            let unset = match *key {
                "hydraulics.pipe_area_m2" => cfg.pipe_area.is_none(),
                "solver.dt_s" => cfg.solver.dt.is_none(),
                _ => false,
            };
            if unset {
                problems.push(format!("{key}: required, no default"));
            }
        }
        if problems.is_empty() {
            if let Err(e) = cfg.validate() {
                problems.push(e.to_string());
            }
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    fn validate(&self) -> Result<()> {
        self.pump.validate()?;
        if !(self.sweep.f_max >= self.sweep.f_min) {
            return Err(Error::invalid("sweep.f_max_hz", "must be >= sweep.f_min_hz"));
        }
        Ok(())
    }

    pub fn pump_curve(&self) -> Result<PumpCurve> {
        PumpCurve::from_ml_per_min(self.shutoff_head, self.max_flow_ml_per_min)
    }

    /// Resolved configuration as flat TOML, one `key = value` per line.
    /// Keys without a value are written as comments.
    pub fn dump(&self) -> String {
        let mut c = self.clone();
        let mut out = String::new();
        for (key, field) in fields() {
            let value = match field {
                Field::Float(_, access) => Some(fmt_float(*access(&mut c))),
                Field::OptFloat(access) => access(&mut c).map(fmt_float),
                Field::Count(_, access) => Some(access(&mut c).to_string()),
                Field::Flag(access) => Some(access(&mut c).to_string()),
                Field::Shape(access) => Some(format!("\"{}\"", access(&mut c).shape)),
                Field::Forcing => Some(format!("\"{}\"", c.pump.forcing.as_str())),
            };
            match value {
                Some(v) => writeln!(out, "{key} = {v}"),
                None => writeln!(out, "# {key} = (unset)"),
            }
            .expect("writing to a String");
        }
        out
    }

    /// SHA-256 of [`RunConfig::dump`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.dump().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn fmt_float(x: f64) -> String {
    let s = if x != 0.0 && !(1e-3..1e7).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    };
    if s.contains(['.', 'e', 'i', 'n']) {
        s
    } else {
        format!("{s}.0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn dump_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.pump.drive.voltage = 37.5;
        cfg.pipe_area = Some(7.5e-6);
        cfg.solver.dt = Some(1e-6);
        let again = RunConfig::from_toml_str(&cfg.dump(), &[]).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn every_key_is_echoed() {
        let dump = RunConfig::default().dump();
        for key in known_keys() {
            assert!(dump.contains(key), "{key} missing");
        }
        assert!(dump.contains("# hydraulics.pipe_area_m2 = (unset)"));
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = RunConfig::from_toml_str("[drive]\nvoltage_v = 40\n", &[]).unwrap();
        let b = RunConfig::from_toml_str("drive.voltage_v = 40.0\n", &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.pump.drive.voltage, 40.0);
    }

    #[test]
    fn all_problems_reported_together() {
        let text = "drive.voltage_v = -1\nbogus.key = 3\nsolver.max_cycles = \"many\"\n";
        let Err(Error::Config(problems)) =
            RunConfig::from_toml_str(text, &["hydraulics.pipe_area_m2"])
        else {
            panic!("expected config error");
        };
        assert_eq!(problems.len(), 4, "{problems:?}");
        let joined = problems.join("\n");
        for key in ["drive.voltage_v", "bogus.key", "solver.max_cycles", "hydraulics.pipe_area_m2"] {
            assert!(joined.contains(key), "{key} not named in {joined}");
        }
    }

    #[test]
    fn shape_preset_then_overrides() {
        let cfg = RunConfig::from_toml_str(
            "inlet_valve.shape = \"narrow\"\ninlet_valve.thickness_m = 3e-4\n",
            &[],
        )
        .unwrap();
        let v = cfg.pump.inlet_valve.spec;
        assert_eq!(v.shape, ValveShape::Narrow);
        assert_eq!(v.width, 2e-3);
        assert_eq!(v.thickness, 3e-4);
    }
}
