//! CSV and key=value text exchange.
//!
//! Every emitted table starts with a `#` comment line naming the tool
//! version and the hash of the resolved configuration, followed by a header
//! row. Readers skip `#` lines and require the header.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dynamics::SimResult;
use crate::error::{Error, Result};
use crate::hydraulics::HeadLossSample;
use crate::performance::{CalibrationParams, CalibrationResult, FlowFrequencyCurve};

pub const SIM_COLUMNS: [&str; 6] = ["t", "y_in", "y_out", "p_chamber", "q_in", "q_out"];
pub const HEAD_LOSS_COLUMNS: [&str; 2] = ["velocity_m_per_s", "head_m"];
pub const FLOW_COLUMNS: [&str; 2] = ["frequency_hz", "flow_ml_per_min"];
pub const THERMAL_COLUMNS: [&str; 2] = ["power_w", "core_temp_c"];

/// The `#` line written at the top of every output file.
pub fn provenance_line(config_hash: &str) -> String {
    format!(
        "# {} {} config-sha256={config_hash}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    )
}

/// Writes a numeric table: comment line, header, then one row per entry.
pub fn write_table<W: Write>(
    mut out: W,
    comment: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    writeln!(out, "{comment}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Final-cycle time series, one row per step.
pub fn write_sim_result<W: Write>(out: W, comment: &str, r: &SimResult) -> Result<()> {
    let rows = (0..r.len()).map(|i| {
        vec![
            r.time[i],
            r.y_in[i],
            r.y_out[i],
            r.chamber_pressure[i],
            r.q_in[i],
            r.q_out[i],
        ]
    });
    write_table(out, comment, &SIM_COLUMNS, rows)
}

/// Reads a two-column numeric table whose header must match `columns`.
pub fn read_pairs<R: Read>(input: R, columns: [&str; 2], source: &str) -> Result<Vec<(f64, f64)>> {
    let parse_err = |message: String| Error::Parse {
        path: source.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != columns {
        return Err(parse_err(format!(
            "expected header `{}`, found `{}`",
            columns.join(","),
            got.join(",")
        )));
    }
    let mut pairs = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let line = record.position().map_or(i + 2, |p| p.line() as usize);
        let field = |k: usize| -> Result<f64> {
            let raw = record.get(k).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("line {line}: bad {} value `{raw}`", columns[k])))
        };
        pairs.push((field(0)?, field(1)?));
    }
    Ok(pairs)
}

fn read_file_pairs(path: &Path, columns: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let source = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Parse {
        path: source.clone(),
        message: e.to_string(),
    })?;
    read_pairs(file, columns, &source)
}

pub fn read_head_loss_samples(path: &Path) -> Result<Vec<HeadLossSample>> {
    read_file_pairs(path, HEAD_LOSS_COLUMNS)?
        .into_iter()
        .map(|(v, h)| HeadLossSample::new(v, h))
        .collect()
}

pub fn read_flow_curve(path: &Path) -> Result<FlowFrequencyCurve> {
    FlowFrequencyCurve::from_measurements(&read_file_pairs(path, FLOW_COLUMNS)?)
}

pub fn read_thermal_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_file_pairs(path, THERMAL_COLUMNS)
}

/// Flat `key = value` report of a calibration, SI units in the keys.
pub fn calibration_report(comment: &str, r: &CalibrationResult) -> String {
    let p = &r.params;
    format!(
        "{comment}\n\
         c_in_n_s_per_m = {}\n\
         c_out_n_s_per_m = {}\n\
         force_per_volt_n_per_v = {}\n\
         stroke_volume_per_volt_m3_per_v = {}\n\
         objective_ml_per_min_sq = {}\n\
         seed_objective_ml_per_min_sq = {}\n\
         iterations = {}\n\
         evaluations = {}\n\
         improved = {}\n",
        p.c_in,
        p.c_out,
        p.force_per_volt,
        p.stroke_volume_per_volt,
        r.objective,
        r.seed_objective,
        r.iterations,
        r.evaluations,
        r.improved
    )
}

/// Reads the parameter lines back out of [`calibration_report`] text.
pub fn parse_calibration_params(text: &str, source: &str) -> Result<CalibrationParams> {
    let mut values = [None; 4];
    let keys = [
        "c_in_n_s_per_m",
        "c_out_n_s_per_m",
        "force_per_volt_n_per_v",
        "stroke_volume_per_volt_m3_per_v",
    ];
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            continue;
        };
        if let Some(i) = keys.iter().position(|key| *key == k.trim()) {
            values[i] = v.trim().parse::<f64>().ok();
        }
    }
    let missing: Vec<String> = keys
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_none())
        .map(|(k, _)| format!("{source}: missing or unreadable `{k}`"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(missing));
    }
    Ok(CalibrationParams::from_array(values.map(|v| v.unwrap())))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip_with_comments() {
        let mut buf = Vec::new();
        write_table(
            &mut buf,
            "# test",
            &FLOW_COLUMNS,
            [vec![70.0, 1.5], vec![80.0, 2.25]],
        )
        .unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# test\nfrequency_hz,flow_ml_per_min\n"));
        let pairs = read_pairs(&buf[..], FLOW_COLUMNS, "mem").unwrap();
        assert_eq!(pairs, vec![(70.0, 1.5), (80.0, 2.25)]);
    }

    #[test]
    fn header_is_required() {
        let err = read_pairs("70,1.5\n80,2\n".as_bytes(), FLOW_COLUMNS, "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = read_pairs("power_w,core_temp_c\n30,x\n".as_bytes(), THERMAL_COLUMNS, "mem")
            .unwrap_err();
        assert!(err.to_string().contains("core_temp_c"), "{err}");
    }

    #[test]
    fn calibration_text_round_trips() {
        let r = CalibrationResult {
            params: CalibrationParams::from_array([1e-2, 2e-2, 3e-4, 4e-10]),
            objective: 0.5,
            seed_objective: 2.0,
            iterations: 3,
            evaluations: 9,
            improved: true,
        };
        let text = calibration_report("# x", &r);
        assert_eq!(parse_calibration_params(&text, "mem").unwrap(), r.params);
        assert!(parse_calibration_params("c_in_n_s_per_m = 1\n", "mem").is_err());
    }
}
