//! Deterministic table output (CSV with a commented resolved-config header,
//! or JSON) and the CSV data reader for the fit command.
//!
//! Identical inputs must produce byte-identical files: floats are printed in
//! fixed scientific notation at the configured precision and column order is
//! fixed.

use std::fs;
use std::path::Path;

use serde::Serialize;

use modenet::fit::{NoiseObservation, Observation};

use crate::CliError;

/// Fixed-precision scientific float, deterministic across runs.
pub fn fmt(value: f64, precision: usize) -> String {
    if value.is_nan() {
        return "NaN".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{value:.precision$e}")
}

/// Power ratio in decibels, `10 log10(x)`.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A table with fixed column order plus the resolved config echoed as
/// comments (CSV) or embedded (JSON).
pub struct Table {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key = value` comment lines under the header.
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Table {
            command: command.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    fn to_csv(&self, resolved_config: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("# modenet {}\n", self.command));
        for (k, v) in &self.notes {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str("# resolved configuration:\n");
        for line in resolved_config.lines() {
            out.push_str("#   ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self, config_json: serde_json::Value) -> Result<String, CliError> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), cell_to_json(v)))
                    .collect()
            })
            .collect();
        let notes: serde_json::Map<String, serde_json::Value> = self
            .notes
            .iter()
            .map(|(k, v)| (k.clone(), cell_to_json(v)))
            .collect();
        let doc = serde_json::json!({
            "command": self.command,
            "notes": notes,
            "config": config_json,
            "rows": rows,
        });
        serde_json::to_string_pretty(&doc).map_err(|e| CliError::config(format!("json: {e}")))
    }

    /// Render and write to `path` in the requested format.
    pub fn write(
        &self,
        path: &Path,
        format: &str,
        config: &impl Serialize,
    ) -> Result<(), CliError> {
        let text = match format {
            "json" => {
                let config_json = serde_json::to_value(config)
                    .map_err(|e| CliError::config(format!("json: {e}")))?;
                self.to_json(config_json)?
            }
            _ => {
                let resolved = toml::to_string(config)
                    .map_err(|e| CliError::config(format!("config echo: {e}")))?;
                self.to_csv(&resolved)
            }
        };
        fs::write(path, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
    }
}

fn cell_to_json(v: &str) -> serde_json::Value {
    if let Ok(x) = v.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(x) {
            return serde_json::Value::Number(n);
        }
    }
    serde_json::Value::String(v.to_string())
}

/// Split one CSV line; fields in this format never contain quoted commas.
fn split_line(line: &str) -> Vec<String> {
    line.split(',').map(|s| s.trim().to_string()).collect()
}

struct DataFile {
    header: Vec<String>,
    records: Vec<Vec<String>>,
}

fn read_data_file(path: &Path) -> Result<DataFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .map(split_line)
        .ok_or_else(|| CliError::config(format!("{}: empty data file", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let rec = split_line(line);
        if rec.len() != header.len() {
            return Err(CliError::config(format!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                i + 2,
                rec.len(),
                header.len()
            )));
        }
        records.push(rec);
    }
    Ok(DataFile { header, records })
}

fn column(data: &DataFile, name: &str, path: &Path) -> Result<usize, CliError> {
    data.header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::config(format!("{}: missing column `{name}`", path.display())))
}

fn parse_f64(field: &str, what: &str, path: &Path) -> Result<f64, CliError> {
    field.parse::<f64>().map_err(|_| {
        CliError::config(format!(
            "{}: cannot parse `{field}` as {what}",
            path.display()
        ))
    })
}

/// Read scattering observations: columns `offset_hz, phase_deg, port_out,
/// port_in, value` plus optional `sigma`; unknown columns are ignored, and
/// rows whose value is NaN are skipped.
pub fn read_observations(path: &Path) -> Result<Vec<Observation>, CliError> {
    let data = read_data_file(path)?;
    let c_off = column(&data, "offset_hz", path)?;
    let c_ph = column(&data, "phase_deg", path)?;
    let c_out = column(&data, "port_out", path)?;
    let c_in = column(&data, "port_in", path)?;
    let c_val = column(&data, "value", path)?;
    let c_sig = data.header.iter().position(|h| h == "sigma");

    let mut observations = Vec::with_capacity(data.records.len());
    for rec in &data.records {
        let value = parse_f64(&rec[c_val], "value", path)?;
        if value.is_nan() {
            continue;
        }
        observations.push(Observation {
            offset_hz: parse_f64(&rec[c_off], "offset_hz", path)?,
            phase_rad: parse_f64(&rec[c_ph], "phase_deg", path)?.to_radians(),
            port_out: rec[c_out].clone(),
            port_in: rec[c_in].clone(),
            value,
            sigma: c_sig
                .map(|c| parse_f64(&rec[c], "sigma", path))
                .transpose()?,
        });
    }
    if observations.is_empty() {
        return Err(CliError::config(format!(
            "{}: no usable observations",
            path.display()
        )));
    }
    Ok(observations)
}

/// Read noise observations: columns `offset_hz, phase_deg, port, value`
/// plus optional `sigma`.
pub fn read_noise_observations(path: &Path) -> Result<Vec<NoiseObservation>, CliError> {
    let data = read_data_file(path)?;
    let c_off = column(&data, "offset_hz", path)?;
    let c_ph = column(&data, "phase_deg", path)?;
    let c_port = column(&data, "port", path)?;
    let c_val = column(&data, "value", path)?;
    let c_sig = data.header.iter().position(|h| h == "sigma");

    let mut observations = Vec::with_capacity(data.records.len());
    for rec in &data.records {
        let value = parse_f64(&rec[c_val], "value", path)?;
        if value.is_nan() {
            continue;
        }
        observations.push(NoiseObservation {
            offset_hz: parse_f64(&rec[c_off], "offset_hz", path)?,
            phase_rad: parse_f64(&rec[c_ph], "phase_deg", path)?.to_radians(),
            port: rec[c_port].clone(),
            value,
            sigma: c_sig
                .map(|c| parse_f64(&rec[c], "sigma", path))
                .transpose()?,
        });
    }
    if observations.is_empty() {
        return Err(CliError::config(format!(
            "{}: no usable observations",
            path.display()
        )));
    }
    Ok(observations)
}
