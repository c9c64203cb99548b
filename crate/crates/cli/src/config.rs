//! Scenario loading and sweep-grid parsing.

use std::path::Path;

use mmv2v_core::{DensityRow, Scenario};

use crate::error::{CliError, CliResult};

/// Reads the scenario at `path` (defaults when `None`) and applies
/// `section.key=value` overrides.
pub fn load_scenario(path: Option<&Path>, overrides: &[String]) -> CliResult<Scenario> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?,
        None => String::new(),
    };
    Ok(Scenario::from_toml_str_with_overrides(&text, overrides)?)
}

/// Parses `start:stop:step` (inclusive of `stop`) or a comma-separated list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let spec = spec.trim();
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(CliError::config(format!(
                "range `{spec}` must be start:stop:step"
            )));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if !(step > 0.0) {
            return Err(CliError::config(format!(
                "range `{spec}`: step must be > 0"
            )));
        }
        if stop < start {
            return Err(CliError::config(format!(
                "range `{spec}`: stop is below start"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',')
            .map(number)
            .collect::<CliResult<Vec<f64>>>()?
    };
    if values.is_empty() {
        return Err(CliError::config("empty value list"));
    }
    Ok(values)
}

fn number(s: &str) -> CliResult<f64> {
    let s = s.trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::config(format!("`{s}` is not a number")))
}

pub fn parse_rows(spec: &str) -> CliResult<Vec<DensityRow>> {
    let rows = spec
        .split(',')
        .map(|s| s.parse::<DensityRow>().map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(CliError::config("empty density row list"));
    }
    Ok(rows)
}
