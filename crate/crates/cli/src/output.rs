//! Versioned CSV tables.
//!
//! ```text
//! # schema: mmv2v/coverage-sweep/1
//! # seed: 7
//! # scenario:
//! # [road]
//! # lane_width = 3.2
//! parameter,value,density_row,expected_receivers
//! beamwidth,10,low,31.9
//! ```
//!
//! Metadata lines start with `# `. The resolved scenario follows the
//! `# scenario:` marker, one TOML line per comment line.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
const SCHEMA_PREFIX: &str = "mmv2v";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    BlockageCurve,
    CoverageSweep,
    SinrCdf,
    CsSweep,
    Simulate,
}

impl Schema {
    pub fn name(self) -> &'static str {
        match self {
            Schema::BlockageCurve => "blockage-curve",
            Schema::CoverageSweep => "coverage-sweep",
            Schema::SinrCdf => "sinr-cdf",
            Schema::CsSweep => "cs-sweep",
            Schema::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{SCHEMA_PREFIX}/{}/{SCHEMA_VERSION}", self.name())
    }
}

impl FromStr for Schema {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || CliError::config(format!("unknown CSV schema `{s}`"));
        let mut parts = s.trim().split('/');
        let (Some(prefix), Some(name), Some(version), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        if prefix != SCHEMA_PREFIX {
            return Err(bad());
        }
        if version != SCHEMA_VERSION.to_string() {
            return Err(CliError::config(format!(
                "CSV schema version {version} is not supported (expected {SCHEMA_VERSION})"
            )));
        }
        [
            Schema::BlockageCurve,
            Schema::CoverageSweep,
            Schema::SinrCdf,
            Schema::CsSweep,
            Schema::Simulate,
        ]
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(bad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub meta: Vec<(String, String)>,
    /// Resolved scenario as TOML.
    pub scenario: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: Schema, scenario: String, header: &[&str]) -> Self {
        Table {
            schema,
            meta: Vec::new(),
            scenario,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::config(format!(
                "{} table has no `{name}` column",
                self.schema.name()
            ))
        })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# schema: {}", self.schema)?;
        for (k, v) in &self.meta {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "# scenario:")?;
        for line in self.scenario.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("tables are UTF-8")
    }

    pub fn parse(text: &str) -> CliResult<Table> {
        let mut lines = text.lines();
        let first = lines
            .next()
            .ok_or_else(|| CliError::config("empty CSV: missing schema line"))?;
        let schema: Schema = first
            .strip_prefix("# schema:")
            .ok_or_else(|| CliError::config("CSV does not start with a `# schema:` line"))?
            .parse()?;
        let mut meta = Vec::new();
        let mut scenario = String::new();
        let mut in_scenario = false;
        let mut header = None;
        let mut rows = Vec::new();
        for line in lines {
            if let Some(c) = line.strip_prefix('#') {
                let c = c.strip_prefix(' ').unwrap_or(c);
                if in_scenario {
                    scenario.push_str(c);
                    scenario.push('\n');
                } else if c == "scenario:" {
                    in_scenario = true;
                } else if let Some((k, v)) = c.split_once(':') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(str::to_string).collect();
            match &header {
                None => header = Some(cells),
                Some(h) if h.len() == cells.len() => rows.push(cells),
                Some(h) => {
                    return Err(CliError::config(format!(
                        "row has {} cells, header has {}",
                        cells.len(),
                        h.len()
                    )))
                }
            }
        }
        let header = header.ok_or_else(|| CliError::config("CSV has no header row"))?;
        if rows.is_empty() {
            return Err(CliError::config("CSV has no data rows"));
        }
        Ok(Table {
            schema,
            meta,
            scenario,
            header,
            rows,
        })
    }
}

/// Shortest round-trip representation, so output is byte-stable.
pub fn num(v: f64) -> String {
    format!("{v}")
}
