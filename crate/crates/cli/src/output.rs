use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::{Axis, Format, OutputArgs, RunConfig};
use crate::suites::{Check, Outcome};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize)]
pub struct CurrentValue {
    pub variant: String,
    pub site: [usize; 2],
    pub cell: [i64; 2],
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport<'a> {
    pub schema: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub passed: bool,
    pub worst: Option<&'a Check>,
    pub checks: &'a [Check],
    pub values: &'a BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    pub currents: &'a [CurrentValue],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    pub notes: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub passed: bool,
    pub worst_check: String,
    pub worst_residual: f64,
    pub values: BTreeMap<String, f64>,
}

impl SweepRow {
    pub fn new(value: f64, o: &Outcome) -> Self {
        let w = o.worst();
        SweepRow {
            value,
            passed: o.passed(),
            worst_check: w.map(|c| c.name.clone()).unwrap_or_default(),
            worst_residual: w.map(|c| c.residual).unwrap_or(0.0),
            values: o.values.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepReport<'a> {
    pub schema: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub axis: Axis,
    pub passed: bool,
    pub rows: &'a [SweepRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_verify(out: &OutputArgs, report: &VerifyReport) -> io::Result<()> {
    let Some(format) = out.format else { return Ok(()) };
    let mut w = sink(out.output.as_deref())?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut c = csv::Writer::from_writer(w);
            for check in report.checks {
                c.serialize(check).map_err(csv_err)?;
            }
            c.flush()?;
        }
    }
    Ok(())
}

pub fn write_sweep(out: &OutputArgs, report: &SweepReport) -> io::Result<()> {
    let Some(format) = out.format else { return Ok(()) };
    let mut w = sink(out.output.as_deref())?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
        }
        Format::Csv => {
            let keys: Vec<&String> = {
                let mut k: Vec<&String> = report.rows.iter().flat_map(|r| r.values.keys()).collect();
                k.sort();
                k.dedup();
                k
            };
            let mut c = csv::Writer::from_writer(w);
            let axis = serde_json::to_value(report.axis)?.as_str().unwrap_or("value").to_string();
            let mut header = vec![axis, "passed".into(), "worst_check".into(), "worst_residual".into()];
            header.extend(keys.iter().map(|k| k.to_string()));
            c.write_record(&header).map_err(csv_err)?;
            for r in report.rows {
                let mut rec = vec![r.value.to_string(), r.passed.to_string(), r.worst_check.clone(), r.worst_residual.to_string()];
                rec.extend(keys.iter().map(|k| r.values.get(*k).map(|v| v.to_string()).unwrap_or_default()));
                c.write_record(&rec).map_err(csv_err)?;
            }
            c.flush()?;
        }
    }
    Ok(())
}

/// Human summary; goes to stderr when the machine report occupies stdout.
pub fn summary_sink(out: &OutputArgs) -> Box<dyn Write> {
    if out.format.is_some() && out.output.is_none() {
        Box::new(io::stderr())
    } else {
        Box::new(io::stdout())
    }
}
