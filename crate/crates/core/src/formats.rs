//! CSV file formats.
//!
//! Dataset files (header mandatory, any column order, `#` comments):
//!
//! ```text
//! # free-form provenance lines
//! pump_mW,sigma_pump_mW,frequency_Hz,quadrature,value_dB,sigma_dB
//! 180,5.4,5000000,sqz,-12.41,0.3
//! ```
//!
//! Trace files hold one abscissa column (`index`, `frequency_Hz` or
//! `time_s`) and a `power_dB` column.

use std::fmt::Write as _;

use thiserror::Error;

use crate::estimation::{MeasurementPoint, Quadrature};
use crate::synth::SpectrumPoint;
use crate::units::{format_scaled, parse_scaled};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct FormatError {
    pub line: Option<u64>,
    pub message: String,
}

impl FormatError {
    pub fn new(line: Option<u64>, message: impl Into<String>) -> Self {
        FormatError {
            line,
            message: message.into(),
        }
    }
}

pub const DATASET_COLUMNS: [&str; 6] = [
    "pump_mW",
    "sigma_pump_mW",
    "frequency_Hz",
    "quadrature",
    "value_dB",
    "sigma_dB",
];

/// Comment lines (without the leading `#` and one optional space).
fn comments(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .map(|c| c.strip_prefix(' ').unwrap_or(c).trim_end().to_string())
        .collect()
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn csv_error(err: csv::Error) -> FormatError {
    let line = err.position().map(|p| p.line());
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => err.to_string(),
    };
    FormatError::new(line, message)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, FormatError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| FormatError::new(Some(1), format!("missing required column `{name}`")))
}

fn number(record: &csv::StringRecord, idx: usize, name: &str, shift: i32, line: u64) -> Result<f64, FormatError> {
    let raw = record.get(idx).unwrap_or("");
    parse_scaled(raw, shift)
        .filter(|v| v.is_finite())
        .ok_or_else(|| FormatError::new(Some(line), format!("column `{name}`: `{raw}` is not a finite number")))
}

/// Parsed dataset file: measurement points (SI units) and comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub points: Vec<MeasurementPoint>,
    pub comments: Vec<String>,
}

pub fn read_dataset_csv(text: &str) -> Result<DatasetFile, FormatError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let idx: Vec<usize> = DATASET_COLUMNS
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_, _>>()?;
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let tag = record.get(idx[3]).unwrap_or("");
        let quadrature = Quadrature::from_tag(tag).ok_or_else(|| {
            FormatError::new(Some(line), format!("column `quadrature`: `{tag}` is not `sqz` or `antisqz`"))
        })?;
        let point = MeasurementPoint {
            pump_power: number(&record, idx[0], DATASET_COLUMNS[0], -3, line)?,
            sigma_pump: number(&record, idx[1], DATASET_COLUMNS[1], -3, line)?,
            frequency: number(&record, idx[2], DATASET_COLUMNS[2], 0, line)?,
            quadrature,
            value_db: number(&record, idx[4], DATASET_COLUMNS[4], 0, line)?,
            sigma_db: number(&record, idx[5], DATASET_COLUMNS[5], 0, line)?,
        };
        point
            .validate()
            .map_err(|e| FormatError::new(Some(line), e.to_string()))?;
        points.push(point);
    }
    Ok(DatasetFile {
        points,
        comments: comments(text),
    })
}

fn push_comments(out: &mut String, comments: &[String]) {
    for c in comments {
        for line in c.split('\n') {
            let line = line.trim_end();
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {line}");
            }
        }
    }
}

/// Serialises points so that [`read_dataset_csv`] returns them bit for bit.
pub fn write_dataset_csv(points: &[MeasurementPoint], comments: &[String]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str(&DATASET_COLUMNS.join(","));
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_scaled(p.pump_power, 3),
            format_scaled(p.sigma_pump, 3),
            p.frequency,
            p.quadrature.tag(),
            p.value_db,
            p.sigma_db
        );
    }
    out
}

pub const TRACE_ABSCISSAE: [&str; 3] = ["index", "frequency_Hz", "time_s"];

/// A noise-power trace as stored on disk: powers in dB against an arbitrary
/// but common reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub abscissa_name: String,
    pub abscissa: Vec<f64>,
    pub power_db: Vec<f64>,
    pub comments: Vec<String>,
}

pub fn read_trace_csv(text: &str) -> Result<TraceTable, FormatError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let power = column_index(&headers, "power_dB")?;
    let x = headers
        .iter()
        .position(|h| TRACE_ABSCISSAE.contains(&h))
        .ok_or_else(|| FormatError::new(Some(1), "missing abscissa column (`index`, `frequency_Hz` or `time_s`)"))?;
    if headers.len() != 2 {
        return Err(FormatError::new(Some(1), format!("expected 2 columns, found {}", headers.len())));
    }
    let name = headers[x].to_string();
    let mut abscissa = Vec::new();
    let mut power_db = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        abscissa.push(number(&record, x, &name, 0, line)?);
        power_db.push(number(&record, power, "power_dB", 0, line)?);
    }
    if power_db.is_empty() {
        return Err(FormatError::new(None, "trace has no samples"));
    }
    Ok(TraceTable {
        abscissa_name: name,
        abscissa,
        power_db,
        comments: comments(text),
    })
}

pub fn write_trace_csv(table: &TraceTable) -> String {
    let mut out = String::new();
    push_comments(&mut out, &table.comments);
    let _ = writeln!(out, "{},power_dB", table.abscissa_name);
    for (x, y) in table.abscissa.iter().zip(&table.power_db) {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

/// One model curve for the spectrum file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    /// Watts.
    pub pump_power: f64,
    /// Degrees.
    pub phase_jitter_deg: f64,
    pub points: Vec<SpectrumPoint>,
}

pub const SPECTRUM_COLUMNS: [&str; 5] = ["pump_mW", "theta_deg", "frequency_Hz", "squeezed_dB", "antisqueezed_dB"];

/// Long-format curve file: one row per (curve, frequency).
pub fn write_spectrum_csv(curves: &[SpectrumCurve], comments: &[String]) -> String {
    let mut out = String::new();
    push_comments(&mut out, comments);
    out.push_str(&SPECTRUM_COLUMNS.join(","));
    out.push('\n');
    for c in curves {
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_scaled(c.pump_power, 3),
                c.phase_jitter_deg,
                p.frequency,
                p.squeezed_db,
                p.antisqueezed_db
            );
        }
    }
    out
}
