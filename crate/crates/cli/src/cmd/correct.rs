use std::path::Path;

use opa_squeeze::config::{parse_correct_config, LevelSource};
use opa_squeeze::formats::{read_trace_csv, write_trace_csv, TraceTable};
use opa_squeeze::quadrature::normalize_and_correct;
use opa_squeeze::units::{from_db, to_db};
use serde::Serialize;

use super::{tool, ToolStamp};
use crate::error::{CliError, CliResult};
use crate::io::{emit, to_json, RunContext};
use crate::Format;

/// A reference level resolved to linear powers: one value, or one per sample.
enum Levels {
    Constant(f64),
    PerSample(Vec<f64>),
}

impl Levels {
    fn at(&self, i: usize) -> f64 {
        match self {
            Levels::Constant(v) => *v,
            Levels::PerSample(v) => v[i],
        }
    }
}

fn load(ctx: &mut RunContext, name: &str, source: &LevelSource, n: usize) -> CliResult<Levels> {
    match source {
        LevelSource::Constant { level_db } => {
            if !level_db.is_finite() {
                return Err(CliError::Validation(format!("{name}.level_dB: {level_db} is not finite")));
            }
            Ok(Levels::Constant(from_db(*level_db)))
        }
        LevelSource::File { path } => {
            let text = ctx.read_input(path)?;
            let table = read_trace_csv(&text)
                .map_err(|e| CliError::Validation(format!("{name} trace {}: {e}", path.display())))?;
            if table.power_db.len() != n {
                return Err(CliError::Validation(format!(
                    "{name} trace {} has {} samples, measured trace has {n}",
                    path.display(),
                    table.power_db.len()
                )));
            }
            Ok(Levels::PerSample(table.power_db.iter().copied().map(from_db).collect()))
        }
    }
}

#[derive(Debug, Serialize)]
struct JsonTrace<'a> {
    tool: ToolStamp,
    config_sha256: String,
    abscissa_name: &'a str,
    abscissa: &'a [f64],
    #[serde(rename = "value_dB")]
    value_db: &'a [f64],
}

pub fn run(ctx: &mut RunContext, format: Option<Format>, out: Option<&Path>) -> CliResult<()> {
    let config = parse_correct_config(&ctx.config_text)?;
    let text = ctx.read_input(&config.measured)?;
    let measured = read_trace_csv(&text)
        .map_err(|e| CliError::Validation(format!("measured trace {}: {e}", config.measured.display())))?;
    let n = measured.power_db.len();
    let vacuum = load(ctx, "vacuum", &config.vacuum, n)?;
    let dark = match &config.dark {
        Some(source) => load(ctx, "dark", source, n)?,
        None => Levels::Constant(0.0),
    };

    let mut corrected = Vec::with_capacity(n);
    for (i, &m) in measured.power_db.iter().enumerate() {
        let value = normalize_and_correct(from_db(m), vacuum.at(i), dark.at(i))
            .map_err(|e| CliError::Domain(format!("sample {}: {e}", i + 1)))?;
        corrected.push(to_db(value)?);
    }

    let digest = ctx.digest();
    let text = match format.unwrap_or(Format::Csv) {
        Format::Csv => write_trace_csv(&TraceTable {
            abscissa_name: measured.abscissa_name.clone(),
            abscissa: measured.abscissa.clone(),
            power_db: corrected,
            comments: vec![
                format!("{} {}", crate::TOOL_NAME, crate::TOOL_VERSION),
                format!("config_sha256: {digest}"),
                "power_dB: dark-noise corrected, relative to vacuum".to_string(),
            ],
        }),
        Format::Json => to_json(&JsonTrace {
            tool: tool(),
            config_sha256: digest,
            abscissa_name: &measured.abscissa_name,
            abscissa: &measured.abscissa,
            value_db: &corrected,
        }),
    };
    emit(out, &text)
}
