use std::path::Path;

use opa_squeeze::config::{mw_to_w, parse_synth_config, SynthMode};
use opa_squeeze::formats::{write_dataset_csv, write_spectrum_csv, write_trace_csv, SpectrumCurve, TraceTable};
use opa_squeeze::synth::{synth_pump_sweep, synth_spectrum, synth_zero_span, SpectrumPoint, TraceSpec, PRNG_ID};
use opa_squeeze::units::to_db;
use opa_squeeze::{Error, OperatingPoint};
use serde::Serialize;

use super::{check_pump_mw, squeezer_params, tool, ToolStamp};
use crate::error::{CliError, CliResult};
use crate::io::{emit, to_json, RunContext};
use crate::Format;

/// Physics failures keep their class; anything else here is a bad spec.
fn classify(err: Error) -> CliError {
    match err {
        Error::AboveThreshold { .. } | Error::NonPhysicalTrace(_) => err.into(),
        other => CliError::invalid("synth spec", other),
    }
}

#[derive(Debug, Serialize)]
struct JsonOutput<T: Serialize> {
    tool: ToolStamp,
    generator: &'static str,
    seed: u64,
    config_sha256: String,
    data: T,
}

#[derive(Debug, Serialize)]
struct JsonCurve<'a> {
    #[serde(rename = "pump_mW")]
    pump_mw: f64,
    points: &'a [SpectrumPoint],
}

fn render<T: Serialize>(data: &T, seed: u64, digest: &str) -> String {
    to_json(&JsonOutput {
        tool: tool(),
        generator: PRNG_ID,
        seed,
        config_sha256: digest.to_string(),
        data,
    })
}

pub fn run(ctx: &RunContext, seed: Option<u64>, format: Option<Format>, out: Option<&Path>) -> CliResult<()> {
    let mut config = parse_synth_config(&ctx.config_text)?;
    if let Some(seed) = seed {
        config.trace.seed = seed;
    }
    let params = squeezer_params(&config.squeezer)?;
    config.trace.validate().map_err(|e| CliError::invalid("trace", e))?;
    let spec = config.trace;
    let digest = ctx.digest();
    let comments = vec![
        format!("{} {}", crate::TOOL_NAME, crate::TOOL_VERSION),
        format!("generator: {PRNG_ID}"),
        format!("seed: {}", spec.seed),
        format!("config_sha256: {digest}"),
    ];
    let format = format.unwrap_or(Format::Csv);

    let text = match &config.mode {
        SynthMode::Sweep { pump_mw, .. } => {
            for &p in pump_mw {
                check_pump_mw("pump_mW", p)?;
            }
            let sweep = config.sweep_spec().expect("sweep mode");
            let dataset = synth_pump_sweep(&params, &sweep).map_err(classify)?;
            match format {
                Format::Csv => write_dataset_csv(&dataset.points, &comments),
                Format::Json => render(&dataset, spec.seed, &digest),
            }
        }
        SynthMode::ZeroSpan {
            pump_mw,
            frequency_hz,
            quadrature,
        } => {
            check_pump_mw("pump_mW", *pump_mw)?;
            let op = OperatingPoint::new(mw_to_w(*pump_mw), *frequency_hz);
            let trace = synth_zero_span(&params, &op, *quadrature, &spec).map_err(classify)?;
            match format {
                Format::Csv => {
                    let mut comments = comments;
                    comments.push(format!("power_dB: raw {} trace in vacuum units, dark noise included", quadrature.tag()));
                    write_trace_csv(&TraceTable {
                        abscissa_name: "index".into(),
                        abscissa: (0..trace.samples.len()).map(|i| i as f64).collect(),
                        power_db: trace.samples.iter().map(|&v| to_db(v)).collect::<Result<_, _>>()?,
                        comments,
                    })
                }
                Format::Json => render(&trace, spec.seed, &digest),
            }
        }
        SynthMode::Spectrum { pump_mw, frequency } => {
            if pump_mw.is_empty() {
                return Err(CliError::Validation("pump_mW: list is empty".into()));
            }
            frequency.validate().map_err(|e| CliError::invalid("frequency_Hz", e))?;
            let mut curves = Vec::new();
            for (i, &p) in pump_mw.iter().enumerate() {
                check_pump_mw("pump_mW", p)?;
                // Curve i draws from seed + i so curves are independent.
                let curve_spec = TraceSpec {
                    seed: spec.seed.wrapping_add(i as u64),
                    ..spec
                };
                let pump = mw_to_w(p);
                curves.push(SpectrumCurve {
                    pump_power: pump,
                    phase_jitter_deg: config.squeezer.phase_jitter_deg,
                    points: synth_spectrum(&params, pump, frequency, Some(&curve_spec)).map_err(classify)?,
                });
            }
            match format {
                Format::Csv => write_spectrum_csv(&curves, &comments),
                Format::Json => {
                    let data: Vec<_> = pump_mw
                        .iter()
                        .zip(&curves)
                        .map(|(&pump_mw, c)| JsonCurve {
                            pump_mw,
                            points: &c.points,
                        })
                        .collect();
                    render(&data, spec.seed, &digest)
                }
            }
        }
    };
    emit(out, &text)
}
