use std::path::Path;

use opa_squeeze::config::{mw_to_w, parse_spectrum_config};
use opa_squeeze::formats::{write_spectrum_csv, SpectrumCurve};
use opa_squeeze::synth::synth_spectrum;
use opa_squeeze::SqueezerParams;
use serde::Serialize;

use super::{check_pump_mw, squeezer_params, tool, ToolStamp};
use crate::error::{CliError, CliResult};
use crate::io::{emit, to_json, RunContext};
use crate::Format;

#[derive(Debug, Serialize)]
struct JsonCurve {
    #[serde(rename = "pump_mW")]
    pump_mw: f64,
    theta_deg: f64,
    #[serde(rename = "frequency_Hz")]
    frequency_hz: Vec<f64>,
    #[serde(rename = "squeezed_dB")]
    squeezed_db: Vec<f64>,
    #[serde(rename = "antisqueezed_dB")]
    antisqueezed_db: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct JsonSpectrum {
    tool: ToolStamp,
    config_sha256: String,
    curves: Vec<JsonCurve>,
}

pub fn run(ctx: &RunContext, format: Option<Format>, out: Option<&Path>) -> CliResult<()> {
    let config = parse_spectrum_config(&ctx.config_text)?;
    let params = squeezer_params(&config.squeezer)?;
    config
        .frequency
        .validate()
        .map_err(|e| CliError::invalid("frequency_Hz", e))?;
    if config.pump_mw.is_empty() {
        return Err(CliError::Validation("pump_mW: list is empty".into()));
    }
    for &p in &config.pump_mw {
        check_pump_mw("pump_mW", p)?;
    }

    let mut variants = vec![(params, config.squeezer.phase_jitter_deg)];
    if config.zero_phase_noise_curves && params.phase_jitter != 0.0 {
        let clean = SqueezerParams {
            phase_jitter: 0.0,
            ..params
        };
        variants.push((clean, 0.0));
    }
    let mut curves = Vec::new();
    for (variant, theta_deg) in &variants {
        for &pump_mw in &config.pump_mw {
            let pump = mw_to_w(pump_mw);
            curves.push(SpectrumCurve {
                pump_power: pump,
                phase_jitter_deg: *theta_deg,
                points: synth_spectrum(variant, pump, &config.frequency, None)?,
            });
        }
    }

    let text = match format.unwrap_or(Format::Csv) {
        Format::Csv => write_spectrum_csv(
            &curves,
            &[
                format!("{} {}", crate::TOOL_NAME, crate::TOOL_VERSION),
                format!("config_sha256: {}", ctx.digest()),
            ],
        ),
        Format::Json => to_json(&JsonSpectrum {
            tool: tool(),
            config_sha256: ctx.digest(),
            curves: curves
                .iter()
                .zip(config.pump_mw.iter().cycle())
                .map(|(c, &pump_mw)| JsonCurve {
                    pump_mw,
                    theta_deg: c.phase_jitter_deg,
                    frequency_hz: c.points.iter().map(|p| p.frequency).collect(),
                    squeezed_db: c.points.iter().map(|p| p.squeezed_db).collect(),
                    antisqueezed_db: c.points.iter().map(|p| p.antisqueezed_db).collect(),
                })
                .collect(),
        }),
    };
    emit(out, &text)
}
