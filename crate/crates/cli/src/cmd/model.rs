use std::path::Path;

use opa_squeeze::config::{mw_to_w, parse_model_config};
use opa_squeeze::quadrature::{jittered_variance_pair, uncertainty_product};
use opa_squeeze::units::to_db;
use opa_squeeze::OperatingPoint;
use serde::Serialize;

use super::{check_pump_mw, format_db, squeezer_params};
use crate::error::{CliError, CliResult};
use crate::io::{emit, to_json, RunContext};
use crate::Format;

#[derive(Debug, Serialize)]
struct Level {
    #[serde(rename = "dB")]
    db: f64,
    linear: f64,
}

#[derive(Debug, Serialize)]
struct ModelOutput {
    #[serde(rename = "pump_mW")]
    pump_mw: f64,
    #[serde(rename = "frequency_Hz")]
    frequency_hz: f64,
    squeezed: Level,
    antisqueezed: Level,
    uncertainty_product: f64,
}

pub fn run(ctx: &RunContext, format: Option<Format>, out: Option<&Path>) -> CliResult<()> {
    let config = parse_model_config(&ctx.config_text)?;
    let params = squeezer_params(&config.squeezer)?;
    check_pump_mw("pump_mW", config.pump_mw)?;
    if !(config.frequency_hz >= 0.0 && config.frequency_hz.is_finite()) {
        return Err(CliError::Validation(format!(
            "frequency_Hz: {} must be finite and >= 0",
            config.frequency_hz
        )));
    }
    let op = OperatingPoint::new(mw_to_w(config.pump_mw), config.frequency_hz);
    let pair = jittered_variance_pair(&params, &op)?;
    let result = ModelOutput {
        pump_mw: config.pump_mw,
        frequency_hz: config.frequency_hz,
        squeezed: Level {
            db: to_db(pair.v1)?,
            linear: pair.v1,
        },
        antisqueezed: Level {
            db: to_db(pair.v2)?,
            linear: pair.v2,
        },
        uncertainty_product: uncertainty_product(pair),
    };
    let text = match format {
        None => format!(
            "{} dB / {} dB\nlinear {} / {}\n",
            format_db(result.squeezed.db),
            format_db(result.antisqueezed.db),
            result.squeezed.linear,
            result.antisqueezed.linear
        ),
        Some(Format::Json) => to_json(&result),
        Some(Format::Csv) => format!(
            "pump_mW,frequency_Hz,squeezed_dB,antisqueezed_dB,squeezed_linear,antisqueezed_linear\n{},{},{},{},{},{}\n",
            result.pump_mw,
            result.frequency_hz,
            result.squeezed.db,
            result.antisqueezed.db,
            result.squeezed.linear,
            result.antisqueezed.linear
        ),
    };
    emit(out, &text)
}
