pub mod cavity;
pub mod correct;
pub mod fit;
pub mod model;
pub mod spectrum;
pub mod synth;

use opa_squeeze::config::SqueezerConfig;
use opa_squeeze::SqueezerParams;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Signed dB with two decimals; values that round to zero print unsigned.
pub fn format_db(value: f64) -> String {
    let text = format!("{value:.2}");
    if text == "0.00" || text == "-0.00" {
        "0.00".to_string()
    } else if value > 0.0 {
        format!("+{text}")
    } else {
        text
    }
}

pub fn squeezer_params(config: &SqueezerConfig) -> CliResult<SqueezerParams> {
    config.to_params().map_err(|e| CliError::invalid("squeezer", e))
}

pub fn check_pump_mw(field: &str, pump_mw: f64) -> CliResult<()> {
    if pump_mw >= 0.0 && pump_mw.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{field}: {pump_mw} must be finite and >= 0")))
    }
}

#[derive(Debug, Serialize)]
pub struct ToolStamp {
    pub name: &'static str,
    pub version: &'static str,
}

pub fn tool() -> ToolStamp {
    ToolStamp {
        name: crate::TOOL_NAME,
        version: crate::TOOL_VERSION,
    }
}
