use std::fmt::Write as _;
use std::path::Path;

use opa_squeeze::cavity::{eigenmode, finesse, free_spectral_range};
use opa_squeeze::config::{parse_cavity_config, CavityRunConfig};
use opa_squeeze::quadrature::decay_rate;
use opa_squeeze::Error;
use serde::Serialize;

use super::{tool, ToolStamp};
use crate::error::{CliError, CliResult};
use crate::io::{emit, to_json, RunContext};
use crate::Format;

#[derive(Debug, Serialize)]
struct Mode {
    waist_radius_um: f64,
    waist_position_mm: f64,
    rayleigh_range_mm: f64,
    coupler_spot_radius_um: f64,
    end_spot_radius_um: f64,
}

#[derive(Debug, Serialize)]
struct CavityReport {
    schema_version: u32,
    tool: ToolStamp,
    config_sha256: String,
    inputs: CavityRunConfig,
    stable: bool,
    stability_parameter: f64,
    /// Present when the cavity is stable.
    mode: Option<Mode>,
    diagnostic: Option<String>,
    physical_length_mm: f64,
    optical_round_trip_length_mm: f64,
    #[serde(rename = "free_spectral_range_MHz")]
    fsr_mhz: f64,
    finesse: Option<f64>,
    #[serde(rename = "fwhm_MHz")]
    fwhm_mhz: Option<f64>,
    decay_rate_per_s: Option<f64>,
}

fn csv_rows(report: &CavityReport) -> String {
    let mut out = format!(
        "# {} {}\n# config_sha256: {}\nquantity,value\n",
        crate::TOOL_NAME,
        crate::TOOL_VERSION,
        report.config_sha256
    );
    let mut row = |name: &str, value: Option<f64>| {
        let _ = match value {
            Some(v) => writeln!(out, "{name},{v}"),
            None => writeln!(out, "{name},"),
        };
    };
    row("stable", Some(if report.stable { 1.0 } else { 0.0 }));
    row("stability_parameter", Some(report.stability_parameter));
    let mode = report.mode.as_ref();
    row("waist_radius_um", mode.map(|m| m.waist_radius_um));
    row("waist_position_mm", mode.map(|m| m.waist_position_mm));
    row("rayleigh_range_mm", mode.map(|m| m.rayleigh_range_mm));
    row("coupler_spot_radius_um", mode.map(|m| m.coupler_spot_radius_um));
    row("end_spot_radius_um", mode.map(|m| m.end_spot_radius_um));
    row("physical_length_mm", Some(report.physical_length_mm));
    row("optical_round_trip_length_mm", Some(report.optical_round_trip_length_mm));
    row("free_spectral_range_MHz", Some(report.fsr_mhz));
    row("finesse", report.finesse);
    row("fwhm_MHz", report.fwhm_mhz);
    row("decay_rate_per_s", report.decay_rate_per_s);
    out
}

pub fn run(ctx: &RunContext, format: Option<Format>, out: Option<&Path>) -> CliResult<()> {
    let config = parse_cavity_config(&ctx.config_text)?;
    let layout = config.layout()?;
    let loss = config.round_trip_loss;
    if !(0.0..1.0).contains(&loss) {
        return Err(CliError::Validation(format!("round_trip_loss: {loss} must satisfy 0 <= L < 1")));
    }

    let (stable, stability, mode, diagnostic) = match eigenmode(&layout) {
        Ok(m) => (
            true,
            m.stability_parameter,
            Some(Mode {
                waist_radius_um: m.waist_radius * 1e6,
                waist_position_mm: m.waist_position * 1e3,
                rayleigh_range_mm: m.rayleigh_range * 1e3,
                coupler_spot_radius_um: m.coupler_spot_radius * 1e6,
                end_spot_radius_um: m.end_spot_radius * 1e6,
            }),
            None,
        ),
        Err(Error::Unstable { stability }) => (
            false,
            stability,
            None,
            Some(format!(
                "stability parameter {stability} is outside (0, 1): no confined Gaussian eigenmode"
            )),
        ),
        Err(other) => return Err(other.into()),
    };
    let (r1, r2) = layout.mirror_reflectivities();
    let fsr = free_spectral_range(&layout)?;
    let finesse = finesse(r1, r2, loss).ok();
    let decay = layout.cavity_constants(loss).ok().and_then(|c| decay_rate(&c).ok());

    let report = CavityReport {
        schema_version: opa_squeeze::config::SCHEMA_VERSION,
        tool: tool(),
        config_sha256: ctx.digest(),
        stable,
        stability_parameter: stability,
        mode,
        diagnostic,
        physical_length_mm: layout.physical_length() * 1e3,
        optical_round_trip_length_mm: layout.optical_round_trip_length() * 1e3,
        fsr_mhz: fsr / 1e6,
        finesse,
        fwhm_mhz: finesse.map(|f| fsr / f / 1e6),
        decay_rate_per_s: decay,
        inputs: config,
    };
    let text = match format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => csv_rows(&report),
    };
    emit(out, &text)
}
