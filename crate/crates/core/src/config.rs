//! JSON run-configuration documents for the command-line pipeline.
//!
//! Every document carries `schema_version`; quantities use external units
//! spelled out in the key (`_mW`, `_deg`, `_Hz`, `_m`).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cavity::{CavityLayout, Element};
use crate::error::{Error, Result};
use crate::estimation::{FitConfig, Quadrature, ResidualDomain};
use crate::formats::FormatError;
use crate::quadrature::{CavityConstants, SqueezerParams};
use crate::synth::{FrequencyRange, SweepSpec, TraceSpec};
use crate::units::{deg_to_rad, parse_scaled};

pub const SCHEMA_VERSION: u32 = 1;

/// Milliwatts to watts through the decimal exponent, so `180` becomes the
/// same double as a literal `0.18`.
pub fn mw_to_w(mw: f64) -> f64 {
    parse_scaled(&format!("{mw:e}"), -3).unwrap_or(mw / 1e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub coupler_transmissivity: f64,
    pub round_trip_loss: f64,
    pub round_trip_length_m: f64,
}

impl CavityConfig {
    pub fn to_constants(&self) -> Result<CavityConstants> {
        CavityConstants::new(self.coupler_transmissivity, self.round_trip_loss, self.round_trip_length_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezerConfig {
    pub efficiency: f64,
    #[serde(rename = "threshold_mW")]
    pub threshold_mw: f64,
    pub phase_jitter_deg: f64,
    pub cavity: CavityConfig,
}

impl SqueezerConfig {
    pub fn to_params(&self) -> Result<SqueezerParams> {
        let params = SqueezerParams {
            efficiency: self.efficiency,
            threshold_power: mw_to_w(self.threshold_mw),
            phase_jitter: deg_to_rad(self.phase_jitter_deg),
            cavity: self.cavity.to_constants()?,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub squeezer: SqueezerConfig,
    #[serde(rename = "pump_mW")]
    pub pump_mw: f64,
    #[serde(rename = "frequency_Hz")]
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub schema_version: u32,
    pub squeezer: SqueezerConfig,
    #[serde(rename = "pump_mW")]
    pub pump_mw: Vec<f64>,
    #[serde(rename = "frequency_Hz")]
    pub frequency: FrequencyRange,
    /// Also emit each curve with the phase jitter set to zero.
    #[serde(default)]
    pub zero_phase_noise_curves: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRunConfig {
    pub schema_version: u32,
    /// Dataset CSV, relative to the config file.
    pub dataset: PathBuf,
    pub cavity: CavityConfig,
    #[serde(default)]
    pub residual_domain: ResidualDomain,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub fix_phase_jitter_deg: Option<f64>,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
    /// Where to write the fitted-curve CSV; relative to the config file.
    #[serde(default)]
    pub curve_out: Option<PathBuf>,
}

fn default_curve_points() -> usize {
    50
}

impl FitRunConfig {
    pub fn fit_config(&self) -> FitConfig {
        let defaults = FitConfig::default();
        FitConfig {
            residual_domain: self.residual_domain,
            max_iterations: self.max_iterations.unwrap_or(defaults.max_iterations),
            fixed_phase_jitter: self.fix_phase_jitter_deg.map(deg_to_rad),
            ..defaults
        }
    }
}

/// A reference level given either as a constant or as an aligned trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum LevelSource {
    Constant {
        #[serde(rename = "level_dB")]
        level_db: f64,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectConfig {
    pub schema_version: u32,
    /// Trace CSV with the measured noise powers.
    pub measured: PathBuf,
    pub vacuum: LevelSource,
    #[serde(default)]
    pub dark: Option<LevelSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityRunConfig {
    pub schema_version: u32,
    pub wavelength_m: f64,
    pub elements: Vec<Element>,
    /// Round-trip loss besides mirror transmission.
    #[serde(default)]
    pub round_trip_loss: f64,
}

impl CavityRunConfig {
    pub fn layout(&self) -> Result<CavityLayout> {
        CavityLayout::new(self.elements.clone(), self.wavelength_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthMode {
    Sweep {
        #[serde(rename = "pump_mW")]
        pump_mw: Vec<f64>,
        #[serde(rename = "frequency_Hz")]
        frequency_hz: f64,
        #[serde(default = "default_pump_jitter")]
        pump_jitter_rel: f64,
        #[serde(default = "one")]
        repeats: usize,
        #[serde(default = "default_sigma_db", rename = "fallback_sigma_dB")]
        fallback_sigma_db: f64,
    },
    ZeroSpan {
        #[serde(rename = "pump_mW")]
        pump_mw: f64,
        #[serde(rename = "frequency_Hz")]
        frequency_hz: f64,
        quadrature: Quadrature,
    },
    Spectrum {
        #[serde(rename = "pump_mW")]
        pump_mw: Vec<f64>,
        #[serde(rename = "frequency_Hz")]
        frequency: FrequencyRange,
    },
}

fn default_pump_jitter() -> f64 {
    0.03
}

fn default_sigma_db() -> f64 {
    0.3
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub schema_version: u32,
    pub squeezer: SqueezerConfig,
    pub trace: TraceSpec,
    pub mode: SynthMode,
}

impl SynthConfig {
    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        match &self.mode {
            SynthMode::Sweep {
                pump_mw,
                frequency_hz,
                pump_jitter_rel,
                repeats,
                fallback_sigma_db,
            } => Some(SweepSpec {
                pump_powers: pump_mw.iter().copied().map(mw_to_w).collect(),
                frequency: *frequency_hz,
                pump_jitter_rel: *pump_jitter_rel,
                repeats: *repeats,
                fallback_sigma_db: *fallback_sigma_db,
                trace: self.trace,
            }),
            _ => None,
        }
    }
}

trait Versioned {
    fn schema_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        }
    )*};
}

versioned!(ModelConfig, SpectrumConfig, FitRunConfig, CorrectConfig, CavityRunConfig, SynthConfig);

fn parse<T: for<'de> Deserialize<'de> + Versioned>(text: &str) -> Result<T> {
    let doc: T = serde_json::from_str(text).map_err(|e| {
        let line = (e.line() > 0).then_some(e.line() as u64);
        Error::Format(FormatError::new(line, e.to_string()))
    })?;
    if doc.schema_version() != SCHEMA_VERSION {
        return Err(Error::Format(FormatError::new(
            None,
            format!(
                "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
                doc.schema_version()
            ),
        )));
    }
    Ok(doc)
}

pub fn parse_model_config(text: &str) -> Result<ModelConfig> {
    parse(text)
}

pub fn parse_spectrum_config(text: &str) -> Result<SpectrumConfig> {
    parse(text)
}

pub fn parse_fit_config(text: &str) -> Result<FitRunConfig> {
    parse(text)
}

pub fn parse_correct_config(text: &str) -> Result<CorrectConfig> {
    parse(text)
}

pub fn parse_cavity_config(text: &str) -> Result<CavityRunConfig> {
    parse(text)
}

pub fn parse_synth_config(text: &str) -> Result<SynthConfig> {
    parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUEEZER: &str = r#"{
        "efficiency": 0.965, "threshold_mW": 221, "phase_jitter_deg": 0.66,
        "cavity": {"coupler_transmissivity": 0.1, "round_trip_loss": 0.001, "round_trip_length_m": 0.0798}
    }"#;

    #[test]
    fn model_config() {
        let text = format!(r#"{{"schema_version": 1, "squeezer": {SQUEEZER}, "pump_mW": 180, "frequency_Hz": 5e6}}"#);
        let cfg = parse_model_config(&text).unwrap();
        let params = cfg.squeezer.to_params().unwrap();
        assert_eq!(params.threshold_power, 0.221);
        assert_eq!(mw_to_w(cfg.pump_mw), 0.18);
        assert!((params.phase_jitter - 0.011519173).abs() < 1e-9);
    }

    #[test]
    fn rejects_unknown_fields_and_versions() {
        let text = format!(r#"{{"schema_version": 2, "squeezer": {SQUEEZER}, "pump_mW": 180, "frequency_Hz": 5e6}}"#);
        let err = parse_model_config(&text).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
        let text = format!(r#"{{"schema_version": 1, "squeezer": {SQUEEZER}, "pump_W": 0.18, "frequency_Hz": 5e6}}"#);
        let err = parse_model_config(&text).unwrap_err();
        assert!(err.to_string().contains("pump_W"), "{err}");
    }

    #[test]
    fn cavity_layout_document() {
        let text = r#"{
            "schema_version": 1, "wavelength_m": 1.55e-6, "round_trip_loss": 0.001,
            "elements": [
                {"type": "curved_mirror", "roc_m": 0.025, "power_reflectivity": 0.9},
                {"type": "gap", "length_m": 0.023},
                {"type": "flat_interface"},
                {"type": "slab", "length_m": 0.0093, "refractive_index": 1.816},
                {"type": "curved_mirror", "roc_m": 0.012, "power_reflectivity": 1.0, "immersed_index": 1.816}
            ]
        }"#;
        let cfg = parse_cavity_config(text).unwrap();
        assert_eq!(cfg.layout().unwrap(), crate::cavity::presets::hemilithic_opa());
    }

    #[test]
    fn synth_modes() {
        let text = format!(
            r#"{{"schema_version": 1, "squeezer": {SQUEEZER},
                "trace": {{"n_points": 100, "rbw": 200e3, "vbw": 200, "relative_scatter": 0.0715, "seed": 42}},
                "mode": {{"kind": "sweep", "pump_mW": [6, 180], "frequency_Hz": 5e6}}}}"#
        );
        let cfg = parse_synth_config(&text).unwrap();
        let sweep = cfg.sweep_spec().unwrap();
        assert_eq!(sweep.pump_powers, vec![0.006, 0.18]);
        assert_eq!(sweep.pump_jitter_rel, 0.03);

        let text = format!(
            r#"{{"schema_version": 1, "squeezer": {SQUEEZER},
                "trace": {{"n_points": 100, "rbw": 200e3, "vbw": 200, "seed": 42}},
                "mode": {{"kind": "zero_span", "pump_mW": 180, "frequency_Hz": 5e6, "quadrature": "sqz"}}}}"#
        );
        assert!(matches!(parse_synth_config(&text).unwrap().mode, SynthMode::ZeroSpan { .. }));
    }

    #[test]
    fn level_sources() {
        let text = r#"{"schema_version": 1, "measured": "a.csv", "vacuum": {"level_dB": -80}, "dark": {"path": "d.csv"}}"#;
        let cfg = parse_correct_config(text).unwrap();
        assert_eq!(cfg.vacuum, LevelSource::Constant { level_db: -80.0 });
        assert_eq!(cfg.dark, Some(LevelSource::File { path: "d.csv".into() }));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_cavity_config("{\n\"schema_version\": 1,\n oops }").unwrap_err();
        match err {
            Error::Format(f) => assert_eq!(f.line, Some(3)),
            other => panic!("{other:?}"),
        }
    }
}
