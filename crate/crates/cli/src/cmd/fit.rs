use std::fmt::Write as _;
use std::path::Path;

use opa_squeeze::config::{parse_fit_config, FitRunConfig};
use opa_squeeze::estimation::{fit, FitResult};
use opa_squeeze::formats::read_dataset_csv;
use opa_squeeze::quadrature::jittered_variance_pair;
use opa_squeeze::units::{format_scaled, rad_to_deg, to_db};
use opa_squeeze::{Dataset, MeasurementPoint, OperatingPoint};
use serde::Serialize;

use super::{tool, ToolStamp};
use crate::error::{CliError, CliResult};
use crate::io::{emit, to_json, RunContext};
use crate::Format;

/// Reported parameters in external units, in this order.
const REPORTED: [&str; 3] = ["efficiency", "threshold_mW", "phase_jitter_deg"];

#[derive(Debug, Serialize)]
struct Estimate {
    value: f64,
    std_error: f64,
    fixed: bool,
    at_bound: bool,
}

#[derive(Debug, Serialize)]
struct Parameters {
    efficiency: Estimate,
    #[serde(rename = "threshold_mW")]
    threshold_mw: Estimate,
    phase_jitter_deg: Estimate,
}

#[derive(Debug, Serialize)]
struct Covariance {
    order: [&'static str; 3],
    scaled: [[f64; 3]; 3],
    unscaled: [[f64; 3]; 3],
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    converged: bool,
    iterations: usize,
    chi_squared: f64,
    dof: usize,
    reduced_chi_squared: f64,
    gradient_norm: f64,
    ill_conditioned: bool,
}

#[derive(Debug, Serialize)]
struct PointEcho {
    #[serde(rename = "pump_mW")]
    pump_mw: f64,
    #[serde(rename = "sigma_pump_mW")]
    sigma_pump_mw: f64,
    #[serde(rename = "frequency_Hz")]
    frequency_hz: f64,
    quadrature: &'static str,
    #[serde(rename = "value_dB")]
    value_db: f64,
    #[serde(rename = "sigma_dB")]
    sigma_db: f64,
}

#[derive(Debug, Serialize)]
struct DatasetEcho {
    path: String,
    comments: Vec<String>,
    points: Vec<PointEcho>,
}

#[derive(Debug, Serialize)]
struct Inputs {
    config: FitRunConfig,
    dataset: DatasetEcho,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct CurveSample {
    #[serde(rename = "frequency_Hz")]
    frequency_hz: f64,
    #[serde(rename = "pump_mW")]
    pump_mw: f64,
    #[serde(rename = "squeezed_dB")]
    squeezed_db: f64,
    #[serde(rename = "antisqueezed_dB")]
    antisqueezed_db: f64,
}

#[derive(Debug, Serialize)]
struct Report {
    schema_version: u32,
    tool: ToolStamp,
    config_sha256: String,
    inputs: Inputs,
    parameters: Parameters,
    covariance: Covariance,
    fit: Diagnostics,
    curve: Vec<CurveSample>,
}

fn mw(watts: f64) -> f64 {
    format_scaled(watts, 3).parse().unwrap_or(watts * 1e3)
}

fn echo(point: &MeasurementPoint) -> PointEcho {
    PointEcho {
        pump_mw: mw(point.pump_power),
        sigma_pump_mw: mw(point.sigma_pump),
        frequency_hz: point.frequency,
        quadrature: point.quadrature.tag(),
        value_db: point.value_db,
        sigma_db: point.sigma_db,
    }
}

fn external(matrix: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let scale = [1.0, 1e3, rad_to_deg(1.0)];
    std::array::from_fn(|i| std::array::from_fn(|k| matrix[i][k] * scale[i] * scale[k]))
}

/// Model curves over the pump range of each measured sideband frequency.
fn model_curve(result: &FitResult, dataset: &Dataset, n: usize) -> CliResult<Vec<CurveSample>> {
    let mut frequencies: Vec<f64> = dataset.points.iter().map(|p| p.frequency).collect();
    frequencies.sort_by(f64::total_cmp);
    frequencies.dedup();
    let mut curve = Vec::with_capacity(frequencies.len() * n);
    for f in frequencies {
        let pumps = dataset.points.iter().filter(|p| p.frequency == f).map(|p| p.pump_power);
        let lo = pumps.clone().fold(f64::INFINITY, f64::min);
        let hi = pumps.fold(0.0, f64::max);
        for k in 0..n {
            let pump = if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
            let pair = jittered_variance_pair(&result.params, &OperatingPoint::new(pump, f))?;
            curve.push(CurveSample {
                frequency_hz: f,
                pump_mw: pump * 1e3,
                squeezed_db: to_db(pair.v1)?,
                antisqueezed_db: to_db(pair.v2)?,
            });
        }
    }
    Ok(curve)
}

fn curve_csv(curve: &[CurveSample], digest: &str) -> String {
    let mut out = format!(
        "# {} {}\n# config_sha256: {digest}\nfrequency_Hz,pump_mW,squeezed_dB,antisqueezed_dB\n",
        crate::TOOL_NAME,
        crate::TOOL_VERSION
    );
    for s in curve {
        let _ = writeln!(out, "{},{},{},{}", s.frequency_hz, s.pump_mw, s.squeezed_db, s.antisqueezed_db);
    }
    out
}

pub fn run(ctx: &mut RunContext, format: Option<Format>, out: Option<&Path>) -> CliResult<()> {
    let config = parse_fit_config(&ctx.config_text)?;
    let cavity = config.cavity.to_constants().map_err(|e| CliError::invalid("cavity", e))?;
    if let Some(theta) = config.fix_phase_jitter_deg {
        if !(0.0..90.0).contains(&theta) {
            return Err(CliError::Validation(format!(
                "fix_phase_jitter_deg: {theta} must satisfy 0 <= theta < 90"
            )));
        }
    }
    if config.curve_points < 2 {
        return Err(CliError::Validation(format!(
            "curve_points: {} must be >= 2",
            config.curve_points
        )));
    }
    if config.max_iterations == Some(0) {
        return Err(CliError::Validation("max_iterations: must be >= 1".into()));
    }

    let text = ctx.read_input(&config.dataset)?;
    let file = read_dataset_csv(&text)
        .map_err(|e| CliError::Validation(format!("dataset {}: {e}", config.dataset.display())))?;
    let dataset = Dataset {
        points: file.points,
        cavity,
        metadata: file.comments,
    };
    let result = fit(&dataset, &config.fit_config())?;
    let curve = model_curve(&result, &dataset, config.curve_points)?;
    let digest = ctx.digest();

    let p = &result.params;
    let estimate = |k: usize, value: f64, scale: f64| Estimate {
        value,
        std_error: result.std_errors[k] * scale,
        fixed: !result.free[k],
        at_bound: result.at_bound[k],
    };
    let report = Report {
        schema_version: opa_squeeze::config::SCHEMA_VERSION,
        tool: tool(),
        config_sha256: digest.clone(),
        parameters: Parameters {
            efficiency: estimate(0, p.efficiency, 1.0),
            threshold_mw: estimate(1, p.threshold_power * 1e3, 1e3),
            phase_jitter_deg: estimate(2, rad_to_deg(p.phase_jitter), rad_to_deg(1.0)),
        },
        covariance: Covariance {
            order: REPORTED,
            scaled: external(&result.covariance),
            unscaled: external(&result.unscaled_covariance),
        },
        fit: Diagnostics {
            converged: result.converged,
            iterations: result.iterations,
            chi_squared: result.chi_squared,
            dof: result.dof,
            reduced_chi_squared: result.reduced_chi_squared(),
            gradient_norm: result.gradient_norm,
            ill_conditioned: result.ill_conditioned,
        },
        inputs: Inputs {
            dataset: DatasetEcho {
                path: config.dataset.display().to_string(),
                comments: dataset.metadata.clone(),
                points: dataset.points.iter().map(echo).collect(),
            },
            config: config.clone(),
        },
        curve,
    };

    let curve_text = curve_csv(&report.curve, &digest);
    if let Some(path) = &config.curve_out {
        emit(Some(&ctx.resolve(path)), &curve_text)?;
    }
    match format.unwrap_or(Format::Json) {
        Format::Json => emit(out, &to_json(&report)),
        Format::Csv => emit(out, &curve_text),
    }
}
