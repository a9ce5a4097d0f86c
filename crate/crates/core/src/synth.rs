//! Seeded synthetic measurement data and the trace reduction applied to
//! recorded zero-span traces.
//!
//! Noise is multiplicative Gaussian on the linear noise power. All randomness
//! comes from ChaCha20 seeded with the spec's 64-bit seed; every generated
//! trace or spectrum point draws from its own ChaCha stream, so outputs do
//! not depend on generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Dataset, MeasurementPoint, Quadrature};
use crate::quadrature::{jittered_variance_pair, normalize_and_correct, OperatingPoint, SqueezerParams};
use crate::units::{relative_sigma_to_db, to_db};

/// Name and version of the pseudo-random generator; bump when the sampling
/// scheme changes.
pub const PRNG_ID: &str = "chacha20-stream/v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub n_points: usize,
    /// Resolution bandwidth, Hz.
    pub rbw: f64,
    /// Video bandwidth, Hz.
    pub vbw: f64,
    #[serde(default = "one")]
    pub n_averages: usize,
    /// Relative standard deviation of one sample of one trace. When absent,
    /// `1 / sqrt(rbw / (2 vbw))` is used.
    #[serde(default)]
    pub relative_scatter: Option<f64>,
    /// Electronic dark noise power relative to vacuum.
    #[serde(default)]
    pub dark_level: f64,
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::domain("n_points", self.n_points as f64, ">= 2"));
        }
        if !(self.rbw > 0.0 && self.rbw.is_finite()) {
            return Err(Error::domain("rbw", self.rbw, "> 0"));
        }
        if !(self.vbw > 0.0 && self.vbw.is_finite()) {
            return Err(Error::domain("vbw", self.vbw, "> 0"));
        }
        if self.n_averages == 0 {
            return Err(Error::domain("n_averages", 0.0, ">= 1"));
        }
        if let Some(s) = self.relative_scatter {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::domain("relative_scatter", s, "finite and >= 0"));
            }
        }
        if !(self.dark_level >= 0.0 && self.dark_level < 1.0) {
            return Err(Error::domain("dark_level", self.dark_level, "0 <= dark < 1"));
        }
        Ok(())
    }

    /// Per-sample relative scatter of a single trace.
    pub fn scatter(&self) -> f64 {
        self.relative_scatter
            .unwrap_or_else(|| 1.0 / (self.rbw / (2.0 * self.vbw)).sqrt())
    }

    /// Scatter remaining after averaging `n_averages` traces.
    pub fn averaged_scatter(&self) -> f64 {
        self.scatter() / (self.n_averages as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Vacuum,
    Squeezed,
    Antisqueezed,
    Dark,
}

impl From<Quadrature> for TraceKind {
    fn from(q: Quadrature) -> Self {
        match q {
            Quadrature::Squeezed => TraceKind::Squeezed,
            Quadrature::Antisqueezed => TraceKind::Antisqueezed,
        }
    }
}

/// Zero-span noise-power trace, linear and relative to vacuum; sample `i`
/// sits at index `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<f64>,
    pub kind: TraceKind,
    pub spec: TraceSpec,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One multiplicative fluctuation factor, redrawn until positive.
fn positive_factor(rng: &mut ChaCha20Rng, scatter: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let factor = 1.0 + scatter * z;
        if factor > 0.0 {
            return factor;
        }
    }
}

fn averaged_samples(rng: &mut ChaCha20Rng, level: f64, spec: &TraceSpec) -> Vec<f64> {
    let scatter = spec.scatter();
    (0..spec.n_points)
        .map(|_| {
            if scatter == 0.0 {
                return level;
            }
            let sum: f64 = (0..spec.n_averages).map(|_| level * positive_factor(rng, scatter)).sum();
            sum / spec.n_averages as f64
        })
        .collect()
}

/// Trace at a fixed linear level (before dark noise) drawn from `stream`.
pub fn synth_trace(level: f64, kind: TraceKind, spec: &TraceSpec, stream: u64) -> Result<Trace> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, stream);
    let total = match kind {
        TraceKind::Dark => spec.dark_level,
        _ => level + spec.dark_level,
    };
    Ok(Trace {
        samples: averaged_samples(&mut rng, total, spec),
        kind,
        spec: *spec,
    })
}

/// Zero-span trace of one quadrature at a fixed operating point.
pub fn synth_zero_span(
    params: &SqueezerParams,
    op: &OperatingPoint,
    quadrature: Quadrature,
    spec: &TraceSpec,
) -> Result<Trace> {
    spec.validate()?;
    let pair = jittered_variance_pair(params, op)?;
    let level = match quadrature {
        Quadrature::Squeezed => pair.v1,
        Quadrature::Antisqueezed => pair.v2,
    };
    synth_trace(level, quadrature.into(), spec, 0)
}

/// Straight-line fit to a linear trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceReduction {
    /// Fitted value at the trace midpoint (equals the sample mean).
    pub mean: f64,
    /// Residual standard deviation about the fitted line.
    pub sigma: f64,
    pub slope: f64,
}

/// Least-squares line `a + b * index` through the linear samples.
pub fn reduce_trace_linear(trace: &Trace) -> Result<TraceReduction> {
    let n = trace.samples.len();
    if n < 2 {
        return Err(Error::NonPhysicalTrace(format!("trace has {n} samples, need at least 2")));
    }
    let nonneg_only = trace.kind == TraceKind::Dark;
    for (i, &v) in trace.samples.iter().enumerate() {
        let ok = v.is_finite() && if nonneg_only { v >= 0.0 } else { v > 0.0 };
        if !ok {
            return Err(Error::NonPhysicalTrace(format!("sample {i} has non-physical value {v}")));
        }
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = trace.samples.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in trace.samples.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = trace
        .samples
        .iter()
        .enumerate()
        .map(|(i, &y)| (y - intercept - slope * i as f64).powi(2))
        .sum();
    let mean = intercept + slope * x_mean;
    let mut sigma = if n > 2 { (ssr / (nf - 2.0)).sqrt() } else { 0.0 };
    // Rounding residue of a flat trace.
    if sigma <= 64.0 * f64::EPSILON * mean.abs() {
        sigma = 0.0;
    }
    Ok(TraceReduction {
        mean,
        sigma,
        slope,
    })
}

/// `(mean_db, sigma_db)` of a trace: the linear fit's midpoint value in dB
/// and the residual scatter propagated to dB at that value.
pub fn reduce_trace(trace: &Trace) -> Result<(f64, f64)> {
    let red = reduce_trace_linear(trace)?;
    let mean_db = to_db(red.mean).map_err(|_| Error::NonPhysicalTrace(format!("trace mean {} is not positive", red.mean)))?;
    Ok((mean_db, relative_sigma_to_db(red.sigma / red.mean)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Pump powers, watts.
    pub pump_powers: Vec<f64>,
    /// Sideband frequency, Hz.
    pub frequency: f64,
    /// Relative pump-power uncertainty, applied as scatter of the recorded
    /// pump value and reported as its error bar.
    #[serde(default = "default_pump_jitter")]
    pub pump_jitter_rel: f64,
    /// Measurements per pump power and quadrature.
    #[serde(default = "one")]
    pub repeats: usize,
    /// Error bar used when the trace has no scatter, dB.
    #[serde(default = "default_sigma_db")]
    pub fallback_sigma_db: f64,
    pub trace: TraceSpec,
}

fn default_pump_jitter() -> f64 {
    0.03
}

fn default_sigma_db() -> f64 {
    0.3
}

/// Pump sweep of dark-corrected, vacuum-normalised squeezing and
/// anti-squeezing points.
///
/// Each measurement is one zero-span trace reduced with [`reduce_trace`].
/// Besides the sample scatter every trace carries a level offset of the same
/// relative size, so point-to-point scatter matches the per-point error bar.
pub fn synth_pump_sweep(params: &SqueezerParams, sweep: &SweepSpec) -> Result<Dataset> {
    let spec = &sweep.trace;
    spec.validate()?;
    if sweep.pump_powers.is_empty() {
        return Err(Error::Dataset("pump power list is empty".into()));
    }
    if !(sweep.pump_jitter_rel >= 0.0 && sweep.pump_jitter_rel.is_finite()) {
        return Err(Error::domain("pump_jitter_rel", sweep.pump_jitter_rel, "finite and >= 0"));
    }
    if sweep.repeats == 0 {
        return Err(Error::domain("repeats", 0.0, ">= 1"));
    }
    if sweep.fallback_sigma_db.is_nan() || sweep.fallback_sigma_db <= 0.0 {
        return Err(Error::domain("fallback_sigma_db", sweep.fallback_sigma_db, "> 0"));
    }
    let level_scatter = spec.averaged_scatter();
    let dark = spec.dark_level;
    let mut points = Vec::with_capacity(sweep.pump_powers.len() * sweep.repeats * 2);
    let mut stream = 0u64;
    for &pump in &sweep.pump_powers {
        let pair = jittered_variance_pair(params, &OperatingPoint::new(pump, sweep.frequency))?;
        for _ in 0..sweep.repeats {
            for quadrature in [Quadrature::Squeezed, Quadrature::Antisqueezed] {
                let mut rng = stream_rng(spec.seed, stream);
                stream += 1;
                let truth = match quadrature {
                    Quadrature::Squeezed => pair.v1,
                    Quadrature::Antisqueezed => pair.v2,
                };
                let level = if level_scatter > 0.0 {
                    truth * positive_factor(&mut rng, level_scatter)
                } else {
                    truth
                };
                let reported_pump = if sweep.pump_jitter_rel > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    (pump * (1.0 + sweep.pump_jitter_rel * z)).max(0.0)
                } else {
                    pump
                };
                let trace = Trace {
                    samples: averaged_samples(&mut rng, level + dark, spec),
                    kind: quadrature.into(),
                    spec: *spec,
                };
                let red = reduce_trace_linear(&trace)?;
                let value = normalize_and_correct(red.mean, 1.0 + dark, dark)?;
                let sigma_db = relative_sigma_to_db(red.sigma / (red.mean - dark));
                points.push(MeasurementPoint {
                    pump_power: reported_pump,
                    sigma_pump: sweep.pump_jitter_rel * reported_pump,
                    frequency: sweep.frequency,
                    quadrature,
                    value_db: to_db(value)?,
                    sigma_db: if sigma_db > 0.0 { sigma_db } else { sweep.fallback_sigma_db },
                });
            }
        }
    }
    Ok(Dataset {
        points,
        cavity: params.cavity,
        metadata: vec![
            format!("generator: {PRNG_ID}"),
            format!("seed: {}", spec.seed),
        ],
    })
}

/// Linear frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyRange {
    #[serde(rename = "start_Hz")]
    pub start: f64,
    #[serde(rename = "stop_Hz")]
    pub stop: f64,
    pub points: usize,
}

impl FrequencyRange {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::domain("points", 0.0, ">= 1"));
        }
        if !(self.start > 0.0 && self.start.is_finite()) {
            return Err(Error::domain("start_Hz", self.start, "finite and > 0"));
        }
        if !(self.stop >= self.start && self.stop.is_finite()) {
            return Err(Error::domain("stop_Hz", self.stop, "finite and >= start_Hz"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.stop } else { self.start + step * k as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    #[serde(rename = "frequency_Hz")]
    pub frequency: f64,
    #[serde(rename = "squeezed_dB")]
    pub squeezed_db: f64,
    #[serde(rename = "antisqueezed_dB")]
    pub antisqueezed_db: f64,
}

/// Squeezing and anti-squeezing spectrum at one pump power. With `noise`
/// each point carries seeded scatter averaged over `n_averages` traces.
pub fn synth_spectrum(
    params: &SqueezerParams,
    pump_power: f64,
    range: &FrequencyRange,
    noise: Option<&TraceSpec>,
) -> Result<Vec<SpectrumPoint>> {
    range.validate()?;
    if let Some(spec) = noise {
        spec.validate()?;
    }
    range
        .frequencies()
        .into_iter()
        .enumerate()
        .map(|(k, f)| {
            let pair = jittered_variance_pair(params, &OperatingPoint::new(pump_power, f))?;
            let (v1, v2) = match noise {
                Some(spec) if spec.scatter() > 0.0 => {
                    let mut rng = stream_rng(spec.seed, k as u64);
                    let scatter = spec.scatter();
                    let n = spec.n_averages as f64;
                    let mut draw = |v: f64| (0..spec.n_averages).map(|_| v * positive_factor(&mut rng, scatter)).sum::<f64>() / n;
                    (draw(pair.v1), draw(pair.v2))
                }
                _ => (pair.v1, pair.v2),
            };
            Ok(SpectrumPoint {
                frequency: f,
                squeezed_db: to_db(v1)?,
                antisqueezed_db: to_db(v2)?,
            })
        })
        .collect()
}
