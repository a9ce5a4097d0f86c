//! Closed-form quadrature variances of a below-threshold OPA and the pointwise
//! transformations applied to them on the way to a homodyne detector.
//!
//! All variances are linear and normalised so that vacuum noise is 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::SPEED_OF_LIGHT;

/// Fixed cavity constants entering the decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityConstants {
    /// Power transmissivity of the coupling mirror.
    pub coupler_transmissivity: f64,
    /// Round-trip power loss excluding the coupler.
    pub round_trip_loss: f64,
    /// Optical round-trip length in metres.
    pub round_trip_length: f64,
}

impl CavityConstants {
    pub fn new(coupler_transmissivity: f64, round_trip_loss: f64, round_trip_length: f64) -> Result<Self> {
        let c = CavityConstants {
            coupler_transmissivity,
            round_trip_loss,
            round_trip_length,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.coupler_transmissivity;
        let l = self.round_trip_loss;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::domain("coupler_transmissivity", t, "0 < T < 1"));
        }
        if !(0.0..1.0).contains(&l) {
            return Err(Error::domain("round_trip_loss", l, "0 <= L < 1"));
        }
        if t + l >= 1.0 {
            return Err(Error::domain("round_trip_loss", l, "T + L < 1"));
        }
        if !(self.round_trip_length > 0.0 && self.round_trip_length.is_finite()) {
            return Err(Error::domain("round_trip_length", self.round_trip_length, "finite and > 0"));
        }
        Ok(())
    }
}

/// Source parameters: the three fitted quantities plus the fixed cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezerParams {
    /// Total detection efficiency (lumped escape, propagation and detection).
    pub efficiency: f64,
    /// Pump power at the OPA threshold, watts.
    pub threshold_power: f64,
    /// RMS phase jitter between signal and local oscillator, radians.
    pub phase_jitter: f64,
    pub cavity: CavityConstants,
}

impl SqueezerParams {
    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        validate_efficiency("efficiency", self.efficiency)?;
        if !(self.threshold_power > 0.0 && self.threshold_power.is_finite()) {
            return Err(Error::domain("threshold_power", self.threshold_power, "finite and > 0"));
        }
        validate_jitter(self.phase_jitter)
    }
}

/// Pair of quadrature variances `(v1, v2)`; `v1` is the squeezed one for
/// model output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePair {
    pub v1: f64,
    pub v2: f64,
}

impl VariancePair {
    pub const VACUUM: VariancePair = VariancePair { v1: 1.0, v2: 1.0 };

    pub fn new(v1: f64, v2: f64) -> Result<Self> {
        if !(v1 > 0.0 && v1.is_finite()) {
            return Err(Error::domain("v1", v1, "finite and > 0"));
        }
        if !(v2 > 0.0 && v2.is_finite()) {
            return Err(Error::domain("v2", v2, "finite and > 0"));
        }
        Ok(VariancePair { v1, v2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Pump power, watts.
    pub pump_power: f64,
    /// Sideband (Fourier) frequency, hertz.
    pub sideband_frequency: f64,
}

impl OperatingPoint {
    pub fn new(pump_power: f64, sideband_frequency: f64) -> Self {
        OperatingPoint {
            pump_power,
            sideband_frequency,
        }
    }
}

fn validate_efficiency(field: &'static str, eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(field, eta, "0 <= eta <= 1"));
    }
    Ok(())
}

fn validate_jitter(theta: f64) -> Result<()> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(Error::domain("phase_jitter", theta, "0 <= theta < pi/2"));
    }
    Ok(())
}

/// Cavity field decay rate `c (T + L) / l`, in 1/s.
pub fn decay_rate(cavity: &CavityConstants) -> Result<f64> {
    cavity.validate()?;
    Ok(SPEED_OF_LIGHT * (cavity.coupler_transmissivity + cavity.round_trip_loss) / cavity.round_trip_length)
}

/// Intermediate quantities of the variance model that the estimator reuses
/// for its analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModelTerms {
    /// Normalised pump amplitude `sqrt(P / P_thr)`.
    pub x: f64,
    /// `4 (2 pi f / kappa)^2`.
    pub w: f64,
    /// Squeezed-quadrature gain term `4x / ((1 + x)^2 + w)`.
    pub sqz: f64,
    /// Anti-squeezed gain term `4x / ((1 - x)^2 + w)`.
    pub anti: f64,
}

impl ModelTerms {
    pub fn new(params: &SqueezerParams, op: &OperatingPoint) -> Result<Self> {
        params.validate()?;
        let p = op.pump_power;
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::domain("pump_power", p, "finite and >= 0"));
        }
        if !(op.sideband_frequency >= 0.0 && op.sideband_frequency.is_finite()) {
            return Err(Error::domain("sideband_frequency", op.sideband_frequency, "finite and >= 0"));
        }
        if p >= params.threshold_power {
            return Err(Error::AboveThreshold {
                pump: p,
                threshold: params.threshold_power,
            });
        }
        let kappa = decay_rate(&params.cavity)?;
        let x = (p / params.threshold_power).sqrt();
        let ratio = 2.0 * std::f64::consts::PI * op.sideband_frequency / kappa;
        let w = 4.0 * ratio * ratio;
        Ok(ModelTerms {
            x,
            w,
            sqz: 4.0 * x / ((1.0 + x).powi(2) + w),
            anti: 4.0 * x / ((1.0 - x).powi(2) + w),
        })
    }

    /// d(sqz)/dx and d(anti)/dx; both share the numerator `4 (1 - x^2 + w)`.
    pub fn dx(&self) -> (f64, f64) {
        let num = 4.0 * (1.0 - self.x * self.x + self.w);
        let ds = (1.0 + self.x).powi(2) + self.w;
        let da = (1.0 - self.x).powi(2) + self.w;
        (num / (ds * ds), num / (da * da))
    }

    pub fn pair(&self, efficiency: f64) -> VariancePair {
        VariancePair {
            v1: 1.0 - efficiency * self.sqz,
            v2: 1.0 + efficiency * self.anti,
        }
    }
}

/// Squeezed and anti-squeezed variances of a below-threshold OPA (before
/// phase jitter).
pub fn opa_variance_pair(params: &SqueezerParams, op: &OperatingPoint) -> Result<VariancePair> {
    Ok(ModelTerms::new(params, op)?.pair(params.efficiency))
}

/// Full model: variances followed by phase-jitter mixing.
pub fn jittered_variance_pair(params: &SqueezerParams, op: &OperatingPoint) -> Result<VariancePair> {
    apply_phase_jitter(opa_variance_pair(params, op)?, params.phase_jitter)
}

/// Mixes the two quadratures as a detector locked at a fixed phase offset
/// `theta_fluc` would see them.
pub fn apply_phase_jitter(pair: VariancePair, theta_fluc: f64) -> Result<VariancePair> {
    validate_jitter(theta_fluc)?;
    let (s, c) = theta_fluc.sin_cos();
    let (c2, s2) = (c * c, s * s);
    Ok(VariancePair {
        v1: pair.v1 * c2 + pair.v2 * s2,
        v2: pair.v2 * c2 + pair.v1 * s2,
    })
}

/// Beam-splitter loss channel: `v -> 1 + eta (v - 1)` on both quadratures.
pub fn apply_efficiency(pair: VariancePair, eta_extra: f64) -> Result<VariancePair> {
    validate_efficiency("eta_extra", eta_extra)?;
    Ok(VariancePair {
        v1: 1.0 + eta_extra * (pair.v1 - 1.0),
        v2: 1.0 + eta_extra * (pair.v2 - 1.0),
    })
}

/// Variance of `X(theta) = X1 cos(theta) + X2 sin(theta)` for uncorrelated
/// quadratures.
pub fn variance_at_angle(pair: VariancePair, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    pair.v1 * c * c + pair.v2 * s * s
}

/// Dark-noise subtraction and vacuum normalisation of raw (linear) noise
/// powers: `(meas - dark) / (vacuum - dark)`.
pub fn normalize_and_correct(meas: f64, vacuum: f64, dark: f64) -> Result<f64> {
    if !(dark >= 0.0 && dark.is_finite()) {
        return Err(Error::NonPhysicalTrace(format!("dark level {dark} must be finite and >= 0")));
    }
    if !(vacuum > dark && vacuum.is_finite()) {
        return Err(Error::NonPhysicalTrace(format!(
            "vacuum level {vacuum} must exceed dark level {dark}"
        )));
    }
    if !(meas > dark && meas.is_finite()) {
        return Err(Error::NonPhysicalTrace(format!(
            "measured level {meas} must exceed dark level {dark}"
        )));
    }
    if dark == 0.0 {
        return Ok(meas / vacuum);
    }
    Ok((meas - dark) / (vacuum - dark))
}

/// Homodyne fringe visibility to the efficiency factor it imposes.
pub fn visibility_to_efficiency(visibility: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::domain("visibility", visibility, "0 <= visibility <= 1"));
    }
    Ok(visibility * visibility)
}

/// `v1 * v2`; the vacuum-normalised uncertainty bound is 1.
pub fn uncertainty_product(pair: VariancePair) -> f64 {
    pair.v1 * pair.v2
}
