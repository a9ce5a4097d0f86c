//! Weighted nonlinear least-squares characterization of a squeezer from
//! pump-sweep data.
//!
//! The free parameters are efficiency, threshold power and phase jitter; the
//! cavity constants are fixed. Horizontal (pump power) error bars are folded
//! into the per-point weight with the effective-variance method:
//! `sigma_eff^2 = sigma_y^2 + (d model / d P * sigma_P)^2`. The weights are
//! frozen while a step is computed and refreshed whenever a step is accepted.
//!
//! The optimizer is a damped Gauss-Newton (Levenberg-Marquardt) iteration in
//! an unconstrained coordinate system:
//!
//! ```text
//! eta   = sin^2(u1)
//! P_thr = max(P_i) * (1 + exp(u2))
//! theta = (pi / 2) * sin^2(u3)
//! ```

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{CavityConstants, ModelTerms, OperatingPoint, SqueezerParams};
use crate::units::{db_slope, deg_to_rad, from_db, to_db};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    #[serde(rename = "sqz")]
    Squeezed,
    #[serde(rename = "antisqz")]
    Antisqueezed,
}

impl Quadrature {
    pub fn tag(self) -> &'static str {
        match self {
            Quadrature::Squeezed => "sqz",
            Quadrature::Antisqueezed => "antisqz",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "sqz" => Some(Quadrature::Squeezed),
            "antisqz" => Some(Quadrature::Antisqueezed),
            _ => None,
        }
    }
}

/// One vacuum-normalised variance observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPoint {
    /// Watts.
    pub pump_power: f64,
    /// Absolute 1-sigma pump uncertainty, watts.
    pub sigma_pump: f64,
    /// Hertz.
    pub frequency: f64,
    pub quadrature: Quadrature,
    /// dB relative to vacuum.
    pub value_db: f64,
    pub sigma_db: f64,
}

impl MeasurementPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.pump_power >= 0.0 && self.pump_power.is_finite()) {
            return Err(Error::Dataset(format!("pump power {} must be finite and >= 0", self.pump_power)));
        }
        if !(self.sigma_pump >= 0.0 && self.sigma_pump.is_finite()) {
            return Err(Error::Dataset(format!("pump sigma {} must be finite and >= 0", self.sigma_pump)));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::Dataset(format!("frequency {} must be finite and > 0", self.frequency)));
        }
        if !self.value_db.is_finite() {
            return Err(Error::Dataset(format!("value {} dB is not finite", self.value_db)));
        }
        if !(self.sigma_db > 0.0 && self.sigma_db.is_finite()) {
            return Err(Error::Dataset(format!("sigma {} dB must be finite and > 0", self.sigma_db)));
        }
        Ok(())
    }

    fn operating_point(&self) -> OperatingPoint {
        OperatingPoint::new(self.pump_power, self.frequency)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<MeasurementPoint>,
    pub cavity: CavityConstants,
    #[serde(default)]
    pub metadata: Vec<String>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        if self.points.len() < 4 {
            return Err(Error::Dataset(format!("need at least 4 points, got {}", self.points.len())));
        }
        for (i, p) in self.points.iter().enumerate() {
            p.validate().map_err(|e| Error::Dataset(format!("point {}: {e}", i + 1)))?;
        }
        let first = self.points[0].pump_power;
        if self.points.iter().all(|p| p.pump_power == first) {
            return Err(Error::Dataset("points must span at least 2 distinct pump powers".into()));
        }
        Ok(())
    }

    pub fn max_pump_power(&self) -> f64 {
        self.points.iter().map(|p| p.pump_power).fold(0.0, f64::max)
    }
}

/// Domain in which residuals are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ResidualDomain {
    #[default]
    #[serde(rename = "dB")]
    Decibel,
    #[serde(rename = "linear")]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub residual_domain: ResidualDomain,
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Stop when an accepted step changes chi^2 by less than this fraction.
    pub chi2_rel_tolerance: f64,
    /// Stop when a step in the unconstrained coordinates is shorter than this.
    pub step_tolerance: f64,
    /// Hold the phase jitter at this value (radians) instead of fitting it.
    pub fixed_phase_jitter: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            residual_domain: ResidualDomain::Decibel,
            max_iterations: 500,
            initial_damping: 1e-3,
            chi2_rel_tolerance: 1e-12,
            step_tolerance: 1e-10,
            fixed_phase_jitter: None,
        }
    }
}

/// Parameter order used by every vector and matrix in this module.
pub const PARAMETER_NAMES: [&str; 3] = ["efficiency", "threshold_power", "phase_jitter"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SqueezerParams,
    /// Covariance scaled by chi^2/dof, order (eta, P_thr [W], theta [rad]).
    pub covariance: [[f64; 3]; 3],
    /// `(J^T J)^-1` without the chi^2/dof factor.
    pub unscaled_covariance: [[f64; 3]; 3],
    pub std_errors: [f64; 3],
    pub chi_squared: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Which parameters ended on (or numerically at) a physical bound.
    pub at_bound: [bool; 3],
    /// The normal matrix at the optimum was numerically singular; the
    /// covariance is a pseudo-inverse.
    pub ill_conditioned: bool,
    /// Which parameters were free.
    pub free: [bool; 3],
}

impl FitResult {
    pub fn reduced_chi_squared(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi_squared / self.dof as f64
        }
    }
}

/// Model value and its partial derivatives w.r.t. (eta, P_thr, theta, P),
/// all in the residual domain.
#[derive(Debug, Clone, Copy)]
struct Prediction {
    value: f64,
    grad: [f64; 3],
    d_pump: f64,
}

fn predict(params: &SqueezerParams, point: &MeasurementPoint, domain: ResidualDomain) -> Result<Prediction> {
    let terms = ModelTerms::new(params, &point.operating_point())?;
    let eta = params.efficiency;
    let pair = terms.pair(eta);
    let (ds_dx, da_dx) = terms.dx();
    let (sin_t, cos_t) = params.phase_jitter.sin_cos();
    let (c2, s2) = (cos_t * cos_t, sin_t * sin_t);
    let sin_2t = 2.0 * sin_t * cos_t;

    // d(v1, v2) / d(eta, x)
    let dv1 = (-terms.sqz, -eta * ds_dx);
    let dv2 = (terms.anti, eta * da_dx);
    let (value, d_eta, d_x, d_theta) = match point.quadrature {
        Quadrature::Squeezed => (
            pair.v1 * c2 + pair.v2 * s2,
            dv1.0 * c2 + dv2.0 * s2,
            dv1.1 * c2 + dv2.1 * s2,
            (pair.v2 - pair.v1) * sin_2t,
        ),
        Quadrature::Antisqueezed => (
            pair.v2 * c2 + pair.v1 * s2,
            dv2.0 * c2 + dv1.0 * s2,
            dv2.1 * c2 + dv1.1 * s2,
            (pair.v1 - pair.v2) * sin_2t,
        ),
    };
    let pthr = params.threshold_power;
    let dx_dpthr = -terms.x / (2.0 * pthr);
    let dx_dp = if point.pump_power > 0.0 {
        terms.x / (2.0 * point.pump_power)
    } else {
        f64::INFINITY
    };

    let scale = match domain {
        ResidualDomain::Decibel => db_slope(value),
        ResidualDomain::Linear => 1.0,
    };
    let value = match domain {
        ResidualDomain::Decibel => to_db(value)?,
        ResidualDomain::Linear => value,
    };
    Ok(Prediction {
        value,
        grad: [scale * d_eta, scale * d_x * dx_dpthr, scale * d_theta],
        d_pump: scale * d_x * dx_dp,
    })
}

/// Model prediction in dB for one measurement point: variances, phase
/// jitter, then the quadrature selected by the point's tag.
pub fn model_prediction(params: &SqueezerParams, point: &MeasurementPoint) -> Result<f64> {
    Ok(predict(params, point, ResidualDomain::Decibel)?.value)
}

/// Slope of the model w.r.t. pump power used to convert the pump error bar;
/// a secant over one sigma at zero pump, where the derivative diverges.
fn pump_slope(
    params: &SqueezerParams,
    point: &MeasurementPoint,
    domain: ResidualDomain,
    pred: &Prediction,
) -> Result<f64> {
    if pred.d_pump.is_finite() {
        return Ok(pred.d_pump);
    }
    let h = point.sigma_pump.min(0.5 * params.threshold_power);
    let shifted = MeasurementPoint {
        pump_power: h,
        ..*point
    };
    Ok((predict(params, &shifted, domain)?.value - pred.value) / h)
}

fn observed(point: &MeasurementPoint, domain: ResidualDomain) -> (f64, f64) {
    match domain {
        ResidualDomain::Decibel => (point.value_db, point.sigma_db),
        ResidualDomain::Linear => {
            let v = from_db(point.value_db);
            (v, v * point.sigma_db / db_slope(1.0))
        }
    }
}

/// Residuals, weights and Jacobian for a dataset in one residual domain.
struct Objective<'a> {
    points: &'a [MeasurementPoint],
    cavity: CavityConstants,
    domain: ResidualDomain,
}

impl Objective<'_> {
    fn params(&self, eta: f64, pthr: f64, theta: f64) -> SqueezerParams {
        SqueezerParams {
            efficiency: eta,
            threshold_power: pthr,
            phase_jitter: theta,
            cavity: self.cavity,
        }
    }

    /// Effective sigma per point at `params`.
    fn sigmas(&self, params: &SqueezerParams) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let (_, sigma_y) = observed(p, self.domain);
            let extra = if p.sigma_pump > 0.0 {
                let pred = predict(params, p, self.domain)?;
                pump_slope(params, p, self.domain, &pred)? * p.sigma_pump
            } else {
                0.0
            };
            out[i] = (sigma_y * sigma_y + extra * extra).sqrt();
        }
        Ok(out)
    }

    fn residuals_with(&self, params: &SqueezerParams, sigmas: &DVector<f64>) -> Result<DVector<f64>> {
        let mut r = DVector::zeros(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let (y, _) = observed(p, self.domain);
            r[i] = (y - predict(params, p, self.domain)?.value) / sigmas[i];
        }
        Ok(r)
    }

    fn residuals(&self, params: &SqueezerParams) -> Result<DVector<f64>> {
        let sigmas = self.sigmas(params)?;
        self.residuals_with(params, &sigmas)
    }

    /// d r / d (eta, P_thr, theta) with the weights held fixed.
    fn jacobian_with(&self, params: &SqueezerParams, sigmas: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.points.len(), 3);
        for (i, p) in self.points.iter().enumerate() {
            let pred = predict(params, p, self.domain)?;
            for k in 0..3 {
                j[(i, k)] = -pred.grad[k] / sigmas[i];
            }
        }
        Ok(j)
    }
}

/// Weighted residuals `(value - model) / sigma_eff` in the dB domain.
pub fn residual_vector(params: &SqueezerParams, dataset: &Dataset) -> Result<DVector<f64>> {
    residual_vector_in(params, dataset, ResidualDomain::Decibel)
}

pub fn residual_vector_in(params: &SqueezerParams, dataset: &Dataset, domain: ResidualDomain) -> Result<DVector<f64>> {
    objective(params, dataset, domain).residuals(params)
}

/// Effective per-point sigmas (dB domain) at `params`.
pub fn effective_sigmas(params: &SqueezerParams, dataset: &Dataset) -> Result<DVector<f64>> {
    objective(params, dataset, ResidualDomain::Decibel).sigmas(params)
}

/// Analytic `n x 3` Jacobian of [`residual_vector`] with the effective
/// sigmas evaluated at `params` and held constant.
pub fn jacobian(params: &SqueezerParams, dataset: &Dataset) -> Result<DMatrix<f64>> {
    jacobian_in(params, dataset, ResidualDomain::Decibel)
}

pub fn jacobian_in(params: &SqueezerParams, dataset: &Dataset, domain: ResidualDomain) -> Result<DMatrix<f64>> {
    let obj = objective(params, dataset, domain);
    let sigmas = obj.sigmas(params)?;
    obj.jacobian_with(params, &sigmas)
}

fn objective<'a>(params: &SqueezerParams, dataset: &'a Dataset, domain: ResidualDomain) -> Objective<'a> {
    Objective {
        points: &dataset.points,
        cavity: params.cavity,
        domain,
    }
}

/// Mapping between physical parameters and the unconstrained coordinates.
#[derive(Debug, Clone, Copy)]
struct Reparam {
    max_pump: f64,
    free: [bool; 3],
    fixed_theta: f64,
}

impl Reparam {
    fn n_free(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    fn physical(&self, u: &DVector<f64>) -> ([f64; 3], [f64; 3]) {
        let eta = u[0].sin().powi(2);
        let pthr = self.max_pump * (1.0 + u[1].exp());
        let mut values = [eta, pthr, self.fixed_theta];
        let mut derivs = [(2.0 * u[0]).sin(), self.max_pump * u[1].exp(), 0.0];
        if self.free[2] {
            values[2] = FRAC_PI_2 * u[2].sin().powi(2);
            derivs[2] = FRAC_PI_2 * (2.0 * u[2]).sin();
        }
        (values, derivs)
    }

    fn unconstrained(&self, values: [f64; 3]) -> DVector<f64> {
        let mut u = vec![
            values[0].sqrt().asin(),
            (values[1] / self.max_pump - 1.0).ln(),
        ];
        if self.free[2] {
            u.push((values[2] / FRAC_PI_2).sqrt().asin());
        }
        DVector::from_vec(u)
    }
}

fn initial_guess(dataset: &Dataset) -> [f64; 3] {
    let deepest = dataset
        .points
        .iter()
        .map(|p| from_db(p.value_db))
        .fold(f64::INFINITY, f64::min);
    let eta0 = (1.0 - deepest).clamp(0.5, 0.999);
    [eta0, 1.3 * dataset.max_pump_power(), deg_to_rad(0.5)]
}

/// Free columns of the physical Jacobian.
fn free_columns(j: &DMatrix<f64>, free: [bool; 3]) -> DMatrix<f64> {
    let cols: Vec<usize> = (0..3).filter(|k| free[*k]).collect();
    j.select_columns(&cols)
}

/// Ratio of extreme singular values of the column-scaled Jacobian.
fn condition_number(j: &DMatrix<f64>, scales: &[f64]) -> f64 {
    let mut scaled = j.clone();
    for (k, s) in scales.iter().enumerate() {
        scaled.column_mut(k).scale_mut(*s);
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

const CONDITION_LIMIT: f64 = 1e10;

struct State {
    u: DVector<f64>,
    params: SqueezerParams,
    sigmas: DVector<f64>,
    residuals: DVector<f64>,
    chi2: f64,
}

/// Fits efficiency, threshold power and (unless fixed) phase jitter to the
/// dataset.
pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    dataset.validate()?;
    if let Some(theta) = config.fixed_phase_jitter {
        if !(0.0..FRAC_PI_2).contains(&theta) {
            return Err(Error::domain("fixed_phase_jitter", theta, "0 <= theta < pi/2"));
        }
    }
    if config.max_iterations == 0 {
        return Err(Error::domain("max_iterations", 0.0, ">= 1"));
    }
    let free = [true, true, config.fixed_phase_jitter.is_none()];
    let reparam = Reparam {
        max_pump: dataset.max_pump_power(),
        free,
        fixed_theta: config.fixed_phase_jitter.unwrap_or(0.0),
    };
    let obj = Objective {
        points: &dataset.points,
        cavity: dataset.cavity,
        domain: config.residual_domain,
    };
    let n_free = reparam.n_free();
    if dataset.points.len() <= n_free {
        return Err(Error::Dataset(format!(
            "{} points cannot constrain {n_free} parameters",
            dataset.points.len()
        )));
    }

    let evaluate = |u: DVector<f64>| -> Result<State> {
        let ([eta, pthr, theta], _) = reparam.physical(&u);
        let params = obj.params(eta, pthr, theta);
        let sigmas = obj.sigmas(&params)?;
        let residuals = obj.residuals_with(&params, &sigmas)?;
        let chi2 = residuals.norm_squared();
        if !chi2.is_finite() {
            return Err(Error::domain("chi_squared", chi2, "finite"));
        }
        Ok(State {
            u,
            params,
            sigmas,
            residuals,
            chi2,
        })
    };
    // Jacobian in the unconstrained coordinates.
    let u_jacobian = |state: &State| -> Result<DMatrix<f64>> {
        let phys = obj.jacobian_with(&state.params, &state.sigmas)?;
        let (_, derivs) = reparam.physical(&state.u);
        let mut ju = free_columns(&phys, free);
        let free_derivs: Vec<f64> = (0..3).filter(|k| free[*k]).map(|k| derivs[k]).collect();
        for (k, d) in free_derivs.iter().enumerate() {
            ju.column_mut(k).scale_mut(*d);
        }
        Ok(ju)
    };

    let mut start = initial_guess(dataset);
    start[2] = if free[2] { start[2] } else { reparam.fixed_theta };
    let mut state = evaluate(reparam.unconstrained(start))?;

    let j0 = free_columns(&obj.jacobian_with(&state.params, &state.sigmas)?, free);
    let scales: Vec<f64> = (0..3).filter(|k| free[*k]).map(|k| start[k]).collect();
    if condition_number(&j0, &scales) > CONDITION_LIMIT {
        return Err(Error::IllConditioned(
            "the data cannot separate the fitted parameters at the initial guess".into(),
        ));
    }

    let mut lambda = config.initial_damping;
    let mut ju = u_jacobian(&state)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        let gradient = ju.transpose() * &state.residuals;
        if state.chi2 == 0.0 || gradient.norm() == 0.0 {
            converged = true;
            break;
        }
        let normal = ju.transpose() * &ju;
        let diag_floor = 1e-12 * normal.diagonal().max().max(f64::MIN_POSITIVE);
        let mut damped = normal.clone();
        for k in 0..n_free {
            damped[(k, k)] += lambda * normal[(k, k)].max(diag_floor);
        }
        let step = match damped.cholesky() {
            Some(chol) => -chol.solve(&gradient),
            None => {
                lambda *= 10.0;
                continue;
            }
        };
        let step_norm = step.norm();
        let accepted = match evaluate(&state.u + &step) {
            Ok(trial) if trial.chi2 <= state.chi2 => Some(trial),
            _ => None,
        };
        match accepted {
            Some(trial) => {
                let rel = (state.chi2 - trial.chi2) / state.chi2;
                state = trial;
                ju = u_jacobian(&state)?;
                lambda = (lambda / 10.0).max(1e-15);
                if rel < config.chi2_rel_tolerance || step_norm < config.step_tolerance {
                    converged = true;
                    break;
                }
            }
            None => {
                lambda *= 10.0;
                if step_norm < config.step_tolerance || lambda > 1e30 {
                    converged = step_norm < config.step_tolerance;
                    break;
                }
            }
        }
    }

    let gradient_norm = (ju.transpose() * &state.residuals).norm();
    let phys = free_columns(&obj.jacobian_with(&state.params, &state.sigmas)?, free);
    let normal = phys.transpose() * &phys;
    let values = [
        state.params.efficiency,
        state.params.threshold_power,
        state.params.phase_jitter,
    ];
    let scales: Vec<f64> = (0..3)
        .filter(|k| free[*k])
        .map(|k| values[k].abs().max(1e-6))
        .collect();
    let ill_conditioned = condition_number(&phys, &scales) > CONDITION_LIMIT;
    let inverse = if ill_conditioned {
        normal
            .clone()
            .pseudo_inverse(1e-12 * normal.norm())
            .map_err(|e| Error::IllConditioned(e.to_string()))?
    } else {
        normal
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::IllConditioned("normal matrix is singular".into()))?
    };
    let inverse = (&inverse + inverse.transpose()) * 0.5;

    let dof = dataset.points.len() - n_free;
    let scale = if dof > 0 { state.chi2 / dof as f64 } else { 1.0 };
    let mut unscaled = Matrix3::zeros();
    let idx: Vec<usize> = (0..3).filter(|k| free[*k]).collect();
    for (a, &i) in idx.iter().enumerate() {
        for (b, &k) in idx.iter().enumerate() {
            unscaled[(i, k)] = inverse[(a, b)];
        }
    }
    let scaled = unscaled * scale;
    let to_array = |m: &Matrix3<f64>| -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = m[(i, k)];
            }
        }
        out
    };
    let covariance = to_array(&scaled);
    let max_pump = reparam.max_pump;
    let at_bound = [
        !(values[0] > 1e-6 && values[0] < 1.0 - 1e-9),
        values[1] <= max_pump * (1.0 + 1e-9),
        free[2] && !(values[2] > 1e-9 && values[2] < FRAC_PI_2 - 1e-9),
    ];

    Ok(FitResult {
        params: state.params,
        covariance,
        unscaled_covariance: to_array(&unscaled),
        std_errors: std::array::from_fn(|k| covariance[k][k].max(0.0).sqrt()),
        chi_squared: state.chi2,
        dof,
        converged,
        iterations,
        gradient_norm,
        at_bound,
        ill_conditioned,
        free,
    })
}

/// Standard errors `(eta, P_thr [W], theta [rad])` of a converged fit.
pub fn parameter_errors(result: &FitResult) -> Result<[f64; 3]> {
    if !result.converged {
        return Err(Error::NotConverged);
    }
    Ok(std::array::from_fn(|k| result.covariance[k][k].max(0.0).sqrt()))
}
