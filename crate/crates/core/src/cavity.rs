//! Standing-wave resonator geometry: ray-transfer matrices, the Gaussian
//! eigenmode and the spectral figures (FSR, finesse, linewidth).
//!
//! Matrices use the reduced-angle convention: a ray is `(y, n * theta)`, so a
//! slab of length `d` and index `n` propagates by `d / n`, a flat dielectric
//! interface is the identity and a mirror of radius `R` immersed in index `n`
//! acts like a mirror of radius `R / n` in vacuum.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::CavityConstants;
use crate::units::SPEED_OF_LIGHT;

/// One element of a standing-wave layout, listed from the coupler outwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    Gap {
        length_m: f64,
    },
    Slab {
        length_m: f64,
        refractive_index: f64,
    },
    /// Mirror; `roc_m` is positive when concave towards the cavity and
    /// `None` for a planar mirror.
    CurvedMirror {
        roc_m: Option<f64>,
        power_reflectivity: f64,
        #[serde(default = "unit_index")]
        immersed_index: f64,
    },
    FlatInterface,
}

fn unit_index() -> f64 {
    1.0
}

impl Element {
    pub fn mirror(roc_m: f64, power_reflectivity: f64, immersed_index: f64) -> Self {
        Element::CurvedMirror {
            roc_m: Some(roc_m),
            power_reflectivity,
            immersed_index,
        }
    }

    pub fn flat_mirror(power_reflectivity: f64) -> Self {
        Element::CurvedMirror {
            roc_m: None,
            power_reflectivity,
            immersed_index: 1.0,
        }
    }

    fn is_mirror(&self) -> bool {
        matches!(self, Element::CurvedMirror { .. })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Element::Gap { length_m } => positive_length(length_m),
            Element::Slab {
                length_m,
                refractive_index,
            } => {
                positive_length(length_m)?;
                if !(refractive_index >= 1.0 && refractive_index.is_finite()) {
                    return Err(Error::Layout(format!("refractive index {refractive_index} must be >= 1")));
                }
                Ok(())
            }
            Element::CurvedMirror {
                roc_m,
                power_reflectivity,
                immersed_index,
            } => {
                if let Some(r) = roc_m {
                    if r == 0.0 || !r.is_finite() {
                        return Err(Error::Layout(format!("mirror radius of curvature {r} must be finite and non-zero")));
                    }
                }
                if !(power_reflectivity > 0.0 && power_reflectivity <= 1.0) {
                    return Err(Error::Layout(format!(
                        "mirror reflectivity {power_reflectivity} must lie in (0, 1]"
                    )));
                }
                if !(immersed_index >= 1.0 && immersed_index.is_finite()) {
                    return Err(Error::Layout(format!("immersed index {immersed_index} must be >= 1")));
                }
                Ok(())
            }
            Element::FlatInterface => Ok(()),
        }
    }
}

fn positive_length(length: f64) -> Result<()> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Layout(format!("element length {length} must be finite and > 0")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityLayout {
    pub elements: Vec<Element>,
    /// Vacuum wavelength, metres.
    pub wavelength_m: f64,
}

/// A propagation segment along the forward pass.
#[derive(Debug, Clone, Copy)]
struct Segment {
    physical: f64,
    index: f64,
}

impl Segment {
    fn reduced(&self) -> f64 {
        self.physical / self.index
    }
}

impl CavityLayout {
    pub fn new(elements: Vec<Element>, wavelength_m: f64) -> Result<Self> {
        let layout = CavityLayout { elements, wavelength_m };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(Error::Layout(format!("wavelength {} must be > 0", self.wavelength_m)));
        }
        let n = self.elements.len();
        if n < 3 {
            return Err(Error::Layout("a layout needs two mirrors and at least one gap or slab".into()));
        }
        if !self.elements[0].is_mirror() || !self.elements[n - 1].is_mirror() {
            return Err(Error::Layout("first and last elements must be mirrors".into()));
        }
        if self.elements[1..n - 1].iter().any(Element::is_mirror) {
            return Err(Error::Layout("only the first and last elements may be mirrors".into()));
        }
        if self.segments().is_empty() {
            return Err(Error::Layout("layout has no propagation length".into()));
        }
        self.elements.iter().try_for_each(Element::validate)
    }

    fn segments(&self) -> Vec<Segment> {
        self.elements
            .iter()
            .filter_map(|e| match *e {
                Element::Gap { length_m } => Some(Segment {
                    physical: length_m,
                    index: 1.0,
                }),
                Element::Slab {
                    length_m,
                    refractive_index,
                } => Some(Segment {
                    physical: length_m,
                    index: refractive_index,
                }),
                _ => None,
            })
            .collect()
    }

    /// Reflection matrices of the coupler (first) and end (last) mirrors.
    fn mirror_matrices(&self) -> (Matrix2<f64>, Matrix2<f64>) {
        let first = self.elements.first().map(mirror_matrix).unwrap_or_else(Matrix2::identity);
        let last = self.elements.last().map(mirror_matrix).unwrap_or_else(Matrix2::identity);
        (first, last)
    }

    /// Power reflectivities of the coupler and end mirrors.
    pub fn mirror_reflectivities(&self) -> (f64, f64) {
        let refl = |e: Option<&Element>| match e {
            Some(Element::CurvedMirror { power_reflectivity, .. }) => *power_reflectivity,
            _ => 1.0,
        };
        (refl(self.elements.first()), refl(self.elements.last()))
    }

    /// Physical distance between the two mirrors.
    pub fn physical_length(&self) -> f64 {
        self.segments().iter().map(|s| s.physical).sum()
    }

    /// Optical round-trip length `2 * sum(n_i d_i)`.
    pub fn optical_round_trip_length(&self) -> f64 {
        2.0 * self.segments().iter().map(|s| s.physical * s.index).sum::<f64>()
    }

    /// Constants for the variance model, taking the coupler transmissivity
    /// from the first mirror and folding the end mirror's transmission into
    /// `extra_loss`.
    pub fn cavity_constants(&self, extra_loss: f64) -> Result<CavityConstants> {
        self.validate()?;
        let (r1, r2) = self.mirror_reflectivities();
        CavityConstants::new(1.0 - r1, extra_loss + (1.0 - r2), self.optical_round_trip_length())
    }

    /// The same cavity seen from the other end.
    pub fn reversed(&self) -> Self {
        let mut elements = self.elements.clone();
        elements.reverse();
        CavityLayout {
            elements,
            wavelength_m: self.wavelength_m,
        }
    }
}

fn mirror_matrix(element: &Element) -> Matrix2<f64> {
    match *element {
        Element::CurvedMirror {
            roc_m: Some(r),
            immersed_index,
            ..
        } => Matrix2::new(1.0, 0.0, -2.0 * immersed_index / r, 1.0),
        _ => Matrix2::identity(),
    }
}

fn propagation(reduced_length: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, reduced_length, 0.0, 1.0)
}

/// Round-trip ABCD matrix for a reference plane `start_m` metres (physical
/// path) in front of the coupler, travelling towards the end mirror.
pub fn round_trip_matrix(layout: &CavityLayout, start_m: f64) -> Result<Matrix2<f64>> {
    layout.validate()?;
    let segments = layout.segments();
    let total: f64 = segments.iter().map(|s| s.physical).sum();
    if !(0.0..=total).contains(&start_m) {
        return Err(Error::Layout(format!(
            "reference plane {start_m} m lies outside the cavity (length {total} m)"
        )));
    }
    // Reduced distances before and after the reference plane.
    let mut before = 0.0;
    let mut after = 0.0;
    let mut walked = 0.0;
    for seg in &segments {
        let in_before = (start_m - walked).clamp(0.0, seg.physical);
        before += in_before / seg.index;
        after += (seg.physical - in_before) / seg.index;
        walked += seg.physical;
    }
    let (coupler, end) = layout.mirror_matrices();
    let full = before + after;
    // Rightmost factor acts first.
    Ok(propagation(before) * coupler * propagation(full) * end * propagation(after))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenmodeResult {
    /// 1/e^2 intensity radius at the waist, metres.
    pub waist_radius: f64,
    /// Physical distance of the waist from the coupler, metres.
    pub waist_position: f64,
    /// `(A + D + 2) / 4` of the round trip; equals `g1 g2` of the equivalent
    /// two-mirror resonator. Stable inside (0, 1).
    pub stability_parameter: f64,
    /// Rayleigh range in the medium containing the waist, metres.
    pub rayleigh_range: f64,
    /// Beam radius on the coupler and on the end mirror, metres.
    pub coupler_spot_radius: f64,
    pub end_spot_radius: f64,
}

/// Self-consistent reduced q parameter at the coupler (just after
/// reflection, heading into the cavity).
pub fn coupler_q(layout: &CavityLayout) -> Result<Complex64> {
    let m = round_trip_matrix(layout, 0.0)?;
    let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let stability = (a + d + 2.0) / 4.0;
    let half_trace = (a + d) / 2.0;
    if !(stability > 0.0 && stability < 1.0) || b == 0.0 {
        return Err(Error::Unstable { stability });
    }
    // 1/q = (D - A) / 2B - i sqrt(1 - m^2) / |B|
    let inv_q = Complex64::new((d - a) / (2.0 * b), -(1.0 - half_trace * half_trace).sqrt() / b.abs());
    Ok(inv_q.inv())
}

/// Applies an ABCD matrix to a q parameter.
pub fn transform_q(m: &Matrix2<f64>, q: Complex64) -> Complex64 {
    (q * m[(0, 0)] + m[(0, 1)]) / (q * m[(1, 0)] + m[(1, 1)])
}

fn spot_radius(q_reduced: Complex64, wavelength: f64) -> f64 {
    // Im(1/q_reduced) = -lambda0 / (pi w^2)
    (-wavelength / (std::f64::consts::PI * q_reduced.inv().im)).sqrt()
}

/// Gaussian eigenmode of the resonator.
pub fn eigenmode(layout: &CavityLayout) -> Result<EigenmodeResult> {
    let m = round_trip_matrix(layout, 0.0)?;
    let stability = (m[(0, 0)] + m[(1, 1)] + 2.0) / 4.0;
    let q0 = coupler_q(layout)?;
    let segments = layout.segments();
    let lambda = layout.wavelength_m;

    // Walk the forward pass looking for the plane where Re(q) = 0.
    let mut q = q0;
    let mut offset = 0.0;
    let mut located = None;
    for (k, seg) in segments.iter().enumerate() {
        let z = -q.re;
        let last = k + 1 == segments.len();
        if (k == 0 && z < 0.0) || (z >= 0.0 && z <= seg.reduced()) || (last && z > seg.reduced()) {
            located = Some((offset + z * seg.index, q.im * seg.index));
            break;
        }
        q += seg.reduced();
        offset += seg.physical;
    }
    let (waist_position, rayleigh_range) = located.expect("layout has at least one segment");
    let waist_q = Complex64::new(0.0, q0.im);
    let full: f64 = segments.iter().map(Segment::reduced).sum();
    let end_q = q0 + full;

    Ok(EigenmodeResult {
        waist_radius: spot_radius(waist_q, lambda),
        waist_position,
        stability_parameter: stability,
        rayleigh_range,
        coupler_spot_radius: spot_radius(q0, lambda),
        end_spot_radius: spot_radius(end_q, lambda),
    })
}

/// Free spectral range `c / (optical round-trip length)`, Hz.
pub fn free_spectral_range(layout: &CavityLayout) -> Result<f64> {
    layout.validate()?;
    Ok(SPEED_OF_LIGHT / layout.optical_round_trip_length())
}

/// Airy finesse for mirror power reflectivities `r1`, `r2` and additional
/// round-trip power loss.
pub fn finesse(r1: f64, r2: f64, loss: f64) -> Result<f64> {
    if !(r1 > 0.0 && r1 <= 1.0) {
        return Err(Error::domain("r1", r1, "0 < r1 <= 1"));
    }
    if !(r2 > 0.0 && r2 <= 1.0) {
        return Err(Error::domain("r2", r2, "0 < r2 <= 1"));
    }
    if !(0.0..1.0).contains(&loss) {
        return Err(Error::domain("loss", loss, "0 <= loss < 1"));
    }
    let rho = (r1 * r2 * (1.0 - loss)).sqrt();
    if rho >= 1.0 {
        return Err(Error::domain("round-trip amplitude factor", rho, "< 1 (lossless cavity has no finite finesse)"));
    }
    Ok(std::f64::consts::PI * rho.sqrt() / (1.0 - rho))
}

/// Full width at half maximum of the Airy resonance, Hz.
pub fn fwhm_linewidth(layout: &CavityLayout, r1: f64, r2: f64, loss: f64) -> Result<f64> {
    Ok(free_spectral_range(layout)? / finesse(r1, r2, loss)?)
}

/// Ready-made layouts of the two 1550 nm resonators used as reference cases.
pub mod presets {
    use super::{CavityLayout, Element};

    pub const PPKTP_INDEX_1550: f64 = 1.816;
    pub const WAVELENGTH_1550: f64 = 1550e-9;

    /// Hemilithic squeezer: 25 mm coupler, 23 mm air gap, 9.3 mm PPKTP
    /// crystal whose curved (12 mm) back face is the end mirror.
    pub fn hemilithic_opa() -> CavityLayout {
        CavityLayout {
            elements: vec![
                Element::mirror(0.025, 0.90, 1.0),
                Element::Gap { length_m: 0.023 },
                Element::FlatInterface,
                Element::Slab {
                    length_m: 0.0093,
                    refractive_index: PPKTP_INDEX_1550,
                },
                Element::mirror(0.012, 1.0, PPKTP_INDEX_1550),
            ],
            wavelength_m: WAVELENGTH_1550,
        }
    }

    /// Doubler: two 25 mm mirrors with a 10 mm PPKTP crystal centred
    /// between 20 mm air gaps.
    pub fn linear_shg() -> CavityLayout {
        CavityLayout {
            elements: vec![
                Element::mirror(0.025, 0.90, 1.0),
                Element::Gap { length_m: 0.020 },
                Element::FlatInterface,
                Element::Slab {
                    length_m: 0.010,
                    refractive_index: PPKTP_INDEX_1550,
                },
                Element::FlatInterface,
                Element::Gap { length_m: 0.020 },
                Element::mirror(0.025, 1.0, 1.0),
            ],
            wavelength_m: WAVELENGTH_1550,
        }
    }
}
