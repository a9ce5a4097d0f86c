//! Unit conversions used at the library's external boundaries.
//!
//! Internally everything is SI (watts, hertz, metres) with angles in radians
//! and variances normalised to vacuum = 1. Files and reports use milliwatts,
//! degrees and decibels.

use crate::error::{Error, Result};

/// Speed of light used throughout, in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

const DB_PER_NEPER: f64 = 10.0 / std::f64::consts::LN_10;

/// Linear variance (vacuum = 1) to decibels relative to vacuum.
pub fn to_db(v: f64) -> Result<f64> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::domain("variance", v, "finite and > 0"));
    }
    Ok(10.0 * v.log10())
}

/// Decibels relative to vacuum to linear variance.
pub fn from_db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Slope of `to_db` at `v`, i.e. d(dB)/dv.
pub(crate) fn db_slope(v: f64) -> f64 {
    DB_PER_NEPER / v
}

/// Converts a relative linear standard deviation to dB.
pub fn relative_sigma_to_db(rel: f64) -> f64 {
    DB_PER_NEPER * rel
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

/// Parses a decimal literal and scales it by `10^shift` without an
/// intermediate rounding step, so `"180"` with shift -3 yields exactly the
/// same double as parsing `"0.180"`.
pub fn parse_scaled(text: &str, shift: i32) -> Option<f64> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    // Rust's float parser rejects these anyway, but "inf"/"nan" must not
    // sneak through with an exponent suffix appended.
    if mantissa.is_empty()
        || !mantissa
            .bytes()
            .all(|b| b.is_ascii_digit() || b == b'.' || b == b'-' || b == b'+')
    {
        return None;
    }
    let total = exp.checked_add(shift)?;
    format!("{mantissa}e{total}").parse::<f64>().ok()
}

/// Renders `value * 10^shift` as a plain decimal string such that
/// `parse_scaled(&s, -shift) == Some(value)` bit for bit.
pub fn format_scaled(value: f64, shift: i32) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    // `{:e}` gives the shortest round-tripping digits.
    let sci = format!("{value:e}");
    let (mantissa, exp) = sci.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    // value = 0.d1d2d3... * 10^(exp + 1)
    let point = exp + shift + 1;
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    let n = digits.len() as i32;
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-point) as usize));
        out.push_str(&digits);
    } else if point >= n {
        out.push_str(&digits);
        out.extend(std::iter::repeat_n('0', (point - n) as usize));
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn db_reference_values() {
        assert_eq!(to_db(1.0).unwrap(), 0.0);
        assert!((to_db(0.0448).unwrap() + 13.487).abs() < 1e-3);
        assert!((to_db(95.4).unwrap() - 19.795).abs() < 1e-3);
        assert!(to_db(0.0).is_err());
        assert!(to_db(-1.0).is_err());
    }

    #[test]
    fn scaled_formatting() {
        assert_eq!(format_scaled(0.18, 3), "180");
        assert_eq!(format_scaled(0.0054, 3), "5.4");
        assert_eq!(format_scaled(1.25e-7, 3), "0.000125");
        assert_eq!(format_scaled(-0.5, 3), "-500");
        assert_eq!(parse_scaled("180", -3), Some(0.18));
        assert_eq!(parse_scaled("1.8e2", -3), Some(0.18));
        assert_eq!(parse_scaled("inf", -3), None);
        assert_eq!(parse_scaled("", -3), None);
    }

    proptest! {
        #[test]
        fn db_round_trip(v in 1e-6f64..1e6) {
            let back = from_db(to_db(v).unwrap());
            prop_assert!(((back - v) / v).abs() <= 1e-12);
        }

        #[test]
        fn scaled_round_trip_is_exact(v in proptest::num::f64::NORMAL) {
            let s = format_scaled(v, 3);
            prop_assert_eq!(parse_scaled(&s, -3), Some(v));
        }
    }
}
