#![no_main]

use libfuzzer_sys::fuzz_target;
use opa_squeeze::units::{format_scaled, parse_scaled};

// First byte selects the decimal shift, the rest is the literal.
fuzz_target!(|data: &[u8]| {
    let Some((&shift, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let shift = i32::from(shift as i8 % 16);
    if let Some(v) = parse_scaled(text, shift) {
        if v.is_finite() {
            let back = parse_scaled(&format_scaled(v, -shift), shift);
            assert_eq!(back.map(f64::to_bits), Some(v.to_bits()), "{text:?} shift {shift}");
        }
    }
});
