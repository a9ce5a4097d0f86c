#![no_main]

use libfuzzer_sys::fuzz_target;
use opa_squeeze::cavity::{eigenmode, finesse, free_spectral_range};
use opa_squeeze::config::parse_cavity_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = parse_cavity_config(text) else {
        return;
    };
    let Ok(layout) = config.layout() else {
        return;
    };
    if let Ok(mode) = eigenmode(&layout) {
        assert!(mode.stability_parameter > 0.0 && mode.stability_parameter < 1.0);
    }
    let _ = free_spectral_range(&layout);
    let (r1, r2) = layout.mirror_reflectivities();
    let _ = finesse(r1, r2, config.round_trip_loss);
});
