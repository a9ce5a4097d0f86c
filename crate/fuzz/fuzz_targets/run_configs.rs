#![no_main]

use libfuzzer_sys::fuzz_target;
use opa_squeeze::config::{
    parse_correct_config, parse_fit_config, parse_model_config, parse_spectrum_config, parse_synth_config,
};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(c) = parse_model_config(text) {
        let _ = c.squeezer.to_params();
    }
    if let Ok(c) = parse_spectrum_config(text) {
        let _ = c.squeezer.to_params();
        let _ = c.frequency.validate();
    }
    if let Ok(c) = parse_fit_config(text) {
        let _ = c.fit_config();
    }
    let _ = parse_correct_config(text);
    if let Ok(c) = parse_synth_config(text) {
        let _ = c.trace.validate();
        let _ = c.sweep_spec();
    }
});
