#![no_main]

use libfuzzer_sys::fuzz_target;
use opa_squeeze::formats::{read_dataset_csv, write_dataset_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = read_dataset_csv(text) {
        // Anything accepted must survive a write/read cycle unchanged.
        let again = read_dataset_csv(&write_dataset_csv(&file.points, &file.comments)).expect("re-read");
        assert_eq!(again.points, file.points);
    }
});
