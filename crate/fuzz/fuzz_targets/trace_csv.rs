#![no_main]

use libfuzzer_sys::fuzz_target;
use opa_squeeze::formats::{read_trace_csv, write_trace_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = read_trace_csv(text) {
        let again = read_trace_csv(&write_trace_csv(&table)).expect("re-read");
        assert_eq!(again.power_db, table.power_db);
        assert_eq!(again.abscissa, table.abscissa);
    }
});
