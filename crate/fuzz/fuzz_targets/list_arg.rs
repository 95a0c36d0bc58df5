#![no_main]

use binding_core::report::parse_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_list::<f64>(text, "cutoffs");
    if let Ok(v) = parse_list::<u32>(text, "N_list") {
        assert!(!v.is_empty());
    }
});
