#![no_main]

use binding_core::report::{error_record, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    match RunConfig::from_json(text) {
        Ok(cfg) => {
            let back = RunConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back.hash(), cfg.hash());
        }
        Err(e) => {
            let rec = error_record(&e);
            assert!(rec["exit_code"].as_i64().is_some_and(|c| c >= 2));
        }
    }
});
