#![no_main]

use binding_core::report::parse_mode_arg;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Only parses: resolving a list argument would read from the file system.
    let _ = parse_mode_arg(text);
});
