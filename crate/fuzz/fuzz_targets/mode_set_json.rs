#![no_main]

use binding_core::ModeSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(modes) = ModeSet::from_json(text) {
        assert!(modes.iter().all(|k| !k.is_zero() && k.dim() == modes.dim()));
        let back = ModeSet::from_json(&modes.to_json()).unwrap();
        assert_eq!(back.modes(), modes.modes());
    }
});
