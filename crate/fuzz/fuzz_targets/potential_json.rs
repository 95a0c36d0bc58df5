#![no_main]

use binding_core::lattice::Momentum;
use binding_core::PotentialSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = PotentialSpec::from_json(text) {
        // Accepted specs round-trip and evaluate to finite, nonnegative values.
        assert_eq!(PotentialSpec::from_json(&spec.to_json()).unwrap(), spec);
        let dim = spec.table_dim().unwrap_or(1);
        let v = spec.vhat(&Momentum::zero(dim));
        assert!(v.is_finite() && v >= 0.0);
    }
});
