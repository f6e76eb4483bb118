#![no_main]

use atomboson::hom::MeasuredCounts;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(counts) = MeasuredCounts::from_json(text) {
        if let Ok(o) = counts.outcomes() {
            let sum: f64 = o.probabilities().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
});
