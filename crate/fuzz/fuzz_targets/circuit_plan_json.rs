#![no_main]

use atomboson::CircuitPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(plan) = CircuitPlan::from_json(text) {
        plan.validate().expect("parsed plans are valid");
        if plan.m <= 64 {
            let _ = atomboson::interferometer::reconstruct(&plan);
        }
    }
});
