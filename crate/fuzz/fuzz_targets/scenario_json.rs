#![no_main]

use atomboson::lossmodel::{r_nisq, r_photonic};
use atomboson::RateScenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sc) = RateScenario::from_json(text) {
        for n in [2, 10, 41, 60] {
            if let Ok(r) = r_nisq(&sc.atomic, n) {
                assert!(r >= 0.0);
            }
            assert!(r_photonic(&sc.photonic, n) >= 0.0);
        }
    }
});
