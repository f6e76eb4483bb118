#![no_main]

use atomboson::ModeUnitary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(u) = ModeUnitary::from_json(text) {
        assert!(u.unitarity_deviation() <= 1e-10);
        ModeUnitary::from_json(&u.to_json()).expect("round trip");
    }
});
