#![no_main]

use atomboson::FockState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(state) = FockState::from_json(text) {
        let back = FockState::from_json(&state.to_json()).expect("round trip");
        assert_eq!(back, state);
    }
});
