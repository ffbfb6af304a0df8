#![no_main]

use koopman_core::harness::overrides::{document_with_overrides, parse_override};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ov) = parse_override(text) {
        assert!(!ov.path.is_empty());
        let _ = document_with_overrides("", &[ov]);
    }
});
