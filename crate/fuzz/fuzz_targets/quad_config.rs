#![no_main]

use koopman_core::quad_control::QuadConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = QuadConfig::from_toml(text) {
            cfg.params().expect("validated config has valid parameters");
            cfg.timing().substeps().expect("validated config has a consistent loop timing");
        }
    }
});
