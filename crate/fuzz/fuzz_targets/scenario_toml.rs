#![no_main]

use koopman_core::harness::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::from_toml(text) {
            let again = ScenarioConfig::from_toml(&cfg.to_toml().expect("valid config serializes")).expect("round trip parses");
            assert_eq!(again.truncations, cfg.truncations);
        }
    }
});
