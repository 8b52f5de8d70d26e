#![no_main]

use gfft_core::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json(text) {
            let round = serde_json::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::from_json(&round).unwrap(), cfg);
        }
    }
});
