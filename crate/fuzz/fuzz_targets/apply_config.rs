#![no_main]

use gfft_core::config::ApplyConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ApplyConfig::from_json(text);
    }
});
