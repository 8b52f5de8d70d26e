#![no_main]

use gfft_core::algebra::{is_reduced, word_reduce};
use gfft_core::config::parse_word;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(w) = parse_word(text, 4) {
            let r = word_reduce(&w);
            assert!(is_reduced(&r));
            assert_eq!(word_reduce(&r), r);
            assert!(word_reduce(&w.concat(&w.inverse())).is_empty());
        }
    }
});
