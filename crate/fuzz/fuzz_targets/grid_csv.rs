#![no_main]

use gfft_core::grid::GridFunction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = GridFunction::read_csv(data) {
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let again = GridFunction::read_csv(out.as_slice()).unwrap();
        assert_eq!(f, again);
    }
});
