#![no_main]

use std::path::Path;

use gfft_core::config::FunctionalSpec;
use gfft_core::grid::TimeGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<FunctionalSpec>(data) else {
        return;
    };
    let grid = TimeGrid::new(1.0, 32).unwrap();
    // CSV weights point nowhere, so they fail to resolve
    if let Ok(f) = spec.resolve(grid, Path::new("/nonexistent")) {
        let _ = f.eval_coords(&vec![0.0; f.arity()]);
    }
});
