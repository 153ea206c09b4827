#![no_main]

use libfuzzer_sys::fuzz_target;
use netslice_milp::{parse_lp, write_lp};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = parse_lp(text) {
        // Anything we accept must survive a write/parse round trip unchanged.
        let written = write_lp(&model);
        let again = parse_lp(&written).expect("written LP parses");
        assert_eq!(write_lp(&again), written);
    }
});
