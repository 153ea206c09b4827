#![no_main]

use libfuzzer_sys::fuzz_target;
use netslice::report::{parse_manifest, parse_summary};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_summary(text);
    if let Ok(m) = parse_manifest(text) {
        let _ = netslice::parse_config(&m.config_toml);
    }
});
