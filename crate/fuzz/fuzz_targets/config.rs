#![no_main]

use libfuzzer_sys::fuzz_target;
use netslice::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sc) = parse_config(text) {
        let echo = sc.resolved_toml();
        let again = parse_config(&echo).expect("resolved config parses");
        assert_eq!(again.config, sc.config);
    }
});
