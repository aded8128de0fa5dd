#![no_main]

use libfuzzer_sys::fuzz_target;
use qvm_core::isa::parse_define;

fuzz_target!(|text: &str| {
    if let Ok((name, value)) = parse_define(text) {
        assert_eq!(parse_define(&format!("{name}={value}")), Ok((name, value)));
    }
});
