#![no_main]

use libfuzzer_sys::fuzz_target;
use qvm_core::isa::parse_cell_list;

fuzz_target!(|text: &str| {
    if let Ok(cells) = parse_cell_list(text) {
        let canonical = cells.iter().map(|c| format!("d{c}")).collect::<Vec<_>>().join(",");
        assert_eq!(parse_cell_list(&canonical), Ok(cells));
    }
});
