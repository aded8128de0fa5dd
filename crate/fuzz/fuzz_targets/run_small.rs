#![no_main]

use libfuzzer_sys::fuzz_target;
use qvm_core::engine::{run, RunLimits};
use qvm_core::isa::Assembler;

// Small machines only: 3-bit words and 4 cells bound the state space.
fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(program) = Assembler::new().word_width(3).cell_count(4).max_steps(64).parse(source) else {
        return;
    };
    let out = run(&program, RunLimits::for_program(&program));
    assert!(out.steps <= 64);
    assert!(out.state.entries().windows(2).all(|w| w[0].0 < w[1].0));
});
