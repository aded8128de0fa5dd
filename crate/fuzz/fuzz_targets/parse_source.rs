#![no_main]

use libfuzzer_sys::fuzz_target;
use qvm_core::isa::{disassemble, validate, Assembler};

fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else {
        return;
    };
    let asm = Assembler::new()
        .define("NUMBER1", 21)
        .define("NUMBER2", 2)
        .define("ITERATIONS", 2);
    let Ok(program) = asm.parse(source) else {
        return;
    };
    let _ = validate(&program);
    let text = disassemble(&program);
    let again = Assembler::new()
        .settings(*program.settings())
        .parse(&text)
        .unwrap_or_else(|e| panic!("disassembly does not reparse: {e}\n{text}"));
    assert_eq!(program, again, "{text}");
    assert_eq!(text, disassemble(&again));
});
