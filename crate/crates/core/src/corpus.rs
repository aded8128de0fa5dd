//! Example programs shipped with the crate.

use crate::isa::{Assembler, Program};

/// Nondeterministic multiplication through a superposed program counter.
pub const LISTING1: &str = include_str!("../programs/listing1.qasm");
/// Grover divisor search with its loop test inverted. Needs `NUMBER1` and
/// `NUMBER2`. Its loop exits while the counter is still nonzero.
pub const LISTING2_FAITHFUL: &str = include_str!("../programs/listing2_faithful.qasm");
/// Grover divisor search with a countdown loop and one pinned iteration.
pub const GROVER_FIXED: &str = include_str!("../programs/grover_fixed.qasm");
/// As [`GROVER_FIXED`] with the iteration count taken from `ITERATIONS`.
pub const GROVER_ITERATIONS: &str = include_str!("../programs/grover_iterations.qasm");
/// Classical factoring by trial division. Needs `NUMBER1`.
pub const TRIAL_DIVISION: &str = include_str!("../programs/trial_division.qasm");
/// Three-cell variant of [`LISTING1`] that fits the dense simulator at
/// 5-bit words.
pub const LISTING1_COMPACT: &str = include_str!("../programs/listing1_compact.qasm");

/// Identifier bindings a program needs to assemble.
pub type Defines = Vec<(&'static str, i64)>;

/// Every shipped program as `(file name, source, defines)`.
pub fn all() -> Vec<(&'static str, &'static str, Defines)> {
    vec![
        ("listing1.qasm", LISTING1, vec![]),
        (
            "listing2_faithful.qasm",
            LISTING2_FAITHFUL,
            vec![("NUMBER1", 15), ("NUMBER2", 2)],
        ),
        ("grover_fixed.qasm", GROVER_FIXED, vec![("NUMBER1", 21), ("NUMBER2", 2)]),
        (
            "grover_iterations.qasm",
            GROVER_ITERATIONS,
            vec![("NUMBER1", 15), ("NUMBER2", 2), ("ITERATIONS", 3)],
        ),
        ("trial_division.qasm", TRIAL_DIVISION, vec![("NUMBER1", 15)]),
        ("listing1_compact.qasm", LISTING1_COMPACT, vec![]),
    ]
}

pub fn listing1() -> Program {
    Assembler::new().parse(LISTING1).expect("listing1 assembles")
}

/// Number of candidate bits for factoring `n`: `ceil(log2(max(2, isqrt(n))))`.
pub fn candidate_bits(n: u64) -> u32 {
    let root = n.isqrt().max(2);
    u64::BITS - (root - 1).leading_zeros()
}

pub fn listing2_faithful(number: u64, bits: u32) -> Program {
    Assembler::new()
        .define("NUMBER1", number as i64)
        .define("NUMBER2", i64::from(bits))
        .parse(LISTING2_FAITHFUL)
        .expect("listing2 assembles")
}

pub fn grover_fixed(number: u64, bits: u32) -> Program {
    Assembler::new()
        .define("NUMBER1", number as i64)
        .define("NUMBER2", i64::from(bits))
        .parse(GROVER_FIXED)
        .expect("grover_fixed assembles")
}

pub fn grover_iterations(number: u64, bits: u32, iterations: u32) -> Program {
    Assembler::new()
        .define("NUMBER1", number as i64)
        .define("NUMBER2", i64::from(bits))
        .define("ITERATIONS", i64::from(iterations))
        .parse(GROVER_ITERATIONS)
        .expect("grover_iterations assembles")
}

pub fn trial_division(number: u64) -> Program {
    Assembler::new()
        .define("NUMBER1", number as i64)
        .parse(TRIAL_DIVISION)
        .expect("trial_division assembles")
}
