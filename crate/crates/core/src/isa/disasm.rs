use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{Opcode, Operand, Program};

/// Renders a program as canonical lowercase source.
///
/// Existing labels are kept. Any address operand without a label gets a
/// synthetic `L<n>` label, so the text reassembles to an equal program
/// under the same settings.
pub fn disassemble(program: &Program) -> String {
    let len = program.len();
    let mut names: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (name, &index) in program.labels() {
        names.entry(index).or_default().push(name);
    }

    let taken: BTreeSet<&str> = program.labels().keys().map(String::as_str).collect();
    let mut synthetic: BTreeMap<usize, String> = BTreeMap::new();
    for instr in program.instructions() {
        for op in instr.operands() {
            if let Operand::Address(a) = *op {
                if !names.contains_key(&a) && !synthetic.contains_key(&a) {
                    let mut name = format!("L{a}");
                    while taken.contains(name.as_str()) {
                        name.push('_');
                    }
                    synthetic.insert(a, name);
                }
            }
        }
    }
    let label_of = |a: usize| -> &str {
        match names.get(&a) {
            Some(list) => list[0],
            None => &synthetic[&a],
        }
    };

    let mut out = String::new();
    for index in 0..=len {
        if let Some(list) = names.get(&index) {
            for name in list {
                let _ = writeln!(out, "{name}:");
            }
        }
        if let Some(name) = synthetic.get(&index) {
            let _ = writeln!(out, "{name}:");
        }
        let Some(instr) = program.instructions().get(index) else {
            break;
        };
        out.push_str("    ");
        out.push_str(instr.opcode().mnemonic());
        for op in instr.operands() {
            out.push(' ');
            match *op {
                Operand::CellRef(c) => {
                    let _ = write!(out, "d{c}");
                }
                Operand::IntImm(v) => {
                    let _ = write!(out, "{v}");
                }
                Operand::FloatImm(x) => out.push_str(&format_real(x)),
                Operand::Address(a) => out.push_str(label_of(a)),
            }
        }
        if instr.opcode() == Opcode::Stop || instr.opcode() == Opcode::Jump {
            // visual break after unconditional control transfer
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Shortest decimal that reads back to the same value, always with a
/// fractional part and never in exponent form.
fn format_real(x: f64) -> String {
    let mut s = format!("{x}");
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}
