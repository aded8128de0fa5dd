use super::{Diagnostic, Opcode, Program};

/// Tolerance on `|x + iy| = 1` before a phase is reported as non-unitary.
const UNIT_TOLERANCE: f64 = 1e-12;

/// Static checks on an assembled program. Never fails; problems are
/// reported as diagnostics.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let settings = program.settings();
    let width = i64::from(settings.word_width);

    for (index, instr) in program.instructions().iter().enumerate() {
        let line = program.line_of(index);
        match instr.opcode() {
            Opcode::Phase => {
                let magnitude = instr.real(0).hypot(instr.real(1));
                if (magnitude - 1.0).abs() > UNIT_TOLERANCE {
                    out.push(Diagnostic::warning(
                        line,
                        1,
                        format!("non-unit phase factor magnitude {magnitude}"),
                    ));
                }
            }
            Opcode::Havoc => {
                let (lo, hi) = (instr.int(1), instr.int(2));
                if lo < 0 || lo > hi || hi > width {
                    out.push(Diagnostic::error(
                        line,
                        1,
                        format!("havoc bit range [{lo}, {hi}) is not within [0, {width}]"),
                    ));
                } else if lo == hi {
                    out.push(Diagnostic::warning(
                        line,
                        1,
                        format!("havoc range [{lo}, {hi}) is empty"),
                    ));
                }
            }
            Opcode::HavocB => {
                let q = instr.int(0);
                let qubits = width.saturating_mul(settings.cell_count as i64);
                if q < 0 || q >= qubits {
                    out.push(Diagnostic::error(
                        line,
                        1,
                        format!("data qubit {q} is out of range ({qubits} qubits)"),
                    ));
                }
            }
            _ => {}
        }
    }

    if let Some(index) = falls_off_end(program) {
        out.push(Diagnostic::warning(
            program.line_of(index),
            1,
            "execution can fall through past the end of the program",
        ));
    }
    out
}

/// Index of a reachable instruction whose fall-through successor is the
/// end of the program.
fn falls_off_end(program: &Program) -> Option<usize> {
    let len = program.len();
    if len == 0 {
        return None;
    }
    let mut reachable = vec![false; len];
    let mut work = vec![0usize];
    while let Some(pc) = work.pop() {
        if pc >= len || reachable[pc] {
            continue;
        }
        reachable[pc] = true;
        match program.instructions()[pc].successors(pc) {
            Some(next) => work.extend(next),
            // computed jump: anything may run
            None => reachable.iter_mut().for_each(|r| *r = true),
        }
    }
    let last = len - 1;
    let advances = program.instructions()[last]
        .successors(last)
        .is_some_and(|next| next.contains(&len));
    (reachable[last] && advances).then_some(last)
}
