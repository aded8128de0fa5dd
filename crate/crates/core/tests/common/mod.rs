//! Test-side oracles: a random program generator, a plain one-configuration
//! interpreter and brute-force number theory. None of this calls into the
//! engine.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use qvm_core::isa::{Instruction, Opcode, Operand, Settings, Slot};
use qvm_core::Program;
use rand::Rng;

/// Shape of generated programs.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_cells: usize,
    pub max_width: u32,
    pub max_len: usize,
    pub quantum: bool,
}

impl Shape {
    pub const SMALL: Shape = Shape {
        max_cells: 4,
        max_width: 3,
        max_len: 30,
        quantum: true,
    };
}

const PHASES: [(f64, f64); 6] = [
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (0.6, 0.8),
    (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    (0.5, 0.0),
];

/// A random program ending in `stop`. Division and remainder only ever
/// divide by a nonzero immediate.
pub fn random_program<R: Rng>(rng: &mut R, shape: Shape) -> Program {
    let cells = rng.gen_range(1..=shape.max_cells);
    let width = rng.gen_range(1..=shape.max_width);
    let len = rng.gen_range(2..=shape.max_len);
    let modulus = 1i64 << width;
    let opcodes: Vec<Opcode> = Opcode::ALL
        .iter()
        .copied()
        .filter(|op| shape.quantum || !op.is_quantum())
        .collect();

    let mut instructions = Vec::with_capacity(len);
    for _ in 0..len - 1 {
        let op = opcodes[rng.gen_range(0..opcodes.len())];
        let operands = match op {
            Opcode::Havoc => {
                let lo = rng.gen_range(0..=i64::from(width));
                let hi = rng.gen_range(lo..=i64::from(width));
                vec![
                    Operand::CellRef(rng.gen_range(0..cells)),
                    Operand::IntImm(lo),
                    Operand::IntImm(hi),
                ]
            }
            Opcode::Phase => {
                let (x, y) = PHASES[rng.gen_range(0..PHASES.len())];
                vec![Operand::FloatImm(x), Operand::FloatImm(y)]
            }
            Opcode::HavocB => vec![Operand::IntImm(rng.gen_range(0..cells as i64 * i64::from(width)))],
            _ => op
                .signature()
                .iter()
                .enumerate()
                .map(|(i, slot)| match (op, i, slot) {
                    (Opcode::Div | Opcode::Mod, 1, _) => Operand::IntImm(rng.gen_range(1..modulus)),
                    (_, _, Slot::Source) if rng.gen_bool(0.5) => Operand::CellRef(rng.gen_range(0..cells)),
                    (_, _, Slot::Source | Slot::Imm) => Operand::IntImm(rng.gen_range(-2..modulus + 2)),
                    (_, _, Slot::Cell) => Operand::CellRef(rng.gen_range(0..cells)),
                    (_, _, Slot::Target) => Operand::Address(rng.gen_range(0..len)),
                    (_, _, Slot::Real) => unreachable!("only phase takes reals"),
                })
                .collect(),
        };
        instructions.push(Instruction::new(op, operands).expect("generator respects signatures"));
    }
    instructions.push(Instruction::new(Opcode::Stop, vec![]).unwrap());

    let settings = Settings {
        word_width: width,
        cell_count: cells,
        max_steps: 200,
    };
    Program::new(instructions, BTreeMap::new(), settings).expect("generator respects ranges")
}

/// Final state of a classical run on the plain interpreter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainRun {
    pub pc: usize,
    pub cells: Vec<u64>,
    pub steps: u64,
    pub halted: bool,
}

/// Runs a program without quantum instructions on one configuration.
/// Returns `None` on any fault.
pub fn plain_run(program: &Program, max_steps: u64) -> Option<PlainRun> {
    let settings = program.settings();
    let mask = settings.word_mask();
    let len = program.len();
    let mut cells = vec![0u64; settings.cell_count];
    let mut pc = 0usize;
    let mut steps = 0;
    let wrap = |v: i64| (v as u64) & mask;
    loop {
        let instr = &program.instructions()[pc];
        if instr.opcode() == Opcode::Stop {
            return Some(PlainRun {
                pc,
                cells,
                steps,
                halted: true,
            });
        }
        if steps == max_steps {
            return Some(PlainRun {
                pc,
                cells,
                steps,
                halted: false,
            });
        }
        let ops = instr.operands();
        let val = |cells: &[u64], op: &Operand| match *op {
            Operand::CellRef(c) => cells[c],
            Operand::IntImm(v) => wrap(v),
            Operand::Address(a) => wrap(a as i64),
            Operand::FloatImm(_) => panic!("real in integer slot"),
        };
        let cell = |op: &Operand| match *op {
            Operand::CellRef(c) => c,
            _ => panic!("expected a cell"),
        };
        let addr = |op: &Operand| match *op {
            Operand::Address(a) => a,
            _ => panic!("expected an address"),
        };
        let mut next = pc + 1;
        match instr.opcode() {
            Opcode::Add => cells[cell(&ops[2])] = val(&cells, &ops[0]).wrapping_add(val(&cells, &ops[1])) & mask,
            Opcode::Sub => cells[cell(&ops[2])] = val(&cells, &ops[0]).wrapping_sub(val(&cells, &ops[1])) & mask,
            Opcode::Mul => cells[cell(&ops[2])] = val(&cells, &ops[0]).wrapping_mul(val(&cells, &ops[1])) & mask,
            Opcode::Div | Opcode::Mod => {
                let (a, b) = (val(&cells, &ops[0]), val(&cells, &ops[1]));
                if b == 0 {
                    return None;
                }
                cells[cell(&ops[2])] = if instr.opcode() == Opcode::Div { a / b } else { a % b };
            }
            Opcode::And => cells[cell(&ops[2])] = u64::from(val(&cells, &ops[0]) != 0 && val(&cells, &ops[1]) != 0),
            Opcode::Or => cells[cell(&ops[2])] = u64::from(val(&cells, &ops[0]) != 0 || val(&cells, &ops[1]) != 0),
            Opcode::Sqrt => {
                let v = val(&cells, &ops[0]);
                let mut r = 0u64;
                while (r + 1) * (r + 1) <= v {
                    r += 1;
                }
                cells[cell(&ops[1])] = r;
            }
            Opcode::Neg => {
                let c = cell(&ops[0]);
                cells[c] = u64::from(cells[c] == 0);
            }
            Opcode::Set => cells[cell(&ops[0])] = val(&cells, &ops[1]),
            Opcode::Swap => cells.swap(cell(&ops[0]), cell(&ops[1])),
            Opcode::Skip => {}
            Opcode::Jump => next = addr(&ops[0]),
            Opcode::SetPc => next = cells[cell(&ops[0])] as usize,
            Opcode::Ifte => {
                next = if cells[cell(&ops[0])] != 0 {
                    addr(&ops[1])
                } else {
                    addr(&ops[2])
                }
            }
            Opcode::Stop => unreachable!(),
            Opcode::Havoc | Opcode::HavocB | Opcode::Diffusion | Opcode::Phase => return None,
        }
        if next >= len {
            return None;
        }
        pc = next;
        steps += 1;
    }
}

pub fn smallest_factor(n: u64) -> u64 {
    (2..=n).find(|d| n.is_multiple_of(*d)).expect("n >= 2")
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && smallest_factor(n) == n
}

/// Success probability of `iterations` Grover rounds with `marked` of
/// `total` items marked, from the rotation angle.
pub fn grover_success(marked: usize, total: usize, iterations: u32) -> f64 {
    let theta = (marked as f64 / total as f64).sqrt().asin();
    ((2 * iterations + 1) as f64 * theta).sin().powi(2)
}

/// Candidates the Grover programs search for `n` with `bits` candidate bits.
pub fn grover_candidates(bits: u32) -> std::ops::RangeInclusive<u64> {
    2..=(1u64 << bits) + 1
}

/// Grover rounds on an explicit amplitude vector over the candidates,
/// with diffusion reflecting about the mean of the entries still present
/// (magnitude at least `eps`). Returns the mass on divisors of `n`.
pub fn grover_model(n: u64, bits: u32, iterations: u32, eps: f64) -> f64 {
    let candidates: Vec<u64> = grover_candidates(bits).collect();
    let mut amp = vec![1.0 / (candidates.len() as f64).sqrt(); candidates.len()];
    for _ in 0..iterations {
        for (a, &d) in amp.iter_mut().zip(&candidates) {
            if n.is_multiple_of(d) {
                *a = -*a;
            }
        }
        let present: Vec<usize> = (0..amp.len()).filter(|&i| amp[i].abs() >= eps).collect();
        let mean = present.iter().map(|&i| amp[i]).sum::<f64>() / present.len() as f64;
        for (i, a) in amp.iter_mut().enumerate() {
            *a = if present.contains(&i) { 2.0 * mean - *a } else { 0.0 };
        }
    }
    let total: f64 = amp.iter().map(|a| a * a).sum();
    let hit: f64 = candidates
        .iter()
        .zip(&amp)
        .filter(|(&d, _)| n.is_multiple_of(d))
        .map(|(_, a)| a * a)
        .sum();
    hit / total
}
