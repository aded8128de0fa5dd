//! Brute-force reference simulator over the full configuration space.
//!
//! Configurations are enumerated as `pc * 2^(width * cells) + packed`
//! where cell `i` occupies bits `[i*width, (i+1)*width)` of `packed`.
//! Each instruction is applied as a map over the whole amplitude vector:
//! classical instructions scatter amplitudes to their successor index,
//! Hadamards are butterflies on one index bit, and diffusion reflects the
//! nonzero amplitudes of one program-counter block.
//!
//! This module deliberately does not use the sparse engine's transition
//! or transform functions, so the two can check each other.

use serde::Serialize;

use crate::engine::RunLimits;
use crate::isa::{Instruction, Opcode, Operand, Program};
use crate::machine::{Amplitude, Configuration, SparseState};

/// Largest `width * cells` the oracle accepts.
pub const MAX_DENSE_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("{bits} configuration bits exceed the dense limit of {MAX_DENSE_BITS}")]
    TooLarge { bits: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    amplitudes: Vec<Amplitude>,
    width: u32,
    cells: usize,
    program_len: usize,
}

impl DenseState {
    fn block(&self) -> usize {
        1 << (self.width as usize * self.cells)
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        if config.pc >= self.program_len || config.cells.len() != self.cells {
            return None;
        }
        let mut packed = 0usize;
        for (i, &v) in config.cells.iter().enumerate() {
            if v >> self.width != 0 {
                return None;
            }
            packed |= (v as usize) << (i * self.width as usize);
        }
        Some(config.pc * self.block() + packed)
    }

    pub fn config_at(&self, index: usize) -> Configuration {
        let block = self.block();
        let packed = index % block;
        let mask = (1usize << self.width) - 1;
        Configuration {
            pc: index / block,
            cells: (0..self.cells)
                .map(|i| ((packed >> (i * self.width as usize)) & mask) as u64)
                .collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseRun {
    pub state: DenseState,
    pub halted: bool,
    pub steps: u64,
    /// Description of the first fault encountered, if any.
    pub fault: Option<String>,
    pub norm_history: Vec<f64>,
}

/// Runs `program` on the dense simulator under the same halting rule and
/// step budget as the sparse engine.
pub fn dense_run(program: &Program, limits: RunLimits) -> Result<DenseRun, OracleError> {
    let settings = program.settings();
    let bits = u64::from(settings.word_width) * settings.cell_count as u64;
    if bits > u64::from(MAX_DENSE_BITS) {
        return Err(OracleError::TooLarge { bits });
    }
    let sim = Dense {
        program,
        width: settings.word_width,
        cells: settings.cell_count,
        block: 1 << bits,
        epsilon: limits.prune_epsilon,
    };
    let mut amplitudes = vec![Amplitude::new(0.0, 0.0); program.len() * sim.block];
    if !amplitudes.is_empty() {
        amplitudes[0] = Amplitude::new(1.0, 0.0);
    }
    let mut steps = 0;
    let mut fault = None;
    let mut norm_history = vec![norm(&amplitudes)];
    let halted = loop {
        if sim.halted(&amplitudes) {
            break true;
        }
        if steps >= limits.max_steps {
            break false;
        }
        match sim.step(&amplitudes) {
            Ok(next) => amplitudes = next,
            Err(msg) => {
                fault = Some(format!("step {}: {msg}", steps + 1));
                break false;
            }
        }
        steps += 1;
        norm_history.push(norm(&amplitudes));
    };
    Ok(DenseRun {
        state: DenseState {
            amplitudes,
            width: sim.width,
            cells: sim.cells,
            program_len: program.len(),
        },
        halted,
        steps,
        fault,
        norm_history,
    })
}

fn norm(v: &[Amplitude]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

struct Dense<'p> {
    program: &'p Program,
    width: u32,
    cells: usize,
    block: usize,
    epsilon: f64,
}

impl Dense<'_> {
    fn modulus(&self) -> u128 {
        1u128 << self.width
    }

    fn unpack(&self, packed: usize) -> Vec<u128> {
        let mask = (1usize << self.width) - 1;
        (0..self.cells)
            .map(|i| ((packed >> (i * self.width as usize)) & mask) as u128)
            .collect()
    }

    fn pack(&self, cells: &[u128]) -> usize {
        cells
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &v)| acc | ((v as usize) << (i * self.width as usize)))
    }

    fn halted(&self, amps: &[Amplitude]) -> bool {
        amps.iter().enumerate().all(|(i, a)| {
            *a == Amplitude::new(0.0, 0.0) || self.program.instructions()[i / self.block].opcode() == Opcode::Stop
        })
    }

    fn value(&self, op: &Operand, cells: &[u128]) -> u128 {
        let m = self.modulus() as i128;
        match *op {
            Operand::CellRef(c) => cells[c],
            Operand::IntImm(v) => (i128::from(v)).rem_euclid(m) as u128,
            Operand::Address(a) => (a as i128).rem_euclid(m) as u128,
            Operand::FloatImm(_) => unreachable!(),
        }
    }

    fn fall_through(&self, pc: usize) -> Result<usize, String> {
        if pc + 1 >= self.program.len() {
            Err(format!("pc {pc} falls off the end"))
        } else {
            Ok(pc + 1)
        }
    }

    /// Successor index of one basis state under a classical instruction.
    fn successor(&self, instr: &Instruction, pc: usize, packed: usize) -> Result<usize, String> {
        let m = self.modulus();
        let mut cells = self.unpack(packed);
        let ops = instr.operands();
        let cell = |i: usize| match ops[i] {
            Operand::CellRef(c) => c,
            _ => unreachable!(),
        };
        let next_pc = match instr.opcode() {
            Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div | Opcode::Mod | Opcode::And | Opcode::Or => {
                let a = self.value(&ops[0], &cells);
                let b = self.value(&ops[1], &cells);
                let r = match instr.opcode() {
                    Opcode::Add => (a + b) % m,
                    Opcode::Sub => (a + m - b) % m,
                    Opcode::Mul => (a * b) % m,
                    Opcode::Div if b == 0 => return Err(format!("division by zero at pc {pc}")),
                    Opcode::Mod if b == 0 => return Err(format!("modulo by zero at pc {pc}")),
                    Opcode::Div => a / b,
                    Opcode::Mod => a % b,
                    Opcode::And => u128::from(a != 0 && b != 0),
                    _ => u128::from(a != 0 || b != 0),
                };
                cells[cell(2)] = r;
                self.fall_through(pc)?
            }
            Opcode::Sqrt => {
                let a = self.value(&ops[0], &cells);
                let mut r = 0u128;
                while (r + 1) * (r + 1) <= a {
                    r += 1;
                }
                cells[cell(1)] = r;
                self.fall_through(pc)?
            }
            Opcode::Neg => {
                let c = cell(0);
                cells[c] = u128::from(cells[c] == 0);
                self.fall_through(pc)?
            }
            Opcode::Set => {
                cells[cell(0)] = self.value(&ops[1], &cells);
                self.fall_through(pc)?
            }
            Opcode::Swap => {
                let (i, j) = (cell(0), cell(1));
                cells.swap(i, j);
                self.fall_through(pc)?
            }
            Opcode::Skip => self.fall_through(pc)?,
            Opcode::Stop => pc,
            Opcode::Jump => match ops[0] {
                Operand::Address(a) => a,
                _ => unreachable!(),
            },
            Opcode::SetPc => {
                let target = cells[cell(0)];
                if target >= self.program.len() as u128 {
                    return Err(format!("setpc to {target} at pc {pc}"));
                }
                target as usize
            }
            Opcode::Ifte => {
                let pick = if cells[cell(0)] != 0 { 1 } else { 2 };
                match ops[pick] {
                    Operand::Address(a) => a,
                    _ => unreachable!(),
                }
            }
            _ => unreachable!("quantum opcode in classical path"),
        };
        Ok(next_pc * self.block + self.pack(&cells))
    }

    fn step(&self, amps: &[Amplitude]) -> Result<Vec<Amplitude>, String> {
        let zero = Amplitude::new(0.0, 0.0);
        let mut next = vec![zero; amps.len()];
        for (pc, instr) in self.program.instructions().iter().enumerate() {
            let range = pc * self.block..(pc + 1) * self.block;
            let block = &amps[range];
            if block.iter().all(|a| *a == zero) {
                continue;
            }
            if !instr.opcode().is_quantum() {
                for (packed, a) in block.iter().enumerate() {
                    if *a != zero {
                        let to = self.successor(instr, pc, packed)?;
                        next[to] += a;
                    }
                }
                continue;
            }

            let dest = self.fall_through(pc)?;
            let mut work = block.to_vec();
            match instr.opcode() {
                Opcode::Havoc => {
                    let cell = match instr.operands()[0] {
                        Operand::CellRef(c) => c,
                        _ => unreachable!(),
                    };
                    let (lo, hi) = (instr.int(1), instr.int(2));
                    if lo < 0 || lo > hi || hi > i64::from(self.width) {
                        return Err(format!("bad havoc range at pc {pc}"));
                    }
                    for bit in lo..hi {
                        butterfly(&mut work, cell * self.width as usize + bit as usize);
                    }
                }
                Opcode::HavocB => {
                    let q = instr.int(0);
                    if q < 0 || q as u64 >= u64::from(self.width) * self.cells as u64 {
                        return Err(format!("bad qubit {q} at pc {pc}"));
                    }
                    butterfly(&mut work, q as usize);
                }
                Opcode::Phase => {
                    let factor = Amplitude::new(instr.real(0), instr.real(1));
                    work.iter_mut().for_each(|a| *a *= factor);
                }
                Opcode::Diffusion => {
                    let support: Vec<usize> = (0..work.len()).filter(|&i| work[i] != zero).collect();
                    let total: Amplitude = support.iter().map(|&i| work[i]).sum();
                    let mean = total / support.len() as f64;
                    for i in support {
                        work[i] = mean * 2.0 - work[i];
                    }
                }
                _ => unreachable!(),
            }
            let base = dest * self.block;
            for (i, a) in work.into_iter().enumerate() {
                next[base + i] += a;
            }
        }
        let threshold = self.epsilon * self.epsilon;
        for a in &mut next {
            if a.norm_sqr() < threshold {
                *a = zero;
            }
        }
        Ok(next)
    }
}

/// Hadamard on one bit of the packed index, applied pairwise.
fn butterfly(v: &mut [Amplitude], bit: usize) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let stride = 1usize << bit;
    for i in 0..v.len() {
        if i & stride == 0 {
            let (a0, a1) = (v[i], v[i | stride]);
            v[i] = (a0 + a1) * s;
            v[i | stride] = (a0 - a1) * s;
        }
    }
}

/// Result of comparing a sparse state against a dense one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Configuration where the largest difference occurs.
    pub worst: Option<Configuration>,
    /// Sparse entries that have no place in the dense space.
    pub unrepresentable: usize,
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Largest absolute amplitude difference over all configurations.
pub fn compare(sparse: &SparseState, dense: &DenseState, tol: f64) -> CompareReport {
    let mut seen = vec![false; dense.amplitudes.len()];
    let mut max = 0.0f64;
    let mut worst = None;
    let mut unrepresentable = 0;
    let mut consider = |diff: f64, config: &dyn Fn() -> Configuration| {
        if diff > max || (diff.is_nan() && !max.is_nan()) {
            max = diff;
            worst = Some(config());
        }
    };
    for (config, amp) in sparse.iter() {
        match dense.index_of(config) {
            Some(i) => {
                seen[i] = true;
                consider((amp - dense.amplitudes[i]).norm(), &|| config.clone());
            }
            None => {
                unrepresentable += 1;
                consider(amp.norm(), &|| config.clone());
            }
        }
    }
    for (i, a) in dense.amplitudes.iter().enumerate() {
        if !seen[i] && a.norm_sqr() > 0.0 {
            consider(a.norm(), &|| dense.config_at(i));
        }
    }
    CompareReport {
        max_abs_diff: max,
        tolerance: tol,
        passed: max < tol && unrepresentable == 0,
        worst,
        unrepresentable,
    }
}
