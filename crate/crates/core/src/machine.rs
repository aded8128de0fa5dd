//! Machine configurations, fixed-width word arithmetic and the sparse
//! superposition over configurations.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use rayon::slice::ParallelSliceMut;
use serde::Serialize;

use crate::isa::{Instruction, Opcode, Operand, Program};

/// Complex probability amplitude of one branch.
pub type Amplitude = Complex64;

/// Amplitudes smaller than this in magnitude are dropped after each step.
pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-12;

/// Arithmetic modulo `2^width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordSize {
    width: u32,
    mask: u64,
}

impl WordSize {
    pub fn new(width: u32) -> Self {
        assert!(
            (1..=crate::isa::MAX_WORD_WIDTH).contains(&width),
            "word width {width} out of range"
        );
        Self {
            width,
            mask: (1u64 << width) - 1,
        }
    }

    pub fn width(self) -> u32 {
        self.width
    }

    /// Reduces a signed value modulo `2^width`.
    pub fn wrap(self, value: i64) -> u64 {
        value as u64 & self.mask
    }

    pub fn add(self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask
    }

    pub fn sub(self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask
    }

    pub fn mul(self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask
    }
}

/// A word is true iff it is nonzero.
pub fn truthy(word: u64) -> bool {
    word != 0
}

/// One classical basis state: program counter plus every data cell.
///
/// Ordered by `pc`, then lexicographically by cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Configuration {
    pub pc: usize,
    pub cells: Vec<u64>,
}

impl Configuration {
    pub fn zeroed(cell_count: usize) -> Self {
        Self {
            pc: 0,
            cells: vec![0; cell_count],
        }
    }

    /// Nonzero cells as `d1=3 d4=16`, or `0` when every cell is zero.
    pub fn digest(&self) -> String {
        let parts: Vec<String> = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, v)| format!("d{i}={v}"))
            .collect();
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" ")
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pc={} [{}]", self.pc, self.digest())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("jump to {target}, outside the program")]
    JumpOutOfRange { target: u64 },
    #[error("execution fell through past the last instruction")]
    FellOffEnd,
    #[error("havoc bit range [{lo}, {hi}) is invalid")]
    BitRange { lo: i64, hi: i64 },
    #[error("data qubit {qubit} does not exist")]
    QubitOutOfRange { qubit: i64 },
    #[error("amplitude is no longer finite")]
    NonFinite,
    #[error("`{0}` is not a classical instruction")]
    NotClassical(Opcode),
}

/// A runtime error attributed to one branch at one global step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("step {step}: {kind} in branch {config}")]
pub struct BranchFault {
    pub step: u64,
    pub kind: FaultKind,
    pub config: Configuration,
}

/// Per-program constants the transition function needs.
#[derive(Debug, Clone, Copy)]
pub struct Context {
    pub word: WordSize,
    pub program_len: usize,
    pub cell_count: usize,
}

impl Context {
    pub fn of(program: &Program) -> Self {
        let s = program.settings();
        Self {
            word: WordSize::new(s.word_width),
            program_len: program.len(),
            cell_count: s.cell_count,
        }
    }

    /// `pc + 1`, or a fault when that leaves the program.
    pub fn next_pc(&self, pc: usize) -> Result<usize, FaultKind> {
        if pc + 1 < self.program_len {
            Ok(pc + 1)
        } else {
            Err(FaultKind::FellOffEnd)
        }
    }

    fn target(&self, value: u64) -> Result<usize, FaultKind> {
        match usize::try_from(value) {
            Ok(t) if t < self.program_len => Ok(t),
            _ => Err(FaultKind::JumpOutOfRange { target: value }),
        }
    }
}

fn read(op: &Operand, cells: &[u64], word: WordSize) -> u64 {
    match *op {
        Operand::CellRef(c) => cells[c],
        Operand::IntImm(v) => word.wrap(v),
        Operand::Address(a) => word.wrap(a as i64),
        Operand::FloatImm(_) => unreachable!("signature forbids reals here"),
    }
}

/// Successor of `config` under a classical instruction.
pub fn classical_transition(
    instr: &Instruction,
    config: &Configuration,
    ctx: &Context,
) -> Result<Configuration, FaultKind> {
    let word = ctx.word;
    let ops = instr.operands();
    let src = |i: usize| read(&ops[i], &config.cells, word);
    let mut next = config.clone();

    match instr.opcode() {
        op @ (Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Div | Opcode::Mod | Opcode::And | Opcode::Or) => {
            let (a, b) = (src(0), src(1));
            let value = match op {
                Opcode::Add => word.add(a, b),
                Opcode::Sub => word.sub(a, b),
                Opcode::Mul => word.mul(a, b),
                Opcode::Div => a.checked_div(b).ok_or(FaultKind::DivisionByZero)?,
                Opcode::Mod => a.checked_rem(b).ok_or(FaultKind::DivisionByZero)?,
                Opcode::And => u64::from(truthy(a) && truthy(b)),
                Opcode::Or => u64::from(truthy(a) || truthy(b)),
                _ => unreachable!(),
            };
            next.cells[instr.cell(2)] = value;
            next.pc = ctx.next_pc(config.pc)?;
        }
        Opcode::Sqrt => {
            next.cells[instr.cell(1)] = src(0).isqrt();
            next.pc = ctx.next_pc(config.pc)?;
        }
        Opcode::Neg => {
            let c = instr.cell(0);
            next.cells[c] = u64::from(!truthy(config.cells[c]));
            next.pc = ctx.next_pc(config.pc)?;
        }
        Opcode::Set => {
            next.cells[instr.cell(0)] = word.wrap(instr.int(1));
            next.pc = ctx.next_pc(config.pc)?;
        }
        Opcode::Swap => {
            next.cells.swap(instr.cell(0), instr.cell(1));
            next.pc = ctx.next_pc(config.pc)?;
        }
        Opcode::Skip => next.pc = ctx.next_pc(config.pc)?,
        Opcode::Stop => {}
        Opcode::Jump => next.pc = instr.address(0),
        Opcode::SetPc => next.pc = ctx.target(config.cells[instr.cell(0)])?,
        Opcode::Ifte => {
            next.pc = if truthy(config.cells[instr.cell(0)]) {
                instr.address(1)
            } else {
                instr.address(2)
            };
        }
        op @ (Opcode::Havoc | Opcode::HavocB | Opcode::Diffusion | Opcode::Phase) => {
            return Err(FaultKind::NotClassical(op))
        }
    }
    Ok(next)
}

fn canonical_order(a: &(Configuration, Amplitude), b: &(Configuration, Amplitude)) -> Ordering {
    a.0.cmp(&b.0)
        .then_with(|| a.1.re.total_cmp(&b.1.re))
        .then_with(|| a.1.im.total_cmp(&b.1.im))
}

/// A superposition: each configuration appears at most once, sorted, with
/// a nonzero amplitude above the prune threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    entries: Vec<(Configuration, Amplitude)>,
    norm_sqr: f64,
}

impl SparseState {
    /// `|pc = 0, all cells 0>` with amplitude 1; empty for an empty program,
    /// which has no valid pc.
    pub fn initial(program: &Program) -> Self {
        if program.is_empty() {
            return Self::empty();
        }
        Self::basis(Configuration::zeroed(program.settings().cell_count))
    }

    pub fn basis(config: Configuration) -> Self {
        Self {
            entries: vec![(config, Amplitude::new(1.0, 0.0))],
            norm_sqr: 1.0,
        }
    }

    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            norm_sqr: 0.0,
        }
    }

    pub fn entries(&self) -> &[(Configuration, Amplitude)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Configuration, Amplitude)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached sum of squared magnitudes.
    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    pub fn amplitude(&self, config: &Configuration) -> Amplitude {
        match self.entries.binary_search_by(|(c, _)| c.cmp(config)) {
            Ok(i) => self.entries[i].1,
            Err(_) => Amplitude::new(0.0, 0.0),
        }
    }

    /// Maximal runs of entries sharing a program counter, in pc order.
    pub fn groups(&self) -> impl Iterator<Item = &[(Configuration, Amplitude)]> {
        self.entries.chunk_by(|a, b| a.0.pc == b.0.pc)
    }

    /// Bit pattern of every entry, for exact reproducibility checks.
    pub fn fingerprint(&self) -> Vec<(Configuration, u64, u64)> {
        self.entries
            .iter()
            .map(|(c, a)| (c.clone(), a.re.to_bits(), a.im.to_bits()))
            .collect()
    }
}

/// Sums amplitudes of equal configurations and drops entries whose
/// magnitude is below `epsilon`.
///
/// The result does not depend on the order of `pairs`: entries are sorted
/// by configuration and then by amplitude bits before summation.
pub fn merge_and_prune(pairs: Vec<(Configuration, Amplitude)>, epsilon: f64) -> SparseState {
    merge_with(pairs, epsilon, false)
}

pub(crate) fn merge_with(mut pairs: Vec<(Configuration, Amplitude)>, epsilon: f64, parallel: bool) -> SparseState {
    if parallel {
        pairs.par_sort_unstable_by(canonical_order);
    } else {
        pairs.sort_unstable_by(canonical_order);
    }
    let threshold = epsilon * epsilon;
    let mut entries: Vec<(Configuration, Amplitude)> = Vec::with_capacity(pairs.len());
    let mut pending: Option<(Configuration, Amplitude)> = None;
    let mut flush = |item: (Configuration, Amplitude)| {
        if item.1.norm_sqr() >= threshold {
            entries.push(item);
        }
    };
    for (config, amp) in pairs {
        match &mut pending {
            Some((c, sum)) if *c == config => *sum += amp,
            _ => {
                if let Some(done) = pending.replace((config, amp)) {
                    flush(done);
                }
            }
        }
    }
    if let Some(done) = pending {
        flush(done);
    }
    let norm_sqr = entries.iter().map(|(_, a)| a.norm_sqr()).sum();
    SparseState { entries, norm_sqr }
}
