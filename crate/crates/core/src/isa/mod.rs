//! Instruction set, operands and assembled programs.
//!
//! Source files use a small line-oriented syntax:
//!
//! ```text
//! start:
//!     havoc d0 0 2      ; Hadamard on bits [0, 2) of cell 0
//!     set d1 subMul     ; labels are usable wherever an integer is
//!     stop
//! ```
//!
//! Mnemonics are case-insensitive, labels are case-sensitive, and `;`
//! starts a comment that runs to the end of the line.

mod disasm;
mod parse;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use disasm::disassemble;
pub use parse::{parse, parse_cell_list, parse_define, ArgError, Assembler};
pub use validate::validate;

/// Default number of data cells.
pub const DEFAULT_CELL_COUNT: usize = 32;
/// Default word width in bits.
pub const DEFAULT_WORD_WIDTH: u32 = 8;
/// Default step budget for a run.
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;
/// Widest word the machine supports.
pub const MAX_WORD_WIDTH: u32 = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Opcode {
    Add,
    Mul,
    Div,
    Sub,
    Sqrt,
    Mod,
    Neg,
    And,
    Or,
    Set,
    Swap,
    SetPc,
    Jump,
    Skip,
    Stop,
    Ifte,
    Havoc,
    HavocB,
    Diffusion,
    Phase,
}

/// What kind of operand an instruction accepts in one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// A cell or an integer (immediate or label value).
    Source,
    /// A cell reference only.
    Cell,
    /// An integer immediate or label value.
    Imm,
    /// An instruction address.
    Target,
    /// A real number.
    Real,
}

impl Opcode {
    pub const ALL: [Opcode; 20] = [
        Opcode::Add,
        Opcode::Mul,
        Opcode::Div,
        Opcode::Sub,
        Opcode::Sqrt,
        Opcode::Mod,
        Opcode::Neg,
        Opcode::And,
        Opcode::Or,
        Opcode::Set,
        Opcode::Swap,
        Opcode::SetPc,
        Opcode::Jump,
        Opcode::Skip,
        Opcode::Stop,
        Opcode::Ifte,
        Opcode::Havoc,
        Opcode::HavocB,
        Opcode::Diffusion,
        Opcode::Phase,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Mul => "mul",
            Opcode::Div => "div",
            Opcode::Sub => "sub",
            Opcode::Sqrt => "sqrt",
            Opcode::Mod => "mod",
            Opcode::Neg => "neg",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Set => "set",
            Opcode::Swap => "swap",
            Opcode::SetPc => "setpc",
            Opcode::Jump => "jump",
            Opcode::Skip => "skip",
            Opcode::Stop => "stop",
            Opcode::Ifte => "ifte",
            Opcode::Havoc => "havoc",
            Opcode::HavocB => "havocb",
            Opcode::Diffusion => "diffusion",
            Opcode::Phase => "phase",
        }
    }

    /// Operand signature, one slot per operand.
    pub fn signature(self) -> &'static [Slot] {
        use Slot::*;
        match self {
            Opcode::Add | Opcode::Mul | Opcode::Div | Opcode::Sub | Opcode::Mod | Opcode::And | Opcode::Or => {
                &[Source, Source, Cell]
            }
            Opcode::Sqrt => &[Source, Cell],
            Opcode::Neg | Opcode::SetPc => &[Cell],
            Opcode::Set => &[Cell, Imm],
            Opcode::Swap => &[Cell, Cell],
            Opcode::Jump => &[Target],
            Opcode::Skip | Opcode::Stop | Opcode::Diffusion => &[],
            Opcode::Ifte => &[Cell, Target, Target],
            Opcode::Havoc => &[Cell, Imm, Imm],
            Opcode::HavocB => &[Imm],
            Opcode::Phase => &[Real, Real],
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, Opcode::Havoc | Opcode::HavocB | Opcode::Diffusion | Opcode::Phase)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMnemonic(pub String);

impl fmt::Display for UnknownMnemonic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown mnemonic `{}`", self.0)
    }
}

impl std::error::Error for UnknownMnemonic {}

impl FromStr for Opcode {
    type Err = UnknownMnemonic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Opcode::ALL
            .iter()
            .copied()
            .find(|op| op.mnemonic().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownMnemonic(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operand {
    CellRef(usize),
    IntImm(i64),
    FloatImm(f64),
    /// Instruction index, produced by label resolution or a literal in a
    /// jump-target position.
    Address(usize),
}

impl Operand {
    pub fn fits(&self, slot: Slot) -> bool {
        matches!(
            (slot, self),
            (
                Slot::Source,
                Operand::CellRef(_) | Operand::IntImm(_) | Operand::Address(_)
            ) | (Slot::Cell, Operand::CellRef(_))
                | (Slot::Imm, Operand::IntImm(_) | Operand::Address(_))
                | (Slot::Target, Operand::Address(_))
                | (Slot::Real, Operand::FloatImm(_))
        )
    }

    /// Integer value of an immediate or address operand.
    pub fn as_int(&self) -> Option<i64> {
        match *self {
            Operand::IntImm(v) => Some(v),
            Operand::Address(a) => Some(a as i64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstructionError {
    #[error("`{opcode}` takes {expected} operand(s), found {found}")]
    Arity {
        opcode: Opcode,
        expected: usize,
        found: usize,
    },
    #[error("operand {position} of `{opcode}` has the wrong kind")]
    Kind { opcode: Opcode, position: usize },
}

/// One decoded instruction. Operands always match the opcode's signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    opcode: Opcode,
    operands: Vec<Operand>,
}

impl Instruction {
    pub fn new(opcode: Opcode, operands: Vec<Operand>) -> Result<Self, InstructionError> {
        let signature = opcode.signature();
        if operands.len() != signature.len() {
            return Err(InstructionError::Arity {
                opcode,
                expected: signature.len(),
                found: operands.len(),
            });
        }
        if let Some(position) = operands.iter().zip(signature).position(|(op, slot)| !op.fits(*slot)) {
            return Err(InstructionError::Kind { opcode, position });
        }
        Ok(Self { opcode, operands })
    }

    pub fn opcode(&self) -> Opcode {
        self.opcode
    }

    pub fn operands(&self) -> &[Operand] {
        &self.operands
    }

    /// Cell index in position `i`.
    ///
    /// Panics if that position is not a cell reference, which the
    /// constructor rules out for `Cell` slots.
    pub fn cell(&self, i: usize) -> usize {
        match self.operands[i] {
            Operand::CellRef(c) => c,
            other => panic!("operand {i} of {} is {other:?}, not a cell", self.opcode),
        }
    }

    pub fn address(&self, i: usize) -> usize {
        match self.operands[i] {
            Operand::Address(a) => a,
            other => panic!("operand {i} of {} is {other:?}, not an address", self.opcode),
        }
    }

    pub fn int(&self, i: usize) -> i64 {
        self.operands[i]
            .as_int()
            .unwrap_or_else(|| panic!("operand {i} of {} is not an integer", self.opcode))
    }

    pub fn real(&self, i: usize) -> f64 {
        match self.operands[i] {
            Operand::FloatImm(x) => x,
            other => panic!("operand {i} of {} is {other:?}, not a real", self.opcode),
        }
    }

    /// Instruction indices this instruction may transfer control to,
    /// `None` when the target is computed at run time (`setpc`).
    pub fn successors(&self, pc: usize) -> Option<Vec<usize>> {
        match self.opcode {
            Opcode::Stop => Some(vec![pc]),
            Opcode::Jump => Some(vec![self.address(0)]),
            Opcode::Ifte => Some(vec![self.address(1), self.address(2)]),
            Opcode::SetPc => None,
            _ => Some(vec![pc + 1]),
        }
    }
}

/// Machine settings a program is assembled against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Settings {
    pub word_width: u32,
    pub cell_count: usize,
    pub max_steps: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            word_width: DEFAULT_WORD_WIDTH,
            cell_count: DEFAULT_CELL_COUNT,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl Settings {
    pub fn word_mask(&self) -> u64 {
        (1u64 << self.word_width) - 1
    }
}

/// An assembled program.
///
/// Equality compares instructions and settings. The label table is symbol
/// information only: two programs that differ just in label names behave
/// identically and compare equal.
#[derive(Debug, Clone)]
pub struct Program {
    pub(crate) instructions: Vec<Instruction>,
    pub(crate) labels: BTreeMap<String, usize>,
    pub(crate) settings: Settings,
    /// Source line of each instruction, 1-based.
    pub(crate) lines: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramError {
    #[error("instruction {index}: address {address} is outside the program (length {len})")]
    AddressOutOfRange { index: usize, address: usize, len: usize },
    #[error("instruction {index}: cell d{cell} is outside the configured {cell_count} cells")]
    CellOutOfRange {
        index: usize,
        cell: usize,
        cell_count: usize,
    },
    #[error("label `{name}` binds to {index}, past the end of the program")]
    LabelOutOfRange { name: String, index: usize },
    #[error("word width {0} is outside 1..={MAX_WORD_WIDTH}")]
    WordWidth(u32),
    #[error("cell count must be at least 1")]
    NoCells,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.instructions == other.instructions && self.settings == other.settings
    }
}

impl Program {
    /// Builds a program from already-decoded instructions, checking the
    /// address and cell-range invariants.
    pub fn new(
        instructions: Vec<Instruction>,
        labels: BTreeMap<String, usize>,
        settings: Settings,
    ) -> Result<Self, ProgramError> {
        if settings.word_width == 0 || settings.word_width > MAX_WORD_WIDTH {
            return Err(ProgramError::WordWidth(settings.word_width));
        }
        if settings.cell_count == 0 {
            return Err(ProgramError::NoCells);
        }
        let len = instructions.len();
        for (index, instr) in instructions.iter().enumerate() {
            for op in instr.operands() {
                match *op {
                    Operand::Address(address) if address >= len => {
                        return Err(ProgramError::AddressOutOfRange { index, address, len })
                    }
                    Operand::CellRef(cell) if cell >= settings.cell_count => {
                        return Err(ProgramError::CellOutOfRange {
                            index,
                            cell,
                            cell_count: settings.cell_count,
                        })
                    }
                    _ => {}
                }
            }
        }
        // A label may sit after the last instruction, it just cannot be used.
        if let Some((name, &index)) = labels.iter().find(|(_, &i)| i > len) {
            return Err(ProgramError::LabelOutOfRange {
                name: name.clone(),
                index,
            });
        }
        let lines = (1..=len).collect();
        Ok(Self {
            instructions,
            labels,
            settings,
            lines,
        })
    }

    pub(crate) fn with_lines(mut self, lines: Vec<usize>) -> Self {
        debug_assert_eq!(lines.len(), self.instructions.len());
        self.lines = lines;
        self
    }

    /// Source line of instruction `index`.
    pub fn line_of(&self, index: usize) -> usize {
        self.lines.get(index).copied().unwrap_or(index + 1)
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn labels(&self) -> &BTreeMap<String, usize> {
        &self.labels
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A message pointing into the source text. Lines and columns are 1-based;
/// diagnostics about an assembled program without source use the
/// instruction index plus one as the line and column 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl Diagnostic {
    pub fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    pub fn warning(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            severity: Severity::Warning,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.column, self.message)
    }
}

/// Assembly failed; carries every error found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for AsmError {}
