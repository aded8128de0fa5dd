use std::collections::BTreeMap;

use super::{AsmError, Diagnostic, Instruction, Opcode, Operand, Program, Settings, Slot};

#[derive(Debug, Clone, Copy, PartialEq)]
enum TokenKind<'a> {
    Word(&'a str),
    Colon,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    kind: TokenKind<'a>,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = match line.find(';') {
        Some(i) => &line[..i],
        None => line,
    };
    let column_of = |byte: usize| code[..byte].chars().count() + 1;
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in code.char_indices() {
        if ch.is_whitespace() || ch == ':' {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    kind: TokenKind::Word(&code[s..i]),
                    column: column_of(s),
                });
            }
            if ch == ':' {
                tokens.push(Token {
                    kind: TokenKind::Colon,
                    column: column_of(i),
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            kind: TokenKind::Word(&code[s..]),
            column: column_of(s),
        });
    }
    tokens
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn looks_like_cell(s: &str) -> bool {
    s.len() > 1 && s.as_bytes()[0].eq_ignore_ascii_case(&b'd') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

fn is_int(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn is_float(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    match body.split_once('.') {
        Some((whole, frac)) => {
            !whole.is_empty()
                && !frac.is_empty()
                && whole.bytes().all(|b| b.is_ascii_digit())
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

/// A source operand before resolution.
#[derive(Debug, Clone, Copy)]
enum Lexeme<'a> {
    Cell(usize),
    Int(i64),
    Float(f64),
    Ident(&'a str),
}

fn lex_operand(text: &str) -> Result<Lexeme<'_>, String> {
    if looks_like_cell(text) {
        text[1..]
            .parse()
            .map(Lexeme::Cell)
            .map_err(|_| format!("cell index in `{text}` is too large"))
    } else if is_int(text) {
        text.parse()
            .map(Lexeme::Int)
            .map_err(|_| format!("integer `{text}` does not fit in 64 bits"))
    } else if is_float(text) {
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Lexeme::Float(x)),
            _ => Err(format!("real `{text}` is not a finite number")),
        }
    } else if is_ident(text) {
        Ok(Lexeme::Ident(text))
    } else {
        Err(format!("malformed operand `{text}`"))
    }
}

struct SourceLine<'a> {
    number: usize,
    label: Option<Token<'a>>,
    mnemonic: Option<Token<'a>>,
    operands: Vec<Token<'a>>,
}

fn word<'a>(token: &Token<'a>) -> &'a str {
    match token.kind {
        TokenKind::Word(w) => w,
        TokenKind::Colon => ":",
    }
}

fn split_line<'a>(number: usize, tokens: Vec<Token<'a>>) -> Result<SourceLine<'a>, Diagnostic> {
    let mut rest = tokens.as_slice();
    let mut label = None;
    if let [first @ Token {
        kind: TokenKind::Word(_),
        ..
    }, Token {
        kind: TokenKind::Colon, ..
    }, tail @ ..] = rest
    {
        label = Some(*first);
        rest = tail;
    }
    if let Some(colon) = rest.iter().find(|t| t.kind == TokenKind::Colon) {
        return Err(Diagnostic::error(number, colon.column, "unexpected `:`"));
    }
    let (mnemonic, operands) = match rest.split_first() {
        Some((m, ops)) => (Some(*m), ops.to_vec()),
        None => (None, Vec::new()),
    };
    Ok(SourceLine {
        number,
        label,
        mnemonic,
        operands,
    })
}

/// Configurable two-pass assembler.
#[derive(Debug, Clone, Default)]
pub struct Assembler {
    defines: BTreeMap<String, i64>,
    settings: Settings,
}

impl Assembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(mut self, name: impl Into<String>, value: i64) -> Self {
        self.defines.insert(name.into(), value);
        self
    }

    pub fn defines<I, S>(mut self, defines: I) -> Self
    where
        I: IntoIterator<Item = (S, i64)>,
        S: Into<String>,
    {
        self.defines.extend(defines.into_iter().map(|(k, v)| (k.into(), v)));
        self
    }

    pub fn settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    pub fn word_width(mut self, bits: u32) -> Self {
        self.settings.word_width = bits;
        self
    }

    pub fn cell_count(mut self, cells: usize) -> Self {
        self.settings.cell_count = cells;
        self
    }

    pub fn max_steps(mut self, steps: u64) -> Self {
        self.settings.max_steps = steps;
        self
    }

    pub fn parse(&self, source: &str) -> Result<Program, AsmError> {
        Pass::new(self).run(source)
    }
}

/// Assembles `source` with default machine settings.
pub fn parse(source: &str, defines: &BTreeMap<String, i64>) -> Result<Program, AsmError> {
    Assembler::new()
        .defines(defines.iter().map(|(k, v)| (k.clone(), *v)))
        .parse(source)
}

struct Pass<'s> {
    asm: &'s Assembler,
    errors: Vec<Diagnostic>,
}

impl<'s> Pass<'s> {
    fn new(asm: &'s Assembler) -> Self {
        Self {
            asm,
            errors: Vec::new(),
        }
    }

    fn run(mut self, source: &str) -> Result<Program, AsmError> {
        let settings = self.asm.settings;
        if settings.word_width == 0 || settings.word_width > super::MAX_WORD_WIDTH {
            return Err(AsmError {
                diagnostics: vec![Diagnostic::error(
                    1,
                    1,
                    format!(
                        "word width {} is outside 1..={}",
                        settings.word_width,
                        super::MAX_WORD_WIDTH
                    ),
                )],
            });
        }
        if settings.cell_count == 0 {
            return Err(AsmError {
                diagnostics: vec![Diagnostic::error(1, 1, "cell count must be at least 1")],
            });
        }

        let mut lines = Vec::new();
        for (i, text) in source.lines().enumerate() {
            match split_line(i + 1, tokenize(text)) {
                Ok(line) => lines.push(line),
                Err(d) => self.errors.push(d),
            }
        }

        // pass 1: labels
        let mut labels: BTreeMap<String, usize> = BTreeMap::new();
        let mut index = 0usize;
        for line in &lines {
            if let Some(tok) = &line.label {
                let name = word(tok);
                if !is_ident(name) {
                    self.error(line.number, tok.column, format!("invalid label name `{name}`"));
                } else if looks_like_cell(name) {
                    self.error(
                        line.number,
                        tok.column,
                        format!("label `{name}` would shadow a cell reference"),
                    );
                } else if labels.insert(name.to_string(), index).is_some() {
                    self.error(line.number, tok.column, format!("duplicate label `{name}`"));
                }
            }
            if line.mnemonic.is_some() {
                index += 1;
            }
        }
        let len = index;

        // pass 2: operands
        let mut instructions = Vec::with_capacity(len);
        let mut source_lines = Vec::with_capacity(len);
        for line in &lines {
            let Some(mtok) = &line.mnemonic else { continue };
            let mnemonic = word(mtok);
            let opcode = match mnemonic.parse::<Opcode>() {
                Ok(op) => op,
                Err(e) => {
                    self.error(line.number, mtok.column, e.to_string());
                    continue;
                }
            };
            let signature = opcode.signature();
            if line.operands.len() != signature.len() {
                self.error(
                    line.number,
                    mtok.column,
                    format!(
                        "`{opcode}` takes {} operand(s), found {}",
                        signature.len(),
                        line.operands.len()
                    ),
                );
                continue;
            }
            let mut operands = Vec::with_capacity(signature.len());
            for (tok, slot) in line.operands.iter().zip(signature) {
                match self.resolve(opcode, *slot, word(tok), &labels, len) {
                    Ok(op) => operands.push(op),
                    Err(msg) => self.error(line.number, tok.column, msg),
                }
            }
            if operands.len() != signature.len() {
                continue;
            }
            if let Err(msg) = self.check_ranges(opcode, &operands) {
                self.error(line.number, mtok.column, msg);
                continue;
            }
            match Instruction::new(opcode, operands) {
                Ok(instr) => {
                    instructions.push(instr);
                    source_lines.push(line.number);
                }
                Err(e) => self.error(line.number, mtok.column, e.to_string()),
            }
        }

        if !self.errors.is_empty() {
            return Err(AsmError {
                diagnostics: self.errors,
            });
        }
        Program::new(instructions, labels, settings)
            .map(|p| p.with_lines(source_lines))
            .map_err(|e| AsmError {
                diagnostics: vec![Diagnostic::error(1, 1, e.to_string())],
            })
    }

    fn error(&mut self, line: usize, column: usize, message: impl Into<String>) {
        self.errors.push(Diagnostic::error(line, column, message));
    }

    fn lookup(&self, name: &str, labels: &BTreeMap<String, usize>, len: usize) -> Result<Operand, String> {
        if let Some(&index) = labels.get(name) {
            if index >= len {
                return Err(format!("label `{name}` does not precede any instruction"));
            }
            return Ok(Operand::Address(index));
        }
        match self.asm.defines.get(name) {
            Some(&v) => Ok(Operand::IntImm(v)),
            None => Err(format!("unresolved identifier `{name}`")),
        }
    }

    fn resolve(
        &self,
        opcode: Opcode,
        slot: Slot,
        text: &str,
        labels: &BTreeMap<String, usize>,
        len: usize,
    ) -> Result<Operand, String> {
        let lexeme = lex_operand(text)?;
        let cell_count = self.asm.settings.cell_count;
        let mismatch = || format!("`{text}` is not a valid operand here for `{opcode}`");
        match (slot, lexeme) {
            (Slot::Source | Slot::Cell, Lexeme::Cell(c)) => {
                if c < cell_count {
                    Ok(Operand::CellRef(c))
                } else {
                    Err(format!("cell d{c} is out of range ({cell_count} cells)"))
                }
            }
            (Slot::Source | Slot::Imm, Lexeme::Int(v)) => Ok(Operand::IntImm(v)),
            (Slot::Source | Slot::Imm, Lexeme::Ident(name)) => self.lookup(name, labels, len),
            (Slot::Target, Lexeme::Int(v)) => to_address(v, len),
            (Slot::Target, Lexeme::Ident(name)) => match self.lookup(name, labels, len)? {
                Operand::IntImm(v) => to_address(v, len),
                op => Ok(op),
            },
            (Slot::Real, Lexeme::Float(x)) => Ok(Operand::FloatImm(x)),
            (Slot::Real, Lexeme::Int(v)) => Ok(Operand::FloatImm(v as f64)),
            (Slot::Real, Lexeme::Ident(name)) => {
                let value = self.lookup(name, labels, len)?.as_int().unwrap_or_default();
                Ok(Operand::FloatImm(value as f64))
            }
            _ => Err(mismatch()),
        }
    }

    fn check_ranges(&self, opcode: Opcode, operands: &[Operand]) -> Result<(), String> {
        let width = i64::from(self.asm.settings.word_width);
        match opcode {
            Opcode::Havoc => {
                let lo = operands[1].as_int().unwrap_or_default();
                let hi = operands[2].as_int().unwrap_or_default();
                if lo < 0 || lo > hi || hi > width {
                    return Err(format!("havoc bit range [{lo}, {hi}) is not within [0, {width}]"));
                }
            }
            Opcode::HavocB => {
                let q = operands[0].as_int().unwrap_or_default();
                let qubits = width.saturating_mul(self.asm.settings.cell_count as i64);
                if q < 0 || q >= qubits {
                    return Err(format!("data qubit {q} is out of range ({qubits} qubits)"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn to_address(v: i64, len: usize) -> Result<Operand, String> {
    match usize::try_from(v) {
        Ok(a) if a < len => Ok(Operand::Address(a)),
        _ => Err(format!("address {v} is outside the program (length {len})")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArgError {
    #[error("expected NAME=INT, found `{0}`")]
    Define(String),
    #[error("expected a cell like `d4`, found `{0}`")]
    Cell(String),
}

/// Parses a command-line define of the form `NAME=INT`.
pub fn parse_define(text: &str) -> Result<(String, i64), ArgError> {
    let (name, value) = text.split_once('=').ok_or_else(|| ArgError::Define(text.to_string()))?;
    let name = name.trim();
    if !is_ident(name) {
        return Err(ArgError::Define(text.to_string()));
    }
    let value = value.trim().parse().map_err(|_| ArgError::Define(text.to_string()))?;
    Ok((name.to_string(), value))
}

/// Parses a comma-separated list of cell references such as `d1,d4`.
pub fn parse_cell_list(text: &str) -> Result<Vec<usize>, ArgError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match lex_operand(s) {
            Ok(Lexeme::Cell(c)) => Ok(c),
            _ => Err(ArgError::Cell(s.to_string())),
        })
        .collect()
}
