//! Assembler and simulator for a classical assembly language whose cells
//! and program counter may be in superposition.
//!
//! The pipeline is [`isa::Assembler`] (source to [`isa::Program`]), then
//! [`engine::Engine`] (lockstep execution over a [`machine::SparseState`]),
//! then measurement with [`engine::distribution`] or [`engine::Sampler`].
//! [`oracle`] holds a dense reference simulator used to cross-check the
//! sparse engine, and [`bench`] the factoring benchmark sweep.

pub mod bench;
pub mod corpus;
pub mod engine;
pub mod isa;
pub mod machine;
pub mod oracle;
pub mod quantum;

pub use engine::{distribution, is_halted, run, sample, Engine, RunLimits, RunOutcome, Sampler};
pub use isa::{disassemble, parse, validate, Assembler, Program};
pub use machine::{Amplitude, Configuration, SparseState};
