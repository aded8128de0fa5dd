//! Lockstep execution over a superposition of configurations.
//!
//! Every global step advances every branch by exactly one instruction.
//! Branches are grouped by program counter; classical instructions map
//! each branch independently, quantum instructions act on the whole group,
//! and all successors are merged canonically before the next step.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::isa::{Opcode, Program};
use crate::machine::{
    classical_transition, merge_with, Amplitude, BranchFault, Configuration, Context, FaultKind, SparseState,
    DEFAULT_PRUNE_EPSILON,
};
use crate::quantum::{apply_diffusion, apply_havoc_range, apply_havocb, apply_phase, BranchGroup};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLimits {
    /// Step budget; a run that has not halted after this many steps ends
    /// with `halted == false`.
    pub max_steps: u64,
    pub prune_epsilon: f64,
    /// Emit a trace record every this many steps; 0 disables tracing.
    pub trace_every: u64,
    /// Branches listed per trace record.
    pub trace_top_k: usize,
    /// Evaluate branch groups on the rayon pool. Results are identical
    /// either way.
    pub parallel: bool,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            max_steps: crate::isa::DEFAULT_MAX_STEPS,
            prune_epsilon: DEFAULT_PRUNE_EPSILON,
            trace_every: 0,
            trace_top_k: 8,
            parallel: false,
        }
    }
}

impl RunLimits {
    /// Defaults with the step budget taken from the program's settings.
    pub fn for_program(program: &Program) -> Self {
        Self {
            max_steps: program.settings().max_steps,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceBranch {
    pub pc: usize,
    pub cells: String,
    pub probability: f64,
}

/// One trace point. `norm` is the squared norm (total probability mass).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub step: u64,
    pub branch_count: usize,
    pub norm: f64,
    pub top_k: Vec<TraceBranch>,
}

impl TraceRecord {
    pub fn capture(step: u64, state: &SparseState, top_k: usize) -> Self {
        let norm = state.norm_sqr();
        let mut ranked: Vec<&(Configuration, Amplitude)> = state.iter().collect();
        // stable: ties keep canonical configuration order
        ranked.sort_by(|a, b| b.1.norm_sqr().total_cmp(&a.1.norm_sqr()));
        let top_k = ranked
            .into_iter()
            .take(top_k)
            .map(|(c, a)| TraceBranch {
                pc: c.pc,
                cells: c.digest(),
                probability: if norm > 0.0 { a.norm_sqr() / norm } else { 0.0 },
            })
            .collect();
        Self {
            step,
            branch_count: state.len(),
            norm,
            top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: SparseState,
    /// Every branch sits on a `stop`.
    pub halted: bool,
    pub steps: u64,
    /// Squared norm of the final state.
    pub final_norm: f64,
    /// Squared norm before the first step and after every step.
    pub norm_history: Vec<f64>,
    /// Largest branch count seen.
    pub branch_peak: usize,
    pub fault: Option<BranchFault>,
}

/// True iff every branch is on a `stop` (vacuously true when empty).
pub fn is_halted(program: &Program, state: &SparseState) -> bool {
    state.iter().all(|(c, _)| {
        program
            .instructions()
            .get(c.pc)
            .is_some_and(|i| i.opcode() == Opcode::Stop)
    })
}

/// Steps a program's superposition.
#[derive(Debug, Clone)]
pub struct Engine<'p> {
    program: &'p Program,
    ctx: Context,
    limits: RunLimits,
}

type Pairs = Vec<(Configuration, Amplitude)>;

impl<'p> Engine<'p> {
    pub fn new(program: &'p Program, limits: RunLimits) -> Self {
        Self {
            program,
            ctx: Context::of(program),
            limits,
        }
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    /// Executes global step number `step` (1-based) on `state`.
    pub fn step(&self, state: &SparseState, step: u64) -> Result<SparseState, BranchFault> {
        let groups: Vec<&[(Configuration, Amplitude)]> = state.groups().collect();
        let results: Vec<Result<Pairs, BranchFault>> = if self.limits.parallel {
            groups.par_iter().map(|g| self.step_group(g, step)).collect()
        } else {
            groups.iter().map(|g| self.step_group(g, step)).collect()
        };
        let mut pairs = Vec::with_capacity(state.len());
        for r in results {
            pairs.extend(r?);
        }
        let next = merge_with(pairs, self.limits.prune_epsilon, self.limits.parallel);
        if !next.norm_sqr().is_finite() {
            let bad = next
                .iter()
                .find(|(_, a)| !a.is_finite())
                .map(|(c, _)| c.clone())
                .unwrap_or_else(|| next.entries()[0].0.clone());
            return Err(BranchFault {
                step,
                kind: FaultKind::NonFinite,
                config: bad,
            });
        }
        Ok(next)
    }

    fn step_group(&self, entries: &[(Configuration, Amplitude)], step: u64) -> Result<Pairs, BranchFault> {
        let group = BranchGroup::new(entries).expect("state groups are nonempty and share a pc");
        let instr = &self.program.instructions()[group.pc()];
        let fault = |kind: FaultKind, config: &Configuration| BranchFault {
            step,
            kind,
            config: config.clone(),
        };
        let first = &entries[0].0;
        let ctx = &self.ctx;
        match instr.opcode() {
            Opcode::Havoc => {
                apply_havoc_range(&group, instr.cell(0), instr.int(1), instr.int(2), ctx).map_err(|k| fault(k, first))
            }
            Opcode::HavocB => apply_havocb(&group, instr.int(0), ctx).map_err(|k| fault(k, first)),
            Opcode::Phase => apply_phase(&group, instr.real(0), instr.real(1), ctx).map_err(|k| fault(k, first)),
            Opcode::Diffusion => apply_diffusion(&group, ctx).map_err(|k| fault(k, first)),
            _ => {
                let map = |(c, a): &(Configuration, Amplitude)| {
                    classical_transition(instr, c, ctx)
                        .map(|next| (next, *a))
                        .map_err(|k| fault(k, c))
                };
                if self.limits.parallel && entries.len() > 1024 {
                    let out: Vec<_> = entries.par_iter().map(map).collect();
                    out.into_iter().collect()
                } else {
                    entries.iter().map(map).collect()
                }
            }
        }
    }

    pub fn run(&self) -> RunOutcome {
        self.run_traced(|_| {})
    }

    /// Runs from the initial state, handing a record to `sink` at step 0
    /// and every `trace_every` steps after that.
    pub fn run_traced(&self, mut sink: impl FnMut(&TraceRecord)) -> RunOutcome {
        let every = self.limits.trace_every;
        let top_k = self.limits.trace_top_k;
        let mut state = SparseState::initial(self.program);
        let mut steps = 0u64;
        let mut norm_history = vec![state.norm_sqr()];
        let mut branch_peak = state.len();
        let mut fault = None;
        if every > 0 {
            sink(&TraceRecord::capture(0, &state, top_k));
        }

        let halted = loop {
            if is_halted(self.program, &state) {
                break true;
            }
            if steps >= self.limits.max_steps {
                break false;
            }
            match self.step(&state, steps + 1) {
                Ok(next) => state = next,
                Err(f) => {
                    fault = Some(f);
                    break false;
                }
            }
            steps += 1;
            norm_history.push(state.norm_sqr());
            branch_peak = branch_peak.max(state.len());
            if every > 0 && steps.is_multiple_of(every) {
                sink(&TraceRecord::capture(steps, &state, top_k));
            }
        };

        RunOutcome {
            final_norm: state.norm_sqr(),
            state,
            halted,
            steps,
            norm_history,
            branch_peak,
            fault,
        }
    }
}

/// One global step with default limits.
pub fn step(program: &Program, state: &SparseState) -> Result<SparseState, BranchFault> {
    Engine::new(program, RunLimits::for_program(program)).step(state, 1)
}

pub fn run(program: &Program, limits: RunLimits) -> RunOutcome {
    Engine::new(program, limits).run()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error("the state has no branches left to measure")]
    EmptyState,
    #[error("cell d{cell} does not exist")]
    NoSuchCell { cell: usize },
}

/// Marginal distribution of one cell, renormalized by the total squared
/// norm.
pub fn distribution(state: &SparseState, cell: usize) -> Result<BTreeMap<u64, f64>, MeasureError> {
    let Some((first, _)) = state.entries().first() else {
        return Err(MeasureError::EmptyState);
    };
    if cell >= first.cells.len() {
        return Err(MeasureError::NoSuchCell { cell });
    }
    let norm = state.norm_sqr();
    let mut out = BTreeMap::new();
    for (c, a) in state.iter() {
        *out.entry(c.cells[cell]).or_insert(0.0) += a.norm_sqr();
    }
    out.values_mut().for_each(|p| *p /= norm);
    Ok(out)
}

/// Seeded measurement of whole configurations.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Draws one configuration with probability `|a|^2 / norm`.
    pub fn draw<'s>(&mut self, state: &'s SparseState) -> Result<&'s Configuration, MeasureError> {
        let entries = state.entries();
        let last = entries.last().ok_or(MeasureError::EmptyState)?;
        let target = self.rng.gen::<f64>() * state.norm_sqr();
        let mut acc = 0.0;
        for (c, a) in entries {
            acc += a.norm_sqr();
            if target < acc {
                return Ok(c);
            }
        }
        Ok(&last.0)
    }
}

/// One measurement with a fresh generator seeded by `seed`.
pub fn sample(state: &SparseState, seed: u64) -> Result<Configuration, MeasureError> {
    Sampler::new(seed).draw(state).cloned()
}
