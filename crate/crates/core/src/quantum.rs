//! Hadamard, phase and diffusion instructions as linear maps over the
//! branches currently executing them.
//!
//! Every transform takes a [`BranchGroup`] (all branches whose program
//! counter addresses one quantum instruction in this step) and returns
//! unmerged successor pairs with the program counter advanced. The caller
//! merges them with the rest of the step's output.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::machine::{Amplitude, Configuration, Context, FaultKind};

/// Branches sharing one program counter.
#[derive(Debug, Clone, Copy)]
pub struct BranchGroup<'a> {
    pc: usize,
    entries: &'a [(Configuration, Amplitude)],
}

impl<'a> BranchGroup<'a> {
    /// `None` when `entries` is empty or spans more than one pc.
    pub fn new(entries: &'a [(Configuration, Amplitude)]) -> Option<Self> {
        let pc = entries.first()?.0.pc;
        entries.iter().all(|(c, _)| c.pc == pc).then_some(Self { pc, entries })
    }

    pub fn pc(&self) -> usize {
        self.pc
    }

    pub fn entries(&self) -> &'a [(Configuration, Amplitude)] {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

type Pairs = Vec<(Configuration, Amplitude)>;

/// `2^(-k/2)`, exact for even `k`.
fn hadamard_scale(k: u32) -> f64 {
    let half = (k / 2) as i32;
    let base = 0.5f64.powi(half);
    if k % 2 == 1 {
        base * FRAC_1_SQRT_2
    } else {
        base
    }
}

/// Hadamard on one bit of one cell: `|0> -> (|0> + |1>)/sqrt2`,
/// `|1> -> (|0> - |1>)/sqrt2`.
pub fn apply_hadamard_bit(group: &BranchGroup<'_>, cell: usize, bit: u32, ctx: &Context) -> Result<Pairs, FaultKind> {
    apply_havoc_range(group, cell, i64::from(bit), i64::from(bit) + 1, ctx)
}

/// Hadamard on every bit in `[lo, hi)` of `cell`.
pub fn apply_havoc_range(
    group: &BranchGroup<'_>,
    cell: usize,
    lo: i64,
    hi: i64,
    ctx: &Context,
) -> Result<Pairs, FaultKind> {
    let width = i64::from(ctx.word.width());
    if lo < 0 || lo > hi || hi > width {
        return Err(FaultKind::BitRange { lo, hi });
    }
    let next_pc = ctx.next_pc(group.pc)?;
    let (lo, k) = (lo as u32, (hi - lo) as u32);
    let field: u64 = ((1u64 << k) - 1) << lo;
    let scale = hadamard_scale(k);

    let mut out = Vec::with_capacity(group.len() << k);
    for (config, amp) in group.entries {
        let value = config.cells[cell];
        let old_bits = (value & field) >> lo;
        let cleared = value & !field;
        let amp = amp * scale;
        for pattern in 0..(1u64 << k) {
            let mut next = config.clone();
            next.pc = next_pc;
            next.cells[cell] = cleared | (pattern << lo);
            // each bit that is 1 both before and after contributes a sign flip
            let sign = if (pattern & old_bits).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            out.push((next, amp * sign));
        }
    }
    Ok(out)
}

/// Hadamard on data qubit `qubit`, numbered cell-major and little-endian
/// within a cell: qubit `q` is bit `q % width` of cell `q / width`.
pub fn apply_havocb(group: &BranchGroup<'_>, qubit: i64, ctx: &Context) -> Result<Pairs, FaultKind> {
    let width = i64::from(ctx.word.width());
    let qubits = width.saturating_mul(ctx.cell_count as i64);
    if qubit < 0 || qubit >= qubits {
        return Err(FaultKind::QubitOutOfRange { qubit });
    }
    let cell = (qubit / width) as usize;
    let bit = (qubit % width) as u32;
    apply_hadamard_bit(group, cell, bit, ctx)
}

/// Multiplies every amplitude in the group by `x + iy`.
pub fn apply_phase(group: &BranchGroup<'_>, x: f64, y: f64, ctx: &Context) -> Result<Pairs, FaultKind> {
    let next_pc = ctx.next_pc(group.pc)?;
    let factor = Amplitude::new(x, y);
    Ok(group
        .entries
        .iter()
        .map(|(c, a)| {
            let mut next = c.clone();
            next.pc = next_pc;
            (next, a * factor)
        })
        .collect())
}

/// Inversion about the mean over the group: `a -> 2m - a` where `m` is
/// the mean amplitude of the group's entries.
pub fn apply_diffusion(group: &BranchGroup<'_>, ctx: &Context) -> Result<Pairs, FaultKind> {
    let next_pc = ctx.next_pc(group.pc)?;
    let n = group.len() as f64;
    let sum: Amplitude = group.entries.iter().map(|(_, a)| *a).sum();
    let twice_mean = sum * (2.0 / n);
    Ok(group
        .entries
        .iter()
        .map(|(c, a)| {
            let mut next = c.clone();
            next.pc = next_pc;
            (next, twice_mean - a)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{merge_and_prune, WordSize, DEFAULT_PRUNE_EPSILON};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const S: f64 = FRAC_1_SQRT_2;

    fn ctx(width: u32, cells: usize) -> Context {
        Context {
            word: WordSize::new(width),
            program_len: 16,
            cell_count: cells,
        }
    }

    fn entry(pc: usize, cells: &[u64], re: f64) -> (Configuration, Amplitude) {
        (
            Configuration {
                pc,
                cells: cells.to_vec(),
            },
            Amplitude::new(re, 0.0),
        )
    }

    fn values(pairs: &Pairs, cell: usize) -> Vec<(u64, f64)> {
        let mut v: Vec<_> = pairs.iter().map(|(c, a)| (c.cells[cell], a.re)).collect();
        v.sort_by_key(|a| a.0);
        v
    }

    /// Re-homes merged entries at pc 0 so the next transform can run.
    fn rewind(pairs: Pairs) -> Vec<(Configuration, Amplitude)> {
        let mut s: Vec<_> = merge_and_prune(pairs, DEFAULT_PRUNE_EPSILON).entries().to_vec();
        for (c, _) in &mut s {
            c.pc = 0;
        }
        s
    }

    #[test]
    fn hadamard_on_zero_and_one() {
        let c = ctx(8, 1);
        let zero = [entry(0, &[0], 1.0)];
        let out = apply_hadamard_bit(&BranchGroup::new(&zero).unwrap(), 0, 0, &c).unwrap();
        assert_eq!(values(&out, 0), vec![(0, S), (1, S)]);
        assert!(out.iter().all(|(c, _)| c.pc == 1));

        let two = [entry(0, &[2], 1.0)];
        let out = apply_hadamard_bit(&BranchGroup::new(&two).unwrap(), 0, 1, &c).unwrap();
        assert_eq!(values(&out, 0), vec![(0, S), (2, -S)]);
    }

    #[test]
    fn hadamard_twice_is_identity() {
        let c = ctx(8, 1);
        let start = vec![entry(0, &[0], 1.0)];
        let once = rewind(apply_hadamard_bit(&BranchGroup::new(&start).unwrap(), 0, 0, &c).unwrap());
        let twice = merge_and_prune(
            apply_hadamard_bit(&BranchGroup::new(&once).unwrap(), 0, 0, &c).unwrap(),
            DEFAULT_PRUNE_EPSILON,
        );
        assert_eq!(twice.len(), 1);
        assert_eq!(twice.entries()[0].0.cells, vec![0]);
        assert_abs_diff_eq!(twice.entries()[0].1.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn havoc_two_bits_is_uniform_over_four() {
        let c = ctx(8, 1);
        let start = [entry(0, &[0], 1.0)];
        let out = apply_havoc_range(&BranchGroup::new(&start).unwrap(), 0, 0, 2, &c).unwrap();
        assert_eq!(values(&out, 0), vec![(0, 0.5), (1, 0.5), (2, 0.5), (3, 0.5)]);
    }

    #[test]
    fn empty_havoc_range_only_advances() {
        let c = ctx(8, 1);
        let start = [entry(0, &[5], 0.25)];
        let out = apply_havoc_range(&BranchGroup::new(&start).unwrap(), 0, 3, 3, &c).unwrap();
        assert_eq!(out, vec![entry(1, &[5], 0.25)]);
    }

    #[test]
    fn havoc_range_is_an_involution() {
        let c = ctx(8, 1);
        let start = vec![entry(0, &[0], 1.0)];
        let once = rewind(apply_havoc_range(&BranchGroup::new(&start).unwrap(), 0, 0, 2, &c).unwrap());
        let twice = merge_and_prune(
            apply_havoc_range(&BranchGroup::new(&once).unwrap(), 0, 0, 2, &c).unwrap(),
            DEFAULT_PRUNE_EPSILON,
        );
        assert_eq!(twice.len(), 1);
        assert_eq!(twice.entries()[0].0.cells, vec![0]);
        assert_abs_diff_eq!(twice.entries()[0].1.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn havoc_range_errors() {
        let c = ctx(8, 1);
        let start = [entry(0, &[0], 1.0)];
        let g = BranchGroup::new(&start).unwrap();
        assert_eq!(
            apply_havoc_range(&g, 0, 0, 9, &c),
            Err(FaultKind::BitRange { lo: 0, hi: 9 })
        );
        assert_eq!(
            apply_havoc_range(&g, 0, 3, 2, &c),
            Err(FaultKind::BitRange { lo: 3, hi: 2 })
        );
        assert_eq!(
            apply_hadamard_bit(&g, 0, 8, &c),
            Err(FaultKind::BitRange { lo: 8, hi: 9 })
        );
    }

    #[test]
    fn full_width_havoc_is_uniform() {
        let c = ctx(8, 1);
        let start = [entry(0, &[0], 1.0)];
        let out = apply_havoc_range(&BranchGroup::new(&start).unwrap(), 0, 0, 8, &c).unwrap();
        let s = merge_and_prune(out, DEFAULT_PRUNE_EPSILON);
        assert_eq!(s.len(), 256);
        for (_, a) in s.iter() {
            assert_abs_diff_eq!(a.norm_sqr(), 1.0 / 256.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn havocb_indexing() {
        let c = ctx(8, 2);
        let zero = [entry(0, &[0, 0], 1.0)];
        let g = BranchGroup::new(&zero).unwrap();

        let out = apply_havocb(&g, 0, &c).unwrap();
        assert_eq!(values(&out, 0), vec![(0, S), (1, S)]);

        let out = apply_havocb(&g, 8, &c).unwrap();
        assert_eq!(values(&out, 1), vec![(0, S), (1, S)]);
        assert!(out.iter().all(|(c, _)| c.cells[0] == 0));

        let out = apply_havocb(&g, 9, &c).unwrap();
        assert_eq!(values(&out, 1), vec![(0, S), (2, S)]);

        assert_eq!(apply_havocb(&g, 16, &c), Err(FaultKind::QubitOutOfRange { qubit: 16 }));
        assert_eq!(apply_havocb(&g, -1, &c), Err(FaultKind::QubitOutOfRange { qubit: -1 }));
    }

    #[test]
    fn phase_examples() {
        let c = ctx(8, 1);
        let half = [entry(0, &[0], 0.5)];
        let out = apply_phase(&BranchGroup::new(&half).unwrap(), -1.0, 0.0, &c).unwrap();
        assert_eq!(out[0].1, Amplitude::new(-0.5, 0.0));

        let out = apply_phase(&BranchGroup::new(&half).unwrap(), 1.0, 0.0, &c).unwrap();
        assert_eq!(out[0].1, Amplitude::new(0.5, 0.0));

        let mut state = vec![entry(0, &[0], 1.0)];
        for _ in 0..4 {
            state = rewind(apply_phase(&BranchGroup::new(&state).unwrap(), 0.0, 1.0, &c).unwrap());
        }
        assert_eq!(state[0].1, Amplitude::new(1.0, 0.0));
    }

    fn diffuse(amps: &[f64]) -> Vec<f64> {
        let c = ctx(8, 1);
        let entries: Vec<_> = amps
            .iter()
            .enumerate()
            .map(|(i, &a)| entry(0, &[i as u64], a))
            .collect();
        apply_diffusion(&BranchGroup::new(&entries).unwrap(), &c)
            .unwrap()
            .into_iter()
            .map(|(_, a)| a.re)
            .collect()
    }

    #[test]
    fn diffusion_examples() {
        let out = diffuse(&[0.5, 0.5, 0.5, -0.5]);
        for (got, want) in out.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_eq!(diffuse(&[0.5; 4]), vec![0.5; 4]);
        assert_eq!(diffuse(&[0.5, -0.5, 0.5, -0.5]), vec![-0.5, 0.5, -0.5, 0.5]);
    }

    #[test]
    fn group_requires_one_pc() {
        assert!(BranchGroup::new(&[]).is_none());
        let mixed = [entry(0, &[0], 1.0), entry(1, &[0], 1.0)];
        assert!(BranchGroup::new(&mixed).is_none());
    }

    #[test]
    fn last_instruction_faults() {
        let c = Context {
            program_len: 1,
            ..ctx(8, 1)
        };
        let start = [entry(0, &[0], 1.0)];
        let g = BranchGroup::new(&start).unwrap();
        assert_eq!(apply_diffusion(&g, &c), Err(FaultKind::FellOffEnd));
        assert_eq!(apply_phase(&g, 1.0, 0.0, &c), Err(FaultKind::FellOffEnd));
    }

    fn arb_group() -> impl Strategy<Value = Vec<(Configuration, Amplitude)>> {
        prop::collection::btree_map(0u64..16, (-1.0f64..1.0, -1.0f64..1.0), 1..12).prop_map(|m| {
            m.into_iter()
                .map(|(v, (re, im))| {
                    (
                        Configuration {
                            pc: 0,
                            cells: vec![v, 0],
                        },
                        Amplitude::new(re, im),
                    )
                })
                .collect()
        })
    }

    fn norm(pairs: &[(Configuration, Amplitude)]) -> f64 {
        pairs.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    proptest! {
        #[test]
        fn havoc_preserves_norm(group in arb_group(), lo in 0i64..4, k in 0i64..4) {
            let c = ctx(4, 2);
            let hi = (lo + k).min(4);
            let out = apply_havoc_range(&BranchGroup::new(&group).unwrap(), 0, lo, hi, &c).unwrap();
            let merged = merge_and_prune(out, 0.0);
            prop_assert!((merged.norm_sqr() - norm(&group)).abs() < 1e-12);
        }

        #[test]
        fn havocb_preserves_norm(group in arb_group(), q in 0i64..8) {
            let c = ctx(4, 2);
            let out = apply_havocb(&BranchGroup::new(&group).unwrap(), q, &c).unwrap();
            let merged = merge_and_prune(out, 0.0);
            prop_assert!((merged.norm_sqr() - norm(&group)).abs() < 1e-12);
        }

        #[test]
        fn diffusion_preserves_norm_and_is_involution(group in arb_group()) {
            let c = ctx(4, 2);
            let once = apply_diffusion(&BranchGroup::new(&group).unwrap(), &c).unwrap();
            prop_assert!((norm(&once) - norm(&group)).abs() < 1e-12);
            let mut back = once.clone();
            for (cfg, _) in &mut back { cfg.pc = 0; }
            let twice = apply_diffusion(&BranchGroup::new(&back).unwrap(), &c).unwrap();
            for ((_, a), (_, b)) in twice.iter().zip(&group) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn phase_scales_norm(group in arb_group(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let c = ctx(4, 2);
            let out = apply_phase(&BranchGroup::new(&group).unwrap(), x, y, &c).unwrap();
            let factor = x * x + y * y;
            prop_assert!((norm(&out) - factor * norm(&group)).abs() < 1e-12);
        }
    }
}
