//! Classical-versus-Grover factoring sweep.

use std::io;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus;
use crate::engine::{distribution, Engine, RunLimits, RunOutcome};
use crate::isa::{Program, DEFAULT_WORD_WIDTH};
use crate::machine::BranchFault;

/// Cell holding the reported factor in both factoring programs.
pub const FACTOR_CELL: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Classical,
    Grover,
}

impl Algorithm {
    pub fn program(self, n: u64) -> Program {
        match self {
            Algorithm::Classical => corpus::trial_division(n),
            Algorithm::Grover => corpus::grover_fixed(n, corpus::candidate_bits(n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub n: u64,
    pub algorithm: Algorithm,
    pub steps: u64,
    pub branch_peak: usize,
    pub wall_time_s: f64,
    pub success_probability: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("sweep range {n_min}..={n_max} must satisfy 4 <= n_min <= n_max <= {limit}")]
    Range { n_min: u64, n_max: u64, limit: u64 },
    #[error("n = {n}, {algorithm:?}: {fault}")]
    Fault {
        n: u64,
        algorithm: Algorithm,
        fault: BranchFault,
    },
    #[error("n = {n}, {algorithm:?}: did not halt within {steps} steps")]
    Timeout { n: u64, algorithm: Algorithm, steps: u64 },
}

/// Probability mass on reported factors `d1 >= 2` that divide `n`.
pub fn success_probability(outcome: &RunOutcome, n: u64) -> f64 {
    distribution(&outcome.state, FACTOR_CELL)
        .map(|d| {
            d.iter()
                .filter(|(&v, _)| v >= 2 && n.is_multiple_of(v))
                .fold(0.0, |acc, (_, p)| acc + p)
        })
        .unwrap_or(0.0)
}

/// Runs one program of the sweep.
pub fn run_one(n: u64, algorithm: Algorithm, limits: RunLimits) -> Result<(BenchRecord, RunOutcome), BenchError> {
    let program = algorithm.program(n);
    let start = Instant::now();
    let outcome = Engine::new(&program, limits).run();
    let wall_time_s = start.elapsed().as_secs_f64();
    if let Some(fault) = outcome.fault.clone() {
        return Err(BenchError::Fault { n, algorithm, fault });
    }
    if !outcome.halted {
        return Err(BenchError::Timeout {
            n,
            algorithm,
            steps: outcome.steps,
        });
    }
    let record = BenchRecord {
        n,
        algorithm,
        steps: outcome.steps,
        branch_peak: outcome.branch_peak,
        wall_time_s,
        success_probability: success_probability(&outcome, n),
    };
    Ok((record, outcome))
}

/// Runs both algorithms for every `n` in `n_min..=n_max`. Rows come back
/// sorted by `(n, algorithm)` whatever the completion order.
pub fn sweep(n_min: u64, n_max: u64, limits: RunLimits) -> Result<Vec<BenchRecord>, BenchError> {
    let limit = 1u64 << (DEFAULT_WORD_WIDTH - 1);
    if n_min < 4 || n_min > n_max || n_max > limit {
        return Err(BenchError::Range { n_min, n_max, limit });
    }
    let jobs: Vec<(u64, Algorithm)> = (n_min..=n_max)
        .flat_map(|n| [(n, Algorithm::Classical), (n, Algorithm::Grover)])
        .collect();
    let run = |&(n, alg): &(u64, Algorithm)| run_one(n, alg, limits).map(|(r, _)| r);
    let results: Vec<_> = if limits.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    let mut records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| (r.n, r.algorithm));
    Ok(records)
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: io::Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_finds_three_for_fifteen() {
        let (record, outcome) = run_one(15, Algorithm::Classical, RunLimits::default()).unwrap();
        assert_eq!(record.success_probability, 1.0);
        assert_eq!(outcome.state.entries()[0].0.cells[FACTOR_CELL], 3);
        assert_eq!(record.branch_peak, 1);
    }

    #[test]
    fn prime_takes_longer_than_neighbours() {
        let steps = |n| run_one(n, Algorithm::Classical, RunLimits::default()).unwrap().0.steps;
        assert!(steps(13) > steps(12));
        assert!(steps(13) > steps(14));
    }

    #[test]
    fn grover_twenty_one() {
        let (record, _) = run_one(21, Algorithm::Grover, RunLimits::default()).unwrap();
        assert!((record.success_probability - 1.0).abs() < 1e-9);
        assert_eq!(record.branch_peak, 4);
    }

    #[test]
    fn range_is_checked() {
        assert!(matches!(
            sweep(3, 10, RunLimits::default()),
            Err(BenchError::Range { .. })
        ));
        assert!(matches!(
            sweep(10, 9, RunLimits::default()),
            Err(BenchError::Range { .. })
        ));
        assert!(matches!(
            sweep(4, 129, RunLimits::default()),
            Err(BenchError::Range { .. })
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let records = sweep(4, 5, RunLimits::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("n,algorithm,steps,branch_peak,wall_time_s,success_probability")
        );
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].starts_with("4,classical,"));
        assert!(rows[1].starts_with("4,grover,"));
        assert!(rows[2].starts_with("5,classical,"));
    }
}
