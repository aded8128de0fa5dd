//! `qvm`: assemble and run quantum-augmented assembly programs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use qvm_core::bench;
use qvm_core::engine::{distribution, Engine, RunLimits, RunOutcome, Sampler};
use qvm_core::isa::{parse_cell_list, parse_define, validate, Assembler, Operand, Program, Settings};
use qvm_core::oracle::{compare, dense_run, OracleError};
use serde_json::{json, Value};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_FAULT: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

#[derive(Parser)]
#[command(name = "qvm", version, about = "Run quantum-augmented assembly programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program and report marginal distributions.
    Run {
        #[command(flatten)]
        program: ProgramArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Run a program and print JSON trace records.
    Trace {
        #[command(flatten)]
        program: ProgramArgs,
        /// Emit a record every N steps; 0 disables tracing.
        #[arg(long, default_value_t = 1)]
        trace_every: u64,
        /// Branches listed per record.
        #[arg(long, default_value_t = 8)]
        top_k: usize,
    },
    /// Run a program and draw measurement samples from the final state.
    Sample {
        #[command(flatten)]
        program: ProgramArgs,
        #[command(flatten)]
        report: ReportArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        shots: u64,
    },
    /// Compare the sparse engine against the dense simulator.
    Check {
        #[command(flatten)]
        program: ProgramArgs,
        /// Largest allowed absolute amplitude difference.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Factor every n in N_MIN..=N_MAX classically and with Grover search.
    Bench {
        n_min: u64,
        n_max: u64,
        /// Write the records as CSV to this path ("-" for stdout).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Args)]
struct ProgramArgs {
    file: PathBuf,
    /// Bind an identifier, e.g. --define NUMBER1=21. Repeatable.
    #[arg(long = "define", short = 'D', value_name = "NAME=INT", value_parser = parse_define)]
    defines: Vec<(String, i64)>,
    /// Word width in bits.
    #[arg(long)]
    width: Option<u32>,
    /// Number of memory cells.
    #[arg(long)]
    cells: Option<usize>,
    /// Step budget; a run still going after it exits with code 4.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Evaluate branch groups on a thread pool.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Cells to report, e.g. d1,d4. Defaults to every cell the program names.
    #[arg(long, value_parser = parse_cells)]
    cells_of_interest: Option<CellList>,
    /// Print a JSON report instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone)]
struct CellList(Vec<usize>);

fn parse_cells(text: &str) -> Result<CellList, qvm_core::isa::ArgError> {
    parse_cell_list(text).map(CellList)
}

/// A failure that maps to a specific exit code after its message is printed.
struct Failure {
    code: u8,
    message: String,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: format!("{e:#}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qvm: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Run { program, report } => cmd_run(&program, &report),
        Command::Trace {
            program,
            trace_every,
            top_k,
        } => cmd_trace(&program, trace_every, top_k),
        Command::Sample {
            program,
            report,
            seed,
            shots,
        } => cmd_sample(&program, &report, seed, shots),
        Command::Check { program, tolerance } => cmd_check(&program, tolerance),
        Command::Bench {
            n_min,
            n_max,
            csv,
            max_steps,
            parallel,
        } => cmd_bench(n_min, n_max, csv.as_deref(), max_steps, parallel),
    }
}

fn load(args: &ProgramArgs) -> Result<Program, Failure> {
    let source = fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let defaults = Settings::default();
    let settings = Settings {
        word_width: args.width.unwrap_or(defaults.word_width),
        cell_count: args.cells.unwrap_or(defaults.cell_count),
        max_steps: args.max_steps.unwrap_or(defaults.max_steps),
    };
    let name = args.file.display();
    let program = Assembler::new()
        .settings(settings)
        .defines(args.defines.iter().cloned())
        .parse(&source)
        .map_err(|e| Failure {
            code: EXIT_INPUT,
            message: e
                .diagnostics
                .iter()
                .map(|d| format!("{name}:{d}"))
                .collect::<Vec<_>>()
                .join("\n"),
        })?;
    for d in validate(&program) {
        eprintln!("{name}:{d}");
    }
    Ok(program)
}

fn limits(program: &Program, args: &ProgramArgs) -> RunLimits {
    RunLimits {
        parallel: args.parallel,
        ..RunLimits::for_program(program)
    }
}

fn named_cells(program: &Program) -> Vec<usize> {
    let cells: BTreeSet<usize> = program
        .instructions()
        .iter()
        .flat_map(|i| i.operands())
        .filter_map(|op| match op {
            Operand::CellRef(c) => Some(*c),
            _ => None,
        })
        .collect();
    cells.into_iter().collect()
}

fn cells_of_interest(program: &Program, report: &ReportArgs) -> Result<Vec<usize>, Failure> {
    let cells = report
        .cells_of_interest
        .as_ref()
        .map(|c| c.0.clone())
        .unwrap_or_else(|| named_cells(program));
    let count = program.settings().cell_count;
    if let Some(c) = cells.iter().find(|&&c| c >= count) {
        return Err(Failure {
            code: EXIT_INPUT,
            message: format!("cell d{c} is outside the configured {count} cells"),
        });
    }
    Ok(cells)
}

/// Exit code for a finished run, printing why it is nonzero.
fn outcome_code(outcome: &RunOutcome) -> u8 {
    if let Some(fault) = &outcome.fault {
        eprintln!("qvm: fault at {fault}");
        EXIT_FAULT
    } else if !outcome.halted {
        eprintln!("qvm: no halt after {} steps", outcome.steps);
        EXIT_TIMEOUT
    } else {
        0
    }
}

fn report_json(outcome: &RunOutcome, cells: &[usize]) -> Value {
    let mut distributions = serde_json::Map::new();
    for &c in cells {
        let dist = distribution(&outcome.state, c).unwrap_or_default();
        let dist: serde_json::Map<String, Value> = dist.into_iter().map(|(v, p)| (v.to_string(), json!(p))).collect();
        distributions.insert(format!("d{c}"), Value::Object(dist));
    }
    json!({
        "halted": outcome.halted,
        "steps": outcome.steps,
        "norm": outcome.final_norm,
        "branches": outcome.state.len(),
        "branch_peak": outcome.branch_peak,
        "fault": outcome.fault,
        "distributions": distributions,
    })
}

fn cmd_run(args: &ProgramArgs, report: &ReportArgs) -> Result<u8, Failure> {
    let program = load(args)?;
    let cells = cells_of_interest(&program, report)?;
    let outcome = Engine::new(&program, limits(&program, args)).run();
    let mut out = io::stdout().lock();
    if report.json {
        writeln!(out, "{}", report_json(&outcome, &cells)).map_err(anyhow::Error::from)?;
    } else {
        print_text_report(&mut out, &outcome, &cells).map_err(anyhow::Error::from)?;
    }
    Ok(outcome_code(&outcome))
}

fn print_text_report(out: &mut impl Write, outcome: &RunOutcome, cells: &[usize]) -> io::Result<()> {
    writeln!(
        out,
        "halted: {}  steps: {}  norm: {:.12}  branches: {} (peak {})",
        outcome.halted,
        outcome.steps,
        outcome.final_norm,
        outcome.state.len(),
        outcome.branch_peak
    )?;
    for &c in cells {
        let dist = distribution(&outcome.state, c).unwrap_or_default();
        writeln!(out, "d{c}:")?;
        for (v, p) in dist {
            writeln!(out, "  {v:>6}  {p:.6}")?;
        }
    }
    Ok(())
}

fn cmd_trace(args: &ProgramArgs, trace_every: u64, top_k: usize) -> Result<u8, Failure> {
    let program = load(args)?;
    let limits = RunLimits {
        trace_every,
        trace_top_k: top_k,
        ..limits(&program, args)
    };
    let mut out = io::stdout().lock();
    let mut write_err = None;
    let outcome = Engine::new(&program, limits).run_traced(|record| {
        if write_err.is_none() {
            let line = serde_json::to_string(record).expect("trace record serializes");
            if let Err(e) = writeln!(out, "{line}") {
                write_err = Some(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(anyhow::Error::from(e).into());
    }
    Ok(outcome_code(&outcome))
}

fn cmd_sample(args: &ProgramArgs, report: &ReportArgs, seed: u64, shots: u64) -> Result<u8, Failure> {
    let program = load(args)?;
    let cells = cells_of_interest(&program, report)?;
    let outcome = Engine::new(&program, limits(&program, args)).run();
    let code = outcome_code(&outcome);
    let mut sampler = Sampler::new(seed);
    let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    for _ in 0..shots {
        let config = sampler.draw(&outcome.state).map_err(|e| Failure {
            code: if code == 0 { EXIT_FAULT } else { code },
            message: e.to_string(),
        })?;
        *counts
            .entry(cells.iter().map(|&c| config.cells[c]).collect())
            .or_default() += 1;
    }
    let label = |values: &[u64]| {
        cells
            .iter()
            .zip(values)
            .map(|(c, v)| format!("d{c}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = io::stdout().lock();
    let written = if report.json {
        let counts: serde_json::Map<String, Value> = counts.iter().map(|(k, n)| (label(k), json!(n))).collect();
        writeln!(out, "{}", json!({ "seed": seed, "shots": shots, "counts": counts }))
    } else {
        counts
            .iter()
            .try_for_each(|(k, n)| writeln!(out, "{n:>8}  {}", label(k)))
    };
    written.map_err(anyhow::Error::from)?;
    Ok(code)
}

fn cmd_check(args: &ProgramArgs, tolerance: f64) -> Result<u8, Failure> {
    let program = load(args)?;
    let limits = limits(&program, args);
    let dense = match dense_run(&program, limits) {
        Ok(d) => d,
        Err(e @ OracleError::TooLarge { .. }) => {
            return Err(Failure {
                code: EXIT_CHECK_FAILED,
                message: e.to_string(),
            })
        }
    };
    let sparse = Engine::new(&program, limits).run();
    let report = compare(&sparse.state, &dense.state, tolerance);
    let agree = report.passed && sparse.halted == dense.halted && sparse.steps == dense.steps;
    println!(
        "{}",
        json!({
            "passed": agree,
            "max_abs_diff": report.max_abs_diff,
            "tolerance": report.tolerance,
            "worst": report.worst,
            "unrepresentable": report.unrepresentable,
            "sparse": { "halted": sparse.halted, "steps": sparse.steps, "fault": sparse.fault },
            "dense": { "halted": dense.halted, "steps": dense.steps, "fault": dense.fault },
        })
    );
    Ok(if agree { 0 } else { EXIT_CHECK_FAILED })
}

fn cmd_bench(
    n_min: u64,
    n_max: u64,
    csv: Option<&Path>,
    max_steps: Option<u64>,
    parallel: bool,
) -> Result<u8, Failure> {
    let defaults = RunLimits::default();
    let limits = RunLimits {
        max_steps: max_steps.unwrap_or(defaults.max_steps),
        parallel,
        ..defaults
    };
    let records = bench::sweep(n_min, n_max, limits).map_err(|e| Failure {
        code: match e {
            bench::BenchError::Range { .. } => EXIT_INPUT,
            bench::BenchError::Fault { .. } => EXIT_FAULT,
            bench::BenchError::Timeout { .. } => EXIT_TIMEOUT,
        },
        message: e.to_string(),
    })?;
    match csv {
        Some(path) if path != Path::new("-") => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            bench::write_csv(&records, file).context("writing CSV")?;
        }
        _ => bench::write_csv(&records, io::stdout().lock()).context("writing CSV")?,
    }
    Ok(0)
}
