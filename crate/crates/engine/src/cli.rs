//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use batchpic_core::diagnostics::grid_error_norm;
use batchpic_core::real::Real;
use batchpic_core::SimulationDeck;

use crate::deckfile::parse_deck_with;
use crate::error::EngineError;
use crate::output::RunOutputs;
use crate::pipeline::{mean_std, run_simulation, RunSummary, SimulationState};
use crate::vtk::{read_field_dump, write_field_dump, DumpBlock, FieldDump};
use batchpic_core::real::PrecisionMode;

/// Environment variable overriding the deck's worker count.
pub const WORKERS_ENV: &str = "BATCHPIC_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "batchpic", version = crate::output::VERSION, about = "Batched implicit particle-in-cell engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a full simulation, writing diagnostics and dumps.
    Run {
        deck: PathBuf,
        /// Output directory (default: [output].dir, else `batchpic_out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override a deck key, e.g. `--set pipeline.batches=4`.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Time the fused particle phase and report MPA/s statistics.
    Bench {
        deck: PathBuf,
        #[arg(long, default_value_t = 100)]
        cycles: usize,
        /// Also print every per-cycle sample.
        #[arg(long)]
        samples: bool,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Benchmark a list of batch counts.
    Sweep {
        deck: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16, 32])]
        batches: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        cycles: usize,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
    /// Pointwise error norms between two field dumps.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Restrict to one block, e.g. `rho_0`.
        #[arg(long)]
        field: Option<String>,
        /// Write |a - b| per block as a field dump.
        #[arg(long)]
        map: Option<PathBuf>,
    },
}

/// Loads a deck, applying the worker override from the environment and then
/// the explicit `--set` overrides.
pub fn load_deck(path: &Path, set: &[String]) -> Result<SimulationDeck, EngineError> {
    let mut overrides = Vec::new();
    if let Ok(w) = std::env::var(WORKERS_ENV) {
        let w = w.trim();
        if w.parse::<usize>().map_or(true, |n| n == 0) {
            return Err(EngineError::Usage(format!(
                "{WORKERS_ENV} must be a positive integer, got `{w}`"
            )));
        }
        overrides.push(format!("pipeline.workers={w}"));
    }
    overrides.extend(set.iter().cloned());
    parse_deck_with(path, &overrides)
}

/// Runs a deck in its precision mode, handing each state to `observe`.
macro_rules! dispatch {
    ($deck:expr, |$s:ident, $r:ident| $observe:expr) => {
        match $deck.precision_mode()? {
            PrecisionMode::Double => {
                run_simulation::<f64, f64>($deck, |$s, $r| $observe).map(|(_, sum)| sum)
            }
            PrecisionMode::Single => {
                run_simulation::<f32, f32>($deck, |$s, $r| $observe).map(|(_, sum)| sum)
            }
            PrecisionMode::Mixed => {
                run_simulation::<f32, f64>($deck, |$s, $r| $observe).map(|(_, sum)| sum)
            }
        }
    };
}

fn observe_outputs<P: Real, F: Real>(
    out: &mut RunOutputs,
    s: &SimulationState<P, F>,
    r: Option<&crate::CycleReport>,
) -> Result<(), EngineError> {
    out.observe(s, r)
}

pub fn run(deck: SimulationDeck, out: Option<PathBuf>) -> Result<String, EngineError> {
    let dir = out
        .or_else(|| deck.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("batchpic_out"));
    let mut outputs = RunOutputs::create(&deck, &dir)?;
    let particles = deck.total_particles();
    let summary = dispatch!(deck, |s, r| observe_outputs(&mut outputs, s, r))?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} cycles, {particles} particles, outputs in {}",
        summary.reports.len(),
        dir.display()
    );
    let _ = writeln!(text, "{}", mpa_line(&summary));
    Ok(text)
}

fn mpa_line(s: &RunSummary) -> String {
    format!(
        "MPA/s {:.3} ± {:.3} over {} cycles",
        s.mpa_mean,
        s.mpa_std,
        s.reports.len()
    )
}

/// Timing-only run: no files are written.
pub fn bench(mut deck: SimulationDeck, cycles: usize) -> Result<RunSummary, EngineError> {
    deck.cycles = cycles;
    dispatch!(deck, |_s, _r| Ok(()))
}

pub fn bench_text(summary: &RunSummary, samples: bool) -> String {
    let mut text = String::new();
    if samples {
        for r in &summary.reports {
            let _ = writeln!(text, "cycle {:>5}  {:.3} MPA/s", r.cycle, r.mpa_s);
        }
    }
    let _ = writeln!(text, "{}", mpa_line(summary));
    text
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub batches: usize,
    pub mpa_mean: f64,
    pub mpa_std: f64,
    /// Mean throughput relative to the first row.
    pub relative: f64,
}

pub fn sweep(
    deck: &SimulationDeck,
    batches: &[usize],
    cycles: usize,
) -> Result<Vec<SweepRow>, EngineError> {
    let mut rows: Vec<SweepRow> = Vec::new();
    for &m in batches {
        let mut d = deck.clone();
        d.batches = m;
        d.validate()?;
        let summary = bench(d, cycles)?;
        let samples: Vec<f64> = summary.reports.iter().map(|r| r.mpa_s).collect();
        let (mean, std) = mean_std(&samples);
        let base = rows.first().map_or(mean, |r| r.mpa_mean);
        rows.push(SweepRow {
            batches: m,
            mpa_mean: mean,
            mpa_std: std,
            relative: if base > 0.0 { mean / base } else { 0.0 },
        });
    }
    Ok(rows)
}

pub fn sweep_text(rows: &[SweepRow]) -> String {
    let mut text = format!(
        "{:>8} {:>12} {:>12} {:>9}\n",
        "batches", "mpa_mean", "mpa_std", "relative"
    );
    for r in rows {
        let _ = writeln!(
            text,
            "{:>8} {:>12.3} {:>12.3} {:>9.3}",
            r.batches, r.mpa_mean, r.mpa_std, r.relative
        );
    }
    text
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub block: String,
    pub component: usize,
    pub l2: f64,
    pub max_abs: f64,
}

/// Error norms of every block present in both dumps, plus the error-map
/// dump built from them.
pub fn compare(
    a: &FieldDump,
    b: &FieldDump,
    field: Option<&str>,
) -> Result<(Vec<CompareRow>, FieldDump), EngineError> {
    if a.dims != b.dims {
        return Err(EngineError::Format(format!(
            "dump dimensions differ: {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    let mut rows = Vec::new();
    let mut map = FieldDump {
        title: "pointwise |a - b|".into(),
        blocks: Vec::new(),
        ..a.clone()
    };
    for block in &a.blocks {
        if field.is_some_and(|f| f != block.name()) {
            continue;
        }
        let Some(other) = b.block(block.name()) else {
            continue;
        };
        if other.components() != block.components() {
            return Err(EngineError::Format(format!(
                "block `{}` has different component counts",
                block.name()
            )));
        }
        let mut maps = Vec::new();
        for c in 0..block.components() {
            let norm = grid_error_norm(block.component(c).unwrap(), other.component(c).unwrap())?;
            rows.push(CompareRow {
                block: block.name().to_string(),
                component: c,
                l2: norm.l2,
                max_abs: norm.max_abs,
            });
            maps.push(norm.map);
        }
        map.blocks.push(match block {
            DumpBlock::Scalar { name, .. } => DumpBlock::Scalar {
                name: name.clone(),
                values: maps.pop().unwrap(),
            },
            DumpBlock::Vector { name, .. } => {
                let z = maps.pop().unwrap();
                let y = maps.pop().unwrap();
                let x = maps.pop().unwrap();
                DumpBlock::Vector {
                    name: name.clone(),
                    values: [x, y, z],
                }
            }
        });
    }
    if rows.is_empty() {
        return Err(EngineError::Format(match field {
            Some(f) => format!("no block `{f}` in both dumps"),
            None => "the dumps share no blocks".into(),
        }));
    }
    Ok((rows, map))
}

pub fn compare_text(rows: &[CompareRow]) -> String {
    let mut text = format!(
        "{:<12} {:>4} {:>22} {:>22}\n",
        "block", "comp", "l2", "max_abs"
    );
    for r in rows {
        let _ = writeln!(
            text,
            "{:<12} {:>4} {:>22.14e} {:>22.14e}",
            r.block, r.component, r.l2, r.max_abs
        );
    }
    text
}

pub fn execute(cli: Cli) -> Result<String, EngineError> {
    match cli.command {
        Command::Run { deck, out, set } => run(load_deck(&deck, &set)?, out),
        Command::Bench {
            deck,
            cycles,
            samples,
            set,
        } => {
            let summary = bench(load_deck(&deck, &set)?, cycles)?;
            Ok(bench_text(&summary, samples))
        }
        Command::Sweep {
            deck,
            batches,
            cycles,
            set,
        } => {
            let rows = sweep(&load_deck(&deck, &set)?, &batches, cycles)?;
            Ok(sweep_text(&rows))
        }
        Command::Compare { a, b, field, map } => {
            let (rows, errors) = compare(
                &read_field_dump(&a)?,
                &read_field_dump(&b)?,
                field.as_deref(),
            )?;
            if let Some(path) = map {
                write_field_dump(&errors, path)?;
            }
            Ok(compare_text(&rows))
        }
    }
}
