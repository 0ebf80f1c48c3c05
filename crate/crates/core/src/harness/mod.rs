//! Benchmark matrix over modes, worker counts and prefetch distances.
//!
//! Every run's final-state checksum is compared with the single-threaded
//! reference before any timing leaves this module.

mod parse;

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::airfoil::{reference, run_fresh, BenchConfig, Mode, LOOPS};
use crate::executor::{median, ChunkPolicy, ExecutionPolicy, PolicyKind};

fn median_of(xs: &[f64]) -> f64 {
    median(xs.to_vec()).unwrap_or(0.0)
}

pub use parse::{parse_chunk, parse_grid, parse_list, parse_modes};

/// Bumped whenever a column is added, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Minimum repetitions for a reported median.
pub const MIN_REPS: usize = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("checksum mismatch in {cell}: expected {expected:016x}, got {actual:016x}")]
    ChecksumMismatch { cell: String, expected: u64, actual: u64 },

    #[error("invalid run spec: {0}")]
    Config(String),

    #[error(transparent)]
    Runtime(#[from] crate::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub bench: BenchConfig,
    pub modes: Vec<Mode>,
    pub workers: Vec<usize>,
    pub policy: PolicyKind,
    pub chunk: ChunkPolicy,
    /// Prefetch distance factors; 0 disables prefetching.
    pub prefetch_distances: Vec<usize>,
    pub reps: usize,
    /// Run each cell once before measuring and discard the result.
    pub warmup: bool,
}

impl RunSpec {
    pub fn new(bench: BenchConfig) -> Self {
        RunSpec {
            bench,
            modes: vec![Mode::Barrier, Mode::Dataflow],
            workers: vec![1],
            policy: PolicyKind::ParTask,
            chunk: ChunkPolicy::Auto,
            prefetch_distances: vec![0],
            reps: MIN_REPS,
            warmup: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.bench.nx == 0 || self.bench.ny == 0 {
            return bad(format!("grid {}x{} has no cells", self.bench.nx, self.bench.ny));
        }
        if self.modes.is_empty() {
            return bad("no modes".into());
        }
        if self.workers.is_empty() || self.workers.contains(&0) {
            return bad("worker counts must be a non-empty list of positive integers".into());
        }
        if self.prefetch_distances.is_empty() {
            return bad("no prefetch distances (use 0 for off)".into());
        }
        if self.reps < MIN_REPS {
            return bad(format!("{} repetitions, at least {MIN_REPS} are needed for a median", self.reps));
        }
        Ok(())
    }

    fn cell_policy(&self, distance: usize) -> ExecutionPolicy {
        ExecutionPolicy::new(self.policy)
            .with_chunk(self.chunk)
            .with_prefetch(distance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub nx: usize,
    pub ny: usize,
    pub iters: usize,
    pub seed: u64,
    pub mode: String,
    pub workers: usize,
    pub policy: String,
    pub chunk: String,
    pub prefetch_distance: usize,
    pub reps: usize,
    pub median_secs: f64,
    pub min_secs: f64,
    pub max_secs: f64,
    pub baseline_secs: f64,
    /// Baseline (one worker, sequential, barrier) median over this median.
    pub speedup: f64,
    pub save_soln_secs: f64,
    pub adt_calc_secs: f64,
    pub res_calc_secs: f64,
    pub bres_calc_secs: f64,
    pub update_secs: f64,
    pub checksum: String,
}

struct Measured {
    times: Vec<f64>,
    loops: BTreeMap<String, Vec<f64>>,
}

fn measure(
    spec: &RunSpec,
    workers: usize,
    mode: Mode,
    policy: &ExecutionPolicy,
    expected: u64,
    cell: &str,
) -> Result<Measured, HarnessError> {
    let run = || -> Result<crate::airfoil::AirfoilReport, HarnessError> {
        let report = run_fresh(&spec.bench, workers, mode, policy)?;
        let actual = report.state.checksum();
        if actual != expected {
            return Err(HarnessError::ChecksumMismatch {
                cell: cell.to_owned(),
                expected,
                actual,
            });
        }
        Ok(report)
    };
    if spec.warmup {
        run()?;
    }
    let mut m = Measured {
        times: Vec::with_capacity(spec.reps),
        loops: BTreeMap::new(),
    };
    for _ in 0..spec.reps {
        let report = run()?;
        m.times.push(report.wall_secs);
        for name in LOOPS {
            let secs = report.loop_secs.get(name).copied().unwrap_or(0.0);
            m.loops.entry(name.to_owned()).or_default().push(secs);
        }
    }
    Ok(m)
}

/// Runs every (mode, workers, distance) cell and returns one row per cell,
/// sorted by mode, then workers, then distance.
pub fn run_matrix(spec: &RunSpec) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    let expected = reference::run_reference(&spec.bench).checksum();

    let baseline = measure(
        spec,
        1,
        Mode::Barrier,
        &ExecutionPolicy::seq().with_chunk(spec.chunk),
        expected,
        "baseline",
    )?;
    let baseline_secs = median_of(&baseline.times);

    let mut modes = spec.modes.clone();
    modes.sort();
    modes.dedup();
    let mut workers = spec.workers.clone();
    workers.sort_unstable();
    workers.dedup();
    let mut distances = spec.prefetch_distances.clone();
    distances.sort_unstable();
    distances.dedup();

    let mut rows = Vec::new();
    for &mode in &modes {
        for &w in &workers {
            for &d in &distances {
                let policy = spec.cell_policy(d);
                let cell = format!("{mode} workers={w} prefetch={d}");
                let m = measure(spec, w, mode, &policy, expected, &cell)?;
                let med = median_of(&m.times);
                let loop_med = |name: &str| m.loops.get(name).map_or(0.0, |v| median_of(v));
                rows.push(ResultRow {
                    schema_version: SCHEMA_VERSION,
                    nx: spec.bench.nx,
                    ny: spec.bench.ny,
                    iters: spec.bench.iterations,
                    seed: spec.bench.seed,
                    mode: mode.to_string(),
                    workers: w,
                    policy: format!("{:?}", spec.policy).to_lowercase(),
                    chunk: spec.chunk.to_string(),
                    prefetch_distance: d,
                    reps: spec.reps,
                    median_secs: med,
                    min_secs: m.times.iter().copied().fold(f64::INFINITY, f64::min),
                    max_secs: m.times.iter().copied().fold(0.0, f64::max),
                    baseline_secs,
                    speedup: if med > 0.0 { baseline_secs / med } else { 0.0 },
                    save_soln_secs: loop_med("save_soln"),
                    adt_calc_secs: loop_med("adt_calc"),
                    res_calc_secs: loop_med("res_calc"),
                    bres_calc_secs: loop_med("bres_calc"),
                    update_secs: loop_med("update"),
                    checksum: format!("{expected:016x}"),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    rows: &'a [ResultRow],
}

pub fn to_json(rows: &[ResultRow]) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(&JsonReport {
        schema_version: SCHEMA_VERSION,
        rows,
    })?)
}

/// One point of a prefetch distance sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub distance: usize,
    pub median_secs: f64,
    /// Median with prefetching off over this median; above 1 is faster.
    pub gain_vs_off: f64,
}

/// Sweep over prefetch distances for one mode and worker count, taken from
/// rows of [`run_matrix`]. Empty if the rows lack a distance-0 point.
pub fn prefetch_sweep(rows: &[ResultRow], mode: Mode, workers: usize) -> Vec<SweepPoint> {
    let mut cells: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.mode == mode.as_str() && r.workers == workers)
        .collect();
    cells.sort_by_key(|r| r.prefetch_distance);
    let Some(off) = cells.iter().find(|r| r.prefetch_distance == 0).map(|r| r.median_secs) else {
        return Vec::new();
    };
    cells
        .iter()
        .map(|r| SweepPoint {
            distance: r.prefetch_distance,
            median_secs: r.median_secs,
            gain_vs_off: if r.median_secs > 0.0 { off / r.median_secs } else { 0.0 },
        })
        .collect()
}
