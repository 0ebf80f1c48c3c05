//! Command-line front end for the meshflow Airfoil benchmark.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use meshflow::airfoil::reference::run_reference;
use meshflow::airfoil::{generate_mesh, run_airfoil, BenchConfig, Mode};
use meshflow::harness::{self, parse_chunk, parse_grid, parse_modes, prefetch_sweep, RunSpec};
use meshflow::mesh::text::{parse_mesh, MeshFile};
use meshflow::{ChunkPolicy, ExecutionPolicy, PolicyKind, Runtime, RuntimeConfig, WORKERS_ENV};

/// Comma-separated list argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        harness::parse_list(s).map(List)
    }
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse::<PolicyKind>().map_err(|e| e.to_string())
}

fn parse_mode_list(s: &str) -> Result<List<Mode>, String> {
    parse_modes(s).map(List)
}

fn parse_workers(s: &str) -> Result<List<usize>, String> {
    let l: List<usize> = s.parse()?;
    if l.0.contains(&0) {
        return Err("worker counts must be positive".into());
    }
    Ok(l)
}

#[derive(Debug, Parser)]
#[command(name = "meshflow", version, about = "Airfoil-analog benchmark on the meshflow dataflow runtime")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the benchmark matrix and write one row per cell.
    Bench(BenchArgs),
    /// Run the benchmark once and print the final state summary.
    Run(RunArgs),
    /// Run the single-threaded reference implementation.
    Reference(GridArgs),
    /// Write a generated mesh in the text format.
    MeshGen(MeshGenArgs),
    /// Parse and validate a mesh file.
    MeshCheck(MeshCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Cells per side as N,M.
    #[arg(long, default_value = "64,64", value_parser = parse_grid)]
    pub grid: (usize, usize),

    #[arg(long, default_value_t = 10)]
    pub iters: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl GridArgs {
    fn config(&self) -> BenchConfig {
        BenchConfig::new(self.grid.0, self.grid.1, self.iters, self.seed)
    }
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub grid: GridArgs,

    /// barrier, dataflow, or both (comma list accepted).
    #[arg(long, default_value = "both", value_parser = parse_mode_list)]
    pub mode: List<Mode>,

    /// Worker counts to sweep; defaults to MESHFLOW_WORKERS or all cores.
    #[arg(long, env = WORKERS_ENV, value_parser = parse_workers)]
    pub workers: Option<List<usize>>,

    /// seq, par, seq_task or par_task.
    #[arg(long, default_value = "par_task", value_parser = parse_policy)]
    pub policy: PolicyKind,

    /// fixed:C, auto or persistent[:G].
    #[arg(long, default_value = "auto", value_parser = parse_chunk)]
    pub chunk: ChunkPolicy,

    /// Prefetch distance factors; 0 is off.
    #[arg(long = "prefetch-distance", default_value = "0")]
    pub prefetch_distance: List<usize>,

    #[arg(long, default_value_t = harness::MIN_REPS)]
    pub reps: usize,

    #[arg(long)]
    pub no_warmup: bool,

    /// CSV output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also write the rows as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,

    /// Dependency graph of one dataflow run, as JSON.
    #[arg(long)]
    pub graph_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub grid: GridArgs,

    #[arg(long, default_value = "dataflow")]
    pub mode: Mode,

    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,

    #[arg(long, default_value = "par_task", value_parser = parse_policy)]
    pub policy: PolicyKind,

    #[arg(long, default_value = "auto", value_parser = parse_chunk)]
    pub chunk: ChunkPolicy,

    #[arg(long = "prefetch-distance", default_value_t = 0)]
    pub prefetch_distance: usize,

    /// Dependency graph as JSON.
    #[arg(long)]
    pub graph_out: Option<PathBuf>,

    /// Dependency graph as GraphViz text.
    #[arg(long)]
    pub dot_out: Option<PathBuf>,

    /// Per-chunk timing records as CSV.
    #[arg(long)]
    pub chunks_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MeshGenArgs {
    #[arg(long, default_value = "8,8", value_parser = parse_grid)]
    pub grid: (usize, usize),

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MeshCheckArgs {
    pub path: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn default_workers() -> usize {
    RuntimeConfig::from_env().workers
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Bench(a) => bench(a, out),
        Command::Run(a) => run_once(a, out),
        Command::Reference(a) => {
            let state = run_reference(&a.config());
            writeln!(out, "checksum {:016x}", state.checksum())?;
            match state.rms {
                Some(r) => writeln!(out, "rms {r:e}")?,
                None => writeln!(out, "rms -")?,
            }
            Ok(())
        }
        Command::MeshGen(a) => {
            let cfg = BenchConfig::new(a.grid.0, a.grid.1, 0, a.seed);
            let mut rt = Runtime::with_workers(1);
            let mesh = generate_mesh(&mut rt, &cfg)?;
            let text = mesh.dump(&rt)?.to_text();
            match a.out {
                Some(p) => create(&p)?.write_all(text.as_bytes())?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::MeshCheck(a) => {
            let src = std::fs::read_to_string(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
            let file = parse_mesh(&src).with_context(|| format!("invalid mesh {}", a.path.display()))?;
            describe(&file, out)
        }
    }
}

fn describe(file: &MeshFile, out: &mut dyn Write) -> Result<()> {
    for s in &file.sets {
        writeln!(out, "set {} {}", s.name, s.size)?;
    }
    for m in &file.maps {
        writeln!(out, "map {} {} -> {} arity {}", m.name, m.from, m.to, m.arity)?;
    }
    for d in &file.dats {
        writeln!(out, "dat {} on {} dim {} {}", d.name, d.set, d.dim, d.values.kind())?;
    }
    writeln!(out, "ok")?;
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = RunSpec::new(a.grid.config());
    spec.modes = a.mode.0;
    spec.workers = a.workers.map_or_else(|| vec![default_workers()], |l| l.0);
    spec.policy = a.policy;
    spec.chunk = a.chunk;
    spec.prefetch_distances = a.prefetch_distance.0;
    spec.reps = a.reps;
    spec.warmup = !a.no_warmup;
    let rows = harness::run_matrix(&spec)?;

    match &a.out {
        Some(p) => harness::write_csv(&rows, create(p)?)?,
        None => harness::write_csv(&rows, &mut *out)?,
    }
    if let Some(p) = &a.json {
        create(p)?.write_all(harness::to_json(&rows)?.as_bytes())?;
    }
    if spec.prefetch_distances.len() > 1 {
        for &mode in &spec.modes {
            for &w in &spec.workers {
                for p in prefetch_sweep(&rows, mode, w) {
                    eprintln!(
                        "sweep {mode} workers={w} distance={} median={:.6}s gain={:.3}",
                        p.distance, p.median_secs, p.gain_vs_off
                    );
                }
            }
        }
    }
    if let Some(p) = &a.graph_out {
        let cfg = spec.bench;
        let mut rt = Runtime::with_workers(spec.workers[0]);
        let mesh = generate_mesh(&mut rt, &cfg)?;
        let policy = ExecutionPolicy::new(spec.policy).with_chunk(spec.chunk);
        run_airfoil(&rt, &mesh, &cfg, Mode::Dataflow, &policy)?;
        create(p)?.write_all(rt.export_graph().to_json().as_bytes())?;
    }
    Ok(())
}

fn run_once(a: RunArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.grid.config();
    let workers = a.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        bail!("worker count must be positive");
    }
    let mut rt = Runtime::with_workers(workers);
    let mesh = generate_mesh(&mut rt, &cfg)?;
    let policy = ExecutionPolicy::new(a.policy)
        .with_chunk(a.chunk)
        .with_prefetch(a.prefetch_distance);
    let report = run_airfoil(&rt, &mesh, &cfg, a.mode, &policy)?;

    writeln!(out, "grid {}x{} iters {} seed {}", cfg.nx, cfg.ny, cfg.iterations, cfg.seed)?;
    writeln!(out, "mode {} workers {} tasks {}", a.mode, workers, report.tasks)?;
    writeln!(out, "wall {:.6}s", report.wall_secs)?;
    for (name, secs) in &report.loop_secs {
        writeln!(out, "  {name:<10} {secs:.6}s")?;
    }
    if policy.prefetch.is_some() {
        writeln!(out, "hint batches {}", rt.hint_batches())?;
    }
    match report.state.rms {
        Some(r) => writeln!(out, "rms {r:e}")?,
        None => writeln!(out, "rms -")?,
    }
    writeln!(out, "checksum {:016x}", report.state.checksum())?;

    if let Some(p) = &a.graph_out {
        create(p)?.write_all(rt.export_graph().to_json().as_bytes())?;
    }
    if let Some(p) = &a.dot_out {
        create(p)?.write_all(rt.export_graph().to_dot().as_bytes())?;
    }
    if let Some(p) = &a.chunks_out {
        let mut w = create(p)?;
        writeln!(w, "task,name,chunk,color,start_ns,end_ns,nelem,hint_batches")?;
        for r in rt.chunk_records() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.task.0, r.name, r.chunk, r.color, r.start_ns, r.end_ns, r.nelem, r.hint_batches
            )?;
        }
    }
    Ok(())
}
