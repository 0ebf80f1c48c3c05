//! Desk-scale Airfoil analog: the five-loop time step over a generated quad
//! grid, with closed-form surrogate kernels.
//!
//! Per iteration:
//!
//! | loop      | set    | arguments                                                        |
//! |-----------|--------|------------------------------------------------------------------|
//! | save_soln | cells  | q READ, qold WRITE                                               |
//! | adt_calc  | cells  | x READ via cell->nodes (4), q READ, adt WRITE                    |
//! | res_calc  | edges  | x READ via edge->nodes (2), q, adt READ and res INC via edge->cells (2) |
//! | bres_calc | bedges | q, adt READ and res INC via bedge->cell                          |
//! | update    | cells  | qold READ, q WRITE, res RW, adt READ, rms INC                    |
//!
//! Kernels:
//!
//! * adt = (sum |q_k| / 4) * (perimeter / 4) + 1e-3, with the perimeter
//!   measured as sum(|dx| + |dy|) over the four sides.
//! * res_calc: f_k = (q1_k - q2_k) * len * w, w = 1 / (1 + adt1 + adt2),
//!   len the Euclidean face length; res1 -= f, res2 += f.
//! * bres_calc: res += 0.1 * (qinf - q) / (1 + adt).
//! * update: del = 0.2 * res / (1 + adt); q = qold + del; res = 0;
//!   rms += sum del_k^2.

mod checksum;
mod grid;
pub mod reference;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use checksum::{fnv1a64, state_checksum};
pub use grid::{splitmix64, uniform, GridTopology, QINF};

use crate::error::{Error, Result};
use crate::executor::{ExecutionPolicy, Kernel};
use crate::mesh::text::MeshFile;
use crate::mesh::{AccessMode, Global, LoopArg, MeshDat, MeshMap, MeshSet};
use crate::runtime::Runtime;
use crate::scalar::Values;

pub const SAVE_SOLN: &str = "save_soln";
pub const ADT_CALC: &str = "adt_calc";
pub const RES_CALC: &str = "res_calc";
pub const BRES_CALC: &str = "bres_calc";
pub const UPDATE: &str = "update";
pub const LOOPS: [&str; 5] = [SAVE_SOLN, ADT_CALC, RES_CALC, BRES_CALC, UPDATE];

pub(crate) const ADT_EPS: f64 = 1e-3;
pub(crate) const BRES_GAIN: f64 = 0.1;
pub(crate) const UPDATE_GAIN: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub nx: usize,
    pub ny: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(nx: usize, ny: usize, iterations: usize, seed: u64) -> Self {
        BenchConfig {
            nx,
            ny,
            iterations,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config(format!(
                "grid {}x{} has no cells",
                self.nx, self.ny
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Each loop's outputs are awaited before the next loop is submitted.
    Barrier,
    /// Everything is submitted up front; only the end is awaited.
    Dataflow,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Barrier => "barrier",
            Mode::Dataflow => "dataflow",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "barrier" => Ok(Mode::Barrier),
            "dataflow" => Ok(Mode::Dataflow),
            _ => Err(format!("unknown mode `{s}` (expected barrier or dataflow)")),
        }
    }
}

/// Handles of the declared Airfoil mesh.
#[derive(Debug, Clone, Copy)]
pub struct AirfoilMesh {
    pub nodes: MeshSet,
    pub cells: MeshSet,
    pub edges: MeshSet,
    pub bedges: MeshSet,
    pub edge_cells: MeshMap,
    pub edge_nodes: MeshMap,
    pub bedge_cell: MeshMap,
    pub cell_nodes: MeshMap,
    pub p_x: MeshDat,
    pub p_q: MeshDat,
    pub p_qold: MeshDat,
    pub p_res: MeshDat,
    pub p_adt: MeshDat,
    pub rms: Global,
}

impl AirfoilMesh {
    pub fn sets(&self) -> [MeshSet; 4] {
        [self.nodes, self.cells, self.edges, self.bedges]
    }

    pub fn maps(&self) -> [MeshMap; 4] {
        [self.edge_cells, self.edge_nodes, self.bedge_cell, self.cell_nodes]
    }

    pub fn dats(&self) -> [MeshDat; 5] {
        [self.p_x, self.p_q, self.p_qold, self.p_res, self.p_adt]
    }

    /// Snapshot in the text mesh format.
    pub fn dump(&self, rt: &Runtime) -> Result<MeshFile> {
        MeshFile::capture(rt, &self.sets(), &self.maps(), &self.dats()).map_err(|e| match e {
            crate::mesh::text::TextError::Mesh(e) => e,
            other => Error::Config(other.to_string()),
        })
    }
}

/// Declares the grid of `cfg` and its seeded initial state in `rt`.
pub fn generate_mesh(rt: &mut Runtime, cfg: &BenchConfig) -> Result<AirfoilMesh> {
    cfg.validate()?;
    let g = GridTopology::generate(cfg.nx, cfg.ny);
    let nodes = rt.decl_set(g.nnodes, "nodes");
    let cells = rt.decl_set(g.ncells, "cells");
    let edges = rt.decl_set(g.nedges, "edges");
    let bedges = rt.decl_set(g.nbedges, "bedges");
    let edge_cells = rt.decl_map(edges, cells, 2, &g.edge_cells, "pecell")?;
    let edge_nodes = rt.decl_map(edges, nodes, 2, &g.edge_nodes, "pedge")?;
    let bedge_cell = rt.decl_map(bedges, cells, 1, &g.bedge_cell, "pbecell")?;
    let cell_nodes = rt.decl_map(cells, nodes, 4, &g.cell_nodes, "pcell")?;
    let p_x = rt.decl_dat(nodes, 2, g.coords(cfg.seed), "p_x")?;
    let q = g.initial_q(cfg.seed);
    let p_q = rt.decl_dat(cells, 4, q.clone(), "p_q")?;
    let p_qold = rt.decl_dat(cells, 4, q, "p_qold")?;
    let p_res = rt.decl_dat(cells, 4, vec![0.0; 4 * g.ncells], "p_res")?;
    let p_adt = rt.decl_dat(cells, 1, vec![0.0; g.ncells], "p_adt")?;
    let rms = rt.decl_global(vec![0.0], "rms")?;
    Ok(AirfoilMesh {
        nodes,
        cells,
        edges,
        bedges,
        edge_cells,
        edge_nodes,
        bedge_cell,
        cell_nodes,
        p_x,
        p_q,
        p_qold,
        p_res,
        p_adt,
        rms,
    })
}

/// Final contents of every dat, plus the accumulated residual if any
/// iteration ran.
#[derive(Debug, Clone, PartialEq)]
pub struct AirfoilState {
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub qold: Vec<f64>,
    pub res: Vec<f64>,
    pub adt: Vec<f64>,
    pub rms: Option<f64>,
}

impl AirfoilState {
    pub fn checksum(&self) -> u64 {
        state_checksum(self)
    }
}

#[derive(Debug, Clone)]
pub struct AirfoilReport {
    pub state: AirfoilState,
    /// Submission through completion of all iterations.
    pub wall_secs: f64,
    /// Busy time per loop name, summed over chunks.
    pub loop_secs: BTreeMap<String, f64>,
    pub tasks: u64,
}

fn save_soln() -> Kernel {
    Kernel::new(|a| {
        let q = a.f64_array::<4>(0);
        a.f64_mut(1).copy_from_slice(&q);
    })
}

fn adt_calc() -> Kernel {
    Kernel::new(|a| {
        let x: [[f64; 2]; 4] = [a.f64_array(0), a.f64_array(1), a.f64_array(2), a.f64_array(3)];
        let q = a.f64_array::<4>(4);
        let mut perimeter = 0.0;
        for k in 0..4 {
            let (p, n) = (x[k], x[(k + 1) % 4]);
            perimeter += (n[0] - p[0]).abs() + (n[1] - p[1]).abs();
        }
        let qabs = q[0].abs() + q[1].abs() + q[2].abs() + q[3].abs();
        a.f64_mut(5)[0] = 0.25 * qabs * (0.25 * perimeter) + ADT_EPS;
    })
}

fn res_calc() -> Kernel {
    Kernel::new(|a| {
        let (x1, x2) = (a.f64_array::<2>(0), a.f64_array::<2>(1));
        let (q1, q2) = (a.f64_array::<4>(2), a.f64_array::<4>(3));
        let (adt1, adt2) = (a.f64(4)[0], a.f64(5)[0]);
        let (dx, dy) = (x2[0] - x1[0], x2[1] - x1[1]);
        let len = (dx * dx + dy * dy).sqrt();
        let w = 1.0 / (1.0 + adt1 + adt2);
        let mut f = [0.0; 4];
        for k in 0..4 {
            f[k] = (q1[k] - q2[k]) * len * w;
        }
        for (r, fk) in a.f64_mut(6).iter_mut().zip(f) {
            *r = -fk;
        }
        a.f64_mut(7).copy_from_slice(&f);
    })
}

fn bres_calc() -> Kernel {
    Kernel::new(|a| {
        let q = a.f64_array::<4>(0);
        let adt = a.f64(1)[0];
        let res = a.f64_mut(2);
        for k in 0..4 {
            res[k] = BRES_GAIN * (QINF[k] - q[k]) / (1.0 + adt);
        }
    })
}

fn update() -> Kernel {
    Kernel::new(|a| {
        let qold = a.f64_array::<4>(0);
        let res = a.f64_array::<4>(2);
        let adt = a.f64(3)[0];
        let mut del = [0.0; 4];
        let mut sum = 0.0;
        for k in 0..4 {
            del[k] = UPDATE_GAIN * res[k] / (1.0 + adt);
            sum += del[k] * del[k];
        }
        let q = a.f64_mut(1);
        for k in 0..4 {
            q[k] = qold[k] + del[k];
        }
        a.f64_mut(2).fill(0.0);
        a.f64_mut(4)[0] = sum;
    })
}

/// Submits `cfg.iterations` time steps and waits for them.
pub fn run_airfoil(
    rt: &Runtime,
    mesh: &AirfoilMesh,
    cfg: &BenchConfig,
    mode: Mode,
    policy: &ExecutionPolicy,
) -> Result<AirfoilReport> {
    use AccessMode::*;
    let m = mesh;
    let loops: [(&str, MeshSet, Vec<LoopArg>, Kernel); 5] = [
        (
            SAVE_SOLN,
            m.cells,
            vec![LoopArg::direct(m.p_q, Read), LoopArg::direct(m.p_qold, Write)],
            save_soln(),
        ),
        (
            ADT_CALC,
            m.cells,
            vec![
                LoopArg::indirect(m.p_x, m.cell_nodes, 0, Read),
                LoopArg::indirect(m.p_x, m.cell_nodes, 1, Read),
                LoopArg::indirect(m.p_x, m.cell_nodes, 2, Read),
                LoopArg::indirect(m.p_x, m.cell_nodes, 3, Read),
                LoopArg::direct(m.p_q, Read),
                LoopArg::direct(m.p_adt, Write),
            ],
            adt_calc(),
        ),
        (
            RES_CALC,
            m.edges,
            vec![
                LoopArg::indirect(m.p_x, m.edge_nodes, 0, Read),
                LoopArg::indirect(m.p_x, m.edge_nodes, 1, Read),
                LoopArg::indirect(m.p_q, m.edge_cells, 0, Read),
                LoopArg::indirect(m.p_q, m.edge_cells, 1, Read),
                LoopArg::indirect(m.p_adt, m.edge_cells, 0, Read),
                LoopArg::indirect(m.p_adt, m.edge_cells, 1, Read),
                LoopArg::indirect(m.p_res, m.edge_cells, 0, Inc),
                LoopArg::indirect(m.p_res, m.edge_cells, 1, Inc),
            ],
            res_calc(),
        ),
        (
            BRES_CALC,
            m.bedges,
            vec![
                LoopArg::indirect(m.p_q, m.bedge_cell, 0, Read),
                LoopArg::indirect(m.p_adt, m.bedge_cell, 0, Read),
                LoopArg::indirect(m.p_res, m.bedge_cell, 0, Inc),
            ],
            bres_calc(),
        ),
        (
            UPDATE,
            m.cells,
            vec![
                LoopArg::direct(m.p_qold, Read),
                LoopArg::direct(m.p_q, Write),
                LoopArg::direct(m.p_res, Rw),
                LoopArg::direct(m.p_adt, Read),
                LoopArg::gbl(m.rms, Inc),
            ],
            update(),
        ),
    ];

    let tasks_before = rt.submitted_tasks();
    let start = Instant::now();
    for _ in 0..cfg.iterations {
        for (name, set, args, kernel) in &loops {
            let out = rt.submit_loop(name, *set, args, kernel.clone(), policy)?;
            if mode == Mode::Barrier {
                out.wait()?;
            }
        }
    }
    rt.wait_all()?;
    let wall_secs = start.elapsed().as_secs_f64();

    let mut loop_secs = BTreeMap::new();
    for r in rt.chunk_records() {
        *loop_secs.entry(r.name.clone()).or_insert(0.0) += r.duration_secs();
    }
    Ok(AirfoilReport {
        state: read_state(rt, mesh, cfg.iterations > 0)?,
        wall_secs,
        loop_secs,
        tasks: rt.submitted_tasks() - tasks_before,
    })
}

fn f64s(v: Values) -> Vec<f64> {
    match v {
        Values::F64(v) => v,
        other => panic!("expected f64 data, found {}", other.kind()),
    }
}

pub fn read_state(rt: &Runtime, m: &AirfoilMesh, with_rms: bool) -> Result<AirfoilState> {
    Ok(AirfoilState {
        x: f64s(rt.read_dat(m.p_x)?),
        q: f64s(rt.read_dat(m.p_q)?),
        qold: f64s(rt.read_dat(m.p_qold)?),
        res: f64s(rt.read_dat(m.p_res)?),
        adt: f64s(rt.read_dat(m.p_adt)?),
        rms: if with_rms {
            Some(f64s(rt.read_global(m.rms)?)[0])
        } else {
            None
        },
    })
}

/// Generates the mesh in a fresh runtime and runs it.
pub fn run_fresh(cfg: &BenchConfig, workers: usize, mode: Mode, policy: &ExecutionPolicy) -> Result<AirfoilReport> {
    let mut rt = Runtime::with_workers(workers);
    let mesh = generate_mesh(&mut rt, cfg)?;
    run_airfoil(&rt, &mesh, cfg, mode, policy)
}
