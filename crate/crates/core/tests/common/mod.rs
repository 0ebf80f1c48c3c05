//! Random loop programs over a small mesh, a sequential interpreter for
//! them, and brute-force dependency derivation from their access logs.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use meshflow::{
    AccessMode, ChunkPolicy, ExecutionPolicy, Global, Hazard, Kernel, LoopArg, LoopOutputs, MeshDat, MeshMap,
    MeshSet, PolicyKind, Resource, Runtime, TaskId, Values,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Dats 0 and 1 live on set A, 2 and 3 on set B, 4 on the empty set C.
pub const NDATS: usize = 5;
const DAT_SET: [usize; NDATS] = [0, 0, 1, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Direct(usize),
    /// Dat on B reached from A through the map.
    Indirect(usize, usize),
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgArg {
    pub target: Target,
    pub mode: AccessMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgLoop {
    pub set: usize,
    pub args: Vec<ProgArg>,
    pub salt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub sizes: [usize; 3],
    pub dims: [usize; NDATS],
    /// A -> B, arity 2.
    pub table: Vec<u32>,
    pub init: Vec<Vec<f64>>,
    pub global_init: f64,
    pub loops: Vec<ProgLoop>,
}

fn pick_mode(rng: &mut StdRng, global: bool) -> AccessMode {
    if global {
        [AccessMode::Read, AccessMode::Inc][rng.gen_range(0..2)]
    } else {
        [AccessMode::Read, AccessMode::Write, AccessMode::Rw, AccessMode::Inc][rng.gen_range(0..4)]
    }
}

impl Program {
    pub fn random(seed: u64, nloops: usize) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let sizes = [rng.gen_range(1..40), rng.gen_range(1..12), 0];
        let dims = [
            rng.gen_range(1..3),
            rng.gen_range(1..3),
            rng.gen_range(1..3),
            rng.gen_range(1..3),
            1,
        ];
        let table = (0..sizes[0] * 2).map(|_| rng.gen_range(0..sizes[1]) as u32).collect();
        let init = (0..NDATS)
            .map(|d| (0..sizes[DAT_SET[d]] * dims[d]).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();

        let mut loops = Vec::with_capacity(nloops);
        for _ in 0..nloops {
            let r: f64 = rng.gen();
            let set = if r < 0.6 {
                0
            } else if r < 0.9 {
                1
            } else {
                2
            };
            let mut candidates: Vec<Target> = match set {
                0 => vec![Target::Direct(0), Target::Direct(1), Target::Indirect(2, 0), Target::Indirect(3, 0)],
                1 => vec![Target::Direct(2), Target::Direct(3)],
                _ => vec![Target::Direct(4)],
            };
            candidates.push(Target::Global);
            let mut args = Vec::new();
            for t in candidates {
                if !rng.gen_bool(0.5) {
                    continue;
                }
                let mode = pick_mode(&mut rng, t == Target::Global);
                match t {
                    Target::Indirect(d, _) => {
                        let slot = rng.gen_range(0..2);
                        args.push(ProgArg {
                            target: Target::Indirect(d, slot),
                            mode,
                        });
                        if matches!(mode, AccessMode::Read | AccessMode::Inc) && rng.gen_bool(0.5) {
                            args.push(ProgArg {
                                target: Target::Indirect(d, 1 - slot),
                                mode,
                            });
                        }
                    }
                    _ => args.push(ProgArg { target: t, mode }),
                }
            }
            if args.is_empty() {
                let d = match set {
                    0 => 0,
                    1 => 2,
                    _ => 4,
                };
                args.push(ProgArg {
                    target: Target::Direct(d),
                    mode: AccessMode::Rw,
                });
            }
            loops.push(ProgLoop {
                set,
                args,
                salt: rng.gen_range(0.0..1.0),
            });
        }
        Program {
            sizes,
            dims,
            table,
            init,
            global_init: rng.gen_range(-1.0..1.0),
            loops,
        }
    }

    fn dim(&self, t: Target) -> usize {
        match t {
            Target::Direct(d) | Target::Indirect(d, _) => self.dims[d],
            Target::Global => 1,
        }
    }
}

pub fn resource(t: Target) -> Resource {
    match t {
        Target::Direct(d) | Target::Indirect(d, _) => Resource::Dat(d as u32),
        Target::Global => Resource::Global(0),
    }
}

/// The kernel every generated loop runs.
pub fn kernel(salt: f64, elem: usize, modes: &[AccessMode], bufs: &mut [Vec<f64>]) {
    let mut acc = salt + elem as f64 * 0.125;
    for (m, b) in modes.iter().zip(bufs.iter()) {
        if matches!(m, AccessMode::Read | AccessMode::Rw) {
            for v in b {
                acc = acc * 0.5 + v;
            }
        }
    }
    for (m, b) in modes.iter().zip(bufs.iter_mut()) {
        for (k, v) in b.iter_mut().enumerate() {
            match m {
                AccessMode::Read => {}
                AccessMode::Write => *v = acc + k as f64,
                AccessMode::Rw => *v = *v * 0.75 + acc,
                AccessMode::Inc => *v = acc * 0.25 + k as f64 * 0.5,
            }
        }
    }
}

/// First-fit coloring of `n` rows of `arity` targets, listed color by color.
pub fn color_major(n: usize, arity: usize, table: &[u32]) -> Vec<usize> {
    let mut colors = vec![0u32; n];
    let mut taken: Vec<BTreeSet<u32>> = Vec::new();
    for e in 0..n {
        let row = &table[e * arity..(e + 1) * arity];
        let mut c = 0;
        loop {
            let clash = row.iter().any(|&t| taken.get(t as usize).is_some_and(|s| s.contains(&c)));
            if !clash {
                break;
            }
            c += 1;
        }
        for &t in row {
            if taken.len() <= t as usize {
                taken.resize(t as usize + 1, BTreeSet::new());
            }
            taken[t as usize].insert(c);
        }
        colors[e] = c;
    }
    let maxc = colors.iter().copied().max().unwrap_or(0);
    let mut order = Vec::with_capacity(n);
    for c in 0..=maxc {
        order.extend((0..n).filter(|&e| colors[e] == c));
    }
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalState {
    pub dats: Vec<Vec<f64>>,
    pub global: f64,
}

impl FinalState {
    pub fn bits(&self) -> (Vec<Vec<u64>>, u64) {
        (
            self.dats.iter().map(|d| d.iter().map(|v| v.to_bits()).collect()).collect(),
            self.global.to_bits(),
        )
    }
}

/// Runs the program one loop at a time, one element at a time.
pub fn interpret(p: &Program) -> FinalState {
    let mut dats = p.init.clone();
    let mut g = p.global_init;
    for l in &p.loops {
        let n = p.sizes[l.set];
        let colored = l
            .args
            .iter()
            .any(|a| matches!(a.target, Target::Indirect(..)) && a.mode != AccessMode::Read);
        let order: Vec<usize> = if colored {
            color_major(n, 2, &p.table)
        } else {
            (0..n).collect()
        };
        let modes: Vec<AccessMode> = l.args.iter().map(|a| a.mode).collect();
        for e in order {
            let offs: Vec<usize> = l
                .args
                .iter()
                .map(|a| match a.target {
                    Target::Direct(d) => e * p.dims[d],
                    Target::Indirect(d, s) => p.table[2 * e + s] as usize * p.dims[d],
                    Target::Global => 0,
                })
                .collect();
            let mut bufs: Vec<Vec<f64>> = l
                .args
                .iter()
                .zip(&offs)
                .map(|(a, &o)| {
                    let dim = p.dim(a.target);
                    match (a.mode, a.target) {
                        (AccessMode::Inc, _) => vec![0.0; dim],
                        (_, Target::Global) => vec![g],
                        (_, Target::Direct(d) | Target::Indirect(d, _)) => dats[d][o..o + dim].to_vec(),
                    }
                })
                .collect();
            kernel(l.salt, e, &modes, &mut bufs);
            for ((a, &o), b) in l.args.iter().zip(&offs).zip(&bufs) {
                match (a.mode, a.target) {
                    (AccessMode::Read, _) => {}
                    (AccessMode::Inc, Target::Global) => g += b[0],
                    (_, Target::Global) => unreachable!(),
                    (AccessMode::Inc, Target::Direct(d) | Target::Indirect(d, _)) => {
                        for (k, v) in b.iter().enumerate() {
                            dats[d][o + k] += v;
                        }
                    }
                    (_, Target::Direct(d) | Target::Indirect(d, _)) => dats[d][o..o + b.len()].copy_from_slice(b),
                }
            }
        }
    }
    FinalState { dats, global: g }
}

pub struct Declared {
    pub sets: [MeshSet; 3],
    pub map: MeshMap,
    pub dats: Vec<MeshDat>,
    pub global: Global,
}

pub fn declare(rt: &mut Runtime, p: &Program) -> Declared {
    let sets = [
        rt.decl_set(p.sizes[0], "A"),
        rt.decl_set(p.sizes[1], "B"),
        rt.decl_set(p.sizes[2], "C"),
    ];
    let map = rt.decl_map(sets[0], sets[1], 2, &p.table, "a2b").unwrap();
    let dats = (0..NDATS)
        .map(|d| {
            rt.decl_dat(sets[DAT_SET[d]], p.dims[d], p.init[d].clone(), &format!("d{d}"))
                .unwrap()
        })
        .collect();
    let global = rt.decl_global(vec![p.global_init], "g").unwrap();
    Declared { sets, map, dats, global }
}

pub fn loop_args(decl: &Declared, l: &ProgLoop) -> Vec<LoopArg> {
    l.args
        .iter()
        .map(|a| match a.target {
            Target::Direct(d) => LoopArg::direct(decl.dats[d], a.mode),
            Target::Indirect(d, s) => LoopArg::indirect(decl.dats[d], decl.map, s, a.mode),
            Target::Global => LoopArg::gbl(decl.global, a.mode),
        })
        .collect()
}

pub fn loop_kernel(l: &ProgLoop) -> Kernel {
    let modes: Vec<AccessMode> = l.args.iter().map(|a| a.mode).collect();
    let salt = l.salt;
    Kernel::new(move |args| {
        let mut bufs: Vec<Vec<f64>> = (0..args.len()).map(|i| args.f64(i).to_vec()).collect();
        kernel(salt, args.element(), &modes, &mut bufs);
        for (i, b) in bufs.iter().enumerate() {
            args.f64_mut(i).copy_from_slice(b);
        }
    })
}

pub fn random_policy(rng: &mut StdRng) -> ExecutionPolicy {
    let kind = [PolicyKind::Seq, PolicyKind::Par, PolicyKind::SeqTask, PolicyKind::ParTask][rng.gen_range(0..4)];
    let chunk = if rng.gen_bool(0.5) {
        ChunkPolicy::Fixed(rng.gen_range(1..8))
    } else {
        ChunkPolicy::Auto
    };
    ExecutionPolicy::new(kind).with_chunk(chunk)
}

pub struct Submitted {
    pub decl: Declared,
    pub outputs: Vec<LoopOutputs>,
}

pub fn submit_all(rt: &mut Runtime, p: &Program, policy_seed: u64) -> Submitted {
    let decl = declare(rt, p);
    let mut rng = StdRng::seed_from_u64(policy_seed);
    let outputs = p
        .loops
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let policy = random_policy(&mut rng);
            rt.submit_loop(&format!("l{i}"), decl.sets[l.set], &loop_args(&decl, l), loop_kernel(l), &policy)
                .unwrap()
        })
        .collect();
    Submitted { decl, outputs }
}

pub fn read_final(rt: &Runtime, decl: &Declared) -> FinalState {
    let f = |v: Values| match v {
        Values::F64(v) => v,
        _ => unreachable!(),
    };
    FinalState {
        dats: decl.dats.iter().map(|&d| f(rt.read_dat(d).unwrap())).collect(),
        global: f(rt.read_global(decl.global).unwrap())[0],
    }
}

/// Per loop, per resource: (reads, writes), merged over its arguments.
pub fn access_log(p: &Program) -> Vec<Vec<(Resource, bool, bool)>> {
    p.loops
        .iter()
        .map(|l| {
            let mut acc: Vec<(Resource, bool, bool)> = Vec::new();
            for a in &l.args {
                let r = resource(a.target);
                let (rd, wr) = (a.mode != AccessMode::Write, a.mode != AccessMode::Read);
                match acc.iter_mut().find(|x| x.0 == r) {
                    Some(x) => {
                        x.1 |= rd;
                        x.2 |= wr;
                    }
                    None => acc.push((r, rd, wr)),
                }
            }
            acc
        })
        .collect()
}

/// Every (producer, consumer, resource, hazard) implied by the access log:
/// a consumer depends on the last earlier writer of each resource it
/// touches (RAW if it reads, WAW otherwise) and, if it writes, on every
/// pure reader since that writer (WAR).
pub fn brute_force_edges(log: &[Vec<(Resource, bool, bool)>]) -> BTreeSet<(u64, u64, Resource, Hazard)> {
    let mut out = BTreeSet::new();
    for (j, accesses) in log.iter().enumerate() {
        for &(r, reads, writes) in accesses {
            let touches = |i: usize| log[i].iter().find(|x| x.0 == r).copied();
            let last_writer = (0..j).rev().find(|&i| touches(i).is_some_and(|x| x.2));
            if let Some(w) = last_writer {
                let h = if reads { Hazard::Raw } else { Hazard::Waw };
                out.insert((w as u64, j as u64, r, h));
            }
            if writes {
                let from = last_writer.map_or(0, |w| w + 1);
                for i in from..j {
                    if touches(i).is_some_and(|x| !x.2) {
                        out.insert((i as u64, j as u64, r, Hazard::War));
                    }
                }
            }
        }
    }
    out
}

pub fn graph_edges(rt: &Runtime) -> BTreeSet<(u64, u64, Resource, Hazard)> {
    rt.export_graph()
        .edges
        .iter()
        .map(|e| (e.from.0, e.to.0, e.dat, e.hazard))
        .collect()
}

/// For every edge with chunks on both ends: producer's last chunk end is no
/// later than the consumer's first chunk start. Returns violations.
pub fn happens_before_violations(rt: &Runtime) -> Vec<(TaskId, TaskId)> {
    let recs = rt.chunk_records();
    let span = |t: TaskId| {
        let mine: Vec<_> = recs.iter().filter(|r| r.task == t).collect();
        if mine.is_empty() {
            None
        } else {
            Some((
                mine.iter().map(|r| r.start_ns).min().unwrap(),
                mine.iter().map(|r| r.end_ns).max().unwrap(),
            ))
        }
    };
    rt.export_graph()
        .edges
        .iter()
        .filter_map(|e| match (span(e.from), span(e.to)) {
            (Some((_, end)), Some((start, _))) if end > start => Some((e.from, e.to)),
            _ => None,
        })
        .collect()
}

pub fn f64s(v: Values) -> Vec<f64> {
    match v {
        Values::F64(v) => v,
        other => panic!("expected f64 values, got {:?}", other.kind()),
    }
}

/// Busy-waits for `d`.
pub fn spin(d: Duration) {
    let t = Instant::now();
    while t.elapsed() < d {
        std::hint::spin_loop();
    }
}

/// Runs an indirect-INC loop whose kernel counts, per target cell, how many
/// kernels are touching it at the same moment. Returns the number of
/// overlapping touches seen.
pub fn collision_stress(seed: u64, ncells: usize, nedges: usize, workers: usize) -> usize {
    let mut rng = StdRng::seed_from_u64(seed);
    let table: Vec<u32> = (0..2 * nedges).map(|_| rng.gen_range(0..ncells as u32)).collect();
    let mut rt = Runtime::with_workers(workers);
    let cells = rt.decl_set(ncells, "cells");
    let edges = rt.decl_set(nedges, "edges");
    let m = rt.decl_map(edges, cells, 2, &table, "pecell").unwrap();
    let res = rt.decl_dat(cells, 1, vec![0.0f64; ncells], "res").unwrap();

    let busy: Arc<Vec<AtomicU32>> = Arc::new((0..ncells).map(|_| AtomicU32::new(0)).collect());
    let collisions = Arc::new(AtomicUsize::new(0));
    let table = Arc::new(table);
    let k = {
        let (busy, collisions, table) = (busy.clone(), collisions.clone(), table.clone());
        Kernel::new(move |a| {
            let e = a.element();
            let mut targets = [table[2 * e], table[2 * e + 1]];
            targets.sort_unstable();
            let distinct = if targets[0] == targets[1] { &targets[..1] } else { &targets[..] };
            for &t in distinct {
                if busy[t as usize].fetch_add(1, Ordering::SeqCst) != 0 {
                    collisions.fetch_add(1, Ordering::SeqCst);
                }
            }
            spin(Duration::from_micros(20));
            for &t in distinct {
                busy[t as usize].fetch_sub(1, Ordering::SeqCst);
            }
            a.f64_mut(0)[0] = 1.0;
            a.f64_mut(1)[0] = 1.0;
        })
    };
    let args = [
        LoopArg::indirect(res, m, 0, AccessMode::Inc),
        LoopArg::indirect(res, m, 1, AccessMode::Inc),
    ];
    rt.submit_loop("stress", edges, &args, k, &ExecutionPolicy::par().with_chunk(ChunkPolicy::Fixed(1)))
        .unwrap();
    let total: f64 = f64s(rt.read_dat(res).unwrap()).iter().sum();
    assert_eq!(total, 2.0 * nedges as f64);
    collisions.load(Ordering::SeqCst)
}
