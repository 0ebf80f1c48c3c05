mod common;

use std::collections::BTreeSet;
use std::time::Duration;

use common::{f64s, spin};

use meshflow::executor::{plan_chunks, Block};
use meshflow::{AccessMode, ChunkPolicy, ExecutionPolicy, Kernel, LoopArg, Runtime};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn plan_examples() {
    assert!(plan_chunks(0, &ChunkPolicy::Auto, 4, None).blocks.is_empty());
    let p = plan_chunks(100, &ChunkPolicy::Fixed(32), 4, None);
    let spans: Vec<(usize, usize)> = p.blocks.iter().map(|b| (b.offset, b.end())).collect();
    assert_eq!(spans, vec![(0, 32), (32, 64), (64, 96), (96, 100)]);
    assert_eq!(plan_chunks(1000, &ChunkPolicy::Auto, 5, None).chunk_size(), 50);
    assert_eq!(plan_chunks(3, &ChunkPolicy::Auto, 8, None).chunk_size(), 1);
}

proptest! {
    #[test]
    fn plans_partition_the_set(n in 0usize..5000, c in 1usize..700, w in 1usize..9, which in 0u8..3) {
        let policy = match which {
            0 => ChunkPolicy::Fixed(c),
            1 => ChunkPolicy::Auto,
            _ => ChunkPolicy::PersistentAuto(c as u32),
        };
        let plan = plan_chunks(n, &policy, w, None);
        let mut next = 0;
        for &Block { offset, nelem } in &plan.blocks {
            prop_assert_eq!(offset, next);
            prop_assert!(nelem > 0);
            next = offset + nelem;
        }
        prop_assert_eq!(next, n);
        if let ChunkPolicy::Fixed(c) = policy {
            prop_assert_eq!(plan.nblocks(), n.div_ceil(c));
        }
    }
}

#[test]
fn save_soln_copy_in_two_chunks() {
    let mut rt = Runtime::with_workers(2);
    let cells = rt.decl_set(8, "cells");
    let q: Vec<f64> = (0..32).map(|k| k as f64 * 1.5 - 7.0).collect();
    let p_q = rt.decl_dat(cells, 4, q.clone(), "p_q").unwrap();
    let p_qold = rt.decl_dat(cells, 4, vec![0.0; 32], "p_qold").unwrap();
    let out = rt
        .submit_loop(
            "save_soln",
            cells,
            &[LoopArg::direct(p_q, AccessMode::Read), LoopArg::direct(p_qold, AccessMode::Write)],
            Kernel::new(|a| {
                let q = a.f64_array::<4>(0);
                a.f64_mut(1).copy_from_slice(&q);
            }),
            &ExecutionPolicy::par_task().with_chunk(ChunkPolicy::Fixed(4)),
        )
        .unwrap();
    out.wait().unwrap();
    assert_eq!(f64s(rt.read_dat(p_qold).unwrap()), q);
    let recs: Vec<_> = rt.chunk_records().into_iter().filter(|r| r.task == out.task()).collect();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| r.nelem == 4));
}

/// The 12 distinct edges of a 3x3 node grid.
const NODE_EDGES: [u32; 24] = [0, 1, 1, 2, 2, 5, 5, 4, 4, 3, 3, 6, 6, 7, 7, 8, 0, 3, 1, 4, 4, 7, 5, 8];

fn edge_flux(x: &[f64], a: usize, b: usize, scale: f64) -> f64 {
    (x[a] - x[b]) * scale
}

fn run_node_res(x: &[f64], scale: f64, workers: usize, policy: ExecutionPolicy) -> Vec<f64> {
    let mut rt = Runtime::with_workers(workers);
    let nodes = rt.decl_set(9, "nodes");
    let edges = rt.decl_set(12, "edges");
    let pedge = rt.decl_map(edges, nodes, 2, &NODE_EDGES, "pedge").unwrap();
    let p_x = rt.decl_dat(nodes, 1, x.to_vec(), "p_x").unwrap();
    let p_res = rt.decl_dat(nodes, 1, vec![0.0; 9], "p_res").unwrap();
    let args = [
        LoopArg::indirect(p_x, pedge, 0, AccessMode::Read),
        LoopArg::indirect(p_x, pedge, 1, AccessMode::Read),
        LoopArg::indirect(p_res, pedge, 0, AccessMode::Inc),
        LoopArg::indirect(p_res, pedge, 1, AccessMode::Inc),
    ];
    let k = Kernel::new(move |a| {
        let f = (a.f64(0)[0] - a.f64(1)[0]) * scale;
        a.f64_mut(2)[0] = f;
        a.f64_mut(3)[0] = -f;
    });
    rt.submit_loop("res_calc", edges, &args, k, &policy).unwrap();
    f64s(rt.read_dat(p_res).unwrap())
}

#[test]
fn res_calc_node_mesh_matches_ordered_oracles() {
    let x = [5.3, 1.2, 0.2, 3.4, 5.4, 6.2, 3.2, 2.5, 0.9];
    let scale = 0.37;
    let mut oracle = [0.0f64; 9];
    for e in common::color_major(12, 2, &NODE_EDGES) {
        let (a, b) = (NODE_EDGES[2 * e] as usize, NODE_EDGES[2 * e + 1] as usize);
        let f = edge_flux(&x, a, b, scale);
        oracle[a] += f;
        oracle[b] += -f;
    }
    for (workers, chunk) in [(1, ChunkPolicy::Auto), (2, ChunkPolicy::Fixed(1)), (4, ChunkPolicy::Fixed(3))] {
        let got = run_node_res(&x, scale, workers, ExecutionPolicy::par_task().with_chunk(chunk));
        let bits: Vec<u64> = got.iter().map(|v| v.to_bits()).collect();
        let want: Vec<u64> = oracle.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, want, "workers={workers} chunk={chunk}");
    }

    // Dyadic inputs make every partial sum exact, so edge index order agrees too.
    let x: Vec<f64> = (0..9).map(|k| (k * k % 7) as f64 * 0.25).collect();
    let mut index_order = [0.0f64; 9];
    for e in 0..12 {
        let (a, b) = (NODE_EDGES[2 * e] as usize, NODE_EDGES[2 * e + 1] as usize);
        let f = edge_flux(&x, a, b, 0.5);
        index_order[a] += f;
        index_order[b] += -f;
    }
    assert_eq!(run_node_res(&x, 0.5, 3, ExecutionPolicy::par()), index_order.to_vec());
}

#[test]
fn update_rms_is_ordered_sum() {
    let mut rng = StdRng::seed_from_u64(11);
    let res: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let adt: Vec<f64> = (0..100).map(|_| rng.gen_range(0.01..2.0)).collect();
    let del = |c: usize, k: usize| 0.2 * res[4 * c + k] / (1.0 + adt[c]);
    let mut oracle = 0.0f64;
    for c in 0..100 {
        let mut s = 0.0;
        for k in 0..4 {
            s += del(c, k) * del(c, k);
        }
        oracle += s;
    }

    for workers in [1, 2, 4] {
        let mut rt = Runtime::with_workers(workers);
        let cells = rt.decl_set(100, "cells");
        let p_res = rt.decl_dat(cells, 4, res.clone(), "p_res").unwrap();
        let p_adt = rt.decl_dat(cells, 1, adt.clone(), "p_adt").unwrap();
        let rms = rt.decl_global(vec![0.0f64], "rms").unwrap();
        let out = rt
            .submit_loop(
                "update",
                cells,
                &[
                    LoopArg::direct(p_res, AccessMode::Rw),
                    LoopArg::direct(p_adt, AccessMode::Read),
                    LoopArg::gbl(rms, AccessMode::Inc),
                ],
                Kernel::new(|a| {
                    let adt = a.f64(1)[0];
                    let mut s = 0.0;
                    for r in a.f64_mut(0).iter_mut() {
                        let d = 0.2 * *r / (1.0 + adt);
                        s += d * d;
                        *r = 0.0;
                    }
                    a.f64_mut(2)[0] = s;
                }),
                &ExecutionPolicy::par_task().with_chunk(ChunkPolicy::Fixed(15)),
            )
            .unwrap();
        let got = f64s(rt.read_global(rms).unwrap())[0];
        assert_eq!(got.to_bits(), oracle.to_bits(), "workers={workers}");
        assert!(f64s(rt.read_dat(p_res).unwrap()).iter().all(|&v| v == 0.0));
        let chunks = rt.chunk_records().iter().filter(|r| r.task == out.task()).count();
        assert_eq!(chunks, 7);
    }
}

/// Greedy first-fit over an explicit conflict graph.
fn brute_force_colors(n: usize, arity: usize, table: &[u32]) -> Vec<u32> {
    let row = |e: usize| &table[e * arity..(e + 1) * arity];
    let conflict = |a: usize, b: usize| row(a).iter().any(|t| row(b).contains(t));
    let mut colors: Vec<u32> = Vec::with_capacity(n);
    for e in 0..n {
        let used: BTreeSet<u32> = (0..e).filter(|&f| conflict(e, f)).map(|f| colors[f]).collect();
        colors.push((0..).find(|c| !used.contains(c)).unwrap());
    }
    colors
}

#[test]
fn coloring_examples() {
    let mut rt = Runtime::with_workers(1);
    let nodes = rt.decl_set(5, "nodes");
    let edges = rt.decl_set(4, "edges");
    let path = rt.decl_map(edges, nodes, 2, &[0u32, 1, 1, 2, 2, 3, 3, 4], "path").unwrap();
    let star = rt.decl_map(edges, nodes, 2, &[0u32, 1, 0, 2, 0, 3, 0, 4], "star").unwrap();

    let p = rt.color_iteration_set(edges, &[path]).unwrap();
    assert_eq!(p.num_colors, 2);
    assert_eq!(p.colors, vec![0, 1, 0, 1]);
    let s = rt.color_iteration_set(edges, &[star]).unwrap();
    assert_eq!(s.num_colors, 4);
    let none = rt.color_iteration_set(edges, &[]).unwrap();
    assert_eq!((none.num_colors, none.colors), (1, vec![0; 4]));

    let other = rt.decl_set(3, "other");
    let foreign = rt.decl_map(other, nodes, 1, &[0u32, 1, 2], "foreign").unwrap();
    assert!(rt.color_iteration_set(edges, &[foreign]).is_err());
}

proptest! {
    #[test]
    fn random_colorings_are_sound(
        ncells in 1usize..60,
        rows in proptest::collection::vec((0u32..1000, 0u32..1000), 0..500),
    ) {
        let n = rows.len();
        let table: Vec<u32> = rows.iter().flat_map(|&(a, b)| [a % ncells as u32, b % ncells as u32]).collect();
        let mut rt = Runtime::with_workers(1);
        let cells = rt.decl_set(ncells, "cells");
        let edges = rt.decl_set(n, "edges");
        let m = rt.decl_map(edges, cells, 2, &table, "pecell").unwrap();
        let plan = rt.color_iteration_set(edges, &[m]).unwrap();
        for e in 0..n {
            for f in e + 1..n {
                if plan.colors[e] == plan.colors[f] {
                    let (re, rf) = (&table[2 * e..2 * e + 2], &table[2 * f..2 * f + 2]);
                    prop_assert!(!re.iter().any(|t| rf.contains(t)), "edges {} and {} share a cell", e, f);
                }
            }
        }
        prop_assert_eq!(&plan.colors, &brute_force_colors(n, 2, &table));
        let used: BTreeSet<u32> = plan.colors.iter().copied().collect();
        prop_assert!(n == 0 || used.len() == plan.num_colors);
    }
}

#[test]
fn colors_prevent_concurrent_target_writes() {
    for seed in 0..3 {
        assert_eq!(common::collision_stress(seed, 40, 200, 4), 0);
    }
}

#[test]
fn seq_runs_chunks_in_plan_order_one_at_a_time() {
    let mut rt = Runtime::with_workers(4);
    let s = rt.decl_set(100, "s");
    let d = rt.decl_dat(s, 1, vec![0.0f64; 100], "d").unwrap();
    let out = rt
        .submit_loop(
            "seq",
            s,
            &[LoopArg::direct(d, AccessMode::Write)],
            Kernel::new(|a| {
                spin(Duration::from_micros(5));
                a.f64_mut(0)[0] = a.element() as f64;
            }),
            &ExecutionPolicy::seq().with_chunk(ChunkPolicy::Fixed(10)),
        )
        .unwrap();
    out.wait().unwrap();
    let mut recs: Vec<_> = rt.chunk_records().into_iter().filter(|r| r.task == out.task()).collect();
    recs.sort_by_key(|r| r.start_ns);
    assert_eq!(recs.iter().map(|r| r.chunk).collect::<Vec<_>>(), (0..10).collect::<Vec<_>>());
    for w in recs.windows(2) {
        assert!(w[0].end_ns <= w[1].start_ns, "chunks {} and {} overlap", w[0].chunk, w[1].chunk);
    }
}

fn busy_loop(rt: &Runtime, name: &str, set: meshflow::MeshSet, d: meshflow::MeshDat, per_elem: Duration, group: u32) {
    rt.submit_loop(
        name,
        set,
        &[LoopArg::direct(d, AccessMode::Rw)],
        Kernel::new(move |a| {
            spin(per_elem);
            a.f64_mut(0)[0] += 1.0;
        }),
        &ExecutionPolicy::par_task().with_chunk(ChunkPolicy::PersistentAuto(group)),
    )
    .unwrap()
    .wait()
    .unwrap();
}

#[test]
fn persistent_group_sizes_second_loop_from_first() {
    let mut rt = Runtime::with_workers(1);
    let s = rt.decl_set(2000, "s");
    let a = rt.decl_dat(s, 1, vec![0.0f64; 2000], "a").unwrap();
    let b = rt.decl_dat(s, 1, vec![0.0f64; 2000], "b").unwrap();

    busy_loop(&rt, "A", s, a, Duration::from_micros(2), 7);
    let g = rt.chunk_group(7).unwrap();
    assert_eq!(g.reference_loop.as_deref(), Some("A"));
    let t_ref = g.t_ref.unwrap();
    assert!((0.8e-3..1.6e-3).contains(&t_ref), "T_ref {t_ref}");

    busy_loop(&rt, "B", s, b, Duration::from_micros(4), 7);
    busy_loop(&rt, "B", s, b, Duration::from_micros(4), 7);
    let g = rt.chunk_group(7).unwrap();
    let chunk = g.chunk_size_for("B", 2000).unwrap();
    assert!((200..=300).contains(&chunk), "B chunk {chunk}");
    assert_eq!(g.t_ref, Some(t_ref));
    assert!(rt.chunk_group(8).is_none());
}
