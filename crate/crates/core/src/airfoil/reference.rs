//! Single-threaded reference implementation on plain arrays.
//!
//! Shares only the grid generator with the runtime path. Loops that
//! increment through a map visit their elements color by color (first-fit
//! greedy coloring, elements ascending within a color), which is the order
//! the runtime commits increments in.

use super::grid::{GridTopology, QINF};
use super::{AirfoilState, BenchConfig, ADT_EPS, BRES_GAIN, UPDATE_GAIN};

/// First-fit coloring: each element takes the smallest color not already
/// used by an earlier element touching one of its targets.
pub fn first_fit_colors(n: usize, arity: usize, table: &[u32], ntargets: usize) -> Vec<u32> {
    let mut used: Vec<Vec<u32>> = vec![Vec::new(); ntargets];
    let mut colors = Vec::with_capacity(n);
    for e in 0..n {
        let targets = &table[e * arity..(e + 1) * arity];
        let mut c = 0u32;
        while targets.iter().any(|&t| used[t as usize].contains(&c)) {
            c += 1;
        }
        for &t in targets {
            used[t as usize].push(c);
        }
        colors.push(c);
    }
    colors
}

/// Element indices grouped by color, ascending within each color.
pub fn color_major_order(colors: &[u32]) -> Vec<usize> {
    let ncolors = colors.iter().max().map_or(0, |&c| c + 1);
    let mut order = Vec::with_capacity(colors.len());
    for c in 0..ncolors {
        order.extend((0..colors.len()).filter(|&e| colors[e] == c));
    }
    order
}

pub fn run_reference(cfg: &BenchConfig) -> AirfoilState {
    let g = GridTopology::generate(cfg.nx, cfg.ny);
    let x = g.coords(cfg.seed);
    let mut q = g.initial_q(cfg.seed);
    let mut qold = q.clone();
    let mut res = vec![0.0; 4 * g.ncells];
    let mut adt = vec![0.0; g.ncells];
    let mut rms = 0.0f64;

    let edge_order = color_major_order(&first_fit_colors(g.nedges, 2, &g.edge_cells, g.ncells));
    let bedge_order = color_major_order(&first_fit_colors(g.nbedges, 1, &g.bedge_cell, g.ncells));

    for _ in 0..cfg.iterations {
        qold.copy_from_slice(&q);

        for c in 0..g.ncells {
            let corner = |k: usize| {
                let n = g.cell_nodes[4 * c + k] as usize;
                (x[2 * n], x[2 * n + 1])
            };
            let mut perimeter = 0.0;
            for k in 0..4 {
                let (p, n) = (corner(k), corner((k + 1) % 4));
                perimeter += (n.0 - p.0).abs() + (n.1 - p.1).abs();
            }
            let qc = &q[4 * c..4 * c + 4];
            let qabs = qc[0].abs() + qc[1].abs() + qc[2].abs() + qc[3].abs();
            adt[c] = 0.25 * qabs * (0.25 * perimeter) + ADT_EPS;
        }

        for &e in &edge_order {
            let (n1, n2) = (g.edge_nodes[2 * e] as usize, g.edge_nodes[2 * e + 1] as usize);
            let (c1, c2) = (g.edge_cells[2 * e] as usize, g.edge_cells[2 * e + 1] as usize);
            let dx = x[2 * n2] - x[2 * n1];
            let dy = x[2 * n2 + 1] - x[2 * n1 + 1];
            let len = (dx * dx + dy * dy).sqrt();
            let w = 1.0 / (1.0 + adt[c1] + adt[c2]);
            let mut f = [0.0; 4];
            for k in 0..4 {
                f[k] = (q[4 * c1 + k] - q[4 * c2 + k]) * len * w;
            }
            for k in 0..4 {
                res[4 * c1 + k] += -f[k];
            }
            for k in 0..4 {
                res[4 * c2 + k] += f[k];
            }
        }

        for &b in &bedge_order {
            let c = g.bedge_cell[b] as usize;
            for k in 0..4 {
                res[4 * c + k] += BRES_GAIN * (QINF[k] - q[4 * c + k]) / (1.0 + adt[c]);
            }
        }

        for c in 0..g.ncells {
            let mut sum = 0.0;
            for k in 0..4 {
                let del = UPDATE_GAIN * res[4 * c + k] / (1.0 + adt[c]);
                sum += del * del;
                q[4 * c + k] = qold[4 * c + k] + del;
                res[4 * c + k] = 0.0;
            }
            rms += sum;
        }
    }

    AirfoilState {
        x,
        q,
        qold,
        res,
        adt,
        rms: (cfg.iterations > 0).then_some(rms),
    }
}
