//! Structured N x M quad grid expressed as unstructured connectivity, plus
//! seeded initial data. Pure arrays; no runtime involved.

/// Free-stream state used for initialization and as the boundary target.
pub const QINF: [f64; 4] = [1.0, 0.1, 0.0, 2.5];

/// Counter-based generator: the value at `index` in `stream` does not depend
/// on any other draw.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) with 53 random bits.
pub fn uniform(seed: u64, stream: u64, index: u64) -> f64 {
    let key = seed ^ splitmix64(stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ index);
    (splitmix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

const STREAM_COORDS: u64 = 1;
const STREAM_Q: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct GridTopology {
    pub nx: usize,
    pub ny: usize,
    pub nnodes: usize,
    pub ncells: usize,
    pub nedges: usize,
    pub nbedges: usize,
    /// Two cells per interior edge.
    pub edge_cells: Vec<u32>,
    /// Two nodes per interior edge, the face shared by its cells.
    pub edge_nodes: Vec<u32>,
    /// One cell per boundary edge.
    pub bedge_cell: Vec<u32>,
    /// Four nodes per cell, counter-clockwise.
    pub cell_nodes: Vec<u32>,
}

impl GridTopology {
    /// Cell `(i, j)` is `j * nx + i`, node `(i, j)` is `j * (nx + 1) + i`.
    /// Interior edges are listed cell by cell: the east face, then the
    /// north face. Boundary edges go south, north, west, east.
    pub fn generate(nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "grid must have at least one cell");
        let node = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
        let cell = |i: usize, j: usize| (j * nx + i) as u32;

        let mut edge_cells = Vec::new();
        let mut edge_nodes = Vec::new();
        let mut cell_nodes = Vec::with_capacity(4 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                cell_nodes.extend([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
                if i + 1 < nx {
                    edge_cells.extend([cell(i, j), cell(i + 1, j)]);
                    edge_nodes.extend([node(i + 1, j), node(i + 1, j + 1)]);
                }
                if j + 1 < ny {
                    edge_cells.extend([cell(i, j), cell(i, j + 1)]);
                    edge_nodes.extend([node(i, j + 1), node(i + 1, j + 1)]);
                }
            }
        }

        let mut bedge_cell = Vec::with_capacity(2 * (nx + ny));
        bedge_cell.extend((0..nx).map(|i| cell(i, 0)));
        bedge_cell.extend((0..nx).map(|i| cell(i, ny - 1)));
        bedge_cell.extend((0..ny).map(|j| cell(0, j)));
        bedge_cell.extend((0..ny).map(|j| cell(nx - 1, j)));

        GridTopology {
            nx,
            ny,
            nnodes: (nx + 1) * (ny + 1),
            ncells: nx * ny,
            nedges: edge_cells.len() / 2,
            nbedges: bedge_cell.len(),
            edge_cells,
            edge_nodes,
            bedge_cell,
            cell_nodes,
        }
    }

    /// Node coordinates on the unit square; interior nodes are jittered by
    /// up to a tenth of a cell so edge lengths differ.
    pub fn coords(&self, seed: u64) -> Vec<f64> {
        let (hx, hy) = (1.0 / self.nx as f64, 1.0 / self.ny as f64);
        let mut x = Vec::with_capacity(2 * self.nnodes);
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let n = (j * (self.nx + 1) + i) as u64;
                let interior = i > 0 && i < self.nx && j > 0 && j < self.ny;
                let (mut px, mut py) = (i as f64 * hx, j as f64 * hy);
                if interior {
                    px += 0.2 * hx * (uniform(seed, STREAM_COORDS, 2 * n) - 0.5);
                    py += 0.2 * hy * (uniform(seed, STREAM_COORDS, 2 * n + 1) - 0.5);
                }
                x.extend([px, py]);
            }
        }
        x
    }

    /// Initial flow state: free stream plus noise of amplitude 0.05.
    pub fn initial_q(&self, seed: u64) -> Vec<f64> {
        (0..4 * self.ncells)
            .map(|k| QINF[k % 4] + 0.1 * (uniform(seed, STREAM_Q, k as u64) - 0.5))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        for (nx, ny) in [(1, 1), (3, 3), (4, 2), (1, 5), (16, 9)] {
            let g = GridTopology::generate(nx, ny);
            assert_eq!(g.ncells, nx * ny);
            assert_eq!(g.nedges, nx * (ny - 1) + ny * (nx - 1));
            assert_eq!(g.nbedges, 2 * nx + 2 * ny);
            assert_eq!(g.cell_nodes.len(), 4 * g.ncells);
        }
        let g = GridTopology::generate(3, 3);
        assert_eq!((g.ncells, g.nedges, g.nbedges), (9, 12, 12));
    }

    /// Brute force: two cells share an interior edge iff they share exactly
    /// two nodes.
    #[test]
    fn edges_match_shared_faces() {
        let g = GridTopology::generate(4, 3);
        let nodes = |c: usize| &g.cell_nodes[4 * c..4 * c + 4];
        let mut expected = Vec::new();
        for a in 0..g.ncells {
            for b in a + 1..g.ncells {
                let shared: Vec<u32> = nodes(a).iter().copied().filter(|n| nodes(b).contains(n)).collect();
                if shared.len() == 2 {
                    let mut s = shared.clone();
                    s.sort();
                    expected.push((a as u32, b as u32, s));
                }
            }
        }
        let mut got: Vec<_> = (0..g.nedges)
            .map(|e| {
                let mut n = vec![g.edge_nodes[2 * e], g.edge_nodes[2 * e + 1]];
                n.sort();
                (g.edge_cells[2 * e], g.edge_cells[2 * e + 1], n)
            })
            .collect();
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn seeded_data_is_stable() {
        let g = GridTopology::generate(2, 2);
        assert_eq!(g.initial_q(7), g.initial_q(7));
        assert_ne!(g.initial_q(7), g.initial_q(8));
        for (k, q) in g.initial_q(42).iter().enumerate() {
            assert!((q - QINF[k % 4]).abs() <= 0.05);
        }
        let u: Vec<f64> = (0..1000).map(|i| uniform(1, 0, i)).collect();
        assert!(u.iter().all(|&v| (0.0..1.0).contains(&v)));
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        assert!((mean - 0.5).abs() < 0.05);
    }
}
