//! Cartesian primal grid with its dual quantities.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniformly spaced nodes per axis; node index `ix + nx·(iy + ny·iz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianGrid {
    pub nodes: [usize; 3],
    /// Node spacing per axis in metres.
    pub spacing: [f64; 3],
}

/// Primal edge from `a` to `b = a + stride(axis)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub axis: usize,
    pub length: f64,
}

impl CartesianGrid {
    pub fn new(nodes: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if nodes.iter().any(|&n| n < 2) {
            return Err(Error::Domain(format!("grid needs at least 2 nodes per axis, got {nodes:?}")));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Domain(format!("grid spacing must be positive, got {spacing:?}")));
        }
        Ok(CartesianGrid { nodes, spacing })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn cells(&self) -> [usize; 3] {
        [self.nodes[0] - 1, self.nodes[1] - 1, self.nodes[2] - 1]
    }

    pub fn num_cells(&self) -> usize {
        self.cells().iter().product()
    }

    pub fn node(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.nodes[0] * (iy + self.nodes[1] * iz)
    }

    pub fn node_checked(&self, at: [usize; 3]) -> Result<usize> {
        if at.iter().zip(&self.nodes).any(|(i, n)| i >= n) {
            return Err(Error::Domain(format!("node {at:?} outside grid {:?}", self.nodes)));
        }
        Ok(self.node(at[0], at[1], at[2]))
    }

    pub fn node_coords(&self, n: usize) -> [usize; 3] {
        let [nx, ny, _] = self.nodes;
        [n % nx, (n / nx) % ny, n / (nx * ny)]
    }

    pub fn position(&self, n: usize) -> [f64; 3] {
        let c = self.node_coords(n);
        [0, 1, 2].map(|k| c[k] as f64 * self.spacing[k])
    }

    pub fn cell(&self, cx: usize, cy: usize, cz: usize) -> usize {
        let [mx, my, _] = self.cells();
        cx + mx * (cy + my * cz)
    }

    pub fn cell_coords(&self, c: usize) -> [usize; 3] {
        let [mx, my, _] = self.cells();
        [c % mx, (c / mx) % my, c / (mx * my)]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// The eight corner nodes of a cell.
    pub fn cell_nodes(&self, c: usize) -> [usize; 8] {
        let [x, y, z] = self.cell_coords(c);
        let mut out = [0; 8];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.node(x + (k & 1), y + ((k >> 1) & 1), z + ((k >> 2) & 1));
        }
        out
    }

    fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.nodes[0],
            _ => self.nodes[0] * self.nodes[1],
        }
    }

    /// All primal edges, grouped by axis.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for axis in 0..3 {
            for n in 0..self.num_nodes() {
                if self.node_coords(n)[axis] + 1 < self.nodes[axis] {
                    out.push(Edge {
                        a: n,
                        b: n + self.stride(axis),
                        axis,
                        length: self.spacing[axis],
                    });
                }
            }
        }
        out
    }

    /// Cells sharing an edge, each owning a quarter of the dual facet.
    pub fn edge_cells(&self, e: &Edge) -> Vec<usize> {
        let c = self.node_coords(e.a);
        let cells = self.cells();
        let (p, q) = match e.axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut out = Vec::with_capacity(4);
        for dp in [0usize, 1] {
            for dq in [0usize, 1] {
                if c[p] < dp || c[q] < dq {
                    continue;
                }
                let mut cc = c;
                cc[p] -= dp;
                cc[q] -= dq;
                if cc[p] < cells[p] && cc[q] < cells[q] && cc[e.axis] < cells[e.axis] {
                    out.push(self.cell(cc[0], cc[1], cc[2]));
                }
            }
        }
        out
    }

    /// Quarter of the dual facet area pierced by an edge along `axis`.
    pub fn quarter_dual_area(&self, axis: usize) -> f64 {
        let h = self.spacing;
        match axis {
            0 => h[1] * h[2] / 4.0,
            1 => h[0] * h[2] / 4.0,
            _ => h[0] * h[1] / 4.0,
        }
    }

    /// Surface area of the box attributed to each node (quarter facets).
    pub fn boundary_areas(&self) -> Vec<f64> {
        let mut area = vec![0.0; self.num_nodes()];
        for axis in 0..3 {
            let (p, q) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            // a face of the box orthogonal to `axis` holds facets of size h_p·h_q,
            // each split equally among its four corner nodes
            let facet = self.spacing[p] * self.spacing[q] / 4.0;
            for side in [0, self.nodes[axis] - 1] {
                for ip in 0..self.nodes[p] - 1 {
                    for iq in 0..self.nodes[q] - 1 {
                        for (dp, dq) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let mut c = [0; 3];
                            c[axis] = side;
                            c[p] = ip + dp;
                            c[q] = iq + dq;
                            area[self.node(c[0], c[1], c[2])] += facet;
                        }
                    }
                }
            }
        }
        area
    }

    pub fn surface_area(&self) -> f64 {
        let l = [0, 1, 2].map(|k| (self.nodes[k] - 1) as f64 * self.spacing[k]);
        2.0 * (l[0] * l[1] + l[1] * l[2] + l[0] * l[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let g = CartesianGrid::new([4, 3, 5], [1.0, 2.0, 0.5]).unwrap();
        for n in 0..g.num_nodes() {
            let [x, y, z] = g.node_coords(n);
            assert_eq!(g.node(x, y, z), n);
        }
        assert_eq!(g.node(1, 2, 3), 1 + 4 * (2 + 3 * 3));
        assert!(CartesianGrid::new([1, 3, 3], [1.0; 3]).is_err());
    }

    #[test]
    fn edge_counts_and_incidence() {
        let g = CartesianGrid::new([4, 3, 2], [1.0; 3]).unwrap();
        let edges = g.edges();
        assert_eq!(edges.len(), 3 * 3 * 2 + 4 * 2 * 2 + 4 * 3);
        for e in &edges {
            assert_ne!(e.a, e.b);
            let (ca, cb) = (g.node_coords(e.a), g.node_coords(e.b));
            let diff: usize = (0..3).map(|k| ca[k].abs_diff(cb[k])).sum();
            assert_eq!(diff, 1);
        }
    }

    #[test]
    fn dual_facets_cover_cells() {
        let g = CartesianGrid::new([3, 4, 3], [0.1, 0.2, 0.3]).unwrap();
        // every cell owns four quarter facets per axis
        let mut per_cell = vec![0usize; g.num_cells()];
        for e in g.edges() {
            for c in g.edge_cells(&e) {
                per_cell[c] += 1;
            }
        }
        assert!(per_cell.iter().all(|&k| k == 12));
    }

    #[test]
    fn boundary_areas_sum_to_surface() {
        let g = CartesianGrid::new([5, 4, 3], [0.1, 0.2, 0.05]).unwrap();
        let total: f64 = g.boundary_areas().iter().sum();
        assert!((total - g.surface_area()).abs() <= 1e-14 * g.surface_area());
        let interior = g.node(2, 1, 1);
        assert_eq!(g.boundary_areas()[interior], 0.0);
    }
}
