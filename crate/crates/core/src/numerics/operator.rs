//! Flux-form five-point Laplace–Beltrami operator on a [`PolarGrid`].
//!
//! The operator is stored as the symmetric "stiffness" matrix `S = W·A`,
//! where `W` holds the node weights and `A = −Δ_h`. Each edge carries a
//! positive conductance; the diagonal is the sum of all conductances at the
//! node, including those leading to Dirichlet nodes.

use std::sync::Arc;

use rayon::prelude::*;

use crate::numerics::fourier::RingSolver;
use crate::numerics::grid::PolarGrid;

#[derive(Debug)]
pub struct SparseOperator {
    pub grid: Arc<PolarGrid>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    cond: Vec<f64>,
    diag: Vec<f64>,
    ring_solver: RingSolver,
}

/// Ring-averaged stencil coefficients.
#[derive(Debug, Clone)]
pub struct RingCoefficients {
    pub ntheta: usize,
    /// Conductance between the center and each first-ring node.
    pub c_center: f64,
    pub w_center: f64,
    /// Indexed by ring `1..=nr` (entry 0 unused).
    pub c_in: Vec<f64>,
    pub c_out: Vec<f64>,
    pub c_ang: Vec<f64>,
    pub w: Vec<f64>,
}

impl SparseOperator {
    pub fn new(grid: Arc<PolarGrid>) -> Self {
        let (nr, nt) = (grid.nr, grid.ntheta);
        let (h, ha) = (grid.h_r, grid.h_theta);
        let n = grid.n_nodes();
        let radial = |ring: usize, j: usize| grid.jacobian_out(ring, j) * ha / h;
        let angular = |ring: usize, j: usize| h / (grid.jacobian_ang(ring, j) * ha);

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(4 * n);
        let mut cond = Vec::with_capacity(4 * n);
        let mut diag = vec![0.0; n];
        row_ptr.push(0);
        for j in 0..nt {
            cols.push(grid.node(1, j));
            cond.push(radial(0, j));
        }
        diag[0] = cond.iter().sum();
        row_ptr.push(cols.len());
        for i in 1..=nr {
            for j in 0..nt {
                let node = grid.node(i, j);
                let mut push = |col: usize, c: f64| {
                    cols.push(col);
                    cond.push(c);
                    diag[node] += c;
                };
                push(
                    if i == 1 { 0 } else { grid.node(i - 1, j) },
                    radial(i - 1, j),
                );
                push(
                    grid.node(i, (j + nt - 1) % nt),
                    angular(i, (j + nt - 1) % nt),
                );
                push(grid.node(i, (j + 1) % nt), angular(i, j));
                if i < nr {
                    push(grid.node(i + 1, j), radial(i, j));
                }
                row_ptr.push(cols.len());
            }
        }

        let mean = |f: &dyn Fn(usize) -> f64| (0..nt).map(f).sum::<f64>() / nt as f64;
        let mut coeffs = RingCoefficients {
            ntheta: nt,
            c_center: mean(&|j| radial(0, j)),
            w_center: grid.weight(0),
            c_in: vec![0.0; nr + 1],
            c_out: vec![0.0; nr + 1],
            c_ang: vec![0.0; nr + 1],
            w: vec![0.0; nr + 1],
        };
        for i in 1..=nr {
            coeffs.c_in[i] = mean(&|j| radial(i - 1, j));
            coeffs.c_out[i] = if i < nr { mean(&|j| radial(i, j)) } else { 0.0 };
            coeffs.c_ang[i] = mean(&|j| angular(i, j));
            coeffs.w[i] = mean(&|j| grid.weight(grid.node(i, j)));
        }
        let ring_solver = RingSolver::new(coeffs);
        SparseOperator {
            grid,
            row_ptr,
            cols,
            cond,
            diag,
            ring_solver,
        }
    }

    pub fn dimension(&self) -> usize {
        self.diag.len()
    }

    /// The operator is symmetric in the weighted inner product by construction.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn ring_solver(&self) -> &RingSolver {
        &self.ring_solver
    }

    pub fn weights(&self) -> &[f64] {
        self.grid.weights()
    }

    /// `out = S u` on the first `u.len()` nodes; later nodes are taken as zero.
    pub fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        out[..m]
            .par_iter_mut()
            .enumerate()
            .with_min_len(512)
            .for_each(|(a, o)| {
                let mut acc = self.diag[a] * u[a];
                for k in self.row_ptr[a]..self.row_ptr[a + 1] {
                    let b = self.cols[k];
                    if b < m {
                        acc -= self.cond[k] * u[b];
                    }
                }
                *o = acc;
            });
    }

    /// `Δ_h u` on the first `u.len()` nodes with zero data beyond them.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_stiffness(u, &mut out);
        let w = self.weights();
        out.iter_mut()
            .enumerate()
            .for_each(|(a, v)| *v = -*v / w[a]);
        out
    }

    /// Entries `(row, col, value)` of `A = −Δ_h`: positive diagonal,
    /// nonpositive off-diagonals.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let w = self.weights();
        let mut out = Vec::with_capacity(self.cols.len() + self.diag.len());
        for a in 0..self.dimension() {
            out.push((a, a, self.diag[a] / w[a]));
            for k in self.row_ptr[a]..self.row_ptr[a + 1] {
                out.push((a, self.cols[k], -self.cond[k] / w[a]));
            }
        }
        out
    }

    /// Conductances of node `a` as `(neighbor, conductance)`.
    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[a]..self.row_ptr[a + 1]).map(move |k| (self.cols[k], self.cond[k]))
    }

    pub fn diagonal(&self, a: usize) -> f64 {
        self.diag[a]
    }
}

/// Build the discrete Laplace–Beltrami operator of a grid.
pub fn discrete_laplacian(grid: &Arc<PolarGrid>) -> SparseOperator {
    SparseOperator::new(grid.clone())
}
