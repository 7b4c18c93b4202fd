//! Direct solver for rotationally symmetric stencils.
//!
//! With ring-constant coefficients the system `(D + S)u = b` decouples into
//! one tridiagonal system per angular Fourier mode. The center node couples
//! only to mode 0. For grids without rotational symmetry the same solver,
//! built from ring-averaged coefficients, serves as a preconditioner.

use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::numerics::operator::RingCoefficients;

pub struct RingSolver {
    coeffs: RingCoefficients,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Angular eigenvalues `2 − 2cos(2πk/n)`.
    mu: Vec<f64>,
}

impl std::fmt::Debug for RingSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RingSolver")
            .field("ntheta", &self.coeffs.ntheta)
            .finish()
    }
}

impl RingSolver {
    pub fn new(coeffs: RingCoefficients) -> Self {
        let n = coeffs.ntheta;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mu = (0..n)
            .map(|k| 2.0 - 2.0 * (TAU * k as f64 / n as f64).cos())
            .collect();
        RingSolver {
            coeffs,
            forward,
            inverse,
            mu,
        }
    }

    pub fn coefficients(&self) -> &RingCoefficients {
        &self.coeffs
    }

    /// Solve `(diag(mass) + S) u = b` on the center plus rings `1..=rings`,
    /// with zero data on ring `rings + 1`. `mass[0]` belongs to the center and
    /// `mass[i]` is the (ring-constant) diagonal addition on ring `i`.
    pub fn solve(&self, rings: usize, mass: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.coeffs.ntheta;
        let c = &self.coeffs;
        debug_assert_eq!(b.len(), 1 + rings * n);
        debug_assert_eq!(mass.len(), rings + 1);
        if rings == 0 {
            return vec![b[0] / (mass[0] + n as f64 * c.c_center)];
        }

        // Forward transform of each ring.
        let mut spec: Vec<Complex64> = b[1..].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spec.par_chunks_mut(n)
            .for_each(|ring| self.forward.process(ring));

        // One tridiagonal solve per mode; results laid out mode-major.
        let solved: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let diag = |i: usize| mass[i] + c.c_in[i] + c.c_out[i] + c.c_ang[i] * self.mu[k];
                let rhs = |i: usize| spec[(i - 1) * n + k];
                if k == 0 {
                    // Unknowns (n·u_center, û_1, ..., û_rings).
                    let mut lower = vec![0.0; rings + 1];
                    let mut d = vec![0.0; rings + 1];
                    let mut upper = vec![0.0; rings + 1];
                    let mut r = vec![Complex64::new(0.0, 0.0); rings + 1];
                    d[0] = (mass[0] + n as f64 * c.c_center) / n as f64;
                    upper[0] = -c.c_center;
                    r[0] = Complex64::new(b[0], 0.0);
                    for i in 1..=rings {
                        lower[i] = -c.c_in[i];
                        d[i] = diag(i);
                        upper[i] = -c.c_out[i];
                        r[i] = rhs(i);
                    }
                    thomas(&lower, &d, &upper, &mut r);
                    r
                } else {
                    let mut lower = vec![0.0; rings];
                    let mut d = vec![0.0; rings];
                    let mut upper = vec![0.0; rings];
                    let mut r = vec![Complex64::new(0.0, 0.0); rings];
                    for i in 1..=rings {
                        lower[i - 1] = -c.c_in[i];
                        d[i - 1] = diag(i);
                        upper[i - 1] = -c.c_out[i];
                        r[i - 1] = rhs(i);
                    }
                    thomas(&lower, &d, &upper, &mut r);
                    r
                }
            })
            .collect();

        let mut u = vec![0.0; 1 + rings * n];
        u[0] = solved[0][0].re / n as f64;
        let mut rings_out: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); rings * n];
        for (k, col) in solved.iter().enumerate() {
            let offset = usize::from(k == 0);
            for i in 0..rings {
                rings_out[i * n + k] = col[i + offset];
            }
        }
        rings_out
            .par_chunks_mut(n)
            .for_each(|ring| self.inverse.process(ring));
        for (dst, src) in u[1..].iter_mut().zip(&rings_out) {
            *dst = src.re / n as f64;
        }
        u
    }
}

/// Thomas algorithm with real coefficients and complex right-hand side.
/// `lower[0]` and the last `upper` are ignored.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [Complex64]) {
    let m = diag.len();
    let mut cp = vec![0.0; m];
    let mut denom = diag[0];
    cp[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..m {
        denom = diag[i] - lower[i] * cp[i - 1];
        cp[i] = if i + 1 < m { upper[i] / denom } else { 0.0 };
        let prev = rhs[i - 1];
        rhs[i] = (rhs[i] - prev * lower[i]) / denom;
    }
    for i in (0..m - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= next * cp[i];
    }
}
