//! Smallest Dirichlet eigenpair by inverse iteration.

use crate::error::{Error, Result};
use crate::numerics::field::ScalarField;
use crate::numerics::operator::SparseOperator;
use crate::numerics::reduce::{dot, weighted_dot};
use crate::numerics::solve::{solve_stiffness, Shift, SolverOptions};

pub const EIGEN_MAX_ITER: usize = 5_000;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Ground state, normalized to unit weighted L² norm and positive inside.
    pub field: ScalarField,
    pub iterations: usize,
}

/// `λ₁` of `−Δ_h` on `B(domain_radius)` with Dirichlet data.
pub fn smallest_eigenpair(op: &SparseOperator, domain_radius: f64) -> Result<EigenPair> {
    let grid = op.grid.clone();
    let ring = grid.ring_of_radius(domain_radius)?;
    let m = grid.interior_count(ring);
    let w = &grid.weights()[..m];
    let opts = SolverOptions {
        rel_tol: 1e-12,
        ..Default::default()
    };

    let rayleigh = |x: &[f64]| {
        let mut sx = vec![0.0; m];
        op.apply_stiffness(x, &mut sx);
        dot(x, &sx) / weighted_dot(w, x, x)
    };

    // A positive start vector lies in the ground state's basin.
    let mut v = vec![1.0; m];
    let mut lambda = rayleigh(&v);
    for it in 1..=EIGEN_MAX_ITER {
        let b: Vec<f64> = v.iter().zip(w).map(|(x, wi)| x * wi).collect();
        let (mut x, _) = solve_stiffness(op, ring, Shift::None, &b, opts)?;
        let nrm = weighted_dot(w, &x, &x).sqrt();
        x.iter_mut().for_each(|xi| *xi /= nrm);
        let next = rayleigh(&x);
        let change = (next - lambda).abs();
        v = x;
        lambda = next;
        if change <= 1e-14 * lambda.abs() && it > 2 {
            let sign = if v.iter().sum::<f64>() < 0.0 {
                -1.0
            } else {
                1.0
            };
            let mut values = vec![0.0; grid.n_nodes()];
            for (dst, src) in values.iter_mut().zip(&v) {
                *dst = sign * src;
            }
            let field = ScalarField::new(grid, values)?;
            return Ok(EigenPair {
                value: lambda,
                field,
                iterations: it,
            });
        }
    }
    Err(Error::Eigen {
        iterations: EIGEN_MAX_ITER,
    })
}

/// Rayleigh quotient `⟨u, −Δ_h u⟩_W / ⟨u, u⟩_W` over the unknowns inside `domain_radius`.
pub fn rayleigh_quotient(
    op: &SparseOperator,
    field: &ScalarField,
    domain_radius: f64,
) -> Result<f64> {
    let ring = op.grid.ring_of_radius(domain_radius)?;
    let m = op.grid.interior_count(ring);
    let x = &field.values[..m];
    let mut sx = vec![0.0; m];
    op.apply_stiffness(x, &mut sx);
    Ok(dot(x, &sx) / weighted_dot(&op.weights()[..m], x, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpedModel;
    use crate::numerics::grid::GridSpec;
    use crate::numerics::operator::discrete_laplacian;
    use approx::assert_relative_eq;

    #[test]
    fn unit_disk() {
        let g = GridSpec::new(1.0, 256, 32, 1)
            .build(&WarpedModel::euclidean(2))
            .unwrap();
        let op = discrete_laplacian(&g);
        let pair = smallest_eigenpair(&op, 1.0).unwrap();
        assert_relative_eq!(pair.value, 5.783_186, max_relative = 1e-3);
        assert_relative_eq!(
            rayleigh_quotient(&op, &pair.field, 1.0).unwrap(),
            pair.value,
            max_relative = 1e-8
        );
        let interior = g.interior_count(g.nr);
        assert!(pair.field.values[..interior].iter().all(|&v| v > 0.0));
    }
}
