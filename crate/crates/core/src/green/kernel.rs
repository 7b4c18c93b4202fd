use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpedModel;
use crate::numerics::field::ScalarField;
use crate::numerics::grid::{GridSpec, PolarGrid};
use crate::numerics::operator::{discrete_laplacian, SparseOperator};
use crate::numerics::quadrature::{Quadrature, TailMap};
use crate::numerics::solve::{solve_stiffness, Shift, SolveStats, SolverOptions};

/// Allowed decrease between consecutive exhaustion kernels.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    RadialQuadrature,
    Exhaustion { radius: f64 },
}

/// `G(x, ·)` sampled on a grid centered at the pole `x`.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub pole_radius: f64,
    pub values: ScalarField,
    /// The kernel vanishes on and beyond this ring (for exhaustion kernels).
    pub domain_radius: f64,
    pub flux_norm: f64,
    pub construction: Construction,
    /// Largest relative change from the previous exhaustion member on the inner half.
    pub truncation_estimate: Option<f64>,
    pub solve: Option<SolveStats>,
}

impl GreenKernel {
    pub fn grid(&self) -> &Arc<PolarGrid> {
        &self.values.grid
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values.values[node]
    }
}

/// `G(r) = ∫_r^∞ A(s)^{-1} ds` for a radially symmetric pole at `p`.
pub fn radial_green(model: &WarpedModel, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!(
            "radial Green's function needs r > 0, got {r}"
        )));
    }
    let q = Quadrature::default();
    let inv_area = |s: f64| 1.0 / model.sphere_area(s).unwrap_or(f64::INFINITY);
    let near = q.integrate(inv_area, r, r + 1.0)?;
    // 1/A can decay slowly; the algebraic map stays smooth for any exponential rate.
    let far = q
        .with_tail(TailMap::Algebraic)
        .integrate(inv_area, r + 1.0, f64::INFINITY)?;
    Ok(near + far)
}

/// `G'(r) = −1/A(r)`.
pub fn radial_green_derivative(model: &WarpedModel, r: f64) -> Result<f64> {
    Ok(-1.0 / model.sphere_area(r)?)
}

/// Quadrature kernel sampled on a grid centered at `p`. The center node holds
/// `G(h/4)`, a stand-in for the singular value.
pub fn radial_kernel(grid: &Arc<PolarGrid>) -> Result<GreenKernel> {
    if grid.center_radius != 0.0 {
        return Err(Error::domain(
            "the radial kernel needs a grid centered at the model pole",
        ));
    }
    let model = &grid.model;
    let mut values = Vec::with_capacity(grid.n_nodes());
    values.push(radial_green(model, 0.25 * grid.h_r)?);
    for i in 1..=grid.nr {
        let g = radial_green(model, grid.rho(i))?;
        values.extend(std::iter::repeat(g).take(grid.ntheta));
    }
    Ok(GreenKernel {
        pole_radius: 0.0,
        values: ScalarField::new(grid.clone(), values)?,
        domain_radius: grid.r_max,
        flux_norm: 1.0,
        construction: Construction::RadialQuadrature,
        truncation_estimate: None,
        solve: None,
    })
}

/// Dirichlet Green's functions of `B_x(R_i)` for every exhaustion radius of the
/// operator's grid, `x` being the grid center.
pub fn exhaustion_green(op: &SparseOperator) -> Result<Vec<GreenKernel>> {
    let grid = op.grid.clone();
    let mut kernels: Vec<GreenKernel> = Vec::with_capacity(grid.exhaustion_rings.len());
    for (&ring, &radius) in grid.exhaustion_rings.iter().zip(&grid.exhaustion_radii) {
        let m = grid.interior_count(ring);
        let mut b = vec![0.0; m];
        b[0] = 1.0;
        let (x, stats) = solve_stiffness(op, ring, Shift::None, &b, SolverOptions::default())?;
        let mut values = vec![0.0; grid.n_nodes()];
        values[..m].copy_from_slice(&x);
        if let Some(k) = values[..m].iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Construction(format!(
                "Green's function not positive at node {k}"
            )));
        }
        let mut truncation_estimate = None;
        if let Some(prev) = kernels.last() {
            let worst = values
                .iter()
                .zip(&prev.values.values)
                .map(|(a, b)| a - b)
                .fold(f64::INFINITY, f64::min);
            if worst < -MONOTONICITY_TOLERANCE {
                return Err(Error::Construction(format!(
                    "exhaustion kernels decrease by {:.3e}: maximum principle broken",
                    -worst
                )));
            }
            let inner = grid.interior_count((prev.domain_radius / grid.h_r / 2.0).round() as usize);
            truncation_estimate = Some(
                (1..inner)
                    .map(|k| (values[k] - prev.values.values[k]) / values[k])
                    .fold(0.0, f64::max),
            );
        }
        kernels.push(GreenKernel {
            pole_radius: grid.center_radius,
            values: ScalarField::new(grid.clone(), values)?,
            domain_radius: radius,
            flux_norm: 1.0,
            construction: Construction::Exhaustion { radius },
            truncation_estimate,
            solve: Some(stats),
        });
    }
    Ok(kernels)
}

/// Largest exhaustion kernel for a pole at distance `pole_radius` from `p`.
pub fn kernel_at(model: &WarpedModel, spec: &GridSpec, pole_radius: f64) -> Result<GreenKernel> {
    let grid = spec.clone().centered_at(pole_radius).build(model)?;
    let op = discrete_laplacian(&grid);
    exhaustion_green(&op)?
        .pop()
        .ok_or_else(|| Error::Construction("no exhaustion radius".to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub pairs: usize,
    pub max_relative_difference: f64,
}

/// Compare `G(x, y)` with `G(y, x)` from a second solve centered at `y`, for
/// each of the given nodes `y` of the kernel's grid.
pub fn symmetry_check(
    kernel: &GreenKernel,
    spec: &GridSpec,
    nodes: &[usize],
) -> Result<SymmetryReport> {
    let grid = kernel.grid();
    let mut worst = 0.0f64;
    for &node in nodes {
        let y_radius = grid.model_radius(node);
        let swapped = kernel_at(&grid.model, spec, y_radius)?;
        let g_yx = swapped
            .grid()
            .interpolate(
                &swapped.values.values,
                grid.node_rho(node),
                grid.back_azimuth(node),
            )
            .ok_or_else(|| Error::domain("swapped pole lies outside the second grid"))?;
        let g_xy = kernel.value(node);
        worst = worst.max((g_xy - g_yx).abs() / g_xy.max(g_yx));
    }
    Ok(SymmetryReport {
        pairs: nodes.len(),
        max_relative_difference: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn h2() -> WarpedModel {
        WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(20.0)
            .unwrap()
    }

    #[test]
    fn closed_forms() {
        let g = radial_green(&h2(), 1.0).unwrap();
        assert_relative_eq!(g, (1.0 / 0.5f64.tanh()).ln() / (2.0 * PI), epsilon = 1e-10);
        let h3 = WarpedModel::hyperbolic(3, -1.0).unwrap();
        assert_relative_eq!(
            radial_green(&h3, 1.0).unwrap(),
            0.024_910_556_524_700_64,
            epsilon = 1e-10
        );
        let far = radial_green(&h2(), 10.0).unwrap();
        assert_relative_eq!(far / ((-10.0f64).exp() / PI), 1.0, max_relative = 0.01);
        assert!(radial_green(&h2(), 0.0).is_err());
        assert!(radial_green(&WarpedModel::euclidean(2), 1.0).is_err());
    }

    #[test]
    fn unit_flux_and_monotone_decay() {
        let m = h2();
        for &r in &[0.1, 1.0, 3.0] {
            let a = m.sphere_area(r).unwrap();
            assert_relative_eq!(
                a * radial_green_derivative(&m, r).unwrap().abs(),
                1.0,
                epsilon = 1e-14
            );
            assert!(radial_green(&m, r).unwrap() > radial_green(&m, r + 0.1).unwrap());
        }
    }

    #[test]
    fn exhaustion_kernels_increase() {
        let g = GridSpec::new(8.0, 256, 32, 4).build(&h2()).unwrap();
        let kernels = exhaustion_green(&discrete_laplacian(&g)).unwrap();
        assert_eq!(kernels.len(), 4);
        for pair in kernels.windows(2) {
            let d = pair[1]
                .values
                .values
                .iter()
                .zip(&pair[0].values.values)
                .map(|(a, b)| a - b);
            assert!(d.fold(f64::INFINITY, f64::min) >= -MONOTONICITY_TOLERANCE);
        }
        // Dirichlet kernel of a centered ball is G(r) − G(R).
        let last = kernels.last().unwrap();
        let gr = radial_green(&h2(), 8.0).unwrap();
        for i in [13, 64, 128, 192] {
            let node = g.node(i, 0);
            let exact = radial_green(&h2(), g.rho(i)).unwrap() - gr;
            assert_relative_eq!(last.value(node), exact, max_relative = 5e-3);
        }
    }
}
