//! Level sets `l(s) = {G = s}` and bands `L(α, β) = {α < G < β}`.
//!
//! Contours are traced by marching squares on the `(ρ, α)` cells. Band
//! integrals weight each node by the fraction of its cell lying in the band,
//! estimated from the local gradient ("threshold clamping").

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::kernel::GreenKernel;
use crate::numerics::grid::PolarGrid;

/// Nodal gradient of a kernel in the orthonormal frame `(∂_ρ, J⁻¹∂_α)`.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

impl GradientField {
    pub fn of(grid: &PolarGrid, values: &[f64]) -> Self {
        let (nr, nt) = (grid.nr, grid.ntheta);
        let (h, ha) = (grid.h_r, grid.h_theta);
        let n = grid.n_nodes();
        let mut radial = vec![0.0; n];
        let mut angular = vec![0.0; n];
        for i in 1..=nr {
            for j in 0..nt {
                let k = grid.node(i, j);
                let inner = if i == 1 {
                    values[0]
                } else {
                    values[grid.node(i - 1, j)]
                };
                radial[k] = if i < nr {
                    (values[grid.node(i + 1, j)] - inner) / (2.0 * h)
                } else {
                    (values[k] - inner) / h
                };
                let (jp, jm) = ((j + 1) % nt, (j + nt - 1) % nt);
                angular[k] = (values[grid.node(i, jp)] - values[grid.node(i, jm)])
                    / (2.0 * ha * grid.jacobian(k));
            }
        }
        GradientField { radial, angular }
    }

    pub fn norm(&self, node: usize) -> f64 {
        self.radial[node].hypot(self.angular[node])
    }
}

/// Fraction of the cell of `node` where the kernel exceeds `s`.
fn fraction_above(grid: &PolarGrid, grad: &GradientField, g: f64, node: usize, s: f64) -> f64 {
    let norm = grad.norm(node);
    if node == 0 || norm == 0.0 {
        return if g >= s { 1.0 } else { 0.0 };
    }
    let width = (grad.radial[node].abs() * grid.h_r
        + grad.angular[node].abs() * grid.jacobian(node) * grid.h_theta)
        / norm;
    (0.5 + (g - s) / (norm * width)).clamp(0.0, 1.0)
}

/// Off-pole value range `(min, max)` over nodes beyond two cells from the pole
/// and inside the kernel's domain.
fn off_pole_range(kernel: &GreenKernel) -> (f64, f64) {
    let grid = kernel.grid();
    let ring = grid.ring_of_radius(kernel.domain_radius).unwrap_or(grid.nr);
    let start = grid.node(3.min(ring), 0);
    kernel.values.values[start..grid.node(ring, 0) + grid.ntheta]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// `∫_{l(s)} |∇G|`, the flux of `G` through its level set.
pub fn flux_on_level_set(kernel: &GreenKernel, s: f64) -> Result<f64> {
    let (lo, hi) = off_pole_range(kernel);
    if !(s > lo && s < hi) {
        return Err(Error::domain(format!(
            "level {s:.3e} outside the off-pole range ({lo:.3e}, {hi:.3e})"
        )));
    }
    let grid = kernel.grid();
    let v = &kernel.values.values;
    let grad = GradientField::of(grid, v);
    let (nt, h, ha) = (grid.ntheta, grid.h_r, grid.h_theta);
    let mut flux = 0.0;
    for i in 1..grid.nr {
        for j in 0..nt {
            let jp = (j + 1) % nt;
            let corners = [
                grid.node(i, j),
                grid.node(i + 1, j),
                grid.node(i + 1, jp),
                grid.node(i, jp),
            ];
            // Cell-local coordinates (t_ρ, t_α) of each corner.
            const POS: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let vals = corners.map(|k| v[k]);
            let inside = vals.map(|x| x >= s);
            if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
                continue;
            }
            let cross = |e: usize| -> (f64, f64) {
                let (a, b) = (e, (e + 1) % 4);
                let t = (s - vals[a]) / (vals[b] - vals[a]);
                (
                    POS[a].0 + t * (POS[b].0 - POS[a].0),
                    POS[a].1 + t * (POS[b].1 - POS[a].1),
                )
            };
            let center_inside = vals.iter().sum::<f64>() / 4.0 >= s;
            let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::with_capacity(2);
            let changes = (0..4).filter(|&e| inside[e] != inside[(e + 1) % 4]).count();
            if changes == 4 {
                for k in 0..4 {
                    if inside[k] != center_inside {
                        segments.push((cross((k + 3) % 4), cross(k)));
                    }
                }
            } else {
                let edges: Vec<usize> = (0..4)
                    .filter(|&e| inside[e] != inside[(e + 1) % 4])
                    .collect();
                segments.push((cross(edges[0]), cross(edges[1])));
            }
            let bilinear = |f: &dyn Fn(usize) -> f64, (tr, ta): (f64, f64)| {
                (1.0 - tr) * (1.0 - ta) * f(corners[0])
                    + tr * (1.0 - ta) * f(corners[1])
                    + tr * ta * f(corners[2])
                    + (1.0 - tr) * ta * f(corners[3])
            };
            for (p, q) in segments {
                let mid = (0.5 * (p.0 + q.0), 0.5 * (p.1 + q.1));
                let jac = bilinear(&|k| grid.jacobian(k), mid);
                let len = ((q.0 - p.0) * h).hypot(jac * (q.1 - p.1) * ha);
                let gr = bilinear(&|k| grad.radial[k], mid);
                let ga = bilinear(&|k| grad.angular[k], mid);
                flux += gr.hypot(ga) * len;
            }
        }
    }
    Ok(flux)
}

/// Five levels taken from rings at 15%–55% of the domain radius.
pub fn default_flux_thresholds(kernel: &GreenKernel) -> Vec<f64> {
    let grid = kernel.grid();
    [0.15, 0.25, 0.35, 0.45, 0.55]
        .iter()
        .map(|f| {
            let ring = ((f * kernel.domain_radius / grid.h_r).round() as usize).max(3);
            let start = grid.node(ring, 0);
            let vals = &kernel.values.values[start..start + grid.ntheta];
            vals.iter().sum::<f64>() / grid.ntheta as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxStats {
    pub thresholds: Vec<f64>,
    pub fluxes: Vec<f64>,
    pub mean: f64,
    pub coefficient_of_variation: f64,
    pub max_deviation_from_norm: f64,
}

pub fn flux_statistics(kernel: &GreenKernel, thresholds: &[f64]) -> Result<FluxStats> {
    let fluxes = thresholds
        .iter()
        .map(|&s| flux_on_level_set(kernel, s))
        .collect::<Result<Vec<_>>>()?;
    let n = fluxes.len() as f64;
    let mean = fluxes.iter().sum::<f64>() / n;
    let var = fluxes.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
    let max_dev = fluxes
        .iter()
        .map(|f| (f - kernel.flux_norm).abs() / kernel.flux_norm)
        .fold(0.0, f64::max);
    Ok(FluxStats {
        thresholds: thresholds.to_vec(),
        fluxes,
        mean,
        coefficient_of_variation: var.sqrt() / mean,
        max_deviation_from_norm: max_dev,
    })
}

/// `∫_{L(θ,∞)} G`.
pub fn superlevel_mass(kernel: &GreenKernel, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::domain("superlevel threshold must be positive"));
    }
    let grid = kernel.grid();
    let v = &kernel.values.values;
    let grad = GradientField::of(grid, v);
    Ok((0..grid.n_nodes())
        .map(|k| grid.weight(k) * fraction_above(grid, &grad, v[k], k, theta) * v[k])
        .sum())
}

/// Band statistics for `L(s_{m+1}, s_m)` with `s_m = e^{-m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub m: u32,
    pub lower: f64,
    pub upper: f64,
    /// Nodes with `lower < G ≤ upper`; these sets are disjoint across bands.
    pub nodes: Vec<usize>,
    pub integral_g: f64,
    pub integral_grad_sq_over_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetDecomposition {
    pub pole_radius: f64,
    pub bands: Vec<Band>,
}

impl LevelSetDecomposition {
    /// Bands for `m = m0 ..= m_last`.
    pub fn new(kernel: &GreenKernel, m0: u32, m_last: u32) -> Self {
        let bands = (m0..=m_last)
            .map(|m| {
                let (lower, upper) = ((-(m as f64) - 1.0).exp(), (-(m as f64)).exp());
                let (integral_g, integral_grad_sq_over_g, nodes) =
                    band_integrals(kernel, lower, upper);
                Band {
                    m,
                    lower,
                    upper,
                    nodes,
                    integral_g,
                    integral_grad_sq_over_g,
                }
            })
            .collect();
        LevelSetDecomposition {
            pole_radius: kernel.pole_radius,
            bands,
        }
    }
}

/// `(∫_L G, ∫_L G⁻¹|∇G|², nodes)` over `L(lower, upper)`. Integrals weight each
/// node by the clamped fraction of its cell inside the band.
pub fn band_integrals(kernel: &GreenKernel, lower: f64, upper: f64) -> (f64, f64, Vec<usize>) {
    let grid = kernel.grid();
    let v = &kernel.values.values;
    let grad = GradientField::of(grid, v);
    let mut ig = 0.0;
    let mut ic = 0.0;
    let mut nodes = Vec::new();
    for k in 1..grid.n_nodes() {
        if v[k] <= 0.0 {
            continue;
        }
        let frac = fraction_above(grid, &grad, v[k], k, lower)
            - fraction_above(grid, &grad, v[k], k, upper);
        if frac > 0.0 {
            let w = grid.weight(k) * frac;
            ig += w * v[k];
            ic += w * grad.norm(k).powi(2) / v[k];
        }
        if v[k] > lower && v[k] <= upper {
            nodes.push(k);
        }
    }
    (ig, ic, nodes)
}

/// `(∫_{L(lower, upper)} G f, sup |f|)` with the clamped weights of
/// [`band_integrals`]; the sup runs over nodes whose cell meets the band.
/// `None` when no cell meets the band.
pub fn band_source_integral(
    kernel: &GreenKernel,
    lower: f64,
    upper: f64,
    f: &[f64],
) -> Option<(f64, f64)> {
    let grid = kernel.grid();
    let v = &kernel.values.values;
    let grad = GradientField::of(grid, v);
    let mut integral = 0.0;
    let mut sup = 0.0f64;
    let mut hit = false;
    for k in 1..grid.n_nodes() {
        if v[k] <= 0.0 {
            continue;
        }
        let frac = fraction_above(grid, &grad, v[k], k, lower)
            - fraction_above(grid, &grad, v[k], k, upper);
        if frac > 0.0 {
            hit = true;
            integral += grid.weight(k) * frac * v[k] * f[k];
            sup = sup.max(f[k].abs());
        }
    }
    hit.then_some((integral, sup))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoareaReport {
    pub delta: f64,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
}

/// Compare `∫_{L(δε, ε)} G⁻¹|∇G|²` with `flux · (−log δ)`.
pub fn coarea_identity_check(kernel: &GreenKernel, delta: f64, eps: f64) -> Result<CoareaReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let (_, lhs, nodes) = band_integrals(kernel, delta * eps, eps);
    if nodes.is_empty() {
        return Err(Error::domain(format!(
            "band L({:.3e}, {eps:.3e}) contains no node",
            delta * eps
        )));
    }
    let rhs = kernel.flux_norm * (-delta.ln());
    Ok(CoareaReport {
        delta,
        eps,
        lhs,
        rhs,
        relative_error: (lhs - rhs).abs() / rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpedModel;
    use crate::green::kernel::{exhaustion_green, radial_green, radial_kernel};
    use crate::numerics::grid::GridSpec;
    use crate::numerics::operator::discrete_laplacian;
    use crate::numerics::quadrature::adaptive_quadrature;
    use approx::assert_relative_eq;

    fn h2() -> WarpedModel {
        WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(20.0)
            .unwrap()
    }

    #[test]
    fn radial_kernel_has_unit_flux() {
        let g = GridSpec::new(8.0, 512, 64, 1).build(&h2()).unwrap();
        let k = radial_kernel(&g).unwrap();
        for s in [1e-1, 1e-2, 1e-3] {
            assert_relative_eq!(flux_on_level_set(&k, s).unwrap(), 1.0, max_relative = 0.02);
        }
        assert!(flux_on_level_set(&k, 10.0).is_err());
    }

    #[test]
    fn coarea_on_radial_kernel() {
        let g = GridSpec::new(8.0, 512, 64, 1).build(&h2()).unwrap();
        let k = radial_kernel(&g).unwrap();
        let rep = coarea_identity_check(&k, (-1.0f64).exp(), 1e-2).unwrap();
        assert!(rep.relative_error < 0.05, "{rep:?}");
        assert!(coarea_identity_check(&k, 1.0, 1e-2).is_err());
    }

    #[test]
    fn superlevel_mass_matches_quadrature() {
        let m = h2();
        let g = GridSpec::new(6.0, 384, 64, 1).build(&m).unwrap();
        let k = exhaustion_green(&discrete_laplacian(&g))
            .unwrap()
            .pop()
            .unwrap();
        // Dirichlet kernel of B(6) is G(r) − G(6); its superlevel set at G(1) − G(6) is B(1).
        let g6 = radial_green(&m, 6.0).unwrap();
        let theta = radial_green(&m, 1.0).unwrap() - g6;
        let oracle = adaptive_quadrature(
            |r: f64| {
                if r == 0.0 {
                    0.0
                } else {
                    (radial_green(&m, r).unwrap() - g6) * m.sphere_area(r).unwrap()
                }
            },
            0.0,
            1.0,
        )
        .unwrap();
        assert_relative_eq!(
            superlevel_mass(&k, theta).unwrap(),
            oracle,
            max_relative = 0.02
        );
        let top = k.values.values[0];
        assert_eq!(superlevel_mass(&k, top * 1.01).unwrap(), 0.0);
    }

    #[test]
    fn bands_are_disjoint() {
        let g = GridSpec::new(8.0, 256, 32, 1).build(&h2()).unwrap();
        let k = radial_kernel(&g).unwrap();
        let dec = LevelSetDecomposition::new(&k, 3, 6);
        let mut seen = std::collections::HashSet::new();
        for b in &dec.bands {
            for n in &b.nodes {
                assert!(seen.insert(*n));
            }
        }
    }
}
