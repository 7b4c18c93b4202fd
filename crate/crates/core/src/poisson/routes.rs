//! Three routes to the decaying solution of `Δu = f`.
//!
//! * radial: `u(r) = −∫_r^∞ Q`, `Q(s) = A(s)^{-1} ∫_0^s f A`, by nested quadrature;
//! * Green integral: `u(x) = −∫ G(x, y) f(y) dy` with exhaustion kernels;
//! * exhaustion: Dirichlet problems on `B_p(R_i)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpedModel;
use crate::green::bounds::OUTER_EXCLUSION;
use crate::green::kernel::GreenKernel;
use crate::numerics::field::{RadialField, ScalarField};
use crate::numerics::operator::SparseOperator;
use crate::numerics::quadrature::{Quadrature, TailMap};
use crate::numerics::reduce::dot;
use crate::numerics::solve::{solve_dirichlet_with_stats, SolverOptions};
use crate::poisson::source::DecayingSource;

/// Largest residual accepted from the radial route.
pub const RADIAL_RESIDUAL_LIMIT: f64 = 1e-6;
/// Relative sup-norm agreement required between routes.
pub const ROUTE_AGREEMENT_TOLERANCE: f64 = 0.02;

/// Directions per angular cell when averaging sources on off-center grids.
pub const GREEN_ANGULAR_SUBDIVISION: usize = 64;

/// Beyond this `(n−1)s` the inner integral is taken over `[0, ∞)`: the
/// integrand there is below `f·e^{-40}`.
const INNER_SPLIT: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Radial,
    GreenIntegral,
    Exhaustion,
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub route: Route,
    /// `(r, u)` with `r = d(p, ·)`, sorted by `r`.
    pub samples: Vec<(f64, f64)>,
    /// Grid values, for the exhaustion route.
    pub field: Option<ScalarField>,
    /// Samples beyond this radius are truncation-affected or absent.
    pub domain_radius: f64,
    /// Radial: sup of `|Δu − f|`; exhaustion: relative solver residual.
    pub residual: Option<f64>,
}

impl PoissonSolution {
    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()))
    }
}

fn quadrature() -> Quadrature {
    Quadrature {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        ..Quadrature::default()
    }
}

/// `Q(s) = ∫_0^s f(t) (φ(t)/φ(s))^{n−1} dt`, written in `τ = s − t` with
/// logarithms of `φ` so that nothing overflows.
fn flux_density(model: &WarpedModel, source: &DecayingSource, s: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(0.0);
    }
    let dim = (model.n - 1) as f64;
    let ls = model.log_phi(s);
    let g = |tau: f64| {
        let t = s - tau;
        if t <= 0.0 {
            0.0
        } else {
            source.eval(t) * (dim * (model.log_phi(t) - ls)).exp()
        }
    };
    let q = quadrature();
    if dim * s <= INNER_SPLIT {
        q.integrate(g, 0.0, s)
    } else {
        q.integrate(g, 0.0, f64::INFINITY)
    }
}

/// Decaying radial solution at ascending radii.
pub fn radial_values(
    model: &WarpedModel,
    source: &DecayingSource,
    radii: &[f64],
) -> Result<Vec<f64>> {
    model.b()?;
    if radii.is_empty() {
        return Ok(Vec::new());
    }
    if radii[0] < 0.0 || radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain(
            "radial solution needs ascending nonnegative radii",
        ));
    }
    if source.is_zero() {
        return Ok(vec![0.0; radii.len()]);
    }
    let q = quadrature();
    let integrand = |s: f64| flux_density(model, source, s).unwrap_or(f64::NAN);
    let last = *radii.last().expect("nonempty");
    let tail = q
        .with_tail(TailMap::Algebraic)
        .integrate(integrand, last, f64::INFINITY)?;
    let pieces = radii
        .par_windows(2)
        .map(|w| q.integrate(integrand, w[0], w[1]))
        .collect::<Result<Vec<f64>>>()?;
    let mut out = vec![0.0; radii.len()];
    let mut acc = -tail;
    out[radii.len() - 1] = acc;
    for (i, p) in pieces.iter().enumerate().rev() {
        acc -= p;
        out[i] = acc;
    }
    Ok(out)
}

/// Radial solution on `[0, r_max]` at spacing `h/2`. The residual is the sup
/// of `|Δu − f|` with `Δu` Richardson-extrapolated from spacings `h` and `h/2`.
pub fn solve_radial(
    model: &WarpedModel,
    source: &DecayingSource,
    r_max: f64,
    h: f64,
) -> Result<PoissonSolution> {
    let steps = (r_max / h).round() as usize;
    if steps < 4 || ((steps as f64) * h - r_max).abs() > 1e-9 * r_max {
        return Err(Error::domain(
            "r_max must be a multiple of h with at least 4 steps",
        ));
    }
    let fine_h = 0.5 * h;
    let radii: Vec<f64> = (0..=2 * steps).map(|i| i as f64 * fine_h).collect();
    let u = radial_values(model, source, &radii)?;
    let fine = model.laplacian_radial(&RadialField {
        r0: 0.0,
        h: fine_h,
        values: u.clone(),
    })?;
    let coarse_vals: Vec<f64> = u.iter().step_by(2).copied().collect();
    let coarse = model.laplacian_radial(&RadialField {
        r0: 0.0,
        h,
        values: coarse_vals,
    })?;
    // Sources with f'(0) ≠ 0 are kinked at the pole, where u is only C¹.
    let residual = (1..=steps)
        .map(|i| {
            let lap = (4.0 * fine.values[2 * i] - coarse.values[i]) / 3.0;
            (lap - source.eval(i as f64 * h)).abs()
        })
        .fold(0.0, f64::max);
    Ok(PoissonSolution {
        route: Route::Radial,
        samples: radii.into_iter().zip(u).collect(),
        field: None,
        domain_radius: r_max,
        residual: Some(residual),
    })
}

/// `−∫ G(x, y) f(y) dy` for one kernel, `x` its grid center. The source is
/// averaged over each cell with [`GREEN_ANGULAR_SUBDIVISION`] directions.
pub fn green_integral(kernel: &GreenKernel, source: &DecayingSource) -> Result<f64> {
    let grid = kernel.grid();
    let f = grid.angular_cell_average(|r| source.eval(r), GREEN_ANGULAR_SUBDIVISION)?;
    let gw: Vec<f64> = kernel
        .values
        .values
        .iter()
        .zip(grid.weights())
        .map(|(g, w)| g * w)
        .collect();
    Ok(-dot(&gw, &f))
}

/// Green-integral values at `eval_poles`, one exhaustion family per pole.
/// With two or more members the truncation error, which decays like `1/R` for
/// sources of order `r^{-2}`, is removed by extrapolating the last two members.
pub fn solve_green_integral(
    families: &[Vec<GreenKernel>],
    source: &DecayingSource,
    eval_poles: &[f64],
) -> Result<PoissonSolution> {
    if families.len() != eval_poles.len() {
        return Err(Error::domain(format!(
            "{} kernel families for {} poles",
            families.len(),
            eval_poles.len()
        )));
    }
    for (fam, &p) in families.iter().zip(eval_poles) {
        let k = fam
            .last()
            .ok_or_else(|| Error::domain("empty kernel family"))?;
        if fam.iter().any(|k| (k.pole_radius - p).abs() > 1e-12) {
            return Err(Error::domain(format!(
                "kernel centered at r = {} used for pole r = {p}",
                k.pole_radius
            )));
        }
    }
    let values = families
        .par_iter()
        .map(|fam| {
            let outer = fam.last().expect("checked above");
            let u = green_integral(outer, source)?;
            if fam.len() < 2 {
                return Ok(u);
            }
            let inner = &fam[fam.len() - 2];
            let v = green_integral(inner, source)?;
            let (r1, r2) = (inner.domain_radius, outer.domain_radius);
            Ok((r2 * u - r1 * v) / (r2 - r1))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut samples: Vec<(f64, f64)> = eval_poles.iter().copied().zip(values).collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let domain_radius = families
        .iter()
        .filter_map(|f| f.last())
        .map(|k| k.domain_radius)
        .fold(f64::INFINITY, f64::min);
    Ok(PoissonSolution {
        route: Route::GreenIntegral,
        samples,
        field: None,
        domain_radius,
        residual: None,
    })
}

#[derive(Debug, Clone)]
pub struct ExhaustionRun {
    /// `u_i` on `B_p(R_i)`.
    pub members: Vec<PoissonSolution>,
    /// `‖u_{i+1} − u_i‖_∞`.
    pub cauchy: Vec<f64>,
    /// `v_i` with `Δv_i = −|f|` on the same balls.
    pub majorants: Vec<ScalarField>,
    /// `min_{i, y} (v_i − |u_i|)(y)`; nonnegative under the maximum principle.
    pub domination_margin: f64,
    /// `max_i ‖u_i‖_∞` and `‖v‖_∞` on the largest ball.
    pub sup_members: f64,
    pub sup_majorant: f64,
}

impl ExhaustionRun {
    pub fn limit(&self) -> &PoissonSolution {
        self.members.last().expect("at least one exhaustion member")
    }

    pub fn dominated(&self) -> bool {
        self.domination_margin >= -1e-12 * self.sup_majorant.max(1e-300)
            && self.sup_members <= self.sup_majorant
    }
}

fn field_samples(field: &ScalarField, domain_radius: f64) -> Vec<(f64, f64)> {
    let grid = &field.grid;
    let mut s: Vec<(f64, f64)> = (0..grid.n_nodes())
        .filter(|&k| grid.model_radius(k) < domain_radius - 1e-12)
        .map(|k| (grid.model_radius(k), field.values[k]))
        .collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    s
}

/// Dirichlet exhaustion on every radius of the operator's grid.
pub fn solve_exhaustion(op: &SparseOperator, source: &DecayingSource) -> Result<ExhaustionRun> {
    let grid = op.grid.clone();
    let f = source.field(&grid)?;
    let abs_f = source.abs().field(&grid)?;
    let neg_abs = ScalarField::new(grid.clone(), abs_f.values.iter().map(|v| -v).collect())?;
    let radii = grid.exhaustion_radii.clone();
    let solved = radii
        .par_iter()
        .map(|&r| {
            let (u, stats) = solve_dirichlet_with_stats(op, &f, r, SolverOptions::default())?;
            let (v, _) = solve_dirichlet_with_stats(op, &neg_abs, r, SolverOptions::default())?;
            Ok((r, u, stats, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut members = Vec::with_capacity(solved.len());
    let mut majorants = Vec::with_capacity(solved.len());
    let mut margin = f64::INFINITY;
    for (r, u, stats, v) in solved {
        margin = u
            .values
            .iter()
            .zip(&v.values)
            .map(|(a, b)| b - a.abs())
            .fold(margin, f64::min);
        members.push(PoissonSolution {
            route: Route::Exhaustion,
            samples: field_samples(&u, r),
            field: Some(u),
            domain_radius: r,
            residual: Some(stats.relative_residual),
        });
        majorants.push(v);
    }
    let cauchy: Vec<f64> = members
        .windows(2)
        .map(|w| {
            let (a, b) = (
                w[0].field.as_ref().expect("field"),
                w[1].field.as_ref().expect("field"),
            );
            a.values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    if let Some(k) = cauchy.windows(2).position(|w| w[1] > w[0] * (1.0 + 1e-9)) {
        return Err(Error::Construction(format!(
            "exhaustion differences grow from {:.3e} to {:.3e}: truncation radius too small",
            cauchy[k],
            cauchy[k + 1]
        )));
    }
    let sup_members = members.iter().map(|m| m.max_abs()).fold(0.0, f64::max);
    let sup_majorant = majorants.last().map_or(0.0, |v| v.max_abs());
    Ok(ExhaustionRun {
        members,
        cauchy,
        majorants,
        domination_margin: margin,
        sup_members,
        sup_majorant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteAgreement {
    pub route: Route,
    pub compared: usize,
    pub max_difference: f64,
    /// `sup |u_radial|` over the compared radii.
    pub scale: f64,
    pub relative: f64,
    pub pass: bool,
}

/// Compare a solution with the radial route on its samples inside `0.9 R`.
pub fn route_agreement(
    model: &WarpedModel,
    source: &DecayingSource,
    solution: &PoissonSolution,
) -> Result<RouteAgreement> {
    let limit = (1.0 - OUTER_EXCLUSION) * solution.domain_radius;
    let mut radii: Vec<f64> = solution
        .samples
        .iter()
        .map(|s| s.0)
        .filter(|&r| r <= limit)
        .collect();
    radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    if radii.is_empty() {
        return Err(Error::domain("no samples inside the comparison region"));
    }
    let reference = radial_values(model, source, &radii)?;
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut idx = 0;
    for &(r, u) in solution.samples.iter().filter(|s| s.0 <= limit) {
        while (radii[idx] - r).abs() > 1e-12 * r.max(1.0) {
            idx += 1;
        }
        worst = worst.max((u - reference[idx]).abs());
        compared += 1;
    }
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let relative = if scale > 0.0 { worst / scale } else { worst };
    Ok(RouteAgreement {
        route: solution.route,
        compared,
        max_difference: worst,
        scale,
        relative,
        pass: relative <= ROUTE_AGREEMENT_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::kernel::exhaustion_green;
    use crate::numerics::grid::GridSpec;
    use crate::numerics::operator::discrete_laplacian;
    use crate::poisson::source::manufactured_solution;

    fn h2() -> WarpedModel {
        WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(20.0)
            .unwrap()
    }

    #[test]
    fn zero_source_gives_zero() {
        let m = h2();
        let sol = solve_radial(&m, &DecayingSource::zero(), 4.0, 0.1).unwrap();
        assert!(sol.samples.iter().all(|s| s.1 == 0.0));
        let g = GridSpec::new(4.0, 64, 32, 2).build(&m).unwrap();
        let run = solve_exhaustion(&discrete_laplacian(&g), &DecayingSource::zero()).unwrap();
        assert!(run.members.iter().all(|u| u.max_abs() == 0.0));
    }

    #[test]
    fn manufactured_radial_solution() {
        let m = h2();
        let s = DecayingSource::manufactured(&m).unwrap();
        let sol = solve_radial(&m, &s, 6.0, 0.02).unwrap();
        let err = sol
            .samples
            .iter()
            .map(|(r, u)| (u - manufactured_solution(*r)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!(
            sol.residual.unwrap() < RADIAL_RESIDUAL_LIMIT,
            "{:?}",
            sol.residual
        );
    }

    #[test]
    fn powerlaw_decays_like_inverse_distance() {
        let m = h2();
        let s = DecayingSource::powerlaw(1.0, 1.0).unwrap();
        let radii: Vec<f64> = (5..=15).map(|r| r as f64).collect();
        let u = radial_values(&m, &s, &radii).unwrap();
        for (r, v) in radii.iter().zip(&u) {
            let scaled = r * v.abs();
            assert!(scaled > 0.5 && scaled < 1.5, "r = {r}: {scaled}");
        }
    }

    #[test]
    fn green_route_at_the_center() {
        let m = h2();
        let s = DecayingSource::powerlaw(1.0, 2.0).unwrap();
        let g = GridSpec::new(32.0, 512, 32, 1).build(&m).unwrap();
        let k = exhaustion_green(&discrete_laplacian(&g))
            .unwrap()
            .pop()
            .unwrap();
        let sol = solve_green_integral(&[vec![k]], &s, &[0.0]).unwrap();
        let exact = radial_values(&m, &s, &[0.0]).unwrap()[0];
        assert!(
            (sol.samples[0].1 - exact).abs() < 0.01 * exact.abs(),
            "{:?} vs {exact}",
            sol.samples
        );
    }

    #[test]
    fn green_route_off_center_with_extrapolation() {
        let m = h2();
        let s = DecayingSource::powerlaw(1.0, 1.0).unwrap();
        let spec = GridSpec::new(32.0, 256, 32, 2);
        let fam = exhaustion_green(&discrete_laplacian(
            &spec.clone().centered_at(3.0).build(&m).unwrap(),
        ))
        .unwrap();
        let sol = solve_green_integral(&[fam], &s, &[3.0]).unwrap();
        let exact = radial_values(&m, &s, &[3.0]).unwrap()[0];
        assert!(
            (sol.samples[0].1 - exact).abs() < 0.02 * exact.abs(),
            "{:?} vs {exact}",
            sol.samples
        );
    }
}
