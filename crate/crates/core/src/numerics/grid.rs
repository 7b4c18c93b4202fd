//! Geodesic polar grids.
//!
//! A grid is centered at a point `x` at distance `center_radius` from the
//! pole `p` of the model (on the ray θ = 0). Nodes sit at geodesic polar
//! coordinates `(ρ_i, α_j) = (i h, j h_α)` about `x`, where `α` is measured
//! from the outward radial direction at `x`. In these coordinates the metric
//! is `dρ² + J(ρ, α)² dα²` with `J` the Jacobi field along each geodesic.
//! When `x = p` this is the model's own polar chart and `J = φ`.
//!
//! Node 0 is the center; ring `i ≥ 1` occupies nodes `1 + (i−1)·ntheta ..`.
//! The nodes strictly inside ring `i` therefore form a prefix.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{WarpedModel, Warping};
use crate::numerics::ode::{self, OdeOptions};

pub const MIN_NR: usize = 64;
pub const MIN_NTHETA: usize = 32;

/// How the exhaustion radii are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhaustion {
    /// `R_i = r_max · i / count`.
    Uniform(usize),
    /// Explicit radii, snapped to the nearest ring.
    Radii(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub exhaustion: Exhaustion,
    #[serde(default)]
    pub center_radius: f64,
}

impl GridSpec {
    pub fn new(r_max: f64, nr: usize, ntheta: usize, exhaustion_count: usize) -> Self {
        GridSpec {
            r_max,
            nr,
            ntheta,
            exhaustion: Exhaustion::Uniform(exhaustion_count),
            center_radius: 0.0,
        }
    }

    pub fn centered_at(mut self, center_radius: f64) -> Self {
        self.center_radius = center_radius;
        self
    }

    pub fn with_radii(mut self, radii: Vec<f64>) -> Self {
        self.exhaustion = Exhaustion::Radii(radii);
        self
    }

    pub fn build(&self, model: &WarpedModel) -> Result<Arc<PolarGrid>> {
        PolarGrid::build(model, self).map(Arc::new)
    }
}

#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub spec: GridSpec,
    pub model: WarpedModel,
    pub r_max: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub h_r: f64,
    pub h_theta: f64,
    pub center_radius: f64,
    /// Snapped exhaustion radii.
    pub exhaustion_radii: Vec<f64>,
    /// Ring index of each exhaustion radius.
    pub exhaustion_rings: Vec<usize>,
    /// True when every ring has identical coefficients (space forms, or `x = p`).
    pub rotationally_symmetric: bool,
    jac: Vec<f64>,
    jac_out: Vec<f64>,
    jac_ang: Vec<f64>,
    weights: Vec<f64>,
    model_r: Vec<f64>,
    model_theta: Vec<f64>,
    back_azimuth: Vec<f64>,
}

/// Position of a point reached from the grid center.
#[derive(Debug, Clone, Copy)]
struct Landing {
    r: f64,
    theta: f64,
    /// Direction of travel, measured from the outward radial direction at the landing point.
    psi: f64,
    jac: f64,
}

impl PolarGrid {
    pub fn build(model: &WarpedModel, spec: &GridSpec) -> Result<PolarGrid> {
        let GridSpec {
            r_max,
            nr,
            ntheta,
            center_radius,
            ..
        } = *spec;
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::config(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        if nr < MIN_NR || ntheta < MIN_NTHETA {
            return Err(Error::config(format!(
                "grid resolution {nr}x{ntheta} below minimum {MIN_NR}x{MIN_NTHETA}"
            )));
        }
        if !(center_radius >= 0.0 && center_radius.is_finite()) {
            return Err(Error::config(format!(
                "center radius must be nonnegative, got {center_radius}"
            )));
        }
        if model.n != 2 {
            return Err(Error::config(
                "polar grids are two-dimensional; higher dimensions are radial-only",
            ));
        }
        let h = r_max / nr as f64;
        let ha = TAU / ntheta as f64;

        let radii = match &spec.exhaustion {
            Exhaustion::Uniform(count) => {
                if *count == 0 {
                    return Err(Error::config("exhaustion count must be positive"));
                }
                (1..=*count)
                    .map(|i| r_max * i as f64 / *count as f64)
                    .collect()
            }
            Exhaustion::Radii(r) => r.clone(),
        };
        let mut rings = Vec::with_capacity(radii.len());
        for &r in &radii {
            let ring = (r / h).round();
            if !(ring >= 1.0 && ring <= nr as f64) {
                return Err(Error::config(format!(
                    "exhaustion radius {r} outside (0, r_max]"
                )));
            }
            let ring = ring as usize;
            if rings.last().is_some_and(|&last| ring <= last) {
                return Err(Error::config(
                    "exhaustion radii must be strictly increasing after snapping to rings",
                ));
            }
            rings.push(ring);
        }
        if rings.is_empty() {
            return Err(Error::config("at least one exhaustion radius is required"));
        }

        let symmetric_center = center_radius == 0.0;
        let space_form = matches!(
            model.warping,
            Warping::Hyperbolic { .. } | Warping::Euclidean
        );

        // Shoot geodesics along directions α_j and α_{j+½}, sampled every h/2.
        let samples = 2 * nr;
        let directions: Vec<f64> = (0..2 * ntheta).map(|k| 0.5 * k as f64 * ha).collect();
        let shots: Vec<Vec<Landing>> = directions
            .par_iter()
            .map(|&alpha| {
                let rhos: Vec<f64> = (1..=samples).map(|k| 0.5 * k as f64 * h).collect();
                if symmetric_center {
                    Ok(rhos
                        .iter()
                        .map(|&rho| Landing {
                            r: rho,
                            theta: alpha,
                            psi: 0.0,
                            jac: model.profile_odd(rho).phi,
                        })
                        .collect())
                } else if space_form {
                    Ok(rhos
                        .iter()
                        .map(|&rho| closed_form_landing(model, center_radius, alpha, rho))
                        .collect())
                } else {
                    shoot(model, center_radius, alpha, &rhos)
                }
            })
            .collect::<Result<_>>()?;

        let n_nodes = 1 + nr * ntheta;
        let mut jac = vec![0.0; n_nodes];
        let mut jac_out = vec![0.0; nr * ntheta];
        let mut jac_ang = vec![0.0; nr * ntheta];
        let mut model_r = vec![0.0; n_nodes];
        let mut model_theta = vec![0.0; n_nodes];
        let mut back_azimuth = vec![0.0; n_nodes];
        model_r[0] = center_radius;
        back_azimuth[0] = if symmetric_center { 0.0 } else { PI };
        for j in 0..ntheta {
            let main = &shots[2 * j];
            let half = &shots[2 * j + 1];
            jac_out[j] = main[0].jac;
            for i in 1..=nr {
                let node = 1 + (i - 1) * ntheta + j;
                let land = main[2 * i - 1];
                jac[node] = land.jac;
                model_r[node] = land.r;
                model_theta[node] = land.theta.rem_euclid(TAU);
                back_azimuth[node] = (land.psi + PI).rem_euclid(TAU);
                jac_ang[(i - 1) * ntheta + j] = half[2 * i - 1].jac;
                if i < nr {
                    jac_out[i * ntheta + j] = main[2 * i].jac;
                }
            }
        }
        if jac
            .iter()
            .skip(1)
            .chain(&jac_out)
            .chain(&jac_ang)
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::Construction(
                "Jacobi field vanished or overflowed: the grid leaves the region where polar coordinates are valid"
                    .to_string(),
            ));
        }

        let mut weights = vec![0.0; n_nodes];
        weights[0] = 0.25 * h * ha * jac_out[..ntheta].iter().sum::<f64>();
        for node in 1..n_nodes {
            weights[node] = jac[node] * h * ha;
        }

        Ok(PolarGrid {
            spec: spec.clone(),
            model: model.clone(),
            r_max,
            nr,
            ntheta,
            h_r: h,
            h_theta: ha,
            center_radius,
            exhaustion_radii: rings.iter().map(|&i| i as f64 * h).collect(),
            exhaustion_rings: rings,
            rotationally_symmetric: symmetric_center || space_form,
            jac,
            jac_out,
            jac_ang,
            weights,
            model_r,
            model_theta,
            back_azimuth,
        })
    }

    pub fn n_nodes(&self) -> usize {
        1 + self.nr * self.ntheta
    }

    pub fn node(&self, ring: usize, j: usize) -> usize {
        debug_assert!(ring >= 1 && ring <= self.nr && j < self.ntheta);
        1 + (ring - 1) * self.ntheta + j
    }

    /// `(ring, angular index)`; the center is ring 0.
    pub fn ring_of(&self, node: usize) -> (usize, usize) {
        if node == 0 {
            (0, 0)
        } else {
            (1 + (node - 1) / self.ntheta, (node - 1) % self.ntheta)
        }
    }

    pub fn rho(&self, ring: usize) -> f64 {
        ring as f64 * self.h_r
    }

    pub fn alpha(&self, j: usize) -> f64 {
        j as f64 * self.h_theta
    }

    /// Average of `f(r)` over the angular extent of every node's cell,
    /// `r` being the model radius, weighted by `J` and sampled at `sub`
    /// directions per cell. Off-center grids need this for functions of `r`:
    /// seen from the center, `r` varies on angular scales far below `h_α`.
    pub fn angular_cell_average<F>(&self, f: F, sub: usize) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let (nr, nt) = (self.nr, self.ntheta);
        let mut out = vec![0.0; self.n_nodes()];
        out[0] = f(self.center_radius);
        if self.center_radius == 0.0 || sub <= 1 {
            for (k, v) in out.iter_mut().enumerate().skip(1) {
                *v = f(self.model_r[k]);
            }
            return Ok(out);
        }
        let model = &self.model;
        let space_form = matches!(
            model.warping,
            Warping::Hyperbolic { .. } | Warping::Euclidean
        );
        let rhos: Vec<f64> = (1..=nr).map(|i| self.rho(i)).collect();
        let columns = (0..nt)
            .into_par_iter()
            .map(|j| {
                let mut num = vec![0.0; nr];
                let mut den = vec![0.0; nr];
                for s in 0..sub {
                    let alpha =
                        self.alpha(j) + ((s as f64 + 0.5) / sub as f64 - 0.5) * self.h_theta;
                    let landings = if space_form {
                        rhos.iter()
                            .map(|&rho| closed_form_landing(model, self.center_radius, alpha, rho))
                            .collect()
                    } else {
                        shoot(model, self.center_radius, alpha, &rhos)?
                    };
                    for (i, l) in landings.iter().enumerate() {
                        num[i] += l.jac * f(l.r);
                        den[i] += l.jac;
                    }
                }
                Ok(num
                    .iter()
                    .zip(&den)
                    .map(|(a, b)| a / b)
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                out[self.node(i + 1, j)] = *v;
            }
        }
        Ok(out)
    }

    /// Geodesic distance from the grid center.
    pub fn node_rho(&self, node: usize) -> f64 {
        self.rho(self.ring_of(node).0)
    }

    /// Number of unknowns strictly inside ring `ring`.
    pub fn interior_count(&self, ring: usize) -> usize {
        1 + (ring.max(1) - 1) * self.ntheta
    }

    /// Ring index of a domain radius; the radius must be a grid line.
    pub fn ring_of_radius(&self, radius: f64) -> Result<usize> {
        let ring = (radius / self.h_r).round();
        if (ring * self.h_r - radius).abs() > 1e-9 * radius.max(1.0)
            || ring < 1.0
            || ring > self.nr as f64
        {
            return Err(Error::domain(format!(
                "radius {radius} is not a ring of this grid"
            )));
        }
        Ok(ring as usize)
    }

    pub fn jacobian(&self, node: usize) -> f64 {
        self.jac[node]
    }

    /// `J(ρ_i + h/2, α_j)`, for `ring` in `0..nr`.
    pub fn jacobian_out(&self, ring: usize, j: usize) -> f64 {
        self.jac_out[ring * self.ntheta + j]
    }

    /// `J(ρ_i, α_j + h_α/2)`, for `ring` in `1..=nr`.
    pub fn jacobian_ang(&self, ring: usize, j: usize) -> f64 {
        self.jac_ang[(ring - 1) * self.ntheta + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    /// Distance from the model pole `p`.
    pub fn model_radius(&self, node: usize) -> f64 {
        self.model_r[node]
    }

    pub fn model_theta(&self, node: usize) -> f64 {
        self.model_theta[node]
    }

    /// Direction from the node back to the grid center, in the node's own
    /// frame (angle from its outward radial direction).
    pub fn back_azimuth(&self, node: usize) -> f64 {
        self.back_azimuth[node]
    }

    /// Volume of `B_x(R)`: nodes strictly inside plus half of the boundary ring.
    pub fn ball_volume(&self, radius: f64) -> Result<f64> {
        let ring = self.ring_of_radius(radius)?;
        let inside: f64 = self.weights[..self.interior_count(ring)].iter().sum();
        let start = self.node(ring, 0);
        let boundary: f64 = self.weights[start..start + self.ntheta].iter().sum();
        Ok(inside + 0.5 * boundary)
    }

    /// Bilinear interpolation of nodal values at geodesic polar coordinates
    /// `(ρ, α)` about the grid center. Returns `None` beyond `r_max`.
    pub fn interpolate(&self, values: &[f64], rho: f64, alpha: f64) -> Option<f64> {
        if !(rho >= 0.0) || rho > self.r_max {
            return None;
        }
        let a = alpha.rem_euclid(TAU) / self.h_theta;
        let j0 = (a.floor() as usize) % self.ntheta;
        let j1 = (j0 + 1) % self.ntheta;
        let ta = a - a.floor();
        let x = rho / self.h_r;
        let i0 = (x.floor() as usize).min(self.nr - 1);
        let tr = x - i0 as f64;
        let ring_value = |i: usize| {
            if i == 0 {
                values[0]
            } else {
                (1.0 - ta) * values[self.node(i, j0)] + ta * values[self.node(i, j1)]
            }
        };
        Some((1.0 - tr) * ring_value(i0) + tr * ring_value(i0 + 1))
    }
}

/// Exact landing on a space form, via the hyperboloid (or plane) model.
fn closed_form_landing(model: &WarpedModel, c: f64, alpha: f64, rho: f64) -> Landing {
    let (sa, ca) = alpha.sin_cos();
    match model.warping {
        Warping::Hyperbolic { curvature } => {
            let k = (-curvature).sqrt();
            let (c, rho) = (k * c, k * rho);
            let x = [c.cosh(), c.sinh(), 0.0];
            let v = [ca * c.sinh(), ca * c.cosh(), sa];
            let (sr, cr) = (rho.sinh(), rho.cosh());
            let y: [f64; 3] = std::array::from_fn(|m| cr * x[m] + sr * v[m]);
            let vel: [f64; 3] = std::array::from_fn(|m| sr * x[m] + cr * v[m]);
            let r = y[1].hypot(y[2]).asinh();
            let theta = y[2].atan2(y[1]);
            let (st, ct) = theta.sin_cos();
            let e_r = [r.sinh(), r.cosh() * ct, r.cosh() * st];
            let e_t = [0.0, -st, ct];
            let mink = |a: &[f64; 3], b: &[f64; 3]| -a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            let psi = mink(&vel, &e_t).atan2(mink(&vel, &e_r));
            Landing {
                r: r / k,
                theta,
                psi,
                jac: sr / k,
            }
        }
        _ => {
            let y = [c + rho * ca, rho * sa];
            let r = y[0].hypot(y[1]);
            let theta = y[1].atan2(y[0]);
            let (st, ct) = theta.sin_cos();
            let (vr, vt) = (ca * ct + sa * st, -ca * st + sa * ct);
            let psi = vt.atan2(vr);
            Landing {
                r,
                theta,
                psi,
                jac: rho,
            }
        }
    }
}

/// Integrate the geodesic and its Jacobi field from `(c, 0)` in direction `alpha`.
fn shoot(model: &WarpedModel, c: f64, alpha: f64, rhos: &[f64]) -> Result<Vec<Landing>> {
    let opts = OdeOptions::default();
    let (sa, ca) = alpha.sin_cos();
    if sa.abs() < 1e-12 {
        // Radial geodesic: only the Jacobi field needs integrating.
        let inward = ca < 0.0;
        let signed_r = |s: f64| if inward { c - s } else { c + s };
        let states = ode::integrate(
            |s, y: &[f64; 2]| [y[1], -model.radial_sectional(signed_r(s)) * y[0]],
            0.0,
            [0.0, 1.0],
            rhos,
            opts,
        )?;
        return Ok(rhos
            .iter()
            .zip(states)
            .map(|(&s, y)| {
                let r = signed_r(s);
                if r >= 0.0 && inward {
                    Landing {
                        r,
                        theta: 0.0,
                        psi: PI,
                        jac: y[0],
                    }
                } else if r >= 0.0 {
                    Landing {
                        r,
                        theta: 0.0,
                        psi: 0.0,
                        jac: y[0],
                    }
                } else {
                    Landing {
                        r: -r,
                        theta: PI,
                        psi: 0.0,
                        jac: y[0],
                    }
                }
            })
            .collect());
    }
    let rhs = |_s: f64, y: &[f64; 5]| {
        let p = model.profile_odd(y[0]);
        let (sp, cp) = y[2].sin_cos();
        [
            cp,
            sp / p.phi,
            -p.dphi * sp / p.phi,
            y[4],
            -model.radial_sectional(y[0]) * y[3],
        ]
    };
    let states = ode::integrate(rhs, 0.0, [c, 0.0, alpha, 0.0, 1.0], rhos, opts)?;
    Ok(states
        .into_iter()
        .map(|y| {
            if y[0] < 0.0 {
                Landing {
                    r: -y[0],
                    theta: y[1] + PI,
                    psi: y[2] + PI,
                    jac: y[3],
                }
            } else {
                Landing {
                    r: y[0],
                    theta: y[1],
                    psi: y[2],
                    jac: y[3],
                }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h2() -> WarpedModel {
        WarpedModel::hyperbolic(2, -1.0).unwrap()
    }

    #[test]
    fn uniform_exhaustion_and_errors() {
        let g = GridSpec::new(8.0, 512, 256, 4).build(&h2()).unwrap();
        assert_eq!(g.exhaustion_radii, vec![2.0, 4.0, 6.0, 8.0]);
        assert!(GridSpec::new(0.0, 512, 256, 4).build(&h2()).is_err());
        assert!(GridSpec::new(8.0, 32, 256, 4).build(&h2()).is_err());
        assert!(GridSpec::new(8.0, 64, 16, 4).build(&h2()).is_err());
        assert!(GridSpec::new(8.0, 64, 32, 4)
            .with_radii(vec![4.0, 2.0])
            .build(&h2())
            .is_err());
    }

    #[test]
    fn ball_volume_matches_closed_form() {
        let g = GridSpec::new(8.0, 512, 256, 4).build(&h2()).unwrap();
        let exact = TAU * (2f64.cosh() - 1.0);
        assert_relative_eq!(exact, 17.355_387_381_771_437, max_relative = 1e-14);
        assert_relative_eq!(g.ball_volume(2.0).unwrap(), exact, max_relative = 1e-3);
    }

    #[test]
    fn prefix_layout() {
        let g = GridSpec::new(4.0, 64, 32, 2).build(&h2()).unwrap();
        assert_eq!(g.interior_count(32), 1 + 31 * 32);
        assert_eq!(g.ring_of(g.node(5, 7)), (5, 7));
        assert_eq!(g.ring_of_radius(2.0).unwrap(), 32);
        assert!(g.ring_of_radius(2.01).is_err());
    }

    #[test]
    fn closed_form_and_ode_landings_agree() {
        let m = h2();
        for &alpha in &[0.3, 1.7, 3.0, 4.5] {
            let rhos: Vec<f64> = (1..=40).map(|k| 0.25 * k as f64).collect();
            let shot = shoot(&m, 3.0, alpha, &rhos).unwrap();
            for (land, &rho) in shot.iter().zip(&rhos) {
                let exact = closed_form_landing(&m, 3.0, alpha, rho);
                assert_relative_eq!(land.r, exact.r, max_relative = 1e-8, epsilon = 1e-9);
                assert_relative_eq!(land.jac, exact.jac, max_relative = 1e-8);
                let dt = (land.theta - exact.theta).rem_euclid(TAU);
                assert!(dt.min(TAU - dt) < 1e-7, "theta mismatch at rho {rho}");
                let dp = (land.psi - exact.psi).rem_euclid(TAU);
                assert!(dp.min(TAU - dp) < 1e-7, "psi mismatch at rho {rho}");
            }
        }
        // Law of cosines on the hyperbolic plane.
        let land = closed_form_landing(&m, 3.0, 2.0, 1.5);
        let cosh_r = 3f64.cosh() * 1.5f64.cosh() + 3f64.sinh() * 1.5f64.sinh() * 2f64.cos();
        assert_relative_eq!(land.r.cosh(), cosh_r, max_relative = 1e-12);
    }

    #[test]
    fn radial_shots_pass_through_the_pole() {
        let m = WarpedModel::perturbed(2, 0.1).unwrap();
        let shot = shoot(&m, 1.0, PI, &[0.5, 1.5]).unwrap();
        assert_relative_eq!(shot[0].r, 0.5);
        assert_eq!(shot[0].psi, PI);
        assert_relative_eq!(shot[1].r, 0.5);
        assert_relative_eq!(shot[1].theta, PI);
    }

    #[test]
    fn back_azimuth_points_home() {
        // Walk back from each node along its back-azimuth and land on the center.
        let m = h2();
        let g = GridSpec::new(6.0, 64, 32, 1)
            .centered_at(2.0)
            .build(&m)
            .unwrap();
        for &node in &[g.node(10, 3), g.node(40, 17), g.node(64, 30)] {
            let r = g.model_radius(node);
            let back = closed_form_landing(&m, r, g.back_azimuth(node), g.node_rho(node));
            // The landing frame is rotated by the node's θ; only the radius is frame-free.
            assert_relative_eq!(back.r, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_radial_data() {
        let g = GridSpec::new(4.0, 64, 32, 1).build(&h2()).unwrap();
        let vals: Vec<f64> = (0..g.n_nodes()).map(|k| 1.0 + g.node_rho(k)).collect();
        assert_relative_eq!(
            g.interpolate(&vals, 1.2345, 0.7).unwrap(),
            2.2345,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            g.interpolate(&vals, 0.01, 2.0).unwrap(),
            1.01,
            epsilon = 1e-12
        );
        assert!(g.interpolate(&vals, 4.5, 0.0).is_none());
    }
}
