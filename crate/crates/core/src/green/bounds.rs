//! Measured surrogates for the constants of the pointwise, gradient and
//! level-set estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::kernel::GreenKernel;
use crate::green::levelset::GradientField;

/// Outer fraction of the domain excluded from statistics (truncation layer).
pub const OUTER_EXCLUSION: f64 = 0.1;
/// Cells around the pole excluded from statistics.
pub const POLE_EXCLUSION_CELLS: usize = 2;
/// Slack for the lower envelope.
pub const ENVELOPE_TOLERANCE: f64 = 1e-9;
/// Largest acceptable log-scale residual of the pointwise fits.
pub const FIT_RESIDUAL_LIMIT: f64 = 0.1;

/// Least squares `y ≈ a + b x`; returns `(a, b, max |residual|)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let res = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).abs())
        .fold(0.0, f64::max);
    (a, b, res)
}

/// Ring index of `ρ = 1` and the last ring inside the statistics region.
fn statistics_rings(kernel: &GreenKernel) -> Result<(usize, usize)> {
    let grid = kernel.grid();
    let unit = grid.ring_of_radius(1.0)?;
    let last = ((1.0 - OUTER_EXCLUSION) * kernel.domain_radius / grid.h_r).floor() as usize;
    if last <= unit {
        return Err(Error::domain(
            "kernel domain too small for statistics beyond distance 1",
        ));
    }
    Ok((unit, last))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleSample {
    pub pole_radius: f64,
    pub min_on_unit_sphere: f64,
    pub max_on_unit_sphere: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseFit {
    pub samples: Vec<PoleSample>,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub slope_upper: f64,
    pub slope_lower: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Fit `A⁻¹e^{-B r(x)} ≤ G(x, ·) ≤ A e^{B r(x)}` on `∂B_x(1)` across poles.
/// `B` is the larger fitted slope (at least 0); `A` is the smallest constant
/// making both bounds hold at every sampled pole.
pub fn pointwise_bounds_scan(kernels: &[GreenKernel]) -> Result<PointwiseFit> {
    if kernels.is_empty() {
        return Err(Error::domain("pointwise scan needs at least one kernel"));
    }
    let mut samples = Vec::with_capacity(kernels.len());
    for k in kernels {
        if k.domain_radius < 2.0 {
            return Err(Error::domain(format!(
                "pole at r = {} is within distance 2 of the truncation boundary",
                k.pole_radius
            )));
        }
        let grid = k.grid();
        let ring = grid.ring_of_radius(1.0)?;
        let start = grid.node(ring, 0);
        let vals = &k.values.values[start..start + grid.ntheta];
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if !(lo > 0.0) {
            return Err(Error::Construction(format!(
                "kernel not positive on the unit sphere at r = {}",
                k.pole_radius
            )));
        }
        samples.push(PoleSample {
            pole_radius: k.pole_radius,
            min_on_unit_sphere: lo,
            max_on_unit_sphere: hi,
        });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.pole_radius).collect();
    let up: Vec<f64> = samples.iter().map(|s| s.max_on_unit_sphere.ln()).collect();
    let down: Vec<f64> = samples.iter().map(|s| -s.min_on_unit_sphere.ln()).collect();
    let (_, slope_upper, res_u) = linear_fit(&xs, &up);
    let (_, slope_lower, res_l) = linear_fit(&xs, &down);
    let b = slope_upper.max(slope_lower).max(0.0);
    let a = samples
        .iter()
        .map(|s| {
            let e = (-b * s.pole_radius).exp();
            (s.max_on_unit_sphere * e).max(e / s.min_on_unit_sphere)
        })
        .fold(1.0f64, f64::max);
    let residual = res_u.max(res_l);
    let pass = b.is_finite() && a.is_finite() && residual < FIT_RESIDUAL_LIMIT;
    Ok(PointwiseFit {
        samples,
        a,
        b,
        slope_upper,
        slope_lower,
        residual,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    /// `sup |∇G|/G` outside the pole exclusion and the outer layer.
    pub sup_ratio: f64,
    /// 99th percentile of `|∇G|/G` over `1 ≤ d ≤ 0.9 R`.
    #[serde(rename = "C0")]
    pub c0: f64,
    pub exclusion_cells: usize,
    pub pass: bool,
}

pub fn gradient_estimate_check(
    kernel: &GreenKernel,
    exclusion_cells: usize,
) -> Result<GradientReport> {
    if exclusion_cells < POLE_EXCLUSION_CELLS {
        return Err(Error::domain(format!(
            "exclusion must be at least {POLE_EXCLUSION_CELLS} cells"
        )));
    }
    let grid = kernel.grid();
    let v = &kernel.values.values;
    let grad = GradientField::of(grid, v);
    let (unit, last) = statistics_rings(kernel)?;
    let mut sup = 0.0f64;
    let mut ratios = Vec::new();
    for i in exclusion_cells + 1..=last {
        for j in 0..grid.ntheta {
            let k = grid.node(i, j);
            let r = grad.norm(k) / v[k];
            sup = sup.max(r);
            if i >= unit {
                ratios.push(r);
            }
        }
    }
    ratios.sort_by(f64::total_cmp);
    let c0 = ratios[((ratios.len() - 1) as f64 * 0.99).round() as usize];
    Ok(GradientReport {
        sup_ratio: sup,
        c0,
        exclusion_cells,
        pass: sup.is_finite() && c0.is_finite(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerEnvelope {
    /// `min [log G + log A + B r(x) + C₀ d]` over `1 ≤ d ≤ 0.9 R`.
    pub margin: f64,
    /// Same with `C₀ (d − 1)`, the envelope anchored at the unit sphere.
    pub tight_margin: f64,
    pub violations: usize,
    pub pass: bool,
}

pub fn lower_envelope_check(
    kernel: &GreenKernel,
    a: f64,
    b: f64,
    c0: f64,
) -> Result<LowerEnvelope> {
    let grid = kernel.grid();
    let v = &kernel.values.values;
    let (unit, last) = statistics_rings(kernel)?;
    let shift = a.ln() + b * kernel.pole_radius;
    let mut margin = f64::INFINITY;
    let mut tight = f64::INFINITY;
    let mut violations = 0;
    for i in unit..=last {
        let d = grid.rho(i);
        for j in 0..grid.ntheta {
            let lg = v[grid.node(i, j)].ln();
            let m = lg + shift + c0 * d;
            if m < -ENVELOPE_TOLERANCE {
                violations += 1;
            }
            margin = margin.min(m);
            tight = tight.min(lg + shift + c0 * (d - 1.0));
        }
    }
    Ok(LowerEnvelope {
        margin,
        tight_margin: tight,
        violations,
        pass: violations == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    /// Nodes with `G > A e^{B r(x)}` at distance more than 1 from the pole.
    pub superlevel_violations: usize,
    /// Nodes within distance 1 of the pole with `G < A⁻¹ e^{-B r(x)}`.
    pub sublevel_violations: usize,
}

pub fn inclusion_checks(kernel: &GreenKernel, a: f64, b: f64) -> InclusionReport {
    let grid = kernel.grid();
    let v = &kernel.values.values;
    let hi = a * (b * kernel.pole_radius).exp();
    let lo = 1.0 / hi;
    let mut sup_v = 0;
    let mut sub_v = 0;
    for k in 0..grid.n_nodes() {
        let d = grid.node_rho(k);
        if d > 1.0 + 1e-12 && v[k] > hi {
            sup_v += 1;
        }
        if d < 1.0 - 1e-12 && v[k] < lo {
            sub_v += 1;
        }
    }
    InclusionReport {
        superlevel_violations: sup_v,
        sublevel_violations: sub_v,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusDecay {
    pub radii: Vec<f64>,
    pub integrals: Vec<f64>,
    pub slope: f64,
    pub required: f64,
    pub pass: bool,
}

/// Fit the slope of `−log ∫_{B_x(R+1) \ B_x(R)} G²` against `R`; the bound
/// requires at least `2√λ₁` up to the relative `tolerance`.
pub fn annulus_l2_decay(
    kernel: &GreenKernel,
    radii: &[f64],
    lambda1: f64,
    tolerance: f64,
) -> Result<AnnulusDecay> {
    let grid = kernel.grid();
    let v = &kernel.values.values;
    if radii.len() < 2 {
        return Err(Error::domain("annulus decay needs at least two radii"));
    }
    let mut integrals = Vec::with_capacity(radii.len());
    for &r in radii {
        if r + 1.0 > kernel.domain_radius {
            return Err(Error::domain(format!(
                "annulus [{r}, {}] leaves the kernel domain",
                r + 1.0
            )));
        }
        let (i0, i1) = (
            grid.ring_of_radius(r.max(grid.h_r))?,
            grid.ring_of_radius(r + 1.0)?,
        );
        let mut total = 0.0;
        for i in i0..=i1 {
            let half = if i == i0 || i == i1 { 0.5 } else { 1.0 };
            for j in 0..grid.ntheta {
                let k = grid.node(i, j);
                total += half * grid.weight(k) * v[k] * v[k];
            }
        }
        if !(total > 0.0) {
            return Err(Error::domain(format!(
                "annulus integral at R = {r} is not positive"
            )));
        }
        integrals.push(total);
    }
    let ys: Vec<f64> = integrals.iter().map(|i| -i.ln()).collect();
    let (_, slope, _) = linear_fit(radii, &ys);
    let required = 2.0 * lambda1.sqrt() * (1.0 - tolerance);
    Ok(AnnulusDecay {
        radii: radii.to_vec(),
        integrals,
        slope,
        required,
        pass: slope >= required,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxBoundFit {
    pub pole_radii: Vec<f64>,
    pub sup_flux: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub b: f64,
    pub spread: f64,
    pub pass: bool,
}

/// Fit `sup_s flux(s) ≤ C e^{b r(x)}` across poles, from per-kernel suprema.
pub fn levelset_flux_bound(pole_radii: &[f64], sup_flux: &[f64]) -> FluxBoundFit {
    let ys: Vec<f64> = sup_flux.iter().map(|f| f.ln()).collect();
    let (_, slope, _) = linear_fit(pole_radii, &ys);
    let b = slope.max(0.0);
    let c = pole_radii
        .iter()
        .zip(sup_flux)
        .map(|(r, f)| f * (-b * r).exp())
        .fold(0.0, f64::max);
    let (lo, hi) = sup_flux
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &f| (l.min(f), h.max(f)));
    let pass = pole_radii
        .iter()
        .zip(sup_flux)
        .all(|(r, f)| *f <= c * (b * r).exp() * (1.0 + 1e-12));
    FluxBoundFit {
        pole_radii: pole_radii.to_vec(),
        sup_flux: sup_flux.to_vec(),
        c,
        b,
        spread: (hi - lo) / lo,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpedModel;
    use crate::green::kernel::kernel_at;
    use crate::numerics::grid::GridSpec;
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_line() {
        let (a, b, r) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert_relative_eq!(a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 2.0, epsilon = 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn homogeneous_plane_has_zero_slope() {
        let m = WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(20.0)
            .unwrap();
        let spec = GridSpec::new(8.0, 256, 64, 1);
        let kernels: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&r| kernel_at(&m, &spec, r).unwrap())
            .collect();
        let fit = pointwise_bounds_scan(&kernels).unwrap();
        assert!(fit.b.abs() < 1e-6 && fit.pass);
        let grad = gradient_estimate_check(&kernels[0], 2).unwrap();
        assert!(grad.c0 > 0.9 && grad.c0 < 2.0, "{grad:?}");
        let env = lower_envelope_check(&kernels[1], fit.a, fit.b, grad.c0).unwrap();
        assert!(env.pass && env.margin >= 0.0);
        // Scaling G by c shifts log A by log c and leaves the margin unchanged.
        let mut scaled = kernels[1].clone();
        scaled.values.values.iter_mut().for_each(|v| *v *= 3.0);
        let env2 = lower_envelope_check(&scaled, fit.a / 3.0, fit.b, grad.c0).unwrap();
        assert_relative_eq!(env.margin, env2.margin, epsilon = 1e-12);
        let inc = inclusion_checks(&kernels[2], fit.a, fit.b);
        assert_eq!((inc.superlevel_violations, inc.sublevel_violations), (0, 0));
    }
}
