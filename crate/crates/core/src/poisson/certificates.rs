//! Barrier inequality, polynomial decay and exponential growth certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpedModel;
use crate::green::bounds::{linear_fit, FIT_RESIDUAL_LIMIT, OUTER_EXCLUSION};
use crate::poisson::routes::{PoissonSolution, Route};

/// Slack allowed in `Δr^{-ε} + α r^{-1-ε} ≤ 0`.
pub const BARRIER_TOLERANCE: f64 = 1e-8;
/// Largest relative change of `C̃` under doubling of the truncation radius.
pub const DECAY_STABILITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub eps: f64,
    pub b: f64,
    pub r0: f64,
    pub alpha: f64,
    /// `max (Δr^{-ε} + α r^{-1-ε})` over the sampled radii `r ≥ r₀`.
    pub max_value: f64,
    pub r_at_max: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// `r₀ = max(2(1+ε)/b, 1)` and `α = εb/2`.
pub fn barrier_constants(b: f64, eps: f64) -> (f64, f64) {
    ((2.0 * (1.0 + eps) / b).max(1.0), 0.5 * eps * b)
}

/// Evaluate `Δr^{-ε} + α r^{-(1+ε)}` at every radius `r ≥ r₀` of `radii`, where
/// `Δr^{-ε} = ε(ε+1) r^{-ε-2} − ε r^{-ε-1} Δr`.
pub fn barrier_check(model: &WarpedModel, eps: f64, radii: &[f64]) -> Result<BarrierReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!(
            "barrier exponent must be positive, got {eps}"
        )));
    }
    let b = model.b()?;
    let (r0, alpha) = barrier_constants(b, eps);
    let mut max_value = f64::NEG_INFINITY;
    let mut r_at_max = r0;
    let mut samples = 0;
    for &r in radii.iter().filter(|&&r| r >= r0) {
        let lap = eps * (eps + 1.0) * r.powf(-eps - 2.0)
            - eps * r.powf(-eps - 1.0) * model.laplacian_of_distance(r)?;
        let v = lap + alpha * r.powf(-1.0 - eps);
        samples += 1;
        if v > max_value {
            max_value = v;
            r_at_max = r;
        }
    }
    if samples == 0 {
        return Err(Error::domain(format!(
            "no sampled radius reaches r0 = {r0}"
        )));
    }
    Ok(BarrierReport {
        eps,
        b,
        r0,
        alpha,
        max_value,
        r_at_max,
        samples,
        tolerance: BARRIER_TOLERANCE,
        pass: max_value <= BARRIER_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub eps: f64,
    /// `C̃ = sup (1+r)^ε |u|` over `r ≤ 0.9 R`.
    #[serde(rename = "C_tilde")]
    pub c_tilde: f64,
    pub r_at_sup: f64,
    /// The sup is attained inside `0.8 R`, away from the truncation layer.
    pub interior: bool,
    /// `C̃` of the run with doubled truncation radius, when given.
    #[serde(rename = "C_tilde_doubled")]
    pub c_tilde_doubled: Option<f64>,
    pub relative_change: Option<f64>,
    pub pass: bool,
}

fn weighted_sup(solution: &PoissonSolution, eps: f64) -> (f64, f64) {
    let limit = (1.0 - OUTER_EXCLUSION) * solution.domain_radius;
    solution
        .samples
        .iter()
        .filter(|s| s.0 <= limit)
        .map(|&(r, u)| ((1.0 + r).powf(eps) * u.abs(), r))
        .fold(
            (0.0f64, 0.0f64),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        )
}

/// `C̃` with `|u| ≤ C̃ (1+r)^{-ε}`; passes when the sup is interior and, given a
/// run on a doubled domain, stable within 10%.
pub fn decay_certificate(
    solution: &PoissonSolution,
    eps: f64,
    doubled: Option<&PoissonSolution>,
) -> DecayCertificate {
    let (c_tilde, r_at_sup) = weighted_sup(solution, eps);
    let interior = r_at_sup <= (1.0 - 2.0 * OUTER_EXCLUSION) * solution.domain_radius;
    let c_doubled = doubled.map(|d| weighted_sup(d, eps).0);
    let change = c_doubled.map(|c| {
        if c_tilde > 0.0 {
            (c - c_tilde).abs() / c_tilde
        } else {
            c
        }
    });
    let stable = change.map_or(true, |c| c < DECAY_STABILITY);
    DecayCertificate {
        eps,
        c_tilde,
        r_at_sup,
        interior,
        c_tilde_doubled: c_doubled,
        relative_change: change,
        pass: c_tilde.is_finite() && interior && stable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub fit_from: f64,
    pub fit_to: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Least squares `log(1 + |u|) ≈ a + B r` over the outer half `[R/2, 0.9R]`
/// (all samples for the Green-integral route); `A` is then the smallest
/// constant with `1 + |u| ≤ A e^{Br}` at every sample.
pub fn growth_certificate(solution: &PoissonSolution) -> Result<GrowthFit> {
    let (lo, hi) = match solution.route {
        Route::GreenIntegral => (f64::NEG_INFINITY, f64::INFINITY),
        _ => (
            0.5 * solution.domain_radius,
            (1.0 - OUTER_EXCLUSION) * solution.domain_radius,
        ),
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = solution
        .samples
        .iter()
        .filter(|s| s.0 >= lo && s.0 <= hi)
        .map(|&(r, u)| (r, u.abs().ln_1p()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::domain("growth fit needs at least two samples"));
    }
    let (_, b, residual) = linear_fit(&xs, &ys);
    let a = solution
        .samples
        .iter()
        .map(|&(r, u)| (1.0 + u.abs()) * (-b * r).exp())
        .fold(1.0, f64::max);
    Ok(GrowthFit {
        a,
        b,
        fit_from: xs[0],
        fit_to: *xs.last().expect("nonempty"),
        residual,
        pass: a.is_finite() && b.is_finite() && residual < FIT_RESIDUAL_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, r_max: f64) -> PoissonSolution {
        PoissonSolution {
            route: Route::Radial,
            samples: (0..=400)
                .map(|i| i as f64 * r_max / 400.0)
                .map(|r| (r, f(r)))
                .collect(),
            field: None,
            domain_radius: r_max,
            residual: None,
        }
    }

    #[test]
    fn barrier_on_the_hyperbolic_plane() {
        let m = WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(20.0)
            .unwrap();
        let radii: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.01).collect();
        let rep = barrier_check(&m, 1.0, &radii).unwrap();
        assert_eq!((rep.r0, rep.alpha), (4.0, 0.5));
        assert!(rep.pass, "{rep:?}");
        // Tight at r₀: 2/64 − coth(4)/16 + 0.5/16.
        assert_eq!(rep.r_at_max, 4.0);
        assert!(
            (rep.max_value - (2.0 / 64.0 - 1.0 / 4.0f64.tanh() / 16.0 + 0.5 / 16.0)).abs() < 1e-15
        );
        assert!(barrier_check(&m, 0.0, &radii).is_err());
    }

    #[test]
    fn decay_of_the_manufactured_solution() {
        let s = synthetic(|r| 1.0 / (1.0 + r * r).sqrt(), 20.0);
        let c = decay_certificate(&s, 1.0, None);
        assert!((c.c_tilde - 2f64.sqrt()).abs() < 1e-12 && c.r_at_sup == 1.0 && c.pass);
        let z = decay_certificate(&synthetic(|_| 0.0, 20.0), 1.0, None);
        assert_eq!(z.c_tilde, 0.0);
    }

    #[test]
    fn growth_fits() {
        let c = growth_certificate(&synthetic(|_| 3.0, 10.0)).unwrap();
        assert!(c.b.abs() < 1e-12 && (c.a - 4.0).abs() < 1e-9);
        let e = growth_certificate(&synthetic(|r| (0.5 * r).exp(), 20.0)).unwrap();
        assert!((e.b - 0.5).abs() < 0.05, "{e:?}");
        let d = growth_certificate(&synthetic(|r| 1.0 / (1.0 + r), 20.0)).unwrap();
        assert!(d.b.abs() < 0.05 && d.pass);
    }
}
