//! Spectral gap: the analytic lower bound `b²/4` and Dirichlet eigenvalues of
//! an exhaustion by balls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpedModel;
use crate::numerics::eigen::smallest_eigenpair;
use crate::numerics::grid::PolarGrid;
use crate::numerics::operator::SparseOperator;

/// Relative slack allowed below the analytic bound before flagging inconsistency.
pub const CONSISTENCY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(rename = "R")]
    pub radius: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub analytic_lower: f64,
    pub estimates: Vec<Estimate>,
    pub extrapolated: f64,
    pub consistent: bool,
    /// Estimates strictly decrease with the radius.
    pub monotone: bool,
}

/// `λ₁(M) ≥ b²/4`.
pub fn lambda1_lower_bound(model: &WarpedModel) -> Result<f64> {
    match model.b_sq {
        Some(b_sq) if b_sq > 0.0 => Ok(b_sq / 4.0),
        Some(b_sq) => Err(Error::Uncertified(format!(
            "b² must be positive, got {b_sq}"
        ))),
        None => Err(Error::Uncertified("model has no certified b²".to_string())),
    }
}

/// Fit `λ(R) = λ∞ + c/R²` by least squares; returns `(λ∞, c)`.
pub fn extrapolate_inverse_square(estimates: &[Estimate]) -> (f64, f64) {
    let n = estimates.len() as f64;
    let xs: Vec<f64> = estimates.iter().map(|e| e.radius.powi(-2)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = estimates.iter().map(|e| e.lambda).sum::<f64>() / n;
    let sxy: f64 = xs
        .iter()
        .zip(estimates)
        .map(|(x, e)| (x - mx) * (e.lambda - my))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - c * mx, c)
}

/// Dirichlet `λ₁` on every exhaustion ball, extrapolated in `1/R²` over the last three.
pub fn lambda1_exhaustion(
    model: &WarpedModel,
    grid: &PolarGrid,
    op: &SparseOperator,
) -> Result<SpectrumReport> {
    let analytic_lower = lambda1_lower_bound(model)?;
    if grid.exhaustion_radii.len() < 3 {
        return Err(Error::config(
            "spectral extrapolation needs at least 3 exhaustion radii",
        ));
    }
    let estimates: Vec<Estimate> = grid
        .exhaustion_radii
        .par_iter()
        .map(|&radius| {
            smallest_eigenpair(op, radius).map(|pair| Estimate {
                radius,
                lambda: pair.value,
            })
        })
        .collect::<Result<_>>()?;
    let tail = &estimates[estimates.len() - 3..];
    let (mut extrapolated, _) = extrapolate_inverse_square(tail);
    let smallest = estimates
        .iter()
        .map(|e| e.lambda)
        .fold(f64::INFINITY, f64::min);
    extrapolated = extrapolated.min(smallest);
    let monotone = estimates.windows(2).all(|w| w[1].lambda < w[0].lambda);
    let consistent = extrapolated >= analytic_lower * (1.0 - CONSISTENCY_TOLERANCE);
    Ok(SpectrumReport {
        analytic_lower,
        estimates,
        extrapolated,
        consistent,
        monotone,
    })
}
