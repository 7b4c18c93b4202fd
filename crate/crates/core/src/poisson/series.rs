//! Level-set estimates for `∫ G f`: the band bound and the tail series over
//! the bands `L(e^{-(m+1)}, e^{-m})`, `m ≥ m₀`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::kernel::GreenKernel;
use crate::green::levelset::{band_source_integral, LevelSetDecomposition};
use crate::poisson::source::DecayingSource;

/// Largest admissible last term of the tail series.
pub const CAUCHY_LIMIT: f64 = 1e-3;

/// Bound on `|∫_{L(δε,ε)} G f| / ((−log δ) sup |f|)` from the Poincaré
/// inequality with the cut-off `χ` (log-linear on `L(δε/2, δε)` and
/// `L(ε, 2ε)`):
/// `(flux/λ)·[½(1 + 2 log 2/(−log δ)) + 4/(log 2·(−log δ))]`.
pub fn claim_bound(flux: f64, lambda: f64, delta: f64) -> f64 {
    let l = -delta.ln();
    flux / lambda * (0.5 * (1.0 + 2.0 * LN_2 / l) + 4.0 / (LN_2 * l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetEstimate {
    pub delta: f64,
    pub eps: f64,
    /// `|∫_{L(δε, ε)} G f|`.
    pub lhs: f64,
    pub sup_f: f64,
    /// `lhs / ((−log δ) sup |f|)`, zero when `f` vanishes on the band.
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// One band of the level-set estimate, with `λ` a lower bound for `λ₁(M)`.
pub fn levelset_estimate_check(
    kernel: &GreenKernel,
    source: &DecayingSource,
    delta: f64,
    eps: f64,
    lambda: f64,
) -> Result<LevelSetEstimate> {
    if !(delta > 0.0 && delta < 1.0 && eps > 0.0) {
        return Err(Error::domain(
            "level-set estimate needs 0 < delta < 1 and eps > 0",
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain(
            "level-set estimate needs a positive spectral bound",
        ));
    }
    let f = source.field(kernel.grid())?;
    let (integral, sup_f) = band_source_integral(kernel, delta * eps, eps, &f.values)
        .ok_or_else(|| Error::domain(format!("band L({:.3e}, {eps:.3e}) is empty", delta * eps)))?;
    let lhs = integral.abs();
    let ratio = if sup_f > 0.0 {
        lhs / (-delta.ln() * sup_f)
    } else {
        0.0
    };
    let bound = claim_bound(kernel.flux_norm, lambda, delta);
    Ok(LevelSetEstimate {
        delta,
        eps,
        lhs,
        sup_f,
        ratio,
        bound,
        pass: ratio <= bound,
    })
}

/// Bands `L(e^{-(m+1)}, e^{-m})` for `m` in `ms`.
pub fn levelset_estimate_sweep(
    kernel: &GreenKernel,
    source: &DecayingSource,
    ms: std::ops::RangeInclusive<u32>,
    lambda: f64,
) -> Result<Vec<LevelSetEstimate>> {
    let delta = (-1.0f64).exp();
    ms.map(|m| levelset_estimate_check(kernel, source, delta, (-(m as f64)).exp(), lambda))
        .collect()
}

/// `m₀ = 1 + max{2(B + C₀) r(x) + 2 log A, B r(x) + log A}`, rounded up.
pub fn m0(a: f64, b: f64, c0: f64, pole_radius: f64) -> u32 {
    let v = 1.0 + (2.0 * (b + c0) * pole_radius + 2.0 * a.ln()).max(b * pole_radius + a.ln());
    v.ceil().max(0.0) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTail {
    pub pole_radius: f64,
    pub m0: u32,
    /// `sup_{L(e^{-(m+1)}, e^{-m})} |f|` for `m = m₀, m₀+1, …`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Partial sums of `C (1 + m/(2C₀))^{-1-ε}`.
    pub comparison: Vec<f64>,
    /// Last Cauchy difference (the last term).
    pub cauchy: f64,
    /// Band nodes with `r < m/(2C₀)`.
    pub inclusion_violations: usize,
    pub pass: bool,
}

/// Tail series over `extra + 1` bands starting at `m₀`.
pub fn series_tail_check(
    kernel: &GreenKernel,
    source: &DecayingSource,
    a: f64,
    b: f64,
    c0: f64,
    extra: u32,
) -> Result<SeriesTail> {
    if !(c0 > 0.0) {
        return Err(Error::domain("series check needs C0 > 0"));
    }
    let grid = kernel.grid();
    let start = m0(a, b, c0, kernel.pole_radius);
    let last = start + extra;
    let floor = (-(last as f64) - 1.0).exp();
    let ring = grid.ring_of_radius(kernel.domain_radius).unwrap_or(grid.nr);
    let inside = &kernel.values.values[..grid.interior_count(ring)];
    if inside.iter().all(|&v| v >= floor) {
        return Err(Error::domain(format!(
            "kernel at r = {} does not reach level e^-{}; enlarge its domain",
            kernel.pole_radius,
            last + 1
        )));
    }
    let dec = LevelSetDecomposition::new(kernel, start, last);
    let mut terms = Vec::with_capacity(dec.bands.len());
    let mut comparison = Vec::with_capacity(dec.bands.len());
    let mut violations = 0;
    let (mut s, mut c) = (0.0, 0.0);
    let mut partial_sums = Vec::with_capacity(dec.bands.len());
    for band in &dec.bands {
        let min_r = band.m as f64 / (2.0 * c0);
        let mut sup = 0.0f64;
        for &k in &band.nodes {
            let r = grid.model_radius(k);
            if r < min_r - 1e-12 {
                violations += 1;
            }
            sup = sup.max(source.eval(r).abs());
        }
        s += sup;
        c += source.constant * (1.0 + min_r).powf(-1.0 - source.eps);
        terms.push(sup);
        partial_sums.push(s);
        comparison.push(c);
    }
    let cauchy = terms.last().copied().unwrap_or(0.0);
    let dominated = partial_sums
        .iter()
        .zip(&comparison)
        .all(|(p, q)| *p <= q * (1.0 + 1e-12));
    Ok(SeriesTail {
        pole_radius: kernel.pole_radius,
        m0: start,
        terms,
        partial_sums,
        comparison,
        cauchy,
        inclusion_violations: violations,
        pass: violations == 0 && cauchy < CAUCHY_LIMIT && dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpedModel;
    use crate::green::kernel::exhaustion_green;
    use crate::numerics::grid::GridSpec;
    use crate::numerics::operator::discrete_laplacian;

    fn kernel() -> GreenKernel {
        let m = WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(30.0)
            .unwrap();
        let g = GridSpec::new(28.0, 448, 32, 1).build(&m).unwrap();
        exhaustion_green(&discrete_laplacian(&g))
            .unwrap()
            .pop()
            .unwrap()
    }

    #[test]
    fn bound_constant() {
        let b = claim_bound(1.0, 0.25, (-1.0f64).exp());
        assert!((b - 27.8557).abs() < 1e-3, "{b}");
    }

    #[test]
    fn estimates_and_tail_on_the_hyperbolic_plane() {
        let k = kernel();
        let f = DecayingSource::powerlaw(1.0, 2.0).unwrap();
        let est = levelset_estimate_sweep(&k, &f, 3..=8, 0.25).unwrap();
        assert!(est.iter().all(|e| e.pass && e.ratio > 0.1), "{est:?}");
        let zero = levelset_estimate_check(&k, &DecayingSource::zero(), 0.5, 1e-2, 0.25).unwrap();
        assert_eq!(zero.lhs, 0.0);
        let tail = series_tail_check(&k, &f, 8.14, 0.0, 1.05, 10).unwrap();
        assert!(tail.pass, "{tail:?}");
        let bump = DecayingSource::bump(1.0, 2.0).unwrap();
        let t = series_tail_check(&k, &bump, 8.14, 0.0, 1.05, 10).unwrap();
        assert!(t.terms.iter().all(|&x| x == 0.0));
    }
}
