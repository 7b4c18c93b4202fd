//! Warped-product model manifolds `dr² + φ(r)² dθ²`.
//!
//! A [`WarpedModel`] couples a closed-form warping family with a dimension and
//! the Ricci pinching constants `a²`, `b²`. The constants are measured by a
//! dense scan ([`WarpedModel::certify`]) and never taken on faith.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::field::RadialField;

/// Minimum number of radii sampled when certifying the pinching bounds.
pub const CERTIFY_SAMPLES: usize = 20_000;

/// Below this radius curvatures are evaluated by their pole limit.
const POLE_LIMIT_RADIUS: f64 = 1e-5;

/// Closed-form warping families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warping {
    /// Constant sectional curvature `k < 0`: `φ = sinh(√|k| r)/√|k|`.
    Hyperbolic { curvature: f64 },
    /// Flat plane, `φ = r`. Only a sanity model; it is never certified.
    Euclidean,
    /// `φ = sinh(r)·(1 + η·tanh²(r)·sech(r))`, asymptotic to `sinh(r)(1 + 2η e^{-r})`.
    Perturbed { eta: f64 },
}

/// Warping value and derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub r: f64,
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
}

/// Result of the pinching scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchingScan {
    pub a_sq: f64,
    pub b_sq: f64,
    pub r_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRecord", try_from = "ModelRecord")]
pub struct WarpedModel {
    pub n: usize,
    pub warping: Warping,
    pub a_sq: Option<f64>,
    pub b_sq: Option<f64>,
}

/// On-disk form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub family: String,
    pub n: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub certified_a_sq: Option<f64>,
    #[serde(default)]
    pub certified_b_sq: Option<f64>,
}

impl From<WarpedModel> for ModelRecord {
    fn from(m: WarpedModel) -> Self {
        let mut params = BTreeMap::new();
        let family = match m.warping {
            Warping::Hyperbolic { curvature } => {
                params.insert("K".to_string(), curvature);
                "hyperbolic"
            }
            Warping::Euclidean => "euclidean",
            Warping::Perturbed { eta } => {
                params.insert("eta".to_string(), eta);
                "perturbed"
            }
        };
        ModelRecord {
            family: family.to_string(),
            n: m.n,
            params,
            certified_a_sq: m.a_sq,
            certified_b_sq: m.b_sq,
        }
    }
}

impl TryFrom<ModelRecord> for WarpedModel {
    type Error = Error;

    fn try_from(rec: ModelRecord) -> Result<Self> {
        let param = |key: &str| {
            rec.params.get(key).copied().ok_or_else(|| {
                Error::config(format!(
                    "model family '{}' needs parameter '{key}'",
                    rec.family
                ))
            })
        };
        let warping = match rec.family.as_str() {
            "hyperbolic" => Warping::Hyperbolic {
                curvature: param("K")?,
            },
            "euclidean" => Warping::Euclidean,
            "perturbed" => Warping::Perturbed { eta: param("eta")? },
            other => return Err(Error::config(format!("unknown model family '{other}'"))),
        };
        let mut model = WarpedModel::new(rec.n, warping)?;
        model.a_sq = rec.certified_a_sq;
        model.b_sq = rec.certified_b_sq;
        Ok(model)
    }
}

impl WarpedModel {
    pub fn new(n: usize, warping: Warping) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!(
                "dimension must be at least 2, got {n}"
            )));
        }
        match warping {
            Warping::Hyperbolic { curvature } if !(curvature < 0.0 && curvature.is_finite()) => {
                return Err(Error::config(format!(
                    "hyperbolic curvature must be negative, got {curvature}"
                )));
            }
            Warping::Perturbed { eta } if !(eta.abs() <= 0.25) => {
                return Err(Error::config(format!(
                    "perturbation |eta| must be at most 0.25, got {eta}"
                )));
            }
            _ => {}
        }
        Ok(WarpedModel {
            n,
            warping,
            a_sq: None,
            b_sq: None,
        })
    }

    pub fn hyperbolic(n: usize, curvature: f64) -> Result<Self> {
        Self::new(n, Warping::Hyperbolic { curvature })
    }

    pub fn perturbed(n: usize, eta: f64) -> Result<Self> {
        Self::new(n, Warping::Perturbed { eta })
    }

    pub fn euclidean(n: usize) -> Self {
        WarpedModel {
            n,
            warping: Warping::Euclidean,
            a_sq: None,
            b_sq: None,
        }
    }

    /// Scan the Ricci eigenvalues on `(0, r_max]` and store the pinching bounds.
    pub fn certify(mut self, r_max: f64) -> Result<Self> {
        let scan = self.pinching_scan(r_max, CERTIFY_SAMPLES)?;
        if !(scan.b_sq > 0.0) {
            return Err(Error::Uncertified(format!(
                "Ricci curvature is not bounded above by a negative constant (b² = {:.3e})",
                scan.b_sq
            )));
        }
        self.a_sq = Some(scan.a_sq);
        self.b_sq = Some(scan.b_sq);
        Ok(self)
    }

    pub fn pinching_scan(&self, r_max: f64, samples: usize) -> Result<PinchingScan> {
        if !(r_max > 0.0) || samples == 0 {
            return Err(Error::domain(
                "pinching scan needs r_max > 0 and at least one sample",
            ));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=samples {
            let r = r_max * k as f64 / samples as f64;
            let (rad, tan) = self.ricci_eigenvalues(r)?;
            lo = lo.min(rad).min(tan);
            hi = hi.max(rad).max(tan);
        }
        Ok(PinchingScan {
            a_sq: -lo,
            b_sq: -hi,
            r_max,
            samples: samples + 1,
        })
    }

    pub fn is_certified(&self) -> bool {
        self.b_sq.is_some_and(|b| b > 0.0)
    }

    /// Certified `b`, the square root of the lower Ricci-magnitude bound.
    pub fn b(&self) -> Result<f64> {
        match self.b_sq {
            Some(b_sq) if b_sq > 0.0 => Ok(b_sq.sqrt()),
            _ => Err(Error::Uncertified("b² has not been certified".to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self.warping {
            Warping::Hyperbolic { curvature } => format!("hyperbolic(n={}, K={curvature})", self.n),
            Warping::Euclidean => format!("euclidean(n={})", self.n),
            Warping::Perturbed { eta } => format!("perturbed(n={}, eta={eta})", self.n),
        }
    }

    pub fn warping_eval(&self, r: f64) -> Result<RadialProfile> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::domain(format!(
                "warping evaluated at negative radius {r}"
            )));
        }
        let p = self.profile_odd(r);
        if !(p.phi.is_finite() && p.dphi.is_finite() && p.ddphi.is_finite()) {
            return Err(Error::Numeric(format!("warping overflow at r = {r}")));
        }
        Ok(p)
    }

    /// Warping profile extended oddly to negative radii.
    pub(crate) fn profile_odd(&self, r: f64) -> RadialProfile {
        let s = r.abs();
        let (phi, dphi, ddphi) = match self.warping {
            Warping::Hyperbolic { curvature } => {
                let k = (-curvature).sqrt();
                ((k * s).sinh() / k, (k * s).cosh(), k * (k * s).sinh())
            }
            Warping::Euclidean => (s, 1.0, 0.0),
            Warping::Perturbed { eta } => {
                let (q, dq, ddq) = bump_q(s);
                let (sh, ch) = (s.sinh(), s.cosh());
                let h = 1.0 + eta * q;
                let dh = eta * dq;
                let ddh = eta * ddq;
                (sh * h, ch * h + sh * dh, sh * h + 2.0 * ch * dh + sh * ddh)
            }
        };
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        RadialProfile {
            r,
            phi: sign * phi,
            dphi,
            ddphi: sign * ddphi,
        }
    }

    /// `φ'''(0)`, which fixes the curvature at the pole.
    pub fn third_derivative_at_pole(&self) -> f64 {
        match self.warping {
            Warping::Hyperbolic { curvature } => -curvature,
            Warping::Euclidean => 0.0,
            Warping::Perturbed { eta } => 1.0 + 6.0 * eta,
        }
    }

    /// Sectional curvature of planes containing `∂_r`, i.e. `−φ''/φ`.
    /// Even in `r`; finite at the pole.
    pub fn radial_sectional(&self, r: f64) -> f64 {
        match self.warping {
            Warping::Hyperbolic { curvature } => curvature,
            Warping::Euclidean => 0.0,
            Warping::Perturbed { .. } => {
                let s = r.abs();
                if s < POLE_LIMIT_RADIUS {
                    -self.third_derivative_at_pole()
                } else {
                    let p = self.profile_odd(s);
                    -p.ddphi / p.phi
                }
            }
        }
    }

    /// Ricci eigenvalues `(radial, tangential)`.
    pub fn ricci_eigenvalues(&self, r: f64) -> Result<(f64, f64)> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::domain(format!(
                "Ricci curvature at negative radius {r}"
            )));
        }
        let m = (self.n - 1) as f64;
        let n2 = (self.n - 2) as f64;
        match self.warping {
            Warping::Hyperbolic { curvature } => Ok((m * curvature, m * curvature)),
            Warping::Euclidean => Ok((0.0, 0.0)),
            Warping::Perturbed { .. } => {
                if r < POLE_LIMIT_RADIUS {
                    let v = -m * self.third_derivative_at_pole();
                    return Ok((v, v));
                }
                let p = self.warping_eval(r)?;
                let k_rad = -p.ddphi / p.phi;
                let k_tan = -(p.dphi * p.dphi - 1.0) / (p.phi * p.phi);
                let out = (m * k_rad, n2 * k_tan + k_rad);
                if !(out.0.is_finite() && out.1.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "Ricci curvature not finite at r = {r}"
                    )));
                }
                Ok(out)
            }
        }
    }

    /// Area of the unit `(n−1)`-sphere.
    pub fn unit_sphere_area(&self) -> f64 {
        unit_sphere_area(self.n)
    }

    /// `A(r) = ω_{n−1} φ(r)^{n−1}`.
    pub fn sphere_area(&self, r: f64) -> Result<f64> {
        let p = self.warping_eval(r)?;
        Ok(self.unit_sphere_area() * p.phi.powi(self.n as i32 - 1))
    }

    /// `log φ(r)` for `r > 0`, finite far beyond the overflow of `φ`.
    pub fn log_phi(&self, r: f64) -> f64 {
        let r = r.abs();
        let log_sinh = |x: f64| x - std::f64::consts::LN_2 + (-(-2.0 * x).exp_m1()).ln();
        match self.warping {
            Warping::Hyperbolic { curvature } => {
                let k = (-curvature).sqrt();
                log_sinh(k * r) - k.ln()
            }
            Warping::Euclidean => r.ln(),
            Warping::Perturbed { eta } => log_sinh(r) + (eta * bump_q(r).0).ln_1p(),
        }
    }

    /// `φ'/φ` for `r > 0`, without overflow at large `r`.
    pub fn dlog_phi(&self, r: f64) -> f64 {
        match self.warping {
            Warping::Hyperbolic { curvature } => {
                let k = (-curvature).sqrt();
                k / (k * r).tanh()
            }
            Warping::Euclidean => 1.0 / r,
            Warping::Perturbed { eta } => {
                let (q, dq, _) = bump_q(r);
                1.0 / r.tanh() + eta * dq / (1.0 + eta * q)
            }
        }
    }

    /// `Δr = (n−1)φ'/φ`.
    pub fn laplacian_of_distance(&self, r: f64) -> Result<f64> {
        let p = self.warping_eval(r)?;
        Ok((self.n - 1) as f64 * p.dphi / p.phi)
    }

    /// `Δu = u'' + (n−1)(φ'/φ)u'` for a radial field on a uniform grid.
    pub fn laplacian_radial(&self, u: &RadialField) -> Result<RadialField> {
        let m = u.values.len();
        if m < 4 {
            return Err(Error::domain(format!(
                "radial Laplacian needs at least 4 samples, got {m}"
            )));
        }
        let h = u.h;
        let v = &u.values;
        let dim = (self.n - 1) as f64;
        let mut out = vec![0.0; m];
        for i in 0..m {
            let r = u.r0 + i as f64 * h;
            let (d1, d2) = if i == 0 {
                if u.r0 == 0.0 {
                    // u'(0) = 0 and Δu(0) = n u''(0).
                    out[0] = self.n as f64 * 2.0 * (v[1] - v[0]) / (h * h);
                    continue;
                }
                (
                    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h),
                    (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h),
                )
            } else if i == m - 1 {
                (
                    (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h),
                    (2.0 * v[i] - 5.0 * v[i - 1] + 4.0 * v[i - 2] - v[i - 3]) / (h * h),
                )
            } else {
                (
                    (v[i + 1] - v[i - 1]) / (2.0 * h),
                    (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h),
                )
            };
            let p = self.warping_eval(r)?;
            out[i] = d2 + dim * p.dphi / p.phi * d1;
        }
        Ok(RadialField {
            r0: u.r0,
            h,
            values: out,
        })
    }

    /// `min (Δr − b coth(b r))` over `samples` radii in `[r_lo, r_hi]`.
    pub fn laplacian_comparison_check(
        &self,
        r_lo: f64,
        r_hi: f64,
        samples: usize,
    ) -> Result<ComparisonReport> {
        let b = self.b()?;
        if !(r_lo > 0.0 && r_hi >= r_lo) || samples < 2 {
            return Err(Error::domain(
                "comparison range must satisfy 0 < r_lo <= r_hi with 2+ samples",
            ));
        }
        let mut min_margin = f64::INFINITY;
        let mut r_at_min = r_lo;
        for k in 0..samples {
            let r = r_lo + (r_hi - r_lo) * k as f64 / (samples - 1) as f64;
            let margin = self.laplacian_of_distance(r)? - b / (b * r).tanh();
            if margin < min_margin {
                min_margin = margin;
                r_at_min = r;
            }
        }
        let tolerance = COMPARISON_TOLERANCE;
        Ok(ComparisonReport {
            min_margin,
            r_at_min,
            samples,
            tolerance,
            pass: min_margin >= -tolerance,
        })
    }
}

/// Slack allowed in the Laplacian comparison; space forms sit exactly on the bound.
pub const COMPARISON_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub min_margin: f64,
    pub r_at_min: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// `q = tanh²(r)·sech(r)` and its first two derivatives.
fn bump_q(r: f64) -> (f64, f64, f64) {
    let t = r.tanh();
    let s = 1.0 / r.cosh();
    let (t2, s2) = (t * t, s * s);
    let q = t2 * s;
    let dq = 2.0 * t * s2 * s - t2 * t * s;
    let ddq = 2.0 * s2 * s2 * s - 9.0 * t2 * s2 * s + t2 * t2 * s;
    (q, dq, ddq)
}

/// Area of the unit sphere `S^{n−1}` in `ℝⁿ`: `2π^{n/2}/Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// `Γ(k/2)` for a positive integer `k`.
fn gamma_half_integer(k: usize) -> f64 {
    let (mut x, mut g) = if k % 2 == 0 {
        (1.0, 1.0)
    } else {
        (0.5, PI.sqrt())
    };
    while x < k as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h2() -> WarpedModel {
        WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(20.0)
            .unwrap()
    }

    #[test]
    fn pole_conditions() {
        let p = h2().warping_eval(0.0).unwrap();
        assert_eq!((p.phi, p.dphi, p.ddphi), (0.0, 1.0, 0.0));
        let p = WarpedModel::perturbed(2, 0.1)
            .unwrap()
            .warping_eval(0.0)
            .unwrap();
        assert_eq!((p.phi, p.dphi, p.ddphi), (0.0, 1.0, 0.0));
    }

    #[test]
    fn warping_values() {
        assert_relative_eq!(
            h2().warping_eval(1.0).unwrap().phi,
            1.175_201_193_643_801_4,
            epsilon = 1e-15
        );
        let m = WarpedModel::hyperbolic(2, -0.5).unwrap();
        assert_relative_eq!(
            m.warping_eval(1.0).unwrap().phi,
            1.085_441_641_272_607,
            epsilon = 1e-14
        );
        assert!(h2().warping_eval(-0.1).is_err());
    }

    #[test]
    fn perturbed_derivatives_match_finite_differences() {
        let m = WarpedModel::perturbed(2, 0.2).unwrap();
        let h = 1e-4;
        for &r in &[0.3, 1.0, 2.5, 6.0] {
            let p = m.warping_eval(r).unwrap();
            let (a, b) = (
                m.warping_eval(r - h).unwrap(),
                m.warping_eval(r + h).unwrap(),
            );
            assert_relative_eq!((b.phi - a.phi) / (2.0 * h), p.dphi, max_relative = 1e-7);
            assert_relative_eq!((b.dphi - a.dphi) / (2.0 * h), p.ddphi, max_relative = 1e-7);
        }
        // φ'''(0) from a Taylor fit of φ'' near the pole.
        let r = 1e-3;
        assert_relative_eq!(
            m.warping_eval(r).unwrap().ddphi / r,
            1.0 + 6.0 * 0.2,
            max_relative = 1e-5
        );
    }

    #[test]
    fn space_form_ricci() {
        assert_eq!(h2().ricci_eigenvalues(1.0).unwrap(), (-1.0, -1.0));
        let m = WarpedModel::hyperbolic(2, -0.5).unwrap();
        assert_eq!(m.ricci_eigenvalues(1.0).unwrap(), (-0.5, -0.5));
        let m3 = WarpedModel::hyperbolic(3, -1.0)
            .unwrap()
            .certify(10.0)
            .unwrap();
        assert_relative_eq!(m3.b_sq.unwrap(), 2.0);
    }

    #[test]
    fn perturbed_pinching_is_measured() {
        let m = WarpedModel::perturbed(2, 0.1)
            .unwrap()
            .certify(30.0)
            .unwrap();
        let (a_sq, b_sq) = (m.a_sq.unwrap(), m.b_sq.unwrap());
        assert!(b_sq > 0.0 && a_sq >= b_sq);
        assert_relative_eq!(a_sq, 1.6, max_relative = 1e-9);
        let (rad, tan) = m.ricci_eigenvalues(2.0).unwrap();
        for v in [rad, tan] {
            assert!(-a_sq <= v && v <= -b_sq);
        }
        let (r0, _) = m.ricci_eigenvalues(0.0).unwrap();
        let (r1, _) = m.ricci_eigenvalues(2e-5).unwrap();
        assert_relative_eq!(r0, r1, max_relative = 1e-6);
    }

    #[test]
    fn euclidean_is_not_certifiable() {
        assert!(matches!(
            WarpedModel::euclidean(2).certify(1.0),
            Err(Error::Uncertified(_))
        ));
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(
            h2().sphere_area(1.0).unwrap(),
            7.384_006_872_882_645,
            max_relative = 1e-14
        );
        let m3 = WarpedModel::hyperbolic(3, -1.0).unwrap();
        assert_relative_eq!(
            m3.sphere_area(1.0).unwrap(),
            17.355_387_381_771_437,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            h2().sphere_area(1e-6).unwrap(),
            2.0 * PI * 1e-6,
            max_relative = 1e-9
        );
        assert_relative_eq!(unit_sphere_area(4), 2.0 * PI * PI, max_relative = 1e-14);
    }

    #[test]
    fn comparison_is_tight_on_space_forms() {
        let rep = h2().laplacian_comparison_check(0.05, 20.0, 1000).unwrap();
        assert!(rep.pass && rep.min_margin.abs() < 1e-12);
        let m = WarpedModel::hyperbolic(2, -0.5)
            .unwrap()
            .certify(20.0)
            .unwrap();
        let rep = m.laplacian_comparison_check(0.05, 20.0, 1000).unwrap();
        assert!(rep.pass && rep.min_margin.abs() < 1e-12);
        let p = WarpedModel::perturbed(2, 0.1)
            .unwrap()
            .certify(30.0)
            .unwrap();
        assert!(
            p.laplacian_comparison_check(0.01, 30.0, 10_000)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn radial_laplacian_of_constants_and_green() {
        let m = h2();
        let c = RadialField {
            r0: 0.0,
            h: 0.01,
            values: vec![3.0; 200],
        };
        assert!(m
            .laplacian_radial(&c)
            .unwrap()
            .values
            .iter()
            .all(|v| v.abs() < 1e-10));
        let h = 1e-3;
        let g: Vec<f64> = (0..=4500)
            .map(|i| {
                let r = 0.5 + i as f64 * h;
                (1.0 / (r / 2.0).tanh()).ln() / (2.0 * PI)
            })
            .collect();
        let lap = m
            .laplacian_radial(&RadialField {
                r0: 0.5,
                h,
                values: g,
            })
            .unwrap();
        let rms = (lap.values.iter().map(|v| v * v).sum::<f64>() / lap.values.len() as f64).sqrt();
        assert!(rms < 1e-3, "rms {rms}");
        let short = RadialField {
            r0: 0.0,
            h: 0.1,
            values: vec![1.0; 3],
        };
        assert!(m.laplacian_radial(&short).is_err());
    }

    #[test]
    fn radial_laplacian_converges_at_second_order() {
        // u = (1+r²)^{-1/2}: u' = -r s³, u'' = (2r² - 1) s⁵ with s = (1+r²)^{-1/2}.
        let m = h2();
        let exact = |r: f64| {
            let s = 1.0 / (1.0 + r * r).sqrt();
            (2.0 * r * r - 1.0) * s.powi(5) - r * s.powi(3) / r.tanh()
        };
        let err = |h: f64| {
            let npts = (4.0 / h).round() as usize + 1;
            let vals = (0..npts)
                .map(|i| 1.0 / (1.0 + (1.0 + i as f64 * h).powi(2)).sqrt())
                .collect();
            let lap = m
                .laplacian_radial(&RadialField {
                    r0: 1.0,
                    h,
                    values: vals,
                })
                .unwrap();
            (1..npts - 1)
                .map(|i| (lap.values[i] - exact(1.0 + i as f64 * h)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn model_roundtrip() {
        let m = WarpedModel::perturbed(2, 0.1)
            .unwrap()
            .certify(10.0)
            .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"family\":\"perturbed\""));
        let back: WarpedModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"family":"spherical","n":2,"params":{}}"#;
        assert!(serde_json::from_str::<WarpedModel>(bad).is_err());
    }

    #[test]
    fn volume_growth_is_exponential() {
        let m = h2();
        for r in [5.0, 10.0, 15.0] {
            assert!(m.sphere_area(r).unwrap() >= PI * (r as f64).exp() * 0.99);
        }
    }
}
