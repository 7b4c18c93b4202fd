//! Radial sources `f` with a certified decay envelope `|f| ≤ C (1 + r)^{-1-ε}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::WarpedModel;
use crate::numerics::field::{Decay, ScalarField};
use crate::numerics::grid::PolarGrid;

/// Radius up to which decay envelopes are checked.
pub const DECAY_SCAN_RADIUS: f64 = 200.0;
/// Relative headroom on a fitted envelope, covering peaks between scan samples.
pub const FIT_MARGIN: f64 = 1e-3;
pub const DECAY_SCAN_SAMPLES: usize = 20_000;

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial function of `r = d(p, ·)` together with its decay constants.
#[derive(Clone)]
pub struct DecayingSource {
    pub label: String,
    f: RadialFn,
    pub constant: f64,
    pub eps: f64,
}

impl fmt::Debug for DecayingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DecayingSource")
            .field("label", &self.label)
            .field("constant", &self.constant)
            .field("eps", &self.eps)
            .finish()
    }
}

/// Exact solution of the manufactured problem, `u*(r) = (1 + r²)^{-1/2}`.
pub fn manufactured_solution(r: f64) -> f64 {
    1.0 / (1.0 + r * r).sqrt()
}

fn scan_radii() -> impl Iterator<Item = f64> {
    (0..=DECAY_SCAN_SAMPLES).map(|k| DECAY_SCAN_RADIUS * k as f64 / DECAY_SCAN_SAMPLES as f64)
}

impl DecayingSource {
    /// Checks `|f(r)| ≤ C (1 + r)^{-1-ε}` on a dense scan of `[0, 200]`.
    pub fn new(label: impl Into<String>, f: RadialFn, constant: f64, eps: f64) -> Result<Self> {
        let label = label.into();
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::domain(format!(
                "decay exponent must be positive, got {eps}"
            )));
        }
        if !(constant >= 0.0 && constant.is_finite()) {
            return Err(Error::domain(format!(
                "decay constant must be finite and nonnegative, got {constant}"
            )));
        }
        for r in scan_radii() {
            let v = f(r);
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "source '{label}' is not finite at r = {r}"
                )));
            }
            let bound = constant * (1.0 + r).powf(-1.0 - eps);
            if v.abs() > bound * (1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "source '{label}' violates |f| <= {constant}(1+r)^-(1+{eps}) at r = {r}"
                )));
            }
        }
        Ok(DecayingSource {
            label,
            f,
            constant,
            eps,
        })
    }

    /// Like [`DecayingSource::new`] with `C` measured by the scan.
    pub fn fitted(label: impl Into<String>, f: RadialFn, eps: f64) -> Result<Self> {
        let c = scan_radii()
            .map(|r| f(r).abs() * (1.0 + r).powf(1.0 + eps))
            .fold(0.0, f64::max);
        Self::new(label, f, c * (1.0 + FIT_MARGIN), eps)
    }

    pub fn zero() -> Self {
        DecayingSource {
            label: "zero".to_string(),
            f: Arc::new(|_| 0.0),
            constant: 0.0,
            eps: 1.0,
        }
    }

    /// `f = C (1 + r)^{-1-ε}`.
    pub fn powerlaw(constant: f64, eps: f64) -> Result<Self> {
        let f: RadialFn = Arc::new(move |r: f64| constant * (1.0 + r).powf(-1.0 - eps));
        Self::new(
            format!("powerlaw:C={constant},eps={eps}"),
            f,
            constant.abs(),
            eps,
        )
    }

    /// `f = Δu*` for [`manufactured_solution`]; `f ~ −(n−1)/r²`, so `ε = 1`.
    pub fn manufactured(model: &WarpedModel) -> Result<Self> {
        let m = model.clone();
        let f: RadialFn = Arc::new(move |r: f64| {
            let q = 1.0 + r * r;
            let d2 = (2.0 * r * r - 1.0) * q.powf(-2.5);
            // (φ'/φ)·u' = −(r φ'/φ)(1 + r²)^{-3/2}, with r φ'/φ → 1 at the pole.
            let ratio = if r < 1e-8 { 1.0 } else { r * m.dlog_phi(r) };
            d2 - (m.n - 1) as f64 * ratio * q.powf(-1.5)
        });
        Self::fitted(format!("manufactured:{}", model.label()), f, 1.0)
    }

    /// `f = amp (1 − (r/width)²)²` inside `r < width`, zero outside.
    pub fn bump(amp: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::domain("bump width must be positive"));
        }
        let f: RadialFn = Arc::new(move |r: f64| {
            let x = r / width;
            if x < 1.0 {
                amp * (1.0 - x * x).powi(2)
            } else {
                0.0
            }
        });
        Self::fitted(format!("bump:amp={amp},width={width}"), f, 1.0)
    }

    /// `family[:key=value,...]` with families `zero`, `powerlaw` (`C`, `eps`),
    /// `manufactured` and `bump` (`amp`, `width`).
    pub fn parse(spec: &str, model: &WarpedModel) -> Result<Self> {
        let (family, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut params = std::collections::BTreeMap::new();
        for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Error::config(format!("source parameter '{kv}' is not key=value"))
            })?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("source parameter '{kv}' is not a number")))?;
            params.insert(k.trim().to_string(), v);
        }
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        let known: &[&str] = match family.trim() {
            "zero" => &[],
            "powerlaw" => &["C", "eps"],
            "manufactured" => &[],
            "bump" => &["amp", "width"],
            other => return Err(Error::config(format!("unknown source family '{other}'"))),
        };
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::config(format!(
                "source family '{family}' has no parameter '{k}'"
            )));
        }
        match family.trim() {
            "zero" => Ok(Self::zero()),
            "powerlaw" => Self::powerlaw(get("C", 1.0), get("eps", 1.0)),
            "manufactured" => Self::manufactured(model),
            _ => Self::bump(get("amp", 1.0), get("width", 1.0)),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn function(&self) -> RadialFn {
        self.f.clone()
    }

    /// `|f|`, with the same envelope.
    pub fn abs(&self) -> Self {
        let f = self.f.clone();
        DecayingSource {
            label: format!("|{}|", self.label),
            f: Arc::new(move |r| f(r).abs()),
            constant: self.constant,
            eps: self.eps,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0
    }

    /// Samples at the model radius of every node, with the decay envelope attached.
    pub fn field(&self, grid: &Arc<PolarGrid>) -> Result<ScalarField> {
        let field = ScalarField::from_fn(grid.clone(), |r, _| self.eval(r))?;
        field.with_decay(Decay {
            constant: self.constant,
            exponent: 1.0 + self.eps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelopes_are_checked() {
        let p = DecayingSource::powerlaw(1.0, 1.0).unwrap();
        assert_eq!(p.eval(1.0), 0.25);
        let f: RadialFn = Arc::new(|r| (1.0 + r).powf(-1.5));
        assert!(DecayingSource::new("slow", f.clone(), 1.0, 1.0).is_err());
        assert!(DecayingSource::new("ok", f, 1.0, 0.5).is_ok());
        assert!(DecayingSource::powerlaw(1.0, 0.0).is_err());
    }

    #[test]
    fn manufactured_source_at_the_pole() {
        let m = WarpedModel::hyperbolic(2, -1.0).unwrap();
        let s = DecayingSource::manufactured(&m).unwrap();
        // Δu*(0) = n u*''(0) = −2.
        assert!((s.eval(0.0) + 2.0).abs() < 1e-12);
        assert!((s.eval(1e-6) + 2.0).abs() < 1e-6);
    }

    #[test]
    fn parsing() {
        let m = WarpedModel::hyperbolic(2, -1.0).unwrap();
        let s = DecayingSource::parse("powerlaw:eps=2", &m).unwrap();
        assert_eq!(s.eval(1.0), 0.125);
        assert!(DecayingSource::parse("zero", &m).unwrap().is_zero());
        assert!(DecayingSource::parse("powerlaw:width=1", &m).is_err());
        assert!(DecayingSource::parse("gaussian", &m).is_err());
        let b = DecayingSource::parse("bump:amp=2,width=3", &m).unwrap();
        assert_eq!(b.eval(0.0), 2.0);
        assert_eq!(b.eval(3.5), 0.0);
    }
}
