//! Normalized Ricci flow `∂g/∂t = −(R+1)g` on rotationally symmetric surfaces.
//!
//! Metrics are written `g = e^{2w} g₀` over the background `g₀` of constant
//! curvature `K = −1/2`, so `R₀ ≡ −1` and the flow becomes
//! `∂w/∂t = e^{-2w}Δ₀w − (e^{-2w}R₀ + 1)/2`. Radial initial data stays radial,
//! so `w` lives on the radial grid `r_i = i h`, `i = 0..=nr`, with `w = 0` on
//! the outer node.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WarpedModel;
use crate::green::bounds::linear_fit;
use crate::numerics::field::RadialField;
use crate::numerics::grid::GridSpec;
use crate::numerics::operator::discrete_laplacian;
use crate::poisson::{
    decay_certificate, solve_exhaustion, DecayCertificate, DecayingSource, RadialFn,
};

/// Background sectional curvature; its scalar curvature is `R₀ = −1`.
pub const BACKGROUND_CURVATURE: f64 = -0.5;
/// Explicit steps satisfy `dt ≤ CFL_SAFETY · 2 / (e^{-2 min w} · ‖Δ₀‖_∞)`.
pub const CFL_SAFETY: f64 = 0.25;
/// `sup|w|` beyond which a run is declared divergent.
pub const BLOWUP_LIMIT: f64 = 10.0;
/// Required final `sup|R+1|` on every monitor ball.
pub const CONVERGENCE_TARGET: f64 = 1e-3;
/// Largest per-step change of a fixed point.
pub const FIXED_POINT_LIMIT: f64 = 1e-12;
/// Largest relative change of the final deviation when `(dt, h)` is halved.
pub const REFINEMENT_LIMIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Explicit,
    /// Linearized implicit step `(e^{2wⁿ}/dt − Δ₀) wⁿ⁺¹ = e^{2wⁿ}wⁿ/dt + (1 − e^{2wⁿ})/2`.
    SemiImplicit,
}

/// `w(r) = amp · exp(1 − 1/(1 − s²))` for `s = (r − center)/width` in `(−1, 1)`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amp: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp.is_finite() && self.width > 0.0 && self.center >= 0.0) {
            return Err(Error::config(
                "bump needs a finite amplitude, width > 0 and center ≥ 0",
            ));
        }
        if self.center > 0.0 && self.center < self.width {
            return Err(Error::config(
                "a bump off the pole must not reach it (center = 0 or center ≥ width)",
            ));
        }
        Ok(())
    }

    /// `(w, w', w'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let s = (r - self.center) / self.width;
        let q = 1.0 - s * s;
        if q <= 0.0 || self.amp == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let e = self.amp * (1.0 - 1.0 / q).exp();
        let g1 = -2.0 * s / (q * q);
        let g2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
        let wd = self.width;
        (e, e * g1 / wd, e * (g1 * g1 + g2) / (wd * wd))
    }

    pub fn outer_radius(&self) -> f64 {
        self.center + self.width
    }
}

/// Initial conformal factor.
#[derive(Clone)]
pub enum InitialData {
    Bump(Bump),
    /// A smooth even radial profile; derivatives are taken by finite differences.
    Profile {
        label: String,
        w: RadialFn,
    },
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Bump(b) => f.debug_tuple("Bump").field(b).finish(),
            InitialData::Profile { label, .. } => {
                f.debug_struct("Profile").field("label", label).finish()
            }
        }
    }
}

const PROFILE_STEP: f64 = 1e-3;

impl InitialData {
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match self {
            InitialData::Bump(b) => b.eval(r),
            InitialData::Profile { w, .. } => {
                let h = PROFILE_STEP;
                let v = [w(r - 2.0 * h), w(r - h), w(r), w(r + h), w(r + 2.0 * h)];
                let d1 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
                let d2 = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
                (v[2], d1, d2)
            }
        }
    }

    /// `R + 1` of `e^{2w} g₀` at `r`, from the closed form.
    pub fn deviation(&self, model: &WarpedModel, r: f64) -> f64 {
        let (w, w1, w2) = self.eval(r);
        let lap = if r < 1e-8 {
            2.0 * w2
        } else {
            w2 + model.dlog_phi(r) * w1
        };
        (-2.0 * w).exp() * (2.0 * model.radial_sectional(r) - 2.0 * lap) + 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(rename = "background_K")]
    pub background_k: f64,
    pub bump: Bump,
    /// Decay exponent asserted for the initial deviation `|R + 1| ≤ C(1+r)^{-1-ε}`.
    pub eps: f64,
    pub t_final: f64,
    /// Recording interval; explicit runs subcycle within it.
    pub dt: f64,
    pub monitor_radii: Vec<f64>,
    pub r_max: f64,
    pub nr: usize,
    pub scheme: Scheme,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            background_k: BACKGROUND_CURVATURE,
            bump: Bump {
                amp: 0.3,
                center: 0.0,
                width: 1.0,
            },
            eps: 1.0,
            t_final: 20.0,
            dt: 0.01,
            monitor_radii: vec![2.0, 4.0],
            r_max: 8.0,
            nr: 512,
            scheme: Scheme::Explicit,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.background_k != BACKGROUND_CURVATURE {
            return Err(Error::config(format!(
                "the flow's fixed point needs background_K = {BACKGROUND_CURVATURE}, got {}",
                self.background_k
            )));
        }
        self.bump.validate()?;
        if !(self.eps > 0.0
            && self.t_final > 0.0
            && self.dt > 0.0
            && self.r_max > 0.0
            && self.nr >= 8)
        {
            return Err(Error::config(
                "flow needs eps, t_final, dt, r_max > 0 and nr ≥ 8",
            ));
        }
        if self.bump.amp != 0.0 && self.bump.outer_radius() > 0.5 * self.r_max {
            return Err(Error::config(
                "the bump must be supported in the inner half of the domain",
            ));
        }
        if self.monitor_radii.is_empty()
            || self
                .monitor_radii
                .iter()
                .any(|&m| !(m > 0.0 && m <= self.r_max))
        {
            return Err(Error::config("monitor radii must lie in (0, r_max]"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<WarpedModel> {
        WarpedModel::hyperbolic(2, self.background_k)
    }

    /// The same run with `dt` and `h` halved.
    pub fn refined(&self) -> Self {
        FlowConfig {
            dt: 0.5 * self.dt,
            nr: 2 * self.nr,
            ..self.clone()
        }
    }
}

/// Tridiagonal radial `Δ₀` on nodes `0..nr`; node `nr` is pinned to zero.
#[derive(Debug, Clone)]
pub struct RadialStencil {
    pub h: f64,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    /// `R₀(r_i)`, including the boundary node.
    r0: Vec<f64>,
}

impl RadialStencil {
    pub fn new(model: &WarpedModel, r_max: f64, nr: usize) -> Result<Self> {
        if model.n != 2 {
            return Err(Error::domain("the flow is two-dimensional"));
        }
        let h = r_max / nr as f64;
        let (mut lower, mut diag, mut upper) = (vec![0.0; nr], vec![0.0; nr], vec![0.0; nr]);
        let ih2 = 1.0 / (h * h);
        // Δw(0) = 2 w''(0).
        diag[0] = -4.0 * ih2;
        upper[0] = 4.0 * ih2;
        for i in 1..nr {
            let c = model.dlog_phi(i as f64 * h);
            lower[i] = ih2 - 0.5 * c / h;
            diag[i] = -2.0 * ih2;
            upper[i] = ih2 + 0.5 * c / h;
        }
        let r0 = (0..=nr)
            .map(|i| 2.0 * model.radial_sectional(i as f64 * h))
            .collect();
        Ok(RadialStencil {
            h,
            lower,
            diag,
            upper,
            r0,
        })
    }

    pub fn nr(&self) -> usize {
        self.diag.len()
    }

    /// `Δ₀w` on the interior nodes `0..nr`.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let n = self.nr();
        out[0] = self.diag[0] * w[0] + self.upper[0] * w[1];
        for i in 1..n {
            out[i] = self.lower[i] * w[i - 1] + self.diag[i] * w[i] + self.upper[i] * w[i + 1];
        }
    }

    /// `‖Δ₀‖_∞`.
    pub fn norm_bound(&self) -> f64 {
        (0..self.nr())
            .map(|i| self.lower[i].abs() + self.diag[i].abs() + self.upper[i].abs())
            .fold(0.0, f64::max)
    }

    /// Largest stable explicit step for the current `w`.
    pub fn explicit_limit(&self, w: &[f64]) -> f64 {
        let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
        CFL_SAFETY * 2.0 / ((-2.0 * min_w).exp() * self.norm_bound())
    }
}

/// `R = e^{-2w}(R₀ − 2Δ₀w)` on every node; the boundary node uses one-sided differences.
pub fn curvature_conformal(w: &RadialField, model: &WarpedModel) -> Result<RadialField> {
    check_radial(w)?;
    let lap = model.laplacian_radial(w)?;
    let values = w
        .values
        .iter()
        .zip(&lap.values)
        .enumerate()
        .map(|(i, (wi, li))| {
            (-2.0 * wi).exp() * (2.0 * model.radial_sectional(w.radius(i)) - 2.0 * li)
        })
        .collect();
    Ok(RadialField {
        r0: 0.0,
        h: w.h,
        values,
    })
}

/// `R = 2K` of the warped metric `ds² + ψ(s)²dθ²`, `ψ = e^w φ`, `ds = e^w dr`:
/// `K = −(ψ'' − w'ψ')/(e^{2w}ψ)` in `r`. Undefined at the pole, which is left as NaN.
pub fn curvature_warped(w: &RadialField, model: &WarpedModel) -> Result<RadialField> {
    check_radial(w)?;
    let m = w.values.len();
    let h = w.h;
    let psi: Vec<f64> = (0..m)
        .map(|i| Ok(w.values[i].exp() * model.warping_eval(w.radius(i))?.phi))
        .collect::<Result<_>>()?;
    let v = &w.values;
    let mut out = vec![f64::NAN; m];
    for i in 1..m {
        let (d1w, d1p, d2p) = if i == m - 1 {
            (
                (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h),
                (3.0 * psi[i] - 4.0 * psi[i - 1] + psi[i - 2]) / (2.0 * h),
                (2.0 * psi[i] - 5.0 * psi[i - 1] + 4.0 * psi[i - 2] - psi[i - 3]) / (h * h),
            )
        } else {
            (
                (v[i + 1] - v[i - 1]) / (2.0 * h),
                (psi[i + 1] - psi[i - 1]) / (2.0 * h),
                (psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) / (h * h),
            )
        };
        out[i] = -2.0 * (d2p - d1w * d1p) / ((2.0 * v[i]).exp() * psi[i]);
    }
    Ok(RadialField {
        r0: 0.0,
        h,
        values: out,
    })
}

fn check_radial(w: &RadialField) -> Result<()> {
    if w.r0 != 0.0 || w.values.len() < 4 {
        return Err(Error::domain(
            "flow fields start at the pole and need at least 4 samples",
        ));
    }
    if let Some(k) = w.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("w is not finite at node {k}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub w: RadialField,
    pub curvature: RadialField,
    /// `sup|R + 1|` on each monitor ball.
    pub sup_dev: Vec<f64>,
}

impl FlowState {
    pub fn new(t: f64, w: RadialField, model: &WarpedModel, monitor_radii: &[f64]) -> Result<Self> {
        let curvature = curvature_conformal(&w, model)?;
        let sup_dev = monitor_radii
            .iter()
            .map(|&m| sup_deviation(&curvature, m))
            .collect();
        Ok(FlowState {
            t,
            w,
            curvature,
            sup_dev,
        })
    }

    pub fn sup_w(&self) -> f64 {
        self.w.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `min (R + 1)` on the ball of the given radius.
    pub fn min_deviation(&self, radius: f64) -> f64 {
        self.curvature
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.curvature.radius(*i) <= radius + 1e-12)
            .map(|(_, r)| r + 1.0)
            .fold(f64::INFINITY, f64::min)
    }
}

fn sup_deviation(curvature: &RadialField, radius: f64) -> f64 {
    curvature
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| curvature.radius(*i) <= radius + 1e-12)
        .map(|(_, r)| (r + 1.0).abs())
        .fold(0.0, f64::max)
}

/// Advance `w` by one step of length `dt`.
pub fn flow_step(w: &[f64], dt: f64, stencil: &RadialStencil, scheme: Scheme) -> Result<Vec<f64>> {
    let n = stencil.nr();
    if w.len() != n + 1 {
        return Err(Error::domain(format!(
            "w has {} values for {} radial steps",
            w.len(),
            n
        )));
    }
    let mut next = vec![0.0; n + 1];
    match scheme {
        Scheme::Explicit => {
            let limit = stencil.explicit_limit(w);
            if dt > limit {
                return Err(Error::Unstable(format!(
                    "explicit step {dt:.3e} exceeds the CFL limit {limit:.3e}"
                )));
            }
            let mut lap = vec![0.0; n];
            stencil.apply(w, &mut lap);
            for i in 0..n {
                let e = (-2.0 * w[i]).exp();
                next[i] = w[i] + dt * (e * lap[i] - 0.5 * (e * stencil.r0[i] + 1.0));
            }
        }
        Scheme::SemiImplicit => {
            // (σ_i − Δ₀) x = b with σ_i = e^{2w_i}/dt.
            let mut d = vec![0.0; n];
            let mut b = vec![0.0; n];
            for i in 0..n {
                let e = (2.0 * w[i]).exp();
                d[i] = e / dt - stencil.diag[i];
                b[i] = e * w[i] / dt - 0.5 * (stencil.r0[i] + e);
            }
            let lower: Vec<f64> = stencil.lower.iter().map(|v| -v).collect();
            let upper: Vec<f64> = stencil.upper.iter().map(|v| -v).collect();
            let x = solve_tridiagonal(&lower, &d, &upper, &b)?;
            next[..n].copy_from_slice(&x);
        }
    }
    if let Some(k) = next.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("w became non-finite at node {k}")));
    }
    Ok(next)
}

/// Thomas algorithm; `lower[0]` and `upper[n−1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = upper[0] / denom;
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Numeric("singular tridiagonal system".to_string()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t: f64,
    pub sup_dev: Vec<f64>,
    pub max_w: f64,
}

/// Initial deviation envelope `|R + 1| ≤ C(1 + r)^{-1-ε}` measured on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCertificate {
    pub eps: f64,
    pub constant: f64,
    /// `sup|w|` on the outer half of the domain, where the boundary pins `w = 0`.
    pub outer_w: f64,
    pub pass: bool,
}

/// Relative size of `w` tolerated on the outer half of the domain.
pub const OUTER_SUPPORT_LIMIT: f64 = 1e-4;

pub fn certify_initial(cfg: &FlowConfig, initial: &InitialData) -> Result<InitialCertificate> {
    let model = cfg.model()?;
    let h = cfg.r_max / cfg.nr as f64;
    let mut constant = 0.0f64;
    let (mut outer_w, mut sup_w) = (0.0f64, 0.0f64);
    for i in 0..=cfg.nr {
        let r = i as f64 * h;
        let d = initial.deviation(&model, r);
        if !d.is_finite() {
            return Err(Error::Numeric(format!(
                "initial curvature is not finite at r = {r}"
            )));
        }
        constant = constant.max(d.abs() * (1.0 + r).powf(1.0 + cfg.eps));
        let w = initial.eval(r).0.abs();
        sup_w = sup_w.max(w);
        if r >= 0.5 * cfg.r_max {
            outer_w = outer_w.max(w);
        }
    }
    Ok(InitialCertificate {
        eps: cfg.eps,
        constant,
        outer_w,
        pass: constant.is_finite() && outer_w <= OUTER_SUPPORT_LIMIT * sup_w.max(f64::MIN_POSITIVE),
    })
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub monitor_radii: Vec<f64>,
    pub records: Vec<FlowRecord>,
    pub initial: InitialCertificate,
    pub last: FlowState,
    /// Steps taken, counting explicit substeps.
    pub steps: usize,
    /// Largest `|R_conformal − R_warped|` over the interior at the recorded times;
    /// both are second-order accurate, so this shrinks like `h²`.
    pub gauge_error: f64,
    /// Smallest `R + 1` on the largest monitor ball over the run.
    pub min_deviation: f64,
}

/// How often, in records, the two curvature formulas are compared.
const GAUGE_EVERY: usize = 100;

pub fn run_flow(cfg: &FlowConfig) -> Result<FlowTrajectory> {
    run_flow_with(cfg, &InitialData::Bump(cfg.bump))
}

pub fn run_flow_with(cfg: &FlowConfig, initial: &InitialData) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let certificate = certify_initial(cfg, initial)?;
    if !certificate.pass {
        return Err(Error::config(format!(
            "initial data is not certified: C = {:.3e}, sup|w| on the outer half = {:.3e}",
            certificate.constant, certificate.outer_w
        )));
    }
    let model = cfg.model()?;
    let stencil = RadialStencil::new(&model, cfg.r_max, cfg.nr)?;
    let h = stencil.h;
    let mut w = RadialField::sample(0.0, h, cfg.nr + 1, |r| initial.eval(r).0);
    w.values[cfg.nr] = 0.0;
    let outer = cfg.monitor_radii.iter().copied().fold(0.0, f64::max);
    let mut state = FlowState::new(0.0, w, &model, &cfg.monitor_radii)?;
    let mut records = vec![record(&state)];
    let mut gauge_error = gauge_difference(&state, &model)?;
    let mut min_deviation = state.min_deviation(outer);
    let intervals = (cfg.t_final / cfg.dt).round() as usize;
    if ((intervals as f64) * cfg.dt - cfg.t_final).abs() > 1e-9 * cfg.t_final {
        return Err(Error::config("t_final must be a multiple of dt"));
    }
    let mut steps = 0;
    for k in 1..=intervals {
        let mut values = std::mem::take(&mut state.w.values);
        match cfg.scheme {
            Scheme::Explicit => {
                let sub = (cfg.dt / stencil.explicit_limit(&values)).ceil().max(1.0) as usize;
                let tau = cfg.dt / sub as f64;
                for _ in 0..sub {
                    values = flow_step(&values, tau, &stencil, Scheme::Explicit)?;
                }
                steps += sub;
            }
            Scheme::SemiImplicit => {
                values = flow_step(&values, cfg.dt, &stencil, Scheme::SemiImplicit)?;
                steps += 1;
            }
        }
        let t = k as f64 * cfg.dt;
        state = FlowState::new(
            t,
            RadialField { r0: 0.0, h, values },
            &model,
            &cfg.monitor_radii,
        )?;
        let sup_w = state.sup_w();
        if sup_w > BLOWUP_LIMIT {
            return Err(Error::Divergence { t, sup_w });
        }
        records.push(record(&state));
        min_deviation = min_deviation.min(state.min_deviation(outer));
        if k % GAUGE_EVERY == 0 || k == intervals {
            gauge_error = gauge_error.max(gauge_difference(&state, &model)?);
        }
    }
    Ok(FlowTrajectory {
        monitor_radii: cfg.monitor_radii.clone(),
        records,
        initial: certificate,
        last: state,
        steps,
        gauge_error,
        min_deviation,
    })
}

fn record(state: &FlowState) -> FlowRecord {
    FlowRecord {
        t: (state.t * 1e9).round() / 1e9,
        sup_dev: state.sup_dev.clone(),
        max_w: state
            .w
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

fn gauge_difference(state: &FlowState, model: &WarpedModel) -> Result<f64> {
    let warped = curvature_warped(&state.w, model)?;
    let n = warped.values.len();
    Ok((1..n - 1)
        .map(|i| (warped.values[i] - state.curvature.values[i]).abs())
        .fold(0.0, f64::max))
}

impl FlowTrajectory {
    /// CSV `t,sup_dev_B<r>...,max_w`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.monitor_radii.iter().map(|r| format!("sup_dev_B{r}")));
        header.push("max_w".to_string());
        writeln!(out, "{}", header.join(","))?;
        for rec in &self.records {
            let mut row = vec![format!("{}", rec.t)];
            row.extend(rec.sup_dev.iter().map(|d| format!("{d:e}")));
            row.push(format!("{:e}", rec.max_w));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn final_sup_dev(&self) -> &[f64] {
        &self.last.sup_dev
    }

    pub fn report(&self) -> FlowReport {
        let n = self.records.len();
        let half = &self.records[n / 2..];
        let decreasing: Vec<bool> = (0..self.monitor_radii.len())
            .map(|j| {
                half.windows(2)
                    .all(|p| p[1].sup_dev[j] <= p[0].sup_dev[j] * (1.0 + 1e-9))
            })
            .collect();
        let last_j = self.monitor_radii.len() - 1;
        let (ts, ys): (Vec<f64>, Vec<f64>) = half
            .iter()
            .filter(|r| r.sup_dev[last_j] > 0.0)
            .map(|r| (r.t, -r.sup_dev[last_j].ln()))
            .unzip();
        let rate = if ts.len() >= 3 {
            Some(linear_fit(&ts, &ys).1)
        } else {
            None
        };
        let converged = self.last.sup_dev.iter().all(|d| *d < CONVERGENCE_TARGET);
        FlowReport {
            t_final: self.last.t,
            monitor_radii: self.monitor_radii.clone(),
            final_sup_dev: self.last.sup_dev.clone(),
            eventually_decreasing: decreasing.clone(),
            rate,
            max_w: self.last.sup_w(),
            steps: self.steps,
            gauge_error: self.gauge_error,
            min_deviation: self.min_deviation,
            initial: self.initial,
            converged,
            pass: converged && decreasing.iter().all(|d| *d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub t_final: f64,
    pub monitor_radii: Vec<f64>,
    pub final_sup_dev: Vec<f64>,
    /// `sup_dev` non-increasing over the second half of the run, per monitor ball.
    pub eventually_decreasing: Vec<bool>,
    /// Fitted `−d/dt log sup_dev` on the largest monitor ball over the second half.
    pub rate: Option<f64>,
    pub max_w: f64,
    pub steps: usize,
    pub gauge_error: f64,
    pub min_deviation: f64,
    pub initial: InitialCertificate,
    pub converged: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub steps: usize,
    pub max_change: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Step `w ≡ 0` with the configured scheme and record the largest per-step change.
pub fn fixed_point_check(cfg: &FlowConfig, steps: usize) -> Result<FixedPointReport> {
    cfg.validate()?;
    let model = cfg.model()?;
    let stencil = RadialStencil::new(&model, cfg.r_max, cfg.nr)?;
    let mut w = vec![0.0; cfg.nr + 1];
    let dt = match cfg.scheme {
        Scheme::Explicit => stencil.explicit_limit(&w),
        Scheme::SemiImplicit => cfg.dt,
    };
    let mut max_change = 0.0f64;
    for _ in 0..steps {
        let next = flow_step(&w, dt, &stencil, cfg.scheme)?;
        max_change = max_change.max(
            next.iter()
                .zip(&w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        w = next;
    }
    let state = FlowState::new(
        0.0,
        RadialField {
            r0: 0.0,
            h: stencil.h,
            values: w,
        },
        &model,
        &[cfg.r_max],
    )?;
    Ok(FixedPointReport {
        steps,
        max_change,
        max_deviation: state.sup_dev[0],
        pass: max_change <= FIXED_POINT_LIMIT && state.sup_dev[0] <= FIXED_POINT_LIMIT,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    /// Largest `|fine − coarse| / coarse` over the monitor balls.
    pub relative_change: f64,
    pub pass: bool,
}

/// Rerun with `dt` and `h` halved and compare the final deviations.
pub fn refinement_check(cfg: &FlowConfig, coarse: &FlowTrajectory) -> Result<RefinementReport> {
    let fine = run_flow(&cfg.refined())?;
    let c = coarse.final_sup_dev().to_vec();
    let f = fine.final_sup_dev().to_vec();
    let relative_change = c
        .iter()
        .zip(&f)
        .map(|(a, b)| {
            if *a == 0.0 && *b == 0.0 {
                0.0
            } else {
                (a - b).abs() / a.abs()
            }
        })
        .fold(0.0, f64::max);
    Ok(RefinementReport {
        coarse: c,
        fine: f,
        relative_change,
        pass: relative_change < REFINEMENT_LIMIT,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub eps: f64,
    pub sup_u: f64,
    pub certificate: DecayCertificate,
    pub pass: bool,
}

/// Grid resolution of the potential check, nodes per unit radius.
pub const POTENTIAL_NODES_PER_UNIT: usize = 8;
pub const POTENTIAL_RADIUS: f64 = 16.0;

/// Bounded potential `Δu = R + 1` of the initial metric by exhaustion, with the
/// decay certificate compared under doubling of the domain.
pub fn potential_check(
    cfg: &FlowConfig,
    initial: &InitialData,
    eps: f64,
) -> Result<PotentialReport> {
    cfg.validate()?;
    let model = cfg.model()?.certify(4.0 * POTENTIAL_RADIUS)?;
    let dev_model = model.clone();
    let init = initial.clone();
    let f: RadialFn = Arc::new(move |r| init.deviation(&dev_model, r));
    let source = if (0..=4000).all(|i| f(i as f64 * 0.01).abs() == 0.0) {
        DecayingSource::zero()
    } else {
        DecayingSource::fitted("initial curvature deviation", f, eps)?
    };
    let mut solutions = Vec::with_capacity(2);
    for radius in [POTENTIAL_RADIUS, 2.0 * POTENTIAL_RADIUS] {
        let nr = (radius as usize) * POTENTIAL_NODES_PER_UNIT;
        let grid = GridSpec::new(radius, nr, 32, 1).build(&model)?;
        let run = solve_exhaustion(&discrete_laplacian(&grid), &source)?;
        solutions.push(run.limit().clone());
    }
    let sup_u = solutions[1].max_abs();
    let certificate = decay_certificate(&solutions[0], eps, Some(&solutions[1]));
    Ok(PotentialReport {
        eps,
        sup_u,
        pass: sup_u.is_finite() && certificate.pass,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> FlowConfig {
        FlowConfig {
            t_final: 2.0,
            dt: 0.01,
            nr: 64,
            ..Default::default()
        }
    }

    #[test]
    fn conformal_curvature_of_constants() {
        let m = small().model().unwrap();
        let zero = RadialField::sample(0.0, 0.1, 50, |_| 0.0);
        assert!(curvature_conformal(&zero, &m)
            .unwrap()
            .values
            .iter()
            .all(|r| *r == -1.0));
        let c = RadialField::sample(0.0, 0.1, 50, |_| 0.2);
        for r in curvature_conformal(&c, &m).unwrap().values {
            assert_relative_eq!(r, -(-0.4f64).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn curvature_formulas_agree_at_second_order() {
        let cfg = small();
        let m = cfg.model().unwrap();
        let init = InitialData::Bump(cfg.bump);
        let errs: Vec<(f64, f64)> = [256, 512, 1024]
            .iter()
            .map(|&nr| {
                let h = 4.0 / nr as f64;
                let w = RadialField::sample(0.0, h, nr + 1, |r| init.eval(r).0);
                let a = curvature_conformal(&w, &m).unwrap();
                let b = curvature_warped(&w, &m).unwrap();
                let exact = |i: usize| init.deviation(&m, i as f64 * h) - 1.0;
                let ea = (1..nr)
                    .map(|i| (a.values[i] - exact(i)).abs())
                    .fold(0.0, f64::max);
                let eb = (1..nr)
                    .map(|i| (b.values[i] - exact(i)).abs())
                    .fold(0.0, f64::max);
                (ea, eb)
            })
            .collect();
        for p in errs.windows(2) {
            assert!(p[0].0 / p[1].0 > 3.5 && p[0].1 / p[1].1 > 3.5, "{errs:?}");
        }
    }

    #[test]
    fn fixed_point_is_exact() {
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
            let rep = fixed_point_check(&FlowConfig { scheme, ..small() }, 20).unwrap();
            assert!(rep.pass && rep.max_change == 0.0, "{rep:?}");
        }
    }

    #[test]
    fn constants_relax_toward_zero() {
        let cfg = small();
        let st = RadialStencil::new(&cfg.model().unwrap(), cfg.r_max, cfg.nr).unwrap();
        let c: f64 = 0.2;
        let w = vec![c; cfg.nr + 1];
        let dt = 1e-5;
        let next = flow_step(&w, dt, &st, Scheme::Explicit).unwrap();
        // Interior nodes away from the pinned boundary follow ċ = (e^{-2c} − 1)/2.
        assert_relative_eq!(
            (next[10] - c) / dt,
            ((-2.0 * c).exp() - 1.0) / 2.0,
            epsilon = 1e-9
        );
        assert!(flow_step(&w, 1.0, &st, Scheme::Explicit).is_err());
    }

    #[test]
    fn explicit_step_matches_half_steps() {
        let cfg = small();
        let m = cfg.model().unwrap();
        let st = RadialStencil::new(&m, cfg.r_max, cfg.nr).unwrap();
        let w: Vec<f64> = (0..=cfg.nr)
            .map(|i| cfg.bump.eval(i as f64 * st.h).0)
            .collect();
        let dt = 0.5 * st.explicit_limit(&w);
        let diff = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let gap = |dt: f64| {
            let one = flow_step(&w, dt, &st, Scheme::Explicit).unwrap();
            let half = flow_step(&w, dt / 2.0, &st, Scheme::Explicit).unwrap();
            let two = flow_step(&half, dt / 2.0, &st, Scheme::Explicit).unwrap();
            diff(&one, &two)
        };
        let (g1, g2) = (gap(dt), gap(dt / 2.0));
        assert!((g1 / g2 - 4.0).abs() < 0.5, "{g1} {g2}");
    }

    #[test]
    fn zero_deviation_stays_zero() {
        let cfg = FlowConfig {
            bump: Bump {
                amp: 0.0,
                center: 0.0,
                width: 1.0,
            },
            ..small()
        };
        let traj = run_flow(&cfg).unwrap();
        assert!(traj
            .records
            .iter()
            .all(|r| r.sup_dev.iter().all(|d| *d == 0.0)));
    }

    #[test]
    fn schemes_agree_and_converge() {
        let cfg = FlowConfig {
            t_final: 10.0,
            nr: 128,
            ..Default::default()
        };
        let ex = run_flow(&cfg).unwrap();
        let si = run_flow(&FlowConfig {
            scheme: Scheme::SemiImplicit,
            dt: 0.001,
            ..cfg.clone()
        })
        .unwrap();
        let rep = ex.report();
        assert!(rep.pass, "{rep:?}");
        let (a, b) = (ex.final_sup_dev()[1], si.final_sup_dev()[1]);
        assert!((a - b).abs() < 0.05 * a, "{a} {b}");
        let mut csv = Vec::new();
        ex.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,sup_dev_B2,sup_dev_B4,max_w\n0,"));
    }

    #[test]
    fn validation() {
        assert!(FlowConfig {
            background_k: -1.0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(FlowConfig {
            bump: Bump {
                amp: 0.3,
                center: 0.5,
                width: 1.0
            },
            ..small()
        }
        .validate()
        .is_err());
        assert!(FlowConfig {
            bump: Bump {
                amp: 0.3,
                center: 3.5,
                width: 1.0
            },
            ..small()
        }
        .validate()
        .is_err());
        assert!(FlowConfig {
            monitor_radii: vec![9.0],
            ..small()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn positive_deviation_stays_positive() {
        let cfg = FlowConfig {
            r_max: 24.0,
            nr: 384,
            t_final: 5.0,
            monitor_radii: vec![4.0, 12.0],
            ..Default::default()
        };
        let prof = InitialData::Profile {
            label: "sech".into(),
            w: Arc::new(|r: f64| 0.3 / r.cosh()),
        };
        let h = cfg.r_max / cfg.nr as f64;
        assert!((0..cfg.nr).all(|i| prof.deviation(&cfg.model().unwrap(), i as f64 * h) > 0.0));
        let traj = run_flow_with(&cfg, &prof).unwrap();
        assert!(traj.min_deviation > -1e-12, "{}", traj.min_deviation);
    }

    #[test]
    fn potentials() {
        let cfg = FlowConfig {
            bump: Bump {
                amp: 0.0,
                center: 0.0,
                width: 1.0,
            },
            ..small()
        };
        let zero = potential_check(&cfg, &InitialData::Bump(cfg.bump), 1.0).unwrap();
        assert!(zero.pass && zero.sup_u == 0.0, "{zero:?}");
        let bump = small();
        for eps in [0.5, 2.0] {
            let rep = potential_check(&bump, &InitialData::Bump(bump.bump), eps).unwrap();
            assert!(rep.pass && rep.sup_u > 0.1, "{rep:?}");
        }
    }
}
