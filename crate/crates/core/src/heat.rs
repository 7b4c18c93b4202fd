//! Dirichlet heat kernel of a unit ball `B_x(1)` by implicit Euler.
//!
//! Each step solves `(W/dt + S) H^{n+1} = W H^n / dt`. Summing the steps gives
//! `S Σ dt H^{n+1} = e_x − W H^N`, so the time integral of `H` reproduces the
//! elliptic Dirichlet Green's function up to the tail beyond the final time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::bounds::linear_fit;
use crate::numerics::eigen::smallest_eigenpair;
use crate::numerics::operator::SparseOperator;
use crate::numerics::reduce::{dot, weighted_dot};
use crate::numerics::solve::{solve_stiffness, Shift, SolverOptions};

/// Largest tolerated relative mass increase in one step.
pub const MASS_GROWTH_LIMIT: f64 = 1e-6;
/// Largest tail share of the time-integrated mass.
pub const TAIL_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatConfig {
    pub dt_early: f64,
    pub t_switch: f64,
    pub dt_late: f64,
    pub t_final: f64,
    /// Spacing of the recorded mass curve.
    pub record_every: f64,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            dt_early: 1e-3,
            t_switch: 1.0,
            dt_late: 1e-2,
            t_final: 3.0,
            record_every: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatSample {
    pub t: f64,
    pub mass: f64,
    pub l2_sq: f64,
}

/// State of the heat kernel `H(x, ·, t)` on the unit ball.
#[derive(Debug, Clone)]
pub struct HeatState {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HeatTrajectory {
    pub center_radius: f64,
    /// Every step, starting at the delta.
    pub samples: Vec<HeatSample>,
    pub at_t1: HeatState,
    pub last: HeatState,
    /// `Σ dt_n H^{n+1}`.
    pub time_integral: Vec<f64>,
    pub ball_volume: f64,
}

pub fn heat_evolve(op: &SparseOperator, cfg: &HeatConfig) -> Result<HeatTrajectory> {
    let grid = op.grid.clone();
    if (grid.r_max - 1.0).abs() > 1e-12 {
        return Err(Error::config(
            "heat kernels live on a grid of radius 1 around the center",
        ));
    }
    if !(cfg.dt_early > 0.0
        && cfg.dt_late > 0.0
        && cfg.t_final > cfg.t_switch
        && cfg.t_switch >= 0.0)
    {
        return Err(Error::config(
            "heat time stepping needs positive steps and t_final > t_switch",
        ));
    }
    let ring = grid.nr;
    let m = grid.interior_count(ring);
    let w = &grid.weights()[..m];
    let mut h = vec![0.0; m];
    h[0] = 1.0 / w[0];
    let mut acc = vec![0.0; m];
    let mut t = 0.0;
    let mut samples = vec![HeatSample {
        t,
        mass: 1.0,
        l2_sq: weighted_dot(w, &h, &h),
    }];
    let mut at_t1 = None;
    let opts = SolverOptions {
        rel_tol: 1e-12,
        ..Default::default()
    };
    let tiny = 1e-9;
    while t < cfg.t_final - tiny {
        let dt = if t < cfg.t_switch - tiny {
            cfg.dt_early.min(cfg.t_switch - t)
        } else {
            cfg.dt_late.min(cfg.t_final - t)
        };
        let b: Vec<f64> = h.iter().zip(w).map(|(v, wi)| v * wi / dt).collect();
        let (next, _) = solve_stiffness(op, ring, Shift::Uniform(1.0 / dt), &b, opts)?;
        let mass_prev = samples.last().map_or(1.0, |s| s.mass);
        let mass = dot(w, &next);
        if mass > mass_prev * (1.0 + MASS_GROWTH_LIMIT) {
            return Err(Error::Unstable(format!(
                "heat mass grew from {mass_prev:.6e} to {mass:.6e} at t = {t}"
            )));
        }
        if next.iter().any(|v| *v < -1e-14 * h[0].abs()) {
            return Err(Error::Unstable(format!(
                "heat kernel became negative at t = {t}"
            )));
        }
        for (a, v) in acc.iter_mut().zip(&next) {
            *a += dt * v;
        }
        h = next;
        t += dt;
        samples.push(HeatSample {
            t,
            mass,
            l2_sq: weighted_dot(w, &h, &h),
        });
        if at_t1.is_none() && (t - 1.0).abs() < tiny {
            at_t1 = Some(HeatState {
                t,
                values: h.clone(),
            });
        }
    }
    let at_t1 = at_t1.ok_or_else(|| Error::config("heat run must pass through t = 1"))?;
    Ok(HeatTrajectory {
        center_radius: grid.center_radius,
        samples,
        at_t1,
        last: HeatState { t, values: h },
        time_integral: acc,
        ball_volume: grid.ball_volume(1.0)?,
    })
}

impl HeatTrajectory {
    /// `(t, mass)` at multiples of `every`.
    pub fn mass_curve(&self, every: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut next = 0.0;
        for s in &self.samples {
            if s.t >= next - 1e-9 {
                out.push((round_time(s.t), s.mass));
                next += every;
                while next <= s.t + 1e-9 {
                    next += every;
                }
            }
        }
        out
    }

    /// `sup_y H(x, y, 1) · vol(B_x(1))`.
    pub fn sup_bound_constant(&self) -> f64 {
        self.at_t1.values.iter().fold(0.0f64, |m, v| m.max(*v)) * self.ball_volume
    }
}

fn round_time(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Decay {
    pub rate: f64,
    /// `2 · b²/4`, the rate guaranteed by the spectral bound.
    pub required: f64,
    /// `2 λ₁(B_x(1))` of the discrete ball.
    pub reference: f64,
    pub relative_to_reference: f64,
    pub sup_constant: f64,
    pub pass: bool,
}

/// Fit `−d/dt log ∫H²` over `t ∈ [1, T]`.
pub fn l2_decay_check(
    traj: &HeatTrajectory,
    analytic_lambda: f64,
    ball_lambda: f64,
) -> Result<L2Decay> {
    let (ts, ys): (Vec<f64>, Vec<f64>) = traj
        .samples
        .iter()
        .filter(|s| s.t >= 1.0 - 1e-9)
        .map(|s| (s.t, -s.l2_sq.ln()))
        .unzip();
    if ts.len() < 3 || ts.last().copied().unwrap_or(0.0) < 3.0 - 1e-9 {
        return Err(Error::domain(
            "L² decay fit needs a trajectory spanning [1, 3]",
        ));
    }
    let (_, rate, _) = linear_fit(&ts, &ys);
    let required = 2.0 * analytic_lambda;
    let reference = 2.0 * ball_lambda;
    let rel = (rate - reference).abs() / reference;
    Ok(L2Decay {
        rate,
        required,
        reference,
        relative_to_reference: rel,
        sup_constant: traj.sup_bound_constant(),
        pass: rate >= required && rel < 0.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatGreen {
    pub mass: f64,
    pub tail_fraction: f64,
    /// Largest relative difference from the elliptic Dirichlet Green's function off the pole.
    pub elliptic_field_error: f64,
    pub elliptic_mass: f64,
    pub mass_agreement: f64,
}

/// `G₁ = ∫_0^∞ H dt`: the accumulated steps plus an exponential tail
/// `H(T)/μ`, with `μ` the fitted mass decay rate near `T`.
pub fn green_from_heat(
    op: &SparseOperator,
    traj: &HeatTrajectory,
) -> Result<(Vec<f64>, HeatGreen)> {
    let grid = op.grid.clone();
    let m = traj.time_integral.len();
    let w = &grid.weights()[..m];
    let tail_start = traj.last.t - 1.0;
    let (ts, ys): (Vec<f64>, Vec<f64>) = traj
        .samples
        .iter()
        .filter(|s| s.t >= tail_start)
        .map(|s| (s.t, -s.mass.ln()))
        .unzip();
    let (_, mu, _) = linear_fit(&ts, &ys);
    if !(mu > 0.0) {
        return Err(Error::Numeric("heat mass does not decay".to_string()));
    }
    let field: Vec<f64> = traj
        .time_integral
        .iter()
        .zip(&traj.last.values)
        .map(|(a, h)| a + h / mu)
        .collect();
    let mass = dot(w, &field);
    let tail_fraction = dot(w, &traj.last.values) / mu / mass;
    if tail_fraction > TAIL_LIMIT {
        return Err(Error::Construction(format!(
            "heat tail carries {:.1}% of the mass; extend t_final",
            100.0 * tail_fraction
        )));
    }
    let mut b = vec![0.0; m];
    b[0] = 1.0;
    let (g1, _) = solve_stiffness(op, grid.nr, Shift::None, &b, SolverOptions::default())?;
    let elliptic_mass = dot(w, &g1);
    let start = grid.interior_count(3);
    let err = (start..m)
        .map(|k| (field[k] - g1[k]).abs() / g1[k])
        .fold(0.0, f64::max);
    Ok((
        field,
        HeatGreen {
            mass,
            tail_fraction,
            elliptic_field_error: err,
            elliptic_mass,
            mass_agreement: (mass - elliptic_mass).abs() / elliptic_mass,
        },
    ))
}

/// Discrete `λ₁(B_x(1))`.
pub fn ball_lambda(op: &SparseOperator) -> Result<f64> {
    Ok(smallest_eigenpair(op, 1.0)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WarpedModel;
    use crate::numerics::grid::GridSpec;
    use crate::numerics::operator::discrete_laplacian;

    #[test]
    fn unit_ball_on_the_hyperbolic_plane() {
        let m = WarpedModel::hyperbolic(2, -1.0)
            .unwrap()
            .certify(10.0)
            .unwrap();
        let g = GridSpec::new(1.0, 64, 32, 1)
            .centered_at(2.0)
            .build(&m)
            .unwrap();
        let op = discrete_laplacian(&g);
        let traj = heat_evolve(&op, &HeatConfig::default()).unwrap();
        let masses: Vec<f64> = traj.samples.iter().map(|s| s.mass).collect();
        assert!(masses.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12)));
        assert!(masses[1] > 0.99);
        let lam = ball_lambda(&op).unwrap();
        let dec = l2_decay_check(&traj, 0.25, lam).unwrap();
        assert!(dec.pass, "{dec:?}");
        let (_, hg) = green_from_heat(&op, &traj).unwrap();
        assert!(
            hg.elliptic_field_error < 0.03 && hg.mass_agreement < 0.03,
            "{hg:?}"
        );
        let curve = traj.mass_curve(0.5);
        assert_eq!(
            curve.iter().map(|c| c.0).collect::<Vec<_>>(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        );
    }
}
