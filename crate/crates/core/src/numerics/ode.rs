//! Adaptive Dormand–Prince 5(4) integrator for small autonomous-in-form systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0`, returning the state at each of the
/// nondecreasing `outputs` (all ≥ `t0`). Steps land exactly on output times.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    outputs: &[f64],
    opts: OdeOptions,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(outputs.len());
    let mut t = t0;
    let mut y = y0;
    let mut h = outputs.last().map_or(1.0, |&tf| (tf - t0).abs()).max(1e-3) * 1e-3;
    let mut steps = 0usize;
    for &target in outputs {
        if target < t {
            return Err(Error::domain(
                "ODE output times must be nondecreasing and after t0",
            ));
        }
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Numeric(format!("ODE step limit reached at t = {t}")));
            }
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            let mut k = [[0.0; N]; 7];
            k[0] = f(t, &y);
            for s in 1..7 {
                let mut ys = y;
                for (i, v) in ys.iter_mut().enumerate() {
                    *v += step * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                k[s] = f(t + C[s] * step, &ys);
            }
            let mut y5 = y;
            let mut err = 0.0f64;
            for i in 0..N {
                let d5: f64 = (0..7).map(|j| B5[j] * k[j][i]).sum();
                let d4: f64 = (0..7).map(|j| B4[j] * k[j][i]).sum();
                y5[i] += step * d5;
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((step * (d5 - d4) / sc).abs());
            }
            if !err.is_finite() {
                return Err(Error::Numeric(format!("ODE state not finite at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = y5;
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).min(5.0)
                };
                if !last {
                    h = step * grow;
                } else {
                    h = h.max(step * grow.min(1.0));
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).max(0.1);
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator() {
        let ts: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let ys = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            &ts,
            OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert_relative_eq!(y[0], t.sin(), epsilon = 1e-9);
        }
    }

    #[test]
    fn jacobi_field_on_hyperbolic_plane() {
        let ys = integrate(
            |_, y: &[f64; 2]| [y[1], y[0]],
            0.0,
            [0.0, 1.0],
            &[5.0],
            OdeOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(ys[0][0], 5f64.sinh(), max_relative = 1e-9);
    }
}
