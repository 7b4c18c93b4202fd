//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Map used for `[a, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailMap {
    /// `s = a − log(1−t)`; for exponentially decaying integrands.
    #[default]
    Exponential,
    /// `s = a + t/(1−t)`; for integrands decaying like a power.
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    /// Relative tolerance, used when the integral is large.
    pub rel_tol: f64,
    pub max_intervals: usize,
    pub tail: TailMap,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 20_000,
            tail: TailMap::Exponential,
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then(other.a.total_cmp(&self.a))
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::Numeric(format!(
                "integrand not finite near {}",
                c - x
            )));
        }
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    if !fc.is_finite() {
        return Err(Error::Numeric(format!("integrand not finite at {c}")));
    }
    Ok((k * h, ((k - g) * h).abs()))
}

impl Quadrature {
    pub fn with_tail(mut self, tail: TailMap) -> Self {
        self.tail = tail;
        self
    }

    /// `∫_a^b f`, where `b` may be `+∞`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if b == f64::INFINITY {
            return match self.tail {
                TailMap::Exponential => {
                    self.finite(|t: f64| f(a - (-t).ln_1p()) / (1.0 - t), 0.0, 1.0)
                }
                TailMap::Algebraic => self.finite(
                    |t: f64| {
                        let d = 1.0 - t;
                        f(a + t / d) / (d * d)
                    },
                    0.0,
                    1.0,
                ),
            };
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::domain(
                "quadrature limits must be finite or b = +inf",
            ));
        }
        if b < a {
            return Ok(-self.finite(&f, b, a)?);
        }
        self.finite(&f, a, b)
    }

    fn finite<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        let (value, error) = kronrod(&f, a, b)?;
        let mut heap = BinaryHeap::new();
        heap.push(Piece { a, b, value, error });
        let (mut total, mut total_err) = (value, error);
        loop {
            if total_err <= self.abs_tol.max(self.rel_tol * total.abs()) {
                break;
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::Quadrature {
                    a,
                    b,
                    error: total_err,
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                return Err(Error::Quadrature {
                    a,
                    b,
                    error: total_err,
                });
            }
            let (v1, e1) = kronrod(&f, worst.a, mid)?;
            let (v2, e2) = kronrod(&f, mid, worst.b)?;
            heap.push(Piece {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Piece {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
        }
        // Final sum in a fixed order.
        let mut pieces: Vec<&Piece> = heap.iter().collect();
        pieces.sort_by(|p, q| p.a.total_cmp(&q.a));
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        Ok(total)
    }
}

/// `∫_a^b f` with default tolerances.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    Quadrature::default().integrate(f, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn exponential_tail() {
        assert_relative_eq!(
            adaptive_quadrature(|s: f64| (-s).exp(), 0.0, f64::INFINITY).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn hyperbolic_green_integrals() {
        let g2 =
            adaptive_quadrature(|s: f64| 1.0 / (2.0 * PI * s.sinh()), 1.0, f64::INFINITY).unwrap();
        assert_relative_eq!(g2, (1.0 / 0.5f64.tanh()).ln() / (2.0 * PI), epsilon = 1e-10);
        assert_relative_eq!(g2, 0.122_857_562_711_581_7, epsilon = 1e-10);
        let g3 = adaptive_quadrature(
            |s: f64| 1.0 / (4.0 * PI * s.sinh().powi(2)),
            1.0,
            f64::INFINITY,
        )
        .unwrap();
        assert_relative_eq!(g3, (1.0 / 1f64.tanh() - 1.0) / (4.0 * PI), epsilon = 1e-10);
        assert_relative_eq!(g3, 0.024_910_556_524_700_64, epsilon = 1e-10);
    }

    #[test]
    fn algebraic_tail_and_reversed_limits() {
        let q = Quadrature::default().with_tail(TailMap::Algebraic);
        assert_relative_eq!(
            q.integrate(|s: f64| 1.0 / (1.0 + s).powi(3), 0.0, f64::INFINITY)
                .unwrap(),
            0.5,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            adaptive_quadrature(|s: f64| s, 2.0, 0.0).unwrap(),
            -2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn singular_input_fails() {
        assert!(adaptive_quadrature(|s: f64| 1.0 / s, 0.0, 1.0).is_err());
        let oscillatory = Quadrature {
            max_intervals: 50,
            ..Default::default()
        };
        assert!(oscillatory
            .integrate(|s: f64| (1.0 / (s + 1e-6)).sin(), 0.0, 1.0)
            .is_err());
    }
}
