//! Reductions whose result does not depend on the number of threads.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Dot product summed over fixed-size chunks, chunk totals added in order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// `Σ w_i a_i b_i` with the same chunking as [`dot`].
pub fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = w
        .par_chunks(CHUNK)
        .zip(a.par_chunks(CHUNK))
        .zip(b.par_chunks(CHUNK))
        .map(|((w, x), y)| {
            w.iter()
                .zip(x)
                .zip(y)
                .map(|((w, p), q)| w * p * q)
                .sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Kahan-compensated sum, sequential.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_dot_is_thread_independent() {
        let a: Vec<f64> = (0..50_000u64)
            .map(|i| ((i * 7919) % 1000) as f64 * 1e-3 - 0.37)
            .collect();
        let b: Vec<f64> = (0..50_000u64)
            .map(|i| ((i * 104_729) % 997) as f64 * 1e-2)
            .collect();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| dot(&a, &b));
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(7)
            .build()
            .unwrap()
            .install(|| dot(&a, &b));
        assert_eq!(one.to_bits(), many.to_bits());
    }

    #[test]
    fn kahan() {
        let v = std::iter::once(1.0).chain(std::iter::repeat(1e-16).take(10_000));
        assert!((kahan_sum(v) - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
