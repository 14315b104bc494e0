// Deterministic low-discrepancy point sets (Halton) used by the sampling
// estimators, so bounds and margins are reproducible without a seed.

use crate::{Scalar, Vector};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    out
}

/// `index`-th Halton point in `[0, 1)^dims`, `index >= 1`. Dimensions beyond
/// the prime table reuse bases with a scrambled index.
pub(crate) fn halton(index: u64, dims: usize) -> Vec<f64> {
    (0..dims)
        .map(|j| {
            let base = PRIMES[j % PRIMES.len()];
            let shift = (j / PRIMES.len()) as u64 * 7919;
            radical_inverse(index + shift, base)
        })
        .collect()
}

fn direction(u: &[f64], dim: usize) -> Vec<f64> {
    let v: Vec<f64> = u[..dim].iter().map(|c| 2.0 * c - 1.0).collect();
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n < 1e-12 {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        e
    } else {
        v.iter().map(|c| c / n).collect()
    }
}

/// `n` points of `radius * B` around the origin: even indices on the sphere,
/// odd indices spread through the interior.
pub(crate) fn ball_points<T: Scalar>(dim: usize, radius: T, n: usize) -> Vec<Vector<T>> {
    let r = radius.to_f64_lossy();
    (0..n)
        .map(|i| {
            let u = halton(i as u64 + 1, dim + 1);
            let dir = direction(&u, dim);
            let scale = if i % 2 == 0 {
                1.0
            } else {
                u[dim].powf(1.0 / dim as f64)
            };
            Vector::raw(dir.iter().map(|c| T::lit(c * scale * r)).collect())
        })
        .collect()
}

/// Points of `region_radius * B` outside the closed ball `target + eps B`.
/// Half are uniform over the region; half have log-uniform distance from the
/// target in `(eps, diameter]`, which concentrates samples near the excluded
/// ball where orientation margins are smallest.
pub(crate) fn shell_points<T: Scalar>(
    target: &Vector<T>,
    eps: T,
    region_radius: T,
    n: usize,
) -> Vec<Vector<T>> {
    let dim = target.dim();
    let e = eps.to_f64_lossy();
    let region = region_radius.to_f64_lossy();
    let reach = (region + target.norm().to_f64_lossy()).max(e * 1.0001);
    let t = target.to_f64_vec();
    let mut out = Vec::with_capacity(n);
    let uniform = ball_points::<f64>(dim, region, n / 2 + 1);
    for p in uniform {
        let d: f64 = p.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d > e {
            out.push(Vector::raw(p.iter().map(|c| T::lit(*c)).collect()));
        }
    }
    let mut i = 0u64;
    let mut attempts = 0;
    while out.len() < n && attempts < 50 * n + 100 {
        attempts += 1;
        i += 1;
        let u = halton(i, dim + 1);
        let dir = direction(&u, dim);
        let r = e * (reach / e).powf(u[dim]);
        let x: Vec<f64> = t.iter().zip(&dir).map(|(a, b)| a + r * b).collect();
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm <= region && r > e {
            out.push(Vector::raw(x.iter().map(|c| T::lit(*c)).collect()));
        }
    }
    out
}
