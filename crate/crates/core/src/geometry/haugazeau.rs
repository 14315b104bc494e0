//! Projection onto a sublevel set `{h <= level}` by Haugazeau's outer
//! approximation: each step cuts with the subgradient halfspace at the current
//! point and projects the original point onto the intersection of that cut
//! with the halfspace keeping all earlier cuts.

use super::ConstraintFunction;
use crate::error::{Result, ViError};
use crate::{Scalar, Vector};

/// Projection of `x` onto `{u : (u - y).(x - y) <= 0} ∩ {u : (u - z).(y - z) <= 0}`.
fn two_cut<T: Scalar>(x: &Vector<T>, y: &Vector<T>, z: &Vector<T>) -> Vector<T> {
    let xy = x - y;
    let yz = y - z;
    let pi = xy.dot(&yz);
    let mu = xy.norm_squared();
    let nu = yz.norm_squared();
    let rho = mu * nu - pi * pi;
    if rho <= T::epsilon() * mu * nu {
        return z.clone();
    }
    if pi * nu >= rho {
        x.add_scaled(-(T::one() + pi / nu), &yz)
    } else {
        y.add_scaled(nu * pi / rho, &xy).add_scaled(-(nu * mu / rho), &yz)
    }
}

pub(crate) fn project_level_set<T: Scalar>(
    h: &dyn ConstraintFunction<T>,
    level: T,
    x: &Vector<T>,
    tol: T,
    max_iters: usize,
) -> Result<Vector<T>> {
    let mut y = x.clone();
    for _ in 0..max_iters {
        let v = h.value(&y) - level;
        if v <= T::zero() {
            return Ok(y);
        }
        let g = h.subgradient(&y);
        let g2 = g.norm_squared();
        if !(g2 > T::zero()) {
            return Err(ViError::ZeroSubgradient);
        }
        if v / g2.sqrt() <= tol {
            return Ok(y);
        }
        let z = y.add_scaled(-v / g2, &g);
        y = two_cut(x, &y, &z);
        if !y.is_finite() {
            return Err(ViError::NonFiniteIterate { iteration: 0 });
        }
    }
    Err(ViError::DidNotConverge {
        what: "level-set projection",
        iterations: max_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NormConstraint, QuadraticConstraint};
    use crate::vector;

    #[test]
    fn disc_projection_is_radial() {
        let h = NormConstraint {
            center: vector::<f64>(&[0.0, 0.0]),
            radius: 1.0,
        };
        let p = project_level_set(&h, 0.0, &vector(&[3.0, 4.0]), 1e-12, 10_000).unwrap();
        assert!(p.distance_to(&vector(&[0.6, 0.8])) < 1e-10);
    }

    #[test]
    fn ellipse_projection_matches_boundary_scan() {
        // x^2/4 + y^2 <= 1.
        let h = QuadraticConstraint {
            matrix: vec![vec![0.25, 0.0], vec![0.0, 1.0]],
            linear: vector(&[0.0, 0.0]),
            constant: -1.0,
            lipschitz: None,
        };
        let x = vector(&[3.0, 2.0]);
        let p = project_level_set(&h, 0.0, &x, 1e-12, 100_000).unwrap();
        // Oracle: nearest of 2 * 10^6 boundary points.
        let n = 2_000_000;
        let best = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 * std::f64::consts::TAU;
                vector(&[2.0 * t.cos(), t.sin()])
            })
            .min_by(|a, b| a.distance_to(&x).partial_cmp(&b.distance_to(&x)).unwrap())
            .unwrap();
        assert!(p.distance_to(&best) < 1e-5, "{:?} vs {:?}", p, best);
    }
}
