//! Polar-cone elements and the unit-norm sharp penalty mapping.
//!
//! For a point `x` the penalty direction is
//!
//! * `0` when `x` is in `X`,
//! * a unit element of the polar cone `K_X(x) = {p : p.(x - y) >= 0, y in X}`
//!   when `0 < dist(x, X) <= eps` (the shell),
//! * a unit element of the `eps`-strong cone
//!   `{p : p.(x - y) >= eps ||p||, y in X}` when `dist(x, X) > eps`.
//!
//! The mapping is set-valued; one deterministic selection is returned per method.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ViError};
use crate::geometry::{ConvexSet, SetKind};
use crate::{Scalar, Vector};

/// How a polar-cone element is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    /// `x - proj_X(x)`.
    Projection,
    /// A subgradient of the constraint function at `x`.
    Subgradient,
    /// A subgradient at the point where the ray from the interior point to `x` leaves `X`.
    Minkowski,
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PenaltyKind::Projection => "projection",
            PenaltyKind::Subgradient => "subgradient",
            PenaltyKind::Minkowski => "minkowski",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyMethod<T> {
    pub kind: PenaltyKind,
    pub epsilon: T,
}

impl<T: Scalar> PenaltyMethod<T> {
    pub fn new(kind: PenaltyKind, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(ViError::NonPositiveArgument {
                name: "epsilon",
                value: epsilon.to_f64_lossy(),
            });
        }
        Ok(PenaltyMethod { kind, epsilon })
    }

    pub fn projection(epsilon: T) -> Result<Self> {
        Self::new(PenaltyKind::Projection, epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Inside,
    Shell,
    Outside,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Zone::Inside => "inside",
            Zone::Shell => "shell",
            Zone::Outside => "outside",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyValue<T> {
    /// Zero inside the set, unit norm otherwise.
    pub direction: Vector<T>,
    pub zone: Zone,
    /// Whether `direction . (x - y) >= eps` for all `y` in X was certified.
    pub strong: bool,
}

/// An unnormalized element of `K_X(x)` for `x` outside the interior of `X`.
pub fn polar_cone_element<T: Scalar>(
    set: &ConvexSet<T>,
    x: &Vector<T>,
    method: &PenaltyMethod<T>,
) -> Result<Vector<T>> {
    x.ensure_dim(set.dim())?;
    match method.kind {
        PenaltyKind::Projection => {
            let p = x - &set.project(x)?;
            if p.norm() <= set.tolerances().projection {
                return Err(ViError::InsideSet);
            }
            Ok(p)
        }
        PenaltyKind::Subgradient => {
            let h = set.constraint_value(x)?;
            if h <= T::zero() {
                if set.interior_point().is_none() {
                    return Err(ViError::SlaterViolation);
                }
                if h < T::zero() {
                    return Err(ViError::InsideSet);
                }
            }
            nonzero(set.constraint_subgradient(x)?)
        }
        PenaltyKind::Minkowski => {
            let c = set.interior_point().ok_or(ViError::NoInteriorPoint)?;
            let mu = set.minkowski_gauge(x, &c)?;
            if mu < T::one() {
                return Err(ViError::InsideSet);
            }
            let boundary = c.add_scaled(T::one() / mu, &(x - &c));
            nonzero(set.constraint_subgradient(&boundary)?)
        }
    }
}

fn nonzero<T: Scalar>(g: Vector<T>) -> Result<Vector<T>> {
    if g.is_zero() || !g.is_finite() {
        Err(ViError::ZeroSubgradient)
    } else {
        Ok(g)
    }
}

const CERTIFICATE_SAMPLES: usize = 10_000;
const CERTIFICATE_TOL: f64 = 1e-8;

/// The sharp penalty mapping of a fixed set and method.
///
/// Holds a lazily built sample of the set, used to check the strong-cone
/// inequality for constructions whose support function has no closed form.
#[derive(Clone)]
pub struct SharpPenalty<T: Scalar> {
    set: ConvexSet<T>,
    method: PenaltyMethod<T>,
    seed: u64,
    samples: Arc<OnceLock<Vec<Vector<T>>>>,
}

impl<T: Scalar> fmt::Debug for SharpPenalty<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SharpPenalty")
            .field("set", &self.set)
            .field("method", &self.method)
            .finish()
    }
}

impl<T: Scalar> SharpPenalty<T> {
    pub fn new(set: ConvexSet<T>, method: PenaltyMethod<T>) -> Self {
        Self::with_seed(set, method, 0x5eed)
    }

    pub fn with_seed(set: ConvexSet<T>, method: PenaltyMethod<T>, seed: u64) -> Self {
        SharpPenalty {
            set,
            method,
            seed,
            samples: Arc::new(OnceLock::new()),
        }
    }

    pub fn set(&self) -> &ConvexSet<T> {
        &self.set
    }

    pub fn method(&self) -> &PenaltyMethod<T> {
        &self.method
    }

    pub fn evaluate(&self, x: &Vector<T>) -> Result<PenaltyValue<T>> {
        x.ensure_dim(self.set.dim())?;
        let tol = self.set.tolerances().projection;
        let (inside, projection) = match self.set.kind() {
            SetKind::LevelSet { .. } => (self.set.contains(x, tol)?, None),
            _ => {
                let p = self.set.project(x)?;
                (x.distance_to(&p) <= tol, Some(p))
            }
        };
        if inside {
            return Ok(PenaltyValue {
                direction: Vector::zeros(x.dim()),
                zone: Zone::Inside,
                strong: false,
            });
        }
        let projection = match projection {
            Some(p) => p,
            None => self.set.project(x)?,
        };
        let dist = x.distance_to(&projection);
        let raw = match self.method.kind {
            PenaltyKind::Projection => x - &projection,
            _ => polar_cone_element(&self.set, x, &self.method)?,
        };
        let direction = raw.normalized().ok_or(ViError::ZeroSubgradient)?;
        if dist <= self.method.epsilon {
            return Ok(PenaltyValue {
                direction,
                zone: Zone::Shell,
                strong: false,
            });
        }
        let strong = match self.method.kind {
            // p.(x - y) >= p.(x - proj) = dist > eps for every y in X.
            PenaltyKind::Projection => true,
            _ => self.certify_strong(x, &direction)?,
        };
        Ok(PenaltyValue {
            direction,
            zone: Zone::Outside,
            strong,
        })
    }

    /// `min_y p.(x - y) - eps >= -tol`, i.e. `p.(x - y') >= -tol` over `y' in X + eps B`.
    fn certify_strong(&self, x: &Vector<T>, p: &Vector<T>) -> Result<bool> {
        let support = match self.set.support(p) {
            Some(s) => s,
            None => self.sampled_support(p)?,
        };
        let margin = p.dot(x) - support - self.method.epsilon;
        let ok = margin >= -T::lit(CERTIFICATE_TOL);
        if !ok {
            log::warn!(
                "{} penalty direction failed the strong-cone check at {:?} (margin {})",
                self.method.kind,
                x.as_slice(),
                margin
            );
        }
        Ok(ok)
    }

    fn sampled_support(&self, p: &Vector<T>) -> Result<T> {
        if self.samples.get().is_none() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let pts = self.set.sample(&mut rng, CERTIFICATE_SAMPLES)?;
            let _ = self.samples.set(pts);
        }
        let pts = self.samples.get().expect("samples initialised above");
        Ok(pts.iter().map(|y| p.dot(y)).fold(T::neg_infinity(), T::max))
    }
}

/// One-shot evaluation of the sharp penalty at `x`.
pub fn sharp_penalty<T: Scalar>(
    set: &ConvexSet<T>,
    x: &Vector<T>,
    method: &PenaltyMethod<T>,
) -> Result<PenaltyValue<T>> {
    SharpPenalty::new(set.clone(), *method).evaluate(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MaxAbsConstraint, QuadraticConstraint};
    use crate::vector;
    use rand::Rng;

    fn method(kind: PenaltyKind, eps: f64) -> PenaltyMethod<f64> {
        PenaltyMethod::new(kind, eps).unwrap()
    }

    #[test]
    fn projection_element_of_ball() {
        let b = ConvexSet::ball(vector(&[0.0, 0.0]), 1.0).unwrap();
        let p = polar_cone_element(&b, &vector(&[2.0, 0.0]), &method(PenaltyKind::Projection, 0.1)).unwrap();
        assert_eq!(p, vector(&[1.0, 0.0]));
    }

    #[test]
    fn subgradient_element_of_quadratic_level_set() {
        let h = Arc::new(QuadraticConstraint {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            linear: vector(&[0.0, 0.0]),
            constant: -1.0,
            lipschitz: None,
        });
        let set = ConvexSet::level_set(2, h, Some(vector(&[0.0, 0.0]))).unwrap();
        let p = polar_cone_element(&set, &vector(&[0.0, 2.0]), &method(PenaltyKind::Subgradient, 0.1)).unwrap();
        assert_eq!(p, vector(&[0.0, 4.0]));
    }

    #[test]
    fn minkowski_element_of_box_level_set() {
        let h = Arc::new(MaxAbsConstraint {
            center: vector(&[0.0, 0.0]),
            half_widths: vector(&[1.0, 1.0]),
        });
        let set = ConvexSet::level_set(2, h, Some(vector(&[0.0, 0.0]))).unwrap();
        let x = vector(&[3.0, 0.0]);
        let p = polar_cone_element(&set, &x, &method(PenaltyKind::Minkowski, 0.1)).unwrap();
        assert_eq!(p, vector(&[1.0, 0.0]));
        // Oracle: p.(x - y) >= 0 on 10^4 points of the box.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let y = vector(&[rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)]);
            assert!(p.dot(&(&x - &y)) >= 0.0);
        }
    }

    #[test]
    fn error_paths() {
        let b = ConvexSet::ball(vector(&[0.0, 0.0]), 1.0).unwrap();
        let inside = vector(&[0.2, 0.0]);
        for kind in [PenaltyKind::Projection, PenaltyKind::Subgradient, PenaltyKind::Minkowski] {
            assert_eq!(polar_cone_element(&b, &inside, &method(kind, 0.1)), Err(ViError::InsideSet));
        }
        // Degenerate box {0}: no interior point, so no Slater point either.
        let point = ConvexSet::cuboid(vector(&[0.0]), vector(&[0.0])).unwrap();
        assert_eq!(
            polar_cone_element(&point, &vector(&[0.0]), &method(PenaltyKind::Subgradient, 0.1)),
            Err(ViError::SlaterViolation)
        );
        // ... yet outside the singleton the subgradient is a valid cone element.
        assert_eq!(
            polar_cone_element(&point, &vector(&[2.0]), &method(PenaltyKind::Subgradient, 0.1)).unwrap(),
            vector(&[1.0])
        );
        assert!(PenaltyMethod::<f64>::new(PenaltyKind::Projection, 0.0).is_err());
    }

    #[test]
    fn sharp_penalty_zones() {
        let interval = ConvexSet::cuboid(vector(&[-1.0]), vector(&[1.0])).unwrap();
        let v = sharp_penalty(&interval, &vector(&[2.0]), &method(PenaltyKind::Projection, 0.1)).unwrap();
        assert_eq!(v.direction, vector(&[1.0]));
        assert_eq!(v.zone, Zone::Outside);
        assert!(v.strong);

        let b = ConvexSet::ball(vector(&[0.0, 0.0]), 1.0).unwrap();
        let v = sharp_penalty(&b, &vector(&[0.5, 0.0]), &method(PenaltyKind::Projection, 0.1)).unwrap();
        assert_eq!(v.zone, Zone::Inside);
        assert!(v.direction.is_zero());

        let v = sharp_penalty(&b, &vector(&[1.1, 0.0]), &method(PenaltyKind::Projection, 0.2)).unwrap();
        assert_eq!(v.zone, Zone::Shell);
        assert_eq!(v.direction, vector(&[1.0, 0.0]));
        assert!(!v.strong);
    }

    #[test]
    fn non_projection_methods_certify_strong_on_ball_and_polytope() {
        let sq = ConvexSet::cuboid(vector(&[-1.0, -1.0]), vector(&[1.0, 1.0])).unwrap();
        let x = vector(&[3.0, 0.5]);
        for kind in [PenaltyKind::Subgradient, PenaltyKind::Minkowski] {
            let v = sharp_penalty(&sq, &x, &method(kind, 0.1)).unwrap();
            assert_eq!(v.zone, Zone::Outside);
            assert!((v.direction.norm() - 1.0).abs() < 1e-12);
            assert!(v.strong, "{kind}");
        }
        let tri = ConvexSet::halfspaces(
            vec![
                crate::Halfspace::new(vector(&[1.0, 1.0]), 1.0),
                crate::Halfspace::new(vector(&[-1.0, 0.0]), 0.0),
                crate::Halfspace::new(vector(&[0.0, -1.0]), 0.0),
            ],
            Some(vector(&[0.2, 0.2])),
        )
        .unwrap();
        let v = sharp_penalty(&tri, &vector(&[2.0, 2.0]), &method(PenaltyKind::Minkowski, 0.1)).unwrap();
        assert!(v.strong);
    }

    #[test]
    fn failed_certificate_downgrades_instead_of_failing() {
        // Subgradient of the box constraint at a far corner-adjacent point is
        // an axis direction, which is not eps-strong for points near the diagonal.
        let sq = ConvexSet::cuboid(vector(&[-1.0, -1.0]), vector(&[1.0, 1.0])).unwrap();
        let x = vector(&[1.3, 1.25]);
        let v = sharp_penalty(&sq, &x, &method(PenaltyKind::Subgradient, 0.35)).unwrap();
        assert_eq!(v.zone, Zone::Outside);
        assert!(!v.strong);
    }
}
