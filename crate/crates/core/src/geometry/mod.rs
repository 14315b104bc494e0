//! Closed bounded convex sets: projections, distances, membership, the
//! Minkowski gauge and Euclidean expansions `X + eps B`.
//!
//! Every set is immutable once built and all queries are pure.

mod constraint;
mod dykstra;
mod haugazeau;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

pub use constraint::{
    ConstraintFunction, FnConstraint, MaxAbsConstraint, NormConstraint, QuadraticConstraint,
};
pub use dykstra::Halfspace;

use crate::error::{Result, ViError};
use crate::{Scalar, Vector};

/// Numerical tolerances for iterative geometric routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Residual tolerance of iterative projections and the membership slack for zoning.
    pub projection: T,
    /// Relative tolerance of bisection on the gauge ray.
    pub gauge: T,
    /// Cycle cap for the halfspace projection.
    pub max_cycles: usize,
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances {
            projection: T::lit(1e-10),
            gauge: T::lit(1e-10),
            max_cycles: 200_000,
        }
    }
}

#[derive(Clone)]
pub enum SetKind<T: Scalar> {
    Ball {
        center: Vector<T>,
        radius: T,
    },
    Box {
        lower: Vector<T>,
        upper: Vector<T>,
    },
    Halfspaces {
        constraints: Vec<Halfspace<T>>,
        interior_point: Option<Vector<T>>,
    },
    /// `{x : h(x) <= level}`.
    LevelSet {
        h: Arc<dyn ConstraintFunction<T>>,
        level: T,
        interior_point: Option<Vector<T>>,
    },
    /// `base + eps B`, represented through the distance to `base`.
    Expanded {
        base: std::boxed::Box<ConvexSet<T>>,
        eps: T,
    },
}

#[derive(Clone)]
pub struct ConvexSet<T: Scalar> {
    kind: SetKind<T>,
    dim: usize,
    tol: Tolerances<T>,
}

impl<T: Scalar> fmt::Debug for ConvexSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SetKind::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", &center.as_slice())
                .field("radius", radius)
                .finish(),
            SetKind::Box { lower, upper } => f
                .debug_struct("Box")
                .field("lower", &lower.as_slice())
                .field("upper", &upper.as_slice())
                .finish(),
            SetKind::Halfspaces { constraints, .. } => f
                .debug_struct("Halfspaces")
                .field("count", &constraints.len())
                .finish(),
            SetKind::LevelSet { h, level, .. } => f
                .debug_struct("LevelSet")
                .field("h", &h.describe())
                .field("level", level)
                .finish(),
            SetKind::Expanded { base, eps } => f
                .debug_struct("Expanded")
                .field("base", base)
                .field("eps", eps)
                .finish(),
        }
    }
}

impl<T: Scalar> ConvexSet<T> {
    pub fn ball(center: Vector<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(ViError::InvalidSet(format!("ball radius must be positive, got {radius}")));
        }
        let dim = center.dim();
        Ok(Self::from_kind(SetKind::Ball { center, radius }, dim))
    }

    pub fn cuboid(lower: Vector<T>, upper: Vector<T>) -> Result<Self> {
        upper.ensure_dim(lower.dim())?;
        if let Some(i) = (0..lower.dim()).find(|&i| lower[i] > upper[i]) {
            return Err(ViError::InvalidSet(format!(
                "box bounds inverted on axis {i}: {} > {}",
                lower[i], upper[i]
            )));
        }
        let dim = lower.dim();
        Ok(Self::from_kind(SetKind::Box { lower, upper }, dim))
    }

    /// Intersection of halfspaces; rejected unless every axis direction
    /// `+-e_i` is blocked by some constraint.
    pub fn halfspaces(constraints: Vec<Halfspace<T>>, interior_point: Option<Vector<T>>) -> Result<Self> {
        let dim = constraints
            .first()
            .map(|h| h.normal.dim())
            .ok_or_else(|| ViError::InvalidSet("no halfspaces given".into()))?;
        for h in &constraints {
            h.normal.ensure_dim(dim)?;
            if h.normal.is_zero() || !h.offset.is_finite() {
                return Err(ViError::InvalidSet("halfspace with zero normal or non-finite offset".into()));
            }
        }
        for axis in 0..dim {
            for sign in [T::one(), -T::one()] {
                let blocked = constraints.iter().any(|h| sign * h.normal[axis] > T::zero());
                if !blocked {
                    let s = if sign > T::zero() { "+" } else { "-" };
                    return Err(ViError::UnboundedSet {
                        direction: format!("{s}e_{axis}"),
                    });
                }
            }
        }
        if let Some(c) = &interior_point {
            c.ensure_dim(dim)?;
            if dykstra::max_violation(&constraints, c) >= T::zero() {
                return Err(ViError::CenterNotInterior);
            }
        }
        Ok(Self::from_kind(
            SetKind::Halfspaces {
                constraints,
                interior_point,
            },
            dim,
        ))
    }

    /// `{x : h(x) <= 0}`. A given interior point must satisfy `h < 0`.
    pub fn level_set(
        dim: usize,
        h: Arc<dyn ConstraintFunction<T>>,
        interior_point: Option<Vector<T>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(ViError::EmptyVector);
        }
        if let Some(c) = &interior_point {
            c.ensure_dim(dim)?;
            if !(h.value(c) < T::zero()) {
                return Err(ViError::CenterNotInterior);
            }
        }
        Ok(Self::from_kind(
            SetKind::LevelSet {
                h,
                level: T::zero(),
                interior_point,
            },
            dim,
        ))
    }

    fn from_kind(kind: SetKind<T>, dim: usize) -> Self {
        ConvexSet {
            kind,
            dim,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances<T>) -> Self {
        if let SetKind::Expanded { base, .. } = &mut self.kind {
            **base = base.as_ref().clone().with_tolerances(tol);
        }
        self.tol = tol;
        self
    }

    pub fn kind(&self) -> &SetKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tolerances(&self) -> &Tolerances<T> {
        &self.tol
    }

    /// Euclidean projection. Exact for balls, boxes and expansions of exactly
    /// projectable sets; iterative for halfspaces and for level sets without a direct method.
    pub fn project(&self, x: &Vector<T>) -> Result<Vector<T>> {
        x.ensure_dim(self.dim)?;
        match &self.kind {
            SetKind::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center.add_scaled(*radius / n, &d))
                }
            }
            SetKind::Box { lower, upper } => Ok(Vector::raw(
                (0..self.dim).map(|i| x[i].max(lower[i]).min(upper[i])).collect(),
            )),
            SetKind::Halfspaces { constraints, .. } => {
                dykstra::project_dykstra(constraints, x, self.tol.projection, self.tol.max_cycles)
            }
            SetKind::LevelSet { h, level, .. } => match h.project_sublevel(*level, x) {
                Some(p) => p,
                None => haugazeau::project_level_set(h.as_ref(), *level, x, self.tol.projection, self.tol.max_cycles),
            },
            SetKind::Expanded { base, eps } => {
                let p = base.project(x)?;
                let d = x.distance_to(&p);
                if d <= *eps {
                    Ok(x.clone())
                } else {
                    Ok(p.add_scaled(*eps / d, &(x - &p)))
                }
            }
        }
    }

    pub fn distance(&self, x: &Vector<T>) -> Result<T> {
        Ok(x.distance_to(&self.project(x)?))
    }

    /// `distance(x) <= tol`; for level sets `h(x) <= tol * max(1, L)`.
    pub fn contains(&self, x: &Vector<T>, tol: T) -> Result<bool> {
        x.ensure_dim(self.dim)?;
        match &self.kind {
            SetKind::LevelSet { h, level, .. } => {
                let scale = h.lipschitz_bound().unwrap_or(T::one()).max(T::one());
                Ok(h.value(x) - *level <= tol * scale)
            }
            SetKind::Halfspaces { constraints, .. }
                if dykstra::max_violation(constraints, x) <= T::zero() =>
            {
                Ok(true)
            }
            _ => Ok(self.distance(x)? <= tol),
        }
    }

    /// Exact membership used for ray bisection.
    fn is_member(&self, y: &Vector<T>) -> Result<bool> {
        match &self.kind {
            SetKind::Ball { center, radius } => Ok(y.distance_to(center) <= *radius),
            SetKind::Box { lower, upper } => {
                Ok((0..self.dim).all(|i| lower[i] <= y[i] && y[i] <= upper[i]))
            }
            SetKind::Halfspaces { constraints, .. } => {
                Ok(dykstra::max_violation(constraints, y) <= T::zero())
            }
            SetKind::LevelSet { h, level, .. } => Ok(h.value(y) <= *level),
            SetKind::Expanded { base, eps } => Ok(base.distance(y)? <= *eps),
        }
    }

    fn is_strictly_interior(&self, c: &Vector<T>) -> Result<bool> {
        c.ensure_dim(self.dim)?;
        match &self.kind {
            SetKind::Ball { center, radius } => Ok(c.distance_to(center) < *radius),
            SetKind::Box { lower, upper } => {
                Ok((0..self.dim).all(|i| lower[i] < c[i] && c[i] < upper[i]))
            }
            SetKind::Halfspaces { constraints, .. } => {
                Ok(dykstra::max_violation(constraints, c) < T::zero())
            }
            SetKind::LevelSet { h, level, .. } => Ok(h.value(c) < *level),
            SetKind::Expanded { base, eps } => Ok(base.distance(c)? < *eps),
        }
    }

    /// Bracket `[t_in, t_out]` of the exit parameter of the ray `c + t dir`,
    /// with `c + t_in dir` inside. `hint` is an initial outside guess.
    fn bisect_exit(&self, c: &Vector<T>, dir: &Vector<T>, hint: T) -> Result<(T, T)> {
        let two = T::lit(2.0);
        let mut lo = T::zero();
        let mut hi = hint;
        let mut doublings = 0;
        while self.is_member(&c.add_scaled(hi, dir))? {
            lo = hi;
            hi = hi * two;
            doublings += 1;
            if doublings > 200 || !hi.is_finite() {
                return Err(ViError::DidNotConverge {
                    what: "gauge bracket",
                    iterations: doublings,
                });
            }
        }
        let mut iterations = 0;
        while hi - lo > self.tol.gauge * hi {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.is_member(&c.add_scaled(mid, dir))? {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if iterations > 4096 {
                return Err(ViError::DidNotConverge {
                    what: "gauge bisection",
                    iterations,
                });
            }
        }
        Ok((lo, hi))
    }

    /// Largest `t` with `c + t dir` in the set; `c` must be strictly interior.
    pub fn ray_exit(&self, c: &Vector<T>, dir: &Vector<T>) -> Result<T> {
        dir.ensure_dim(self.dim)?;
        if !self.is_strictly_interior(c)? {
            return Err(ViError::CenterNotInterior);
        }
        if dir.is_zero() {
            return Ok(T::infinity());
        }
        match &self.kind {
            SetKind::Ball { center, radius } => {
                let off = c - center;
                let a = dir.norm_squared();
                let b = dir.dot(&off);
                let k = off.norm_squared() - *radius * *radius;
                Ok((-b + (b * b - a * k).sqrt()) / a)
            }
            SetKind::Box { lower, upper } => {
                let mut t = T::infinity();
                for i in 0..self.dim {
                    if dir[i] > T::zero() {
                        t = t.min((upper[i] - c[i]) / dir[i]);
                    } else if dir[i] < T::zero() {
                        t = t.min((lower[i] - c[i]) / dir[i]);
                    }
                }
                Ok(t)
            }
            SetKind::Halfspaces { constraints, .. } => {
                let mut t = T::infinity();
                for h in constraints {
                    let rate = h.normal.dot(dir);
                    if rate > T::zero() {
                        t = t.min((h.offset - h.normal.dot(c)) / rate);
                    }
                }
                Ok(t)
            }
            _ => {
                let (lo, hi) = self.bisect_exit(c, dir, T::one())?;
                Ok((lo + hi) / T::lit(2.0))
            }
        }
    }

    /// `mu(x, c) = inf { theta >= 0 : c + (x - c)/theta in X }`; `mu <= 1` iff `x` in X.
    pub fn minkowski_gauge(&self, x: &Vector<T>, center: &Vector<T>) -> Result<T> {
        x.ensure_dim(self.dim)?;
        let dir = x - center;
        let t = self.ray_exit(center, &dir)?;
        if t.is_infinite() {
            return Ok(T::zero());
        }
        Ok(T::one() / t)
    }

    /// Euclidean expansion `X + eps B`.
    pub fn expand(&self, eps: T) -> Result<Self> {
        if !(eps > T::zero()) {
            return Err(ViError::NonPositiveArgument {
                name: "eps",
                value: eps.to_f64_lossy(),
            });
        }
        let kind = match &self.kind {
            SetKind::Ball { center, radius } => SetKind::Ball {
                center: center.clone(),
                radius: *radius + eps,
            },
            SetKind::LevelSet {
                h,
                level,
                interior_point,
            } => {
                let l = h.lipschitz_bound().ok_or(ViError::MissingLipschitzBound)?;
                SetKind::LevelSet {
                    h: h.clone(),
                    level: *level + l * eps,
                    interior_point: interior_point.clone(),
                }
            }
            SetKind::Expanded { base, eps: e0 } => SetKind::Expanded {
                base: base.clone(),
                eps: *e0 + eps,
            },
            _ => SetKind::Expanded {
                base: std::boxed::Box::new(self.clone()),
                eps,
            },
        };
        Ok(ConvexSet {
            kind,
            dim: self.dim,
            tol: self.tol,
        })
    }

    /// A known strictly interior point, if the representation offers one.
    pub fn interior_point(&self) -> Option<Vector<T>> {
        match &self.kind {
            SetKind::Ball { center, .. } => Some(center.clone()),
            SetKind::Box { lower, upper } => {
                let mid = Vector::raw(
                    (0..self.dim)
                        .map(|i| (lower[i] + upper[i]) / T::lit(2.0))
                        .collect(),
                );
                (0..self.dim).all(|i| lower[i] < upper[i]).then_some(mid)
            }
            SetKind::Halfspaces { interior_point, .. } => interior_point.clone(),
            SetKind::LevelSet { interior_point, .. } => interior_point.clone(),
            SetKind::Expanded { base, .. } => base.interior_point(),
        }
    }

    /// Value of the natural convex constraint function of the set
    /// (`<= 0` exactly on the set).
    pub fn constraint_value(&self, x: &Vector<T>) -> Result<T> {
        x.ensure_dim(self.dim)?;
        Ok(match &self.kind {
            SetKind::Ball { center, radius } => x.distance_to(center) - *radius,
            SetKind::Box { lower, upper } => (0..self.dim)
                .map(|i| (lower[i] - x[i]).max(x[i] - upper[i]))
                .fold(T::neg_infinity(), T::max),
            SetKind::Halfspaces { constraints, .. } => dykstra::max_violation(constraints, x),
            SetKind::LevelSet { h, level, .. } => h.value(x) - *level,
            SetKind::Expanded { base, eps } => base.distance(x)? - *eps,
        })
    }

    /// A subgradient of [`Self::constraint_value`] at `x`.
    pub fn constraint_subgradient(&self, x: &Vector<T>) -> Result<Vector<T>> {
        x.ensure_dim(self.dim)?;
        Ok(match &self.kind {
            SetKind::Ball { center, .. } => (x - center)
                .normalized()
                .unwrap_or_else(|| Vector::zeros(self.dim)),
            SetKind::Box { lower, upper } => {
                let mut best = (0, T::neg_infinity(), T::zero());
                for i in 0..self.dim {
                    let below = lower[i] - x[i];
                    let above = x[i] - upper[i];
                    if below > best.1 {
                        best = (i, below, -T::one());
                    }
                    if above > best.1 {
                        best = (i, above, T::one());
                    }
                }
                let mut g = Vector::zeros(self.dim);
                g[best.0] = best.2;
                g
            }
            SetKind::Halfspaces { constraints, .. } => {
                let mut best: Option<(&Halfspace<T>, T)> = None;
                for h in constraints {
                    let v = h.violation(x) / h.normal.norm();
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((h, v));
                    }
                }
                let h = best.expect("halfspace set is non-empty").0;
                h.normal.scale(T::one() / h.normal.norm())
            }
            SetKind::LevelSet { h, .. } => h.subgradient(x),
            SetKind::Expanded { base, .. } => {
                let p = base.project(x)?;
                (x - &p).normalized().unwrap_or_else(|| Vector::zeros(self.dim))
            }
        })
    }

    /// Lipschitz bound of [`Self::constraint_value`].
    pub fn lipschitz_bound(&self) -> Option<T> {
        match &self.kind {
            SetKind::LevelSet { h, .. } => h.lipschitz_bound(),
            _ => Some(T::one()),
        }
    }

    /// Support function `max_{y in X} p . y` where a closed form exists.
    pub fn support(&self, p: &Vector<T>) -> Option<T> {
        match &self.kind {
            SetKind::Ball { center, radius } => Some(p.dot(center) + *radius * p.norm()),
            SetKind::Box { lower, upper } => Some(
                (0..self.dim)
                    .map(|i| (p[i] * lower[i]).max(p[i] * upper[i]))
                    .sum(),
            ),
            SetKind::Expanded { base, eps } => base.support(p).map(|s| s + *eps * p.norm()),
            _ => None,
        }
    }

    /// Upper bound on `sup_{x in X} ||x||` where it can be computed exactly.
    pub fn norm_bound(&self) -> Option<T> {
        match &self.kind {
            SetKind::Ball { center, radius } => Some(center.norm() + *radius),
            SetKind::Box { lower, upper } => Some(
                (0..self.dim)
                    .map(|i| {
                        let m = lower[i].abs().max(upper[i].abs());
                        m * m
                    })
                    .sum::<T>()
                    .sqrt(),
            ),
            SetKind::Expanded { base, eps } => base.norm_bound().map(|b| b + *eps),
            _ => None,
        }
    }

    /// Axis-aligned box containing the set. Exact for balls, boxes and their
    /// expansions; for halfspaces and level sets built from projections of far
    /// points, so only approximately tight.
    pub fn bounding_box(&self) -> Result<(Vector<T>, Vector<T>)> {
        match &self.kind {
            SetKind::Ball { center, radius } => Ok((
                center.map(|c| c - *radius),
                center.map(|c| c + *radius),
            )),
            SetKind::Box { lower, upper } => Ok((lower.clone(), upper.clone())),
            SetKind::Expanded { base, eps } => {
                let (lo, hi) = base.bounding_box()?;
                Ok((lo.map(|c| c - *eps), hi.map(|c| c + *eps)))
            }
            _ => {
                let reference = self.reference_point()?;
                let far = T::lit(1e3) * (T::one() + reference.norm());
                let mut lo = reference.clone();
                let mut hi = reference.clone();
                for axis in 0..self.dim {
                    for sign in [T::one(), -T::one()] {
                        let probe = reference.add_scaled(sign * far, &Vector::basis(self.dim, axis));
                        let p = self.project(&probe)?;
                        for i in 0..self.dim {
                            lo[i] = lo[i].min(p[i]);
                            hi[i] = hi[i].max(p[i]);
                        }
                    }
                }
                Ok((lo, hi))
            }
        }
    }

    fn reference_point(&self) -> Result<Vector<T>> {
        match self.interior_point() {
            Some(c) => Ok(c),
            None => self.project(&Vector::zeros(self.dim)),
        }
    }

    /// Points of the set obtained by projecting random points of a ball twice
    /// the size of the set; roughly half land on the boundary.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<Vector<T>>> {
        let reference = self.reference_point()?;
        let (lo, hi) = self.bounding_box()?;
        let radius = (&hi - &lo).norm().max(T::lit(1e-6));
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n {
            attempts += 1;
            if attempts > 100 * n + 1000 {
                return Err(ViError::EmptyRegion);
            }
            let z = reference.add_scaled(radius, &uniform_in_ball(rng, self.dim));
            match self.project(&z) {
                Ok(y) => out.push(y),
                Err(ViError::NoInteriorPoint) => continue,
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

/// Uniform sample from the unit ball of `R^dim`.
pub fn uniform_in_ball<T: Scalar, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector<T> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            let r: f64 = rng.gen::<f64>().powf(1.0 / dim as f64);
            return Vector::raw(g.iter().map(|v| T::lit(v / n * r)).collect());
        }
    }
}

/// Uniform sample from the unit sphere of `R^dim`.
pub fn uniform_on_sphere<T: Scalar, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector<T> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            return Vector::raw(g.iter().map(|v| T::lit(v / n)).collect());
        }
    }
}

pub fn project<T: Scalar>(set: &ConvexSet<T>, x: &Vector<T>) -> Result<Vector<T>> {
    set.project(x)
}

pub fn distance<T: Scalar>(set: &ConvexSet<T>, x: &Vector<T>) -> Result<T> {
    set.distance(x)
}

pub fn contains<T: Scalar>(set: &ConvexSet<T>, x: &Vector<T>, tol: T) -> Result<bool> {
    set.contains(x, tol)
}

pub fn minkowski_gauge<T: Scalar>(set: &ConvexSet<T>, x: &Vector<T>, center: &Vector<T>) -> Result<T> {
    set.minkowski_gauge(x, center)
}

pub fn expand<T: Scalar>(set: &ConvexSet<T>, eps: T) -> Result<ConvexSet<T>> {
    set.expand(eps)
}
