use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::field::{AffineField, FnField, OscillatingField};
use super::ViOperator;
use crate::error::{Result, ViError};
use crate::geometry::{ConvexSet, SetKind};
use crate::oracle::{extragradient_point, ExtragradientOptions};
use crate::{Scalar, Vector};

/// Names accepted by [`builtin_problem`].
pub const CATALOG: [&str; 4] = ["fig1", "affine", "qp-grad", "saddle"];

const AFFINE_SEED: u64 = 0x5eed_aff1;

/// An operator paired with its feasible set.
#[derive(Debug, Clone)]
pub struct Problem<T: Scalar> {
    pub name: String,
    pub operator: ViOperator<T>,
    pub set: ConvexSet<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(name: impl Into<String>, operator: ViOperator<T>, set: ConvexSet<T>) -> Result<Self> {
        if operator.field().dim() != set.dim() {
            return Err(ViError::DimensionMismatch {
                expected: set.dim(),
                got: operator.field().dim(),
            });
        }
        Ok(Problem {
            name: name.into(),
            operator,
            set,
        })
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn known_solution(&self) -> Option<&Vector<T>> {
        self.operator.known_solution.as_ref()
    }
}

pub fn builtin_problem<T: Scalar>(name: &str) -> Result<Problem<T>> {
    match name {
        "fig1" => fig1(),
        "affine" => seeded_affine(),
        "qp-grad" => {
            let q = vec![vec![T::lit(2.0), T::lit(0.5)], vec![T::lit(0.5), T::one()]];
            let a = Vector::raw(vec![T::lit(1.2), T::lit(0.9)]);
            let ball = ConvexSet::ball(Vector::zeros(2), T::one())?;
            let mut p = qp_grad_problem(q, &a, ball, T::lit(2.0))?;
            p.name = name.to_string();
            Ok(p)
        }
        "saddle" => saddle(),
        other => Err(ViError::UnknownProblem(other.to_string())),
    }
}

fn fig1<T: Scalar>() -> Result<Problem<T>> {
    let field = OscillatingField {
        dim: 1,
        amplitude: T::lit(0.3),
        frequency: T::lit(25.0),
    };
    let op = ViOperator::new("fig1", Arc::new(field), false, T::lit(2.0))?
        .with_kappa(T::lit(0.5))
        .with_solution(Vector::zeros(1));
    let set = ConvexSet::cuboid(Vector::raw(vec![-T::one()]), Vector::raw(vec![T::one()]))?;
    Problem::new("fig1", op, set)
}

fn seeded_affine<T: Scalar>() -> Result<Problem<T>> {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(AFFINE_SEED);
    let mut draw = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    };
    let r = draw(n);
    let g = draw(n);
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| r[i][k] * r[j][k]).sum::<f64>() / 3.0 + if i == j { 0.5 } else { 0.0 };
            a[i][j] = s + 0.5 * (g[i][j] - g[j][i]);
        }
    }
    // Unconstrained zero outside the box, so the solution sits on a face.
    let x_u = [1.5, 0.3, -0.2];
    let b: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| a[i][j] * x_u[j]).sum::<f64>()).collect();
    let rows = a.iter().map(|row| row.iter().map(|v| T::lit(*v)).collect()).collect();
    let set = ConvexSet::cuboid(
        Vector::raw(vec![-T::one(); n]),
        Vector::raw(vec![T::one(); n]),
    )?;
    affine_problem(
        "affine",
        rows,
        Vector::raw(b.into_iter().map(T::lit).collect()),
        set,
        T::lit(3.0),
    )
}

fn saddle<T: Scalar>() -> Result<Problem<T>> {
    // L(u, v) = alpha/2 u^2 + u B.v + c u + d.v - alpha/2 |v|^2, min in u, max in v;
    // F(u, v) = (dL/du, -dL/dv).
    let alpha = T::lit(0.5);
    let b = [T::lit(0.8), T::lit(-0.6)];
    let c = T::lit(0.9);
    let d = [T::lit(-0.2), T::lit(1.1)];
    let rows = vec![
        vec![alpha, b[0], b[1]],
        vec![-b[0], alpha, T::zero()],
        vec![-b[1], T::zero(), alpha],
    ];
    let offset = Vector::raw(vec![c, -d[0], -d[1]]);
    let set = ConvexSet::cuboid(
        Vector::raw(vec![-T::one(); 3]),
        Vector::raw(vec![T::one(); 3]),
    )?;
    affine_problem("saddle", rows, offset, set, T::lit(3.0))
}

fn solution_tolerance<T: Scalar>() -> T {
    T::lit(1e-12).max(T::lit(100.0) * T::epsilon())
}

/// `F(x) = A x + b` over `set`. Monotonicity is read off the symmetric part
/// of `A`; for monotone problems the solution is computed by extragradient
/// from several starts, and disagreement between the starts is an error.
pub fn affine_problem<T: Scalar>(
    name: &str,
    rows: Vec<Vec<T>>,
    offset: Vector<T>,
    set: ConvexSet<T>,
    rho_f: T,
) -> Result<Problem<T>> {
    let field = AffineField::new(rows, offset)?;
    let monotone = symmetric_part_is_psd(&field);
    let op = ViOperator::new(name, Arc::new(field), monotone, rho_f)?;
    let mut problem = Problem::new(name, op, set)?;
    if monotone {
        let x_star = multistart_solution(&problem)?;
        problem.operator.known_solution = Some(x_star);
    }
    Ok(problem)
}

/// Gradient field `F(x) = Q (x - a)` of `(x - a).Q(x - a) / 2` over a ball.
/// An interior `a` is the solution; otherwise it is found by extragradient.
pub fn qp_grad_problem<T: Scalar>(q: Vec<Vec<T>>, a: &Vector<T>, ball: ConvexSet<T>, rho_f: T) -> Result<Problem<T>> {
    if !matches!(ball.kind(), SetKind::Ball { .. }) {
        return Err(ViError::InvalidSet("qp-grad expects a ball".into()));
    }
    let n = a.dim();
    if q.len() != n || q.iter().any(|r| r.len() != n) {
        return Err(ViError::DimensionMismatch {
            expected: n,
            got: q.len(),
        });
    }
    let qa: Vec<T> = q.iter().map(|row| row.iter().zip(a.iter()).map(|(m, v)| *m * *v).sum()).collect();
    let offset = Vector::raw(qa.into_iter().map(|v| -v).collect());
    let field = AffineField::new(q, offset)?;
    let monotone = symmetric_part_is_psd(&field);
    let op = ViOperator::new("qp-grad", Arc::new(field), monotone, rho_f)?;
    let inside = ball.contains(a, T::zero())? && ball.distance(a)? == T::zero();
    let mut problem = Problem::new("qp-grad", op, ball)?;
    if inside {
        problem.operator.known_solution = Some(a.clone());
    } else if monotone {
        problem.operator.known_solution = Some(multistart_solution(&problem)?);
    }
    Ok(problem)
}

fn multistart_solution<T: Scalar>(problem: &Problem<T>) -> Result<Vector<T>> {
    let n = problem.dim();
    let tol = match problem.set.kind() {
        SetKind::Ball { .. } | SetKind::Box { .. } => solution_tolerance::<T>(),
        // Iterative projections are only accurate to their own tolerance.
        _ => solution_tolerance::<T>().max(T::lit(10.0) * problem.set.tolerances().projection),
    };
    let starts = [
        Vector::zeros(n),
        Vector::raw(vec![T::lit(10.0); n]),
        Vector::raw((0..n).map(|i| if i % 2 == 0 { T::lit(-10.0) } else { T::lit(10.0) }).collect()),
    ];
    let mut found: Vec<Vector<T>> = Vec::with_capacity(starts.len());
    for start in starts {
        let opts = ExtragradientOptions {
            tol,
            max_iters: 200_000,
            start: Some(start),
            ..ExtragradientOptions::default()
        };
        found.push(extragradient_point(problem, &opts)?);
    }
    let agree = T::lit(1e-6).max(T::epsilon().sqrt());
    for x in &found[1..] {
        if x.distance_to(&found[0]) > agree {
            return Err(ViError::NonUniqueSolution(problem.name.clone()));
        }
    }
    Ok(found.swap_remove(0))
}

/// Cholesky test of `(A + A^T)/2 + 1e-12 I`.
fn symmetric_part_is_psd<T: Scalar>(field: &AffineField<T>) -> bool {
    let rows = field.rows();
    let n = rows.len();
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let sym = 0.5 * (rows[i][j].to_f64_lossy() + rows[j][i].to_f64_lossy()) + if i == j { 1e-12 } else { 0.0 };
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = sym - s;
                if d <= 0.0 {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (sym - s) / l[j][j];
            }
        }
    }
    true
}

/// Closure-backed problem helper for tests and configs.
pub fn fn_problem<T: Scalar>(
    name: &str,
    dim: usize,
    f: impl Fn(&Vector<T>) -> Vector<T> + Send + Sync + 'static,
    monotone: bool,
    rho_f: T,
    set: ConvexSet<T>,
) -> Result<Problem<T>> {
    let op = ViOperator::new(name, Arc::new(FnField::new(dim, f)), monotone, rho_f)?;
    Problem::new(name, op, set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::natural_residual;
    use crate::vector;

    #[test]
    fn fig1_values() {
        let p = builtin_problem::<f64>("fig1").unwrap();
        assert_eq!(p.operator.eval(&vector(&[0.0])).unwrap(), vector(&[0.0]));
        // sin(25) = -0.13235175009777303 to 17 digits.
        let v = p.operator.eval(&vector(&[1.0])).unwrap()[0];
        assert!((v - (1.0 + 0.3 * -0.132_351_750_097_773_03)).abs() < 1e-15);
        assert!((v - 0.9603).abs() < 1e-4);
    }

    #[test]
    fn unknown_problem() {
        assert!(matches!(builtin_problem::<f64>("nope"), Err(ViError::UnknownProblem(_))));
    }

    #[test]
    fn catalog_solutions_are_residual_free() {
        for name in CATALOG {
            let p = builtin_problem::<f64>(name).unwrap();
            let x = p.known_solution().unwrap().clone();
            assert!(natural_residual(&p.operator, &p.set, &x).unwrap() < 1e-9, "{name}");
            assert!(p.set.norm_bound().unwrap() < p.operator.rho_f, "{name}");
        }
    }

    #[test]
    fn affine_solution_on_a_face() {
        let p = builtin_problem::<f64>("affine").unwrap();
        let x = p.known_solution().unwrap();
        assert!(x.max_abs() > 1.0 - 1e-9, "{:?}", x);
        assert!(p.operator.monotone);
    }

    #[test]
    fn qp_grad_interior_minimizer() {
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let a = vector(&[0.2, -0.3]);
        let p = qp_grad_problem(q, &a, ConvexSet::ball(vector(&[0.0, 0.0]), 1.0).unwrap(), 2.0).unwrap();
        assert_eq!(p.known_solution(), Some(&a));
    }

    #[test]
    fn qp_grad_boundary_solution() {
        let p = builtin_problem::<f64>("qp-grad").unwrap();
        let x = p.known_solution().unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_psd_affine_is_not_monotone() {
        let set = ConvexSet::cuboid(vector(&[-1.0]), vector(&[1.0])).unwrap();
        let p = affine_problem("neg", vec![vec![-1.0]], vector(&[0.0]), set, 2.0).unwrap();
        assert!(!p.operator.monotone);
        assert!(p.known_solution().is_none());
    }

    #[test]
    fn f32_catalog() {
        for name in CATALOG {
            let p = builtin_problem::<f32>(name).unwrap();
            assert!(p.known_solution().is_some(), "{name}");
        }
    }
}
