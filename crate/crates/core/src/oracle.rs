//! Independent reference solvers: an exhaustive zooming grid scan for
//! problems of dimension at most three, and the classical two-projection
//! extragradient method for monotone problems. Both return certificates that
//! carry the natural residual and a sampled check of the dual inequality
//! `F(y).(y - x*) >= 0` over points `y` of the feasible set.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ViError};
use crate::operators::{estimate_lipschitz, natural_residual, Problem};
use crate::{Scalar, Vector};

/// Residual threshold for an accepted certificate.
pub const ACCEPT_RESIDUAL: f64 = 1e-6;
/// Allowed violation of the sampled dual inequality.
pub const ACCEPT_GAP: f64 = 1e-6;
pub const DEFAULT_GAP_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMethod {
    Grid,
    Extragradient,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCertificate<T> {
    pub problem: String,
    pub x_star: Vector<T>,
    pub method: OracleMethod,
    pub residual: T,
    /// Number of points of the set at which the dual inequality was checked.
    pub gap_samples: usize,
    /// Minimum of `F(y).(y - x*)` over those points.
    pub min_gap: T,
    pub seed: u64,
}

impl<T: Scalar> OracleCertificate<T> {
    pub fn is_accepted(&self) -> bool {
        self.residual <= T::lit(ACCEPT_RESIDUAL) && self.min_gap >= -T::lit(ACCEPT_GAP)
    }

    /// Certificate for a solution known in closed form.
    pub fn analytic(problem: &Problem<T>, x_star: Vector<T>, seed: u64) -> Result<Self> {
        certify(problem, x_star, OracleMethod::Analytic, seed, DEFAULT_GAP_SAMPLES)
    }

    pub fn to_file(&self) -> CertificateFile {
        CertificateFile {
            problem: self.problem.clone(),
            x_star: self.x_star.to_f64_vec(),
            method: self.method,
            residual: self.residual.to_f64_lossy(),
            min_gap: self.min_gap.to_f64_lossy(),
            gap_samples: self.gap_samples,
            seed: self.seed,
            tool_version: crate::VERSION.to_string(),
        }
    }

    pub fn from_file(file: &CertificateFile) -> Result<Self> {
        Ok(OracleCertificate {
            problem: file.problem.clone(),
            x_star: Vector::new(file.x_star.iter().map(|v| T::lit(*v)).collect())?,
            method: file.method,
            residual: T::lit(file.residual),
            gap_samples: file.gap_samples,
            min_gap: T::lit(file.min_gap),
            seed: file.seed,
        })
    }
}

/// On-disk form of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub problem: String,
    pub x_star: Vec<f64>,
    pub method: OracleMethod,
    pub residual: f64,
    pub min_gap: f64,
    pub gap_samples: usize,
    pub seed: u64,
    pub tool_version: String,
}

impl CertificateFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| ViError::Parse(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ViError::Parse(e.to_string()))
    }
}

/// Reuses a cached certificate when it matches problem, method, seed and
/// tool version; otherwise computes one and writes it.
pub fn load_or_compute<T: Scalar>(
    path: &Path,
    problem: &Problem<T>,
    method: OracleMethod,
    seed: u64,
    compute: impl FnOnce() -> Result<OracleCertificate<T>>,
) -> Result<OracleCertificate<T>> {
    if let Ok(file) = CertificateFile::read(path) {
        if file.problem == problem.name
            && file.method == method
            && file.seed == seed
            && file.tool_version == crate::VERSION
            && file.x_star.len() == problem.dim()
        {
            return OracleCertificate::from_file(&file);
        }
    }
    let cert = compute()?;
    cert.to_file().write(path)?;
    Ok(cert)
}

/// `min F(y).(y - x*)` over the given points.
pub fn pvi_gap<T: Scalar>(problem: &Problem<T>, x_star: &Vector<T>, points: &[Vector<T>]) -> Result<T> {
    points
        .par_iter()
        .map(|y| Ok::<_, ViError>(problem.operator.eval(y)?.dot(&(y - x_star))))
        .try_reduce(|| T::infinity(), |a, b| Ok(a.min(b)))
}

fn certify<T: Scalar>(
    problem: &Problem<T>,
    x_star: Vector<T>,
    method: OracleMethod,
    seed: u64,
    gap_samples: usize,
) -> Result<OracleCertificate<T>> {
    let residual = natural_residual(&problem.operator, &problem.set, &x_star)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = problem.set.sample(&mut rng, gap_samples)?;
    let min_gap = pvi_gap(problem, &x_star, &points)?;
    Ok(OracleCertificate {
        problem: problem.name.clone(),
        x_star,
        method,
        residual,
        gap_samples,
        min_gap,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Points per axis of the first, exhaustive scan.
    pub resolution: usize,
    /// Points per axis of each zoomed scan.
    pub refine_resolution: usize,
    /// Half-width of the zoom window, in spacings of the previous level.
    pub window: f64,
    /// Stop once the spacing falls below this.
    pub min_spacing: f64,
    pub max_levels: usize,
}

impl GridOptions {
    /// Defaults sized so that one scan has roughly `10^6` points.
    pub fn for_dim(dim: usize) -> Self {
        let resolution = match dim {
            1 => 1_000_001,
            2 => 1001,
            _ => 101,
        };
        GridOptions {
            resolution,
            refine_resolution: if dim == 3 { 25 } else { 41 },
            window: 8.0,
            min_spacing: 1e-12,
            max_levels: 80,
        }
    }
}

fn grid_point<T: Scalar>(lo: &[f64], spacing: &[f64], counts: usize, mut index: usize) -> Vector<T> {
    let dim = lo.len();
    let mut coords = Vec::with_capacity(dim);
    for axis in 0..dim {
        let i = index % counts;
        index /= counts;
        coords.push(T::lit(lo[axis] + spacing[axis] * i as f64));
    }
    Vector::raw(coords)
}

struct Scan<T> {
    best: Vector<T>,
    residual: T,
}

fn scan<T: Scalar>(problem: &Problem<T>, lo: &[f64], hi: &[f64], counts: usize) -> Result<Scan<T>> {
    let dim = lo.len();
    let spacing: Vec<f64> = (0..dim).map(|a| (hi[a] - lo[a]) / (counts - 1) as f64).collect();
    let total = counts.pow(dim as u32);
    let (residual, index) = (0..total)
        .into_par_iter()
        .map(|i| {
            let y = problem.set.project(&grid_point::<T>(lo, &spacing, counts, i))?;
            let r = natural_residual(&problem.operator, &problem.set, &y)?;
            Ok::<_, ViError>((r, i))
        })
        .try_reduce(
            || (T::infinity(), usize::MAX),
            |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    let best = problem.set.project(&grid_point::<T>(lo, &spacing, counts, index))?;
    Ok(Scan { best, residual })
}

/// Grid scan over the bounding box of the set (points projected into the
/// set) followed by zoomed rescans around the best point. The dual inequality
/// is certified on the points of the first scan.
pub fn oracle_grid<T: Scalar>(problem: &Problem<T>, resolution: usize) -> Result<OracleCertificate<T>> {
    let mut opts = GridOptions::for_dim(problem.dim());
    opts.resolution = resolution;
    oracle_grid_with(problem, &opts)
}

pub fn oracle_grid_with<T: Scalar>(problem: &Problem<T>, opts: &GridOptions) -> Result<OracleCertificate<T>> {
    let dim = problem.dim();
    if dim > 3 {
        return Err(ViError::DimensionTooLarge(dim));
    }
    if opts.resolution < 2 || opts.refine_resolution < 3 {
        return Err(ViError::config("resolution", "grid needs at least 2 points per axis"));
    }
    let (blo, bhi) = problem.set.bounding_box()?;
    let lo0 = blo.to_f64_vec();
    let hi0 = bhi.to_f64_vec();
    let first = scan(problem, &lo0, &hi0, opts.resolution)?;
    let mut best = first.best;
    let mut residual = first.residual;
    let mut spacing: Vec<f64> = (0..dim)
        .map(|a| (hi0[a] - lo0[a]) / (opts.resolution - 1) as f64)
        .collect();
    for _ in 0..opts.max_levels {
        if spacing.iter().all(|h| *h < opts.min_spacing) || residual.is_zero() {
            break;
        }
        let center = best.to_f64_vec();
        let lo: Vec<f64> = (0..dim).map(|a| center[a] - opts.window * spacing[a]).collect();
        let hi: Vec<f64> = (0..dim).map(|a| center[a] + opts.window * spacing[a]).collect();
        let next = scan(problem, &lo, &hi, opts.refine_resolution)?;
        if next.residual <= residual {
            best = next.best;
            residual = next.residual;
        }
        spacing = (0..dim)
            .map(|a| (hi[a] - lo[a]) / (opts.refine_resolution - 1) as f64)
            .collect();
    }

    // Dual inequality over the first-level grid.
    let counts = opts.resolution;
    let first_spacing: Vec<f64> = (0..dim).map(|a| (hi0[a] - lo0[a]) / (counts - 1) as f64).collect();
    let total = counts.pow(dim as u32);
    let min_gap = (0..total)
        .into_par_iter()
        .map(|i| {
            let y = problem.set.project(&grid_point::<T>(&lo0, &first_spacing, counts, i))?;
            Ok::<_, ViError>(problem.operator.eval(&y)?.dot(&(&y - &best)))
        })
        .try_reduce(|| T::infinity(), |a, b| Ok(a.min(b)))?;
    Ok(OracleCertificate {
        problem: problem.name.clone(),
        x_star: best,
        method: OracleMethod::Grid,
        residual,
        gap_samples: total,
        min_gap,
        seed: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtragradientOptions<T> {
    /// Step size; `None` uses `0.9 / L` with `L` a sampled Lipschitz estimate.
    pub step: Option<T>,
    pub tol: T,
    pub max_iters: usize,
    /// Starting point; defaults to the projection of the origin.
    pub start: Option<Vector<T>>,
    pub seed: u64,
}

impl<T: Scalar> Default for ExtragradientOptions<T> {
    fn default() -> Self {
        ExtragradientOptions {
            step: None,
            tol: T::lit(1e-10),
            max_iters: 1_000_000,
            start: None,
            seed: 17,
        }
    }
}

/// Safe default extragradient step `0.9 / L`.
pub fn default_extragradient_step<T: Scalar>(problem: &Problem<T>, seed: u64) -> Result<T> {
    let l = estimate_lipschitz(&problem.operator, &problem.set, 2000, seed)?;
    if !(l > T::zero()) {
        return Ok(T::one());
    }
    Ok(T::lit(0.9) / l)
}

/// Runs `y = P(x - s F(x))`, `x <- P(x - s F(y))` until the natural residual
/// drops to `tol`.
pub fn oracle_extragradient<T: Scalar>(
    problem: &Problem<T>,
    step: Option<T>,
    tol: T,
    max_iters: usize,
) -> Result<OracleCertificate<T>> {
    oracle_extragradient_with(
        problem,
        &ExtragradientOptions {
            step,
            tol,
            max_iters,
            ..ExtragradientOptions::default()
        },
    )
}

pub fn oracle_extragradient_with<T: Scalar>(
    problem: &Problem<T>,
    opts: &ExtragradientOptions<T>,
) -> Result<OracleCertificate<T>> {
    let x = extragradient_point(problem, opts)?;
    certify(problem, x, OracleMethod::Extragradient, opts.seed, DEFAULT_GAP_SAMPLES)
}

/// The extragradient iteration alone, without the certificate.
pub(crate) fn extragradient_point<T: Scalar>(problem: &Problem<T>, opts: &ExtragradientOptions<T>) -> Result<Vector<T>> {
    if !problem.operator.monotone {
        return Err(ViError::NotMonotone);
    }
    let set = &problem.set;
    let op = &problem.operator;
    let step = match opts.step {
        Some(s) if s > T::zero() => s,
        Some(s) => {
            return Err(ViError::NonPositiveArgument {
                name: "step",
                value: s.to_f64_lossy(),
            })
        }
        None => default_extragradient_step(problem, opts.seed)?,
    };
    let mut x = match &opts.start {
        Some(s) => set.project(s)?,
        None => set.project(&Vector::zeros(problem.dim()))?,
    };
    for _ in 0..opts.max_iters {
        let fx = op.eval(&x)?;
        if crate::operators::natural_residual_from(set, &x, &fx)? <= opts.tol {
            return Ok(x);
        }
        let y = set.project(&x.add_scaled(-step, &fx))?;
        let fy = op.eval(&y)?;
        x = set.project(&x.add_scaled(-step, &fy))?;
        if !x.is_finite() {
            return Err(ViError::NonFiniteIterate { iteration: 0 });
        }
    }
    Err(ViError::DidNotConverge {
        what: "extragradient oracle",
        iterations: opts.max_iters,
    })
}

/// Whether `x` lies in `x* + eps B` for the certified `x*`.
/// Unaccepted certificates never verify anything.
pub fn verify_eps_solution<T: Scalar>(x: &Vector<T>, eps: T, cert: &OracleCertificate<T>) -> bool {
    cert.is_accepted() && x.dim() == cert.x_star.dim() && x.distance_to(&cert.x_star) <= eps
}
