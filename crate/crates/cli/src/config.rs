use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use vi_sharp::geometry::QuadraticConstraint;
use vi_sharp::operators::{affine_problem, builtin_problem, qp_grad_problem};
use vi_sharp::{
    ConvexSet64, Halfspace, IterationForm, LambdaChoice, PenaltyKind, PenaltyMethod64, Problem64, SolverConfig64,
    StepSchedule, Vector64, ViError,
};

use crate::CliError;

pub const SCHEMA: &str = "vi-sharp/1";
pub const OUTPUT_DIR_ENV: &str = "VI_SHARP_OUTPUT_DIR";

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    Builtin {
        name: String,
    },
    /// `F(x) = A x + b` over `set`.
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        rho_f: f64,
        set: SetSpec,
    },
    /// `F(x) = Q (x - center)` over a ball.
    Quadratic {
        matrix: Vec<Vec<f64>>,
        center: Vec<f64>,
        rho_f: f64,
        set: SetSpec,
    },
    /// `F(x) = A x + b` over `{x : x'Qx + q'x + c <= 0}`.
    LevelSet {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        rho_f: f64,
        constraint: LevelSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `normals[i] . x <= offsets[i]`.
    Halfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interior_point: Option<Vec<f64>>,
    },
    Level(LevelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub matrix: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_point: Option<Vec<f64>>,
}

/// `"auto"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LambdaSetting {
    #[default]
    Auto,
    Fixed(f64),
}

impl Serialize for LambdaSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LambdaSetting::Auto => s.serialize_str("auto"),
            LambdaSetting::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(LambdaSetting::Fixed(v)),
            Raw::Int(v) => Ok(LambdaSetting::Fixed(v as f64)),
            Raw::Text(t) if t == "auto" => Ok(LambdaSetting::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "lambda must be \"auto\" or a number, got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: f64,
    pub lambda: LambdaSetting,
    /// Defaults to the problem's own `rho_f`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart_radius: Option<f64>,
    pub max_iters: usize,
    /// Defaults to the origin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub trace_every: usize,
    pub seed: u64,
    pub form: IterationForm,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_at_residual: Option<f64>,
    pub schedule: StepSchedule<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            epsilon: 0.05,
            lambda: LambdaSetting::Auto,
            rho_f: None,
            restart_radius: None,
            max_iters: 100_000,
            x0: None,
            trace_every: 1,
            seed: 0,
            form: IterationForm::Penalized,
            stop_at_residual: None,
            schedule: StepSchedule::harmonic(0.5, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySection {
    pub kind: PenaltyKind,
    /// Defaults to `solver.epsilon`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl Default for PenaltySection {
    fn default() -> Self {
        PenaltySection {
            kind: PenaltyKind::Projection,
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    #[default]
    Csv,
    StructuredText,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_path: Option<PathBuf>,
    pub format: TraceFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Known solution if there is one, else grid up to 3 dimensions, else extragradient.
    #[default]
    Auto,
    Grid,
    Extragradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub enabled: bool,
    pub kind: OracleKind,
    /// Extragradient residual target; smallest grid spacing.
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            enabled: false,
            kind: OracleKind::Auto,
            tolerance: 1e-10,
            cache_path: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            let msg = e.message().replace('\n', " ");
            match line {
                Some(l) => CliError::Config(format!("line {l}: {msg}")),
                None => CliError::Config(msg),
            }
        })?;
        if cfg.schema != SCHEMA {
            return Err(CliError::Config(format!(
                "schema: expected \"{SCHEMA}\", got \"{}\"",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn problem_name(&self) -> String {
        match &self.problem {
            ProblemSpec::Builtin { name } => name.clone(),
            ProblemSpec::Affine { .. } => "affine-inline".into(),
            ProblemSpec::Quadratic { .. } => "quadratic-inline".into(),
            ProblemSpec::LevelSet { .. } => "level-set-inline".into(),
        }
    }

    pub fn build_problem(&self) -> Result<Problem64, CliError> {
        let field = |e: ViError| CliError::Config(format!("problem: {e}"));
        match &self.problem {
            ProblemSpec::Builtin { name } => {
                builtin_problem(name).map_err(|e| CliError::Config(format!("problem.name: {e}")))
            }
            ProblemSpec::Affine {
                matrix,
                offset,
                rho_f,
                set,
            } => {
                let set = build_set(set, "problem.set")?;
                affine_problem("affine-inline", matrix.clone(), vec64(offset, "problem.offset")?, set, *rho_f)
                    .map_err(field)
            }
            ProblemSpec::Quadratic {
                matrix,
                center,
                rho_f,
                set,
            } => {
                let set = build_set(set, "problem.set")?;
                let mut p = qp_grad_problem(matrix.clone(), &vec64(center, "problem.center")?, set, *rho_f)
                    .map_err(field)?;
                p.name = "quadratic-inline".into();
                p.operator.name = p.name.clone();
                Ok(p)
            }
            ProblemSpec::LevelSet {
                matrix,
                offset,
                rho_f,
                constraint,
            } => {
                let set = build_level(constraint, "problem.constraint")?;
                affine_problem("level-set-inline", matrix.clone(), vec64(offset, "problem.offset")?, set, *rho_f)
                    .map_err(field)
            }
        }
    }

    /// Solver settings for `problem`, validated against its dimension.
    pub fn solver_config(&self, problem: &Problem64) -> Result<SolverConfig64, CliError> {
        let s = &self.solver;
        let dim = problem.dim();
        let x0 = match &s.x0 {
            Some(v) => vec64(v, "solver.x0")?,
            None => Vector64::zeros(dim),
        };
        let mut cfg = SolverConfig64::new(s.epsilon, s.rho_f.unwrap_or(problem.operator.rho_f), x0);
        cfg.lambda = match s.lambda {
            LambdaSetting::Auto => LambdaChoice::Auto,
            LambdaSetting::Fixed(v) => LambdaChoice::Fixed(v),
        };
        cfg.restart_radius = s.restart_radius;
        cfg.schedule = s.schedule;
        cfg.max_iters = s.max_iters;
        cfg.trace_every = s.trace_every;
        cfg.seed = s.seed;
        cfg.form = s.form;
        cfg.stop_at_residual = s.stop_at_residual;
        cfg.validate(dim).map_err(|e| prefixed(e, "solver"))?;
        Ok(cfg)
    }

    pub fn penalty_method(&self) -> Result<PenaltyMethod64, CliError> {
        let eps = self.penalty.epsilon.unwrap_or(self.solver.epsilon);
        PenaltyMethod64::new(self.penalty.kind, eps)
            .map_err(|e| CliError::Config(format!("penalty.epsilon: {e}")))
    }

    pub fn validate_oracle(&self) -> Result<(), CliError> {
        let t = self.oracle.tolerance;
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Config(format!(
                "oracle.tolerance: must be positive and finite, got {t}"
            )));
        }
        Ok(())
    }

    pub fn trace_path(&self) -> PathBuf {
        let ext = match self.output.format {
            TraceFormat::Csv => "csv",
            TraceFormat::StructuredText => "toml",
        };
        let default = PathBuf::from(format!("{}-trace.{ext}", self.problem_name()));
        resolve_output(self.output.trace_path.as_deref().unwrap_or(&default))
    }

    pub fn summary_path(&self) -> PathBuf {
        let default = PathBuf::from(format!("{}-summary.toml", self.problem_name()));
        resolve_output(self.output.summary_path.as_deref().unwrap_or(&default))
    }

    pub fn certificate_path(&self) -> PathBuf {
        let default = PathBuf::from(format!("{}-oracle.toml", self.problem_name()));
        resolve_output(self.oracle.cache_path.as_deref().unwrap_or(&default))
    }
}

/// Relative paths land in `$VI_SHARP_OUTPUT_DIR` when it is set.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Creates the parent directory and checks that `path` can be written.
pub fn ensure_writable(path: &Path, field: &str) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Config(format!("{field}: cannot write {}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(fail)?;
    }
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(drop)
        .map_err(fail)
}

fn prefixed(e: ViError, section: &str) -> CliError {
    match e {
        ViError::ConfigInvalid { field, message } => CliError::Config(format!("{section}.{field}: {message}")),
        other => CliError::Config(format!("{section}: {other}")),
    }
}

fn vec64(v: &[f64], field: &str) -> Result<Vector64, CliError> {
    Vector64::new(v.to_vec()).map_err(|e| CliError::Config(format!("{field}: {e}")))
}

fn build_set(spec: &SetSpec, field: &str) -> Result<ConvexSet64, CliError> {
    let err = |e: ViError| CliError::Config(format!("{field}: {e}"));
    match spec {
        SetSpec::Ball { center, radius } => {
            ConvexSet64::ball(vec64(center, &format!("{field}.center"))?, *radius).map_err(err)
        }
        SetSpec::Box { lower, upper } => ConvexSet64::cuboid(
            vec64(lower, &format!("{field}.lower"))?,
            vec64(upper, &format!("{field}.upper"))?,
        )
        .map_err(err),
        SetSpec::Halfspaces {
            normals,
            offsets,
            interior_point,
        } => {
            if normals.len() != offsets.len() {
                return Err(CliError::Config(format!(
                    "{field}.offsets: {} offsets for {} normals",
                    offsets.len(),
                    normals.len()
                )));
            }
            let mut hs = Vec::with_capacity(normals.len());
            for (n, b) in normals.iter().zip(offsets) {
                hs.push(Halfspace::new(vec64(n, &format!("{field}.normals"))?, *b));
            }
            let c = interior_point
                .as_ref()
                .map(|c| vec64(c, &format!("{field}.interior_point")))
                .transpose()?;
            ConvexSet64::halfspaces(hs, c).map_err(err)
        }
        SetSpec::Level(level) => build_level(level, field),
    }
}

fn build_level(spec: &LevelSpec, field: &str) -> Result<ConvexSet64, CliError> {
    let linear = vec64(&spec.linear, &format!("{field}.linear"))?;
    let dim = linear.dim();
    if spec.matrix.len() != dim || spec.matrix.iter().any(|r| r.len() != dim) {
        return Err(CliError::Config(format!("{field}.matrix: must be {dim} x {dim}")));
    }
    let h = QuadraticConstraint {
        matrix: spec.matrix.clone(),
        linear,
        constant: spec.constant,
        lipschitz: spec.lipschitz,
    };
    let c = spec
        .interior_point
        .as_ref()
        .map(|c| vec64(c, &format!("{field}.interior_point")))
        .transpose()?;
    ConvexSet64::level_set(dim, Arc::new(h), c).map_err(|e| CliError::Config(format!("{field}: {e}")))
}
