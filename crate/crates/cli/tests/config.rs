use vi_sharp::{IterationForm, PenaltyKind, StepSchedule};
use vi_sharp_cli::config::{LambdaSetting, OracleKind, ProblemSpec, SetSpec, TraceFormat};
use vi_sharp_cli::{CliError, RunConfig};

fn parse(body: &str) -> Result<RunConfig, CliError> {
    RunConfig::parse(&format!("schema = \"vi-sharp/1\"\n{body}"))
}

fn config_error(body: &str) -> String {
    match parse(body).and_then(|c| c.build_problem().map(|_| c)) {
        Err(CliError::Config(m)) => m,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn defaults_fill_missing_sections() {
    let cfg = parse("[problem]\nkind = \"builtin\"\nname = \"qp-grad\"\n").unwrap();
    assert_eq!(cfg.solver.epsilon, 0.05);
    assert_eq!(cfg.solver.lambda, LambdaSetting::Auto);
    assert_eq!(cfg.solver.schedule, StepSchedule::harmonic(0.5, 1.0));
    assert_eq!(cfg.solver.form, IterationForm::Penalized);
    assert_eq!(cfg.penalty.kind, PenaltyKind::Projection);
    assert_eq!(cfg.output.format, TraceFormat::Csv);
    assert!(!cfg.oracle.enabled);
    assert_eq!(cfg.oracle.kind, OracleKind::Auto);
    let problem = cfg.build_problem().unwrap();
    let solver = cfg.solver_config(&problem).unwrap();
    assert_eq!(solver.rho_f, 2.0);
    assert_eq!(solver.x0.to_f64_vec(), [0.0, 0.0]);
}

#[test]
fn lambda_accepts_auto_floats_and_integers() {
    let p = "[problem]\nkind = \"builtin\"\nname = \"fig1\"\n";
    let lam = |v: &str| parse(&format!("{p}[solver]\nlambda = {v}\n")).map(|c| c.solver.lambda);
    assert_eq!(lam("\"auto\"").unwrap(), LambdaSetting::Auto);
    assert_eq!(lam("12.5").unwrap(), LambdaSetting::Fixed(12.5));
    assert_eq!(lam("300").unwrap(), LambdaSetting::Fixed(300.0));
    assert!(lam("\"huge\"").is_err());
}

#[test]
fn affine_over_halfspaces() {
    // F(x) = x - (2, 2) over the triangle x >= 0, y >= 0, x + y <= 1: x* = (0.5, 0.5).
    let cfg = parse(
        "[problem]\nkind = \"affine\"\nmatrix = [[1.0, 0.0], [0.0, 1.0]]\noffset = [-2.0, -2.0]\nrho_f = 2.0\n\
         [problem.set]\nkind = \"halfspaces\"\nnormals = [[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]\n\
         offsets = [0.0, 0.0, 1.0]\ninterior_point = [0.25, 0.25]\n",
    )
    .unwrap();
    assert!(matches!(cfg.problem, ProblemSpec::Affine { set: SetSpec::Halfspaces { .. }, .. }));
    let p = cfg.build_problem().unwrap();
    assert!(p.operator.monotone);
    let x = p.known_solution().unwrap().to_f64_vec();
    assert!((x[0] - 0.5).abs() < 1e-8 && (x[1] - 0.5).abs() < 1e-8, "{x:?}");
}

#[test]
fn quadratic_with_interior_center_is_solved_at_the_center() {
    let cfg = parse(
        "[problem]\nkind = \"quadratic\"\nmatrix = [[2.0, 0.0], [0.0, 1.0]]\ncenter = [0.3, -0.2]\nrho_f = 2.0\n\
         [problem.set]\nkind = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0\n",
    )
    .unwrap();
    let p = cfg.build_problem().unwrap();
    assert_eq!(p.name, "quadratic-inline");
    assert_eq!(p.known_solution().unwrap().to_f64_vec(), [0.3, -0.2]);
}

#[test]
fn quadratic_needs_a_ball() {
    let m = config_error(
        "[problem]\nkind = \"quadratic\"\nmatrix = [[1.0]]\ncenter = [0.3]\nrho_f = 2.0\n\
         [problem.set]\nkind = \"box\"\nlower = [-1.0]\nupper = [1.0]\n",
    );
    assert!(m.starts_with("problem"), "{m}");
}

#[test]
fn level_set_problem_matches_its_unconstrained_solution_when_inside() {
    // F(x) = x - (0.5, 0.2) over the unit disc written as x'x - 1 <= 0.
    let cfg = parse(
        "[problem]\nkind = \"level-set\"\nmatrix = [[1.0, 0.0], [0.0, 1.0]]\noffset = [-0.5, -0.2]\nrho_f = 2.0\n\
         [problem.constraint]\nmatrix = [[1.0, 0.0], [0.0, 1.0]]\nlinear = [0.0, 0.0]\nconstant = -1.0\n",
    )
    .unwrap();
    let x = cfg.build_problem().unwrap().known_solution().unwrap().to_f64_vec();
    assert!((x[0] - 0.5).abs() < 1e-9 && (x[1] - 0.2).abs() < 1e-9, "{x:?}");
}

#[test]
fn malformed_problems_name_the_field() {
    assert!(config_error(
        "[problem]\nkind = \"affine\"\nmatrix = [[1.0]]\noffset = [0.0]\nrho_f = 2.0\n\
         [problem.set]\nkind = \"halfspaces\"\nnormals = [[1.0]]\noffsets = [1.0, 2.0]\n"
    )
    .contains("problem.set.offsets"));
    assert!(config_error(
        "[problem]\nkind = \"level-set\"\nmatrix = [[1.0]]\noffset = [0.0]\nrho_f = 2.0\n\
         [problem.constraint]\nmatrix = [[1.0, 0.0]]\nlinear = [0.0]\nconstant = -1.0\n"
    )
    .contains("problem.constraint.matrix"));
    assert!(config_error("[problem]\nkind = \"polytope\"\n").contains("polytope"));
    assert!(config_error("[problem]\nkind = \"builtin\"\nname = \"fig1\"\n[solver]\nmax_iters = -3\n").contains("line"));
}

#[test]
fn set_outside_rho_ball_is_rejected_at_solve_time() {
    let cfg = parse(
        "[problem]\nkind = \"affine\"\nmatrix = [[1.0]]\noffset = [0.0]\nrho_f = 1.0\n\
         [problem.set]\nkind = \"box\"\nlower = [-3.0]\nupper = [3.0]\n",
    )
    .unwrap();
    let p = cfg.build_problem().unwrap();
    let s = cfg.solver_config(&p).unwrap();
    let err = vi_sharp::solve(&p, &s, cfg.penalty_method().unwrap()).unwrap_err();
    assert!(matches!(CliError::from(err), CliError::Config(m) if m.starts_with("solver.rho_f")));
}

#[test]
fn exit_codes() {
    assert_eq!(CliError::Config(String::new()).exit_code(), 2);
    assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
    assert_eq!(CliError::from(vi_sharp::ViError::NonFiniteIterate { iteration: 4 }).exit_code(), 3);
    assert_eq!(CliError::from(vi_sharp::ViError::EmptyTrace).exit_code(), 1);
}
