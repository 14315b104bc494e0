use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vi_sharp_cli::run::{sweep_table_path, SWEEP_HEADER};
use vi_sharp_cli::{oracle, run, sweep, CliError, RunConfig, SweepParam};

/// Sharp-penalty fixed-point solver for monotone variational inequalities.
#[derive(Parser)]
#[command(name = "vi-sharp", version)]
struct Cli {
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `solver.max_iters`.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and write the trace and summary.
    Run { config: PathBuf },
    /// Solve once per value of one parameter and write a table.
    Sweep {
        config: PathBuf,
        /// theta0, power, ratio, lambda (as a multiple of Lambda_eps) or epsilon.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Compute a reference solution and write its certificate.
    Oracle { config: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    if let Some(n) = cli.max_iters {
        cfg.solver.max_iters = n;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let s = run(&cfg)?;
            if !cli.quiet {
                let r = &s.result;
                println!("problem        {}", r.problem);
                println!("best           {:?}", r.best);
                println!("certified_eps  {:e} ({}, target {})", r.certified_eps, r.certified_by, r.epsilon);
                println!("restarts       {}", r.restarts);
                println!("lambda         {} (Lambda_eps {}, M {})", r.lambda, r.lambda_bound, r.m_hat);
                println!("schedule       {}", r.schedule);
                if let Some(note) = &r.note {
                    println!("note           {note}");
                }
                println!("trace          {}", r.trace_path.display());
                println!("summary        {}", cfg.summary_path().display());
            }
        }
        Command::Sweep { config, param, values } => {
            let cfg = load(cli, config)?;
            let rows = sweep(&cfg, *param, values)?;
            if !cli.quiet {
                println!("{SWEEP_HEADER}");
                for row in &rows {
                    println!("{}", row.csv());
                }
                if rows.iter().any(|r| r.experimental) {
                    println!("# {}", vi_sharp::solver::EXPERIMENTAL_MARKER);
                }
                eprintln!("table written to {}", sweep_table_path(&cfg, *param).display());
            }
        }
        Command::Oracle { config } => {
            let mut cfg = load(cli, config)?;
            if cfg.oracle.cache_path.is_none() {
                cfg.oracle.cache_path = Some(PathBuf::from(format!("{}-oracle.toml", cfg.problem_name())));
            }
            let problem = cfg.build_problem()?;
            let cert = oracle(&cfg, &problem)?;
            if !cli.quiet {
                println!("problem   {}", cert.problem);
                println!("method    {:?}", cert.method);
                println!("x_star    {:?}", cert.x_star.to_f64_vec());
                println!("residual  {:e}", cert.residual);
                println!("min_gap   {:e} over {} samples", cert.min_gap, cert.gap_samples);
                println!("accepted  {}", cert.is_accepted());
                println!("written   {}", cfg.certificate_path().display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vi-sharp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
