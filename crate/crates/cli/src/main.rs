//! `contact-noether`: run scenario files, solve the scaling ansatz and list
//! builtin systems.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or
//! argument error, 3 runtime or domain error. With several scenarios the
//! largest code wins.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contact_noether::scaling::{fmt_coef, solve_scaling, FKind, GKind, ScalingSolution};
use contact_noether::scenario::{self, RunOptions, RunOutput, Scenario};
use contact_noether::systems::BUILTINS;
use contact_noether::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "contact-noether", version, about = "Contact Hamiltonian dynamics and generalized Noether checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario files (JSON); several run in parallel.
    #[arg(required = true)]
    scenarios: Vec<PathBuf>,
    /// Output directory; artifacts go to <out>/<scenario name>/.
    #[arg(long, env = "CONTACT_NOETHER_OUT", default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario's sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the integrator's relative and absolute tolerance.
    #[arg(long)]
    tol_override: Option<f64>,
    /// Only print the final status line per scenario.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate each scenario and write trajectory.csv only.
    Simulate(RunArgs),
    /// Run each scenario's checks and write trajectory.csv, report.txt and report.json.
    Check(RunArgs),
    /// Solve the scaling-symmetry conditions for V = c|q|^k and print the case table.
    SolveScaling(ScalingArgs),
    /// List builtin systems with their parameters.
    ListSystems,
}

#[derive(Clone, Copy, ValueEnum)]
enum FChoice {
    Const,
    Power,
    Free,
}

#[derive(Clone, Copy, ValueEnum)]
enum GChoice {
    Zero,
    Homogeneous,
}

#[derive(Args)]
struct ScalingArgs {
    /// Degree of the potential |q|^k.
    #[arg(long, allow_hyphen_values = true)]
    k: f64,
    /// Form of f(t): constant, power law t^c (with --lambda) or unconstrained.
    #[arg(long, value_enum, default_value = "const")]
    f: FChoice,
    /// Λ = γ/σ for --f power.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Form of g(S).
    #[arg(long, value_enum, default_value = "zero")]
    g: GChoice,
    /// Homogeneity degree of g for --g homogeneous.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    kappa: f64,
    /// Coefficient in g(S) = g0 S.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    g0: f64,
    /// Mass of the representative system.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Print JSON instead of the table.
    #[arg(long)]
    json: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::InadmissibleCase { .. } => 2,
        _ => 3,
    }
}

fn options(args: &RunArgs) -> RunOptions {
    RunOptions { seed: args.seed, tol_override: args.tol_override }
}

fn run_all<T: Send>(args: &RunArgs, job: impl Fn(&Path) -> Result<T, Error> + Sync) -> Vec<Result<T, Error>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = args.scenarios.iter().map(|path| scope.spawn(|| job(path))).collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    })
}

fn simulate(args: &RunArgs) -> u8 {
    let opts = options(args);
    let results = run_all(args, |path| {
        let sc = Scenario::load(path)?;
        let prepared = sc.prepare(&path.display().to_string())?;
        let traj = prepared.simulate(&opts)?;
        let dir = args.out.join(&sc.name);
        scenario::write_trajectory(&dir, &traj)?;
        Ok((sc.name, traj.len(), dir))
    });
    let mut code = 0;
    for (path, result) in args.scenarios.iter().zip(results) {
        match result {
            Ok((name, len, dir)) => {
                if !args.quiet {
                    println!("{name}: {len} samples -> {}", dir.join("trajectory.csv").display());
                }
            }
            Err(e) => {
                eprintln!("{}: error: {e}", path.display());
                code = code.max(exit_code(&e));
            }
        }
    }
    code
}

fn print_report(out: &RunOutput, dir: &Path, quiet: bool) {
    let r = &out.report;
    if !quiet {
        for c in &r.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            println!("{}: {:<32} {status}  value {:.3e} (threshold {:.1e})", r.scenario, c.label, c.value, c.threshold);
        }
    }
    let passed = r.checks.iter().filter(|c| c.passed).count();
    let status = if r.passed { "PASS" } else { "FAIL" };
    println!("{}: {status} ({passed}/{} checks) -> {}", r.scenario, r.checks.len(), dir.display());
}

fn check(args: &RunArgs) -> u8 {
    let opts = options(args);
    let results = run_all(args, |path| {
        let out = scenario::run(path, &opts)?;
        let dir = scenario::write_artifacts(&args.out, &out)?;
        Ok((out, dir))
    });
    let mut code = 0;
    for (path, result) in args.scenarios.iter().zip(results) {
        match result {
            Ok((out, dir)) => {
                print_report(&out, &dir, args.quiet);
                if !out.report.passed {
                    code = code.max(1);
                }
            }
            Err(e) => {
                eprintln!("{}: error: {e}", path.display());
                code = code.max(exit_code(&e));
            }
        }
    }
    code
}

fn solution_json(s: &ScalingSolution) -> serde_json::Value {
    json!({
        "case": s.case_tag.to_string(),
        "alpha": s.ansatz.alpha,
        "beta": s.ansatz.beta,
        "gamma": s.ansatz.gamma,
        "sigma": s.ansatz.sigma,
        "invariant": s.invariant_text(),
        "invariant_expr": s.invariant.to_string(),
        "f_required": s.f_required.as_ref().map(|f| f.to_string()),
        "g_forced": s.g_forced.as_ref().map(|g| g.to_string()),
        "informational": s.informational,
        "constraints": s.constraints_log,
    })
}

fn solve(args: &ScalingArgs) -> Result<(), Error> {
    let f_kind = match args.f {
        FChoice::Const => FKind::Constant,
        FChoice::Free => FKind::Free,
        FChoice::Power => FKind::PowerLaw {
            lambda: args.lambda.ok_or_else(|| Error::InvalidArgument("--f power needs --lambda".into()))?,
        },
    };
    let g_kind = match args.g {
        GChoice::Zero => GKind::Zero,
        GChoice::Homogeneous => GKind::Homogeneous { kappa: args.kappa },
    };
    let g0 = if matches!(args.g, GChoice::Zero) { 0.0 } else { args.g0 };
    let solutions = solve_scaling(args.m, args.k, f_kind, g_kind, g0)?;
    if args.json {
        let rows: Vec<_> = solutions.iter().map(solution_json).collect();
        println!("{}", serde_json::to_string_pretty(&rows).expect("json values serialize"));
        return Ok(());
    }
    println!("{:<20} {:>6} {:>6} {:>6} {:>6}  {:<28} {:<14} {:<10} note", "case", "alpha", "beta", "gamma", "sigma", "invariant", "f(t)", "g(S)");
    for s in &solutions {
        let a = &s.ansatz;
        let f = s.f_required.as_ref().map_or("-".to_owned(), |f| f.to_string());
        let g = s.g_forced.as_ref().map_or("-".to_owned(), |g| g.to_string());
        println!(
            "{:<20} {:>6} {:>6} {:>6} {:>6}  {:<28} {:<14} {:<10} {}",
            s.case_tag.to_string(),
            fmt_coef(a.alpha),
            fmt_coef(a.beta),
            fmt_coef(a.gamma),
            fmt_coef(a.sigma),
            s.invariant_text(),
            f,
            g,
            if s.informational { "informational" } else { "" }
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Check(args) => check(args),
        Command::SolveScaling(args) => match solve(args) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::ListSystems => {
            for (name, doc) in BUILTINS {
                println!("{name:<22} {doc}");
            }
            0
        }
    };
    ExitCode::from(code)
}
