//! Command-line front end: rate evaluation, joint optimization, sweeps and
//! a built-in oracle self-test.
//!
//! Exit codes: 0 ok, 1 self-test failure or I/O error, 2 bad configuration,
//! 3 infeasible constraints, 4 solver failure or non-convergence.

mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggrate_core::{
    equal_split, optimize_exact, optimize_lb, rate_aggregate, run_sweep, sweep_csv, Axis, Error, PowerAllocation,
    QuadratureSpec, RateReport, Scenario, Solution, SweepRange,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "aggrate",
    version,
    about = "Rates and input optimization for aggregated optical + RF links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file; the built-in reference scenario when omitted.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Seed for Monte Carlo quadrature and sampled fading.
    #[arg(long)]
    seed: Option<u64>,
    /// Quadrature rule: gh[:order], grid[:points[:truncation]] or mc[:samples].
    #[arg(long, value_name = "RULE")]
    quadrature: Option<String>,
    /// Directory for output files; results go to stdout when omitted.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Exact,
    Lower,
}

#[derive(Subcommand)]
enum Command {
    /// Rates and bounds at a fixed power split.
    Rate {
        #[command(flatten)]
        common: Common,
        /// Optical precoder power q̂1 (default: half the budget per link).
        #[arg(long)]
        q1: Option<f64>,
        /// RF precoder power q̂2 (default: half the budget per link).
        #[arg(long)]
        q2: Option<f64>,
    },
    /// Joint optimization of the power split and the input distributions.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "exact")]
        objective: ObjectiveArg,
    },
    /// Sweep one parameter and write long-form CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "P_T|P_ins|B1|snr")]
        axis: String,
        /// Grid as start:stop:steps.
        #[arg(long, value_name = "A:B:N", allow_hyphen_values = true)]
        range: String,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the effective scenario as JSON.
    Scenario {
        #[command(flatten)]
        common: Common,
    },
    /// Check the library against independent oracles.
    Selftest,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InfeasibleCaps(_) | Error::InfeasibleSet(_) => 3,
            Error::Solver { .. } | Error::Bracket(_) => 4,
            Error::Config { .. } | Error::Domain(_) | Error::UnsupportedOrder(_) | Error::Dimension { .. } => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: String) -> Failure {
    Failure { code: 2, message }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn parse_quadrature(text: &str) -> Result<QuadratureSpec, Failure> {
    let bad = || config_failure(format!("quadrature: cannot parse '{text}'"));
    let mut parts = text.split(':');
    let kind = parts.next().unwrap_or_default();
    let nums: Vec<&str> = parts.collect();
    let int = |i: usize, default: usize| -> Result<usize, Failure> {
        nums.get(i).map_or(Ok(default), |s| s.parse().map_err(|_| bad()))
    };
    let spec = match kind {
        "gh" if nums.len() <= 1 => QuadratureSpec::gauss_hermite(int(0, 48)?),
        "grid" if nums.len() <= 2 => {
            let trunc = nums.get(1).map_or(Ok(8.0), |s| s.parse().map_err(|_| bad()))?;
            QuadratureSpec::truncated_grid(int(0, 401)?, trunc)
        }
        "mc" if nums.len() <= 1 => QuadratureSpec::monte_carlo(int(0, 20000)?, 0),
        _ => return Err(bad()),
    };
    spec.validate()
        .map_err(|e| config_failure(format!("quadrature: {e}")))?;
    Ok(spec)
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let mut s = match &common.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_failure(format!("{}: {e}", path.display())))?;
            Scenario::from_json(&text)?
        }
        None => Scenario::default(),
    };
    if let Some(q) = &common.quadrature {
        let seed = s.solver.quadrature.seed;
        s.solver.quadrature = QuadratureSpec {
            seed,
            ..parse_quadrature(q)?
        };
    }
    if let Some(seed) = common.seed {
        s.seed = seed;
        s.solver.quadrature.seed = seed;
    }
    s.validate()?;
    if let Some(w) = s.solver.quadrature.warning() {
        eprintln!("warning: {w}");
    }
    Ok(s)
}

/// Writes `name` under `--out`, or prints it when no directory is given.
fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| io_failure(&path, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("results serialize");
    s.push('\n');
    s
}

fn cmd_rate(common: &Common, q1: Option<f64>, q2: Option<f64>) -> Result<(), Failure> {
    let s = load(common)?;
    let prob = s.problem()?;
    let split = equal_split(&prob);
    let alloc = PowerAllocation::fixed(q1.unwrap_or(split.q1_sq), q2.unwrap_or(split.q2_sq));
    for (name, v) in [("q1", alloc.q1_sq), ("q2", alloc.q2_sq)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(config_failure(format!("{name}: must be nonnegative, got {v}")));
        }
    }
    let report: RateReport = rate_aggregate(
        &prob.lifi,
        &prob.wifi,
        alloc.q1_sq,
        alloc.q2_sq,
        &prob.phys1,
        &prob.phys2,
        &s.solver.quadrature,
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let csv = format!(
        "# schema=1\nq1_sq,q2_sq,{}\n{},{},{}\n",
        RateReport::CSV_HEADER,
        alloc.q1_sq,
        alloc.q2_sq,
        report.csv_row()
    );
    emit(&common.out, "rate.csv", &csv)?;
    if common.out.is_some() {
        emit(&common.out, "rate.json", &to_json(&report))?;
    }
    Ok(())
}

fn cmd_optimize(common: &Common, objective: ObjectiveArg) -> Result<(), Failure> {
    let s = load(common)?;
    let prob = s.problem()?;
    let sol: Solution = match objective {
        ObjectiveArg::Exact => optimize_exact(&prob, &s.solver)?,
        ObjectiveArg::Lower => optimize_lb(&prob, &s.solver)?,
    };
    let summary = format!("# schema=1\n{}\n{}\n", Solution::CSV_HEADER, sol.csv_row());
    match &common.out {
        Some(_) => {
            emit(&common.out, "solution.json", &to_json(&sol))?;
            emit(&common.out, "trace.csv", &sol.trace_csv())?;
            emit(&common.out, "summary.csv", &summary)?;
        }
        None => emit(&None, "", &summary)?,
    }
    if !sol.converged {
        return Err(Failure {
            code: 4,
            message: format!("no convergence within {} outer iterations", sol.trace.len()),
        });
    }
    Ok(())
}

fn cmd_sweep(common: &Common, axis: &str, range: &str, jobs: Option<usize>) -> Result<(), Failure> {
    let s = load(common)?;
    let axis: Axis = axis.parse()?;
    let range: SweepRange = range.parse()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(config_failure("jobs: must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| config_failure(format!("jobs: {e}")))?;
    let rows = pool.install(|| run_sweep(&s, axis, &range))?;
    emit(&common.out, &format!("sweep_{axis}.csv"), &sweep_csv(&rows))?;
    if rows.iter().any(|r| !r.converged) {
        return Err(Failure {
            code: 4,
            message: "some grid points did not converge (see the converged column)".into(),
        });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Rate { common, q1, q2 } => cmd_rate(&common, q1, q2),
        Command::Optimize { common, objective } => cmd_optimize(&common, objective),
        Command::Sweep {
            common,
            axis,
            range,
            jobs,
        } => cmd_sweep(&common, &axis, &range, jobs),
        Command::Scenario { common } => {
            let s = load(&common)?;
            emit(&common.out, "scenario.json", &(s.to_json() + "\n"))
        }
        Command::Selftest => {
            let checks = selftest::run();
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(Failure {
                    code: 1,
                    message: "self-test failed".into(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aggrate_core::QuadMethod;

    #[test]
    fn quadrature_specs() {
        let q = parse_quadrature("gh:32").unwrap();
        assert_eq!((q.method, q.points), (QuadMethod::GaussHermite, 32));
        assert_eq!(parse_quadrature("gh").unwrap().points, 48);
        let q = parse_quadrature("grid:801:6").unwrap();
        assert_eq!(
            (q.method, q.points, q.truncation),
            (QuadMethod::TruncatedGrid, 801, 6.0)
        );
        let q = parse_quadrature("mc:1000").unwrap();
        assert_eq!((q.method, q.points), (QuadMethod::MonteCarlo, 1000));
        for bad in ["", "gh:x", "mc:1:2", "simpson", "gh:0"] {
            assert_eq!(parse_quadrature(bad).err().map(|f| f.code), Some(2), "{bad}");
        }
    }

    #[test]
    fn error_codes() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(
            code(Error::Config {
                path: "a".into(),
                message: "b".into()
            }),
            2
        );
        assert_eq!(code(Error::InfeasibleCaps("x".into())), 3);
        assert_eq!(code(Error::InfeasibleSet("x".into())), 3);
        assert_eq!(
            code(Error::Solver {
                message: "x".into(),
                trace: vec![]
            }),
            4
        );
    }
}
