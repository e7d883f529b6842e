use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lexdyn::sim::{run_scenario_with, RunOptions, Scenario, SimError, TrajectoryLog};
use lexdyn::validation::{derivative_suite, equivalence_suite, hessian_suite, hlsp_oracle_suite, kkt_suite, Report};
use lexdyn_cli::config::{self, ConfigError};
use lexdyn_cli::{csvlog, dump, scenarios};

#[derive(Parser)]
#[command(name = "lexdyn", version, about = "Prioritized least-squares control of planar chains")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scenario file (or a shipped scenario by name) and write the log as CSV.
    Run {
        scenario: String,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value`, applied in order; tasks are indexed as `tasks.<i>.key`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write every cycle's hierarchy to this directory.
        #[arg(long, value_name = "DIR")]
        dump_hlsp: Option<PathBuf>,
    },
    /// Run a validation suite; exits 0 only if every check passes.
    Check {
        suite: Suite,
        /// Number of random cases.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// List the shipped scenarios.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Derivatives,
    HlspOracle,
    Kkt,
    Equivalence,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn write_output(out: Option<&Path>, log: &TrajectoryLog<f64>, scenario: &Scenario<f64>) -> io::Result<()> {
    let dof = scenario.model.dof();
    let levels = scenario.tasks.iter().map(|t| t.level).collect::<BTreeSet<_>>().len();
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            csvlog::write_log_shaped(&mut w, log, dof, levels).map_err(io::Error::other)?;
            w.flush()
        }
        None => csvlog::write_log_shaped(io::stdout().lock(), log, dof, levels).map_err(io::Error::other),
    }
}

fn scenario_text(arg: &str) -> Result<String, ConfigError> {
    let path = Path::new(arg);
    if path.is_file() {
        return std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: arg.into(), source });
    }
    scenarios::find(arg)
        .map(|s| s.text.to_string())
        .ok_or_else(|| ConfigError::Invalid(format!("no scenario file or shipped scenario named `{arg}`")))
}

fn cmd_run(arg: &str, out: Option<&Path>, overrides: &[String], dump_dir: Option<&Path>) -> ExitCode {
    let cfg = match scenario_text(arg).and_then(|t| config::load(&t, overrides)) {
        Ok(c) => c,
        Err(e) => return fail(1, e),
    };
    let scenario = match cfg.to_scenario() {
        Ok(s) => s,
        Err(e) => return fail(1, e),
    };
    if let Some(d) = dump_dir {
        if let Err(e) = std::fs::create_dir_all(d) {
            return fail(1, format!("cannot create {}: {e}", d.display()));
        }
    }
    let mut dump_error = None;
    let result = run_scenario_with(&scenario, RunOptions { timing: cfg.run.timing }, |cycle, h| {
        if let (Some(d), None) = (dump_dir, &dump_error) {
            dump_error = dump::write_cycle(d, cycle, h).err();
        }
    });
    if let Some(e) = dump_error {
        return fail(1, format!("cannot write dump: {e}"));
    }
    match result {
        Ok(log) => match write_output(out, &log, &scenario) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(1, format!("cannot write log: {e}")),
        },
        Err(SimError::Solver { step, error, log }) => {
            if let Err(e) = write_output(out, &log, &scenario) {
                eprintln!("error: cannot write partial log: {e}");
            }
            fail(2, format!("solver failed at step {step}: {error}"))
        }
        Err(e) => fail(1, e),
    }
}

fn cmd_check(suite: Suite, seeds: Option<u64>) -> ExitCode {
    let report = match suite {
        Suite::Derivatives => {
            let mut r = derivative_suite(seeds.unwrap_or(100) as usize, 7);
            r.checks.extend(hessian_suite().checks);
            r
        }
        Suite::HlspOracle => hlsp_oracle_suite(seeds.unwrap_or(50)),
        Suite::Kkt => kkt_suite(seeds.unwrap_or(50)),
        Suite::Equivalence => equivalence_suite(),
    };
    print_report(&report)
}

fn print_report(report: &Report) -> ExitCode {
    print!("{report}");
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match cli.cmd {
        Cmd::Run { scenario, out, overrides, dump_hlsp } => {
            cmd_run(&scenario, out.as_deref(), &overrides, dump_hlsp.as_deref())
        }
        Cmd::Check { suite, seeds } => cmd_check(suite, seeds),
        Cmd::List => {
            print!("{}", scenarios::listing());
            ExitCode::SUCCESS
        }
    }
}
