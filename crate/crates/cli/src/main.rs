//! `pilm`: reproduce the physics-informed linear model experiments and
//! write plot-ready CSV files.
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod compare;
mod config;
mod error;
mod experiments;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use log::info;
use pilm::{BSplineBasis1D, IntegralMatrixSet};

use crate::compare::{compare, load_report, Tolerances};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::experiments::{execute, Experiment, ExperimentRegistry, Outputs};

fn experiment_command(e: &dyn Experiment) -> Command {
    let mut cmd = Command::new(e.name())
        .about(format!("{} ({})", e.summary(), e.reference()))
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("key = value file applied over the defaults"),
        )
        .arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("override one knob; applied after --config"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .value_parser(value_parser!(PathBuf))
                .help(format!("output directory [default: out/{}]", e.name())),
        );
    for k in e.knobs() {
        cmd = cmd.arg(
            Arg::new(k.name)
                .long(k.name)
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .help(format!("{} [default: {}]", k.help, k.default)),
        );
    }
    cmd
}

fn command(registry: &ExperimentRegistry) -> Command {
    let mut cmd = Command::new("pilm")
        .about("Physics-informed linear models: forward solves, inverse problems and GNSS strain rates")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for e in registry.iter() {
        cmd = cmd.subcommand(experiment_command(e));
    }
    cmd.subcommand(
        Command::new("compare")
            .about("Per-metric deltas between two run reports")
            .arg(Arg::new("a").required(true).value_parser(value_parser!(PathBuf)).help("report file or run directory"))
            .arg(Arg::new("b").required(true).value_parser(value_parser!(PathBuf)).help("report file or run directory"))
            .arg(
                Arg::new("tol")
                    .long("tol")
                    .value_name("TOL|KEY=TOL")
                    .action(ArgAction::Append)
                    .help("absolute tolerance, for all metrics or one [default: 0]"),
            ),
    )
    .subcommand(
        Command::new("integrals")
            .about("Write the exact basis integral matrices as CSV")
            .arg(Arg::new("length").long("length").default_value("10").value_parser(value_parser!(f64)))
            .arg(Arg::new("count").long("count").default_value("13").value_parser(value_parser!(usize)))
            .arg(Arg::new("out").long("out").value_name("FILE").value_parser(value_parser!(PathBuf))),
    )
    .subcommand(Command::new("list").about("List experiments with their knobs and defaults"))
}

/// Defaults, then the config file, then `--set`, then knob flags.
fn resolve_config(e: &dyn Experiment, m: &ArgMatches) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::defaults(e.name(), e.knobs(), Path::new("out").join(e.name()));
    if let Some(path) = m.get_one::<PathBuf>("config") {
        cfg.merge_file(path)?;
    }
    for pair in m.get_many::<String>("set").into_iter().flatten() {
        cfg.set_pair(pair)?;
    }
    for k in e.knobs() {
        if let Some(v) = m.get_one::<String>(k.name) {
            cfg.set(k.name, v)?;
        }
    }
    if let Some(out) = m.get_one::<PathBuf>("out") {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run_compare(m: &ArgMatches) -> CliResult<()> {
    let a = load_report(m.get_one::<PathBuf>("a").expect("required"))?;
    let b = load_report(m.get_one::<PathBuf>("b").expect("required"))?;
    let tol = Tolerances::parse(m.get_many::<String>("tol").into_iter().flatten().map(String::as_str))?;
    let c = compare(&a, &b, &tol)?;
    for line in &c.lines {
        println!("{line}");
    }
    if c.exceeded.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!("{} metric(s) exceed tolerance: {}", c.exceeded.len(), c.exceeded.join(", "))))
    }
}

fn run_integrals(m: &ArgMatches) -> CliResult<()> {
    let basis = BSplineBasis1D::new(*m.get_one::<f64>("length").expect("default"), *m.get_one::<usize>("count").expect("default"))?;
    let set = IntegralMatrixSet::new(&basis);
    match m.get_one::<PathBuf>("out") {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let name = path.file_name().and_then(|n| n.to_str()).ok_or_else(|| CliError::Config("out: not a file path".into()))?;
            Outputs::create(dir)?.write(name, |w| set.write_csv(w))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            set.write_csv(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn list(registry: &ExperimentRegistry) {
    for e in registry.iter() {
        println!("{} ({})\n  {}", e.name(), e.reference(), e.summary());
        for k in e.knobs() {
            println!("    --{:<16} {:<28} {}", k.name, k.default, k.help);
        }
    }
}

fn dispatch(registry: &ExperimentRegistry, matches: &ArgMatches) -> CliResult<()> {
    match matches.subcommand() {
        Some(("compare", m)) => run_compare(m),
        Some(("integrals", m)) => run_integrals(m),
        Some(("list", _)) => {
            list(registry);
            Ok(())
        }
        Some((name, m)) => {
            let e = registry.get(name).expect("subcommands come from the registry");
            let cfg = resolve_config(e, m)?;
            info!("running {} into {}", e.name(), cfg.out.display());
            let report = execute(e, &cfg)?;
            print!("{}", report.render());
            Ok(())
        }
        None => unreachable!("a subcommand is required"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let registry = ExperimentRegistry::default();
    let matches = command(&registry).get_matches();
    match dispatch(&registry, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pilm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
