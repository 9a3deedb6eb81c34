//! `fracgauss run | scan | sync-scaling [--config FILE] [--KEY VALUE ...]`
//!
//! Every configuration key is also a flag (`init_seed` becomes
//! `--init-seed`); flags override values read from `--config`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 divergence,
//! 1 anything else.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use fracgauss::config::{parse_config_with_overrides, KEYS};
use fracgauss::experiment::{run_scan, run_single, run_sync_scaling};
use fracgauss::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn subcommand(name: &'static str, about: &'static str) -> Command {
    let mut cmd = Command::new(name).about(about).arg(
        Arg::new("config")
            .long("config")
            .short('c')
            .value_name("FILE")
            .value_parser(clap::value_parser!(PathBuf))
            .help("flat `key = value` configuration file"),
    );
    for key in KEYS.iter().filter(|k| **k != "mode") {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .overrides_with(*key)
                .help(format!("overrides `{key}`")),
        );
    }
    cmd.arg(
        Arg::new("scan")
            .long("scan")
            .value_name("KEY=VALUES")
            .action(ArgAction::Append)
            .help("scan axis, e.g. --scan epsilon=0.1:0.9:0.1 or --scan beta=-0.4,-0.5"),
    )
}

fn cli() -> Command {
    Command::new("fracgauss")
        .about("Coupled fractional Gauss map experiments")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(subcommand(
            "run",
            "single run: series.csv, heatmap.pgm, summary.txt",
        ))
        .subcommand(subcommand(
            "scan",
            "one run per point of the scan axes' cartesian product",
        ))
        .subcommand(subcommand(
            "sync-scaling",
            "synchronization-time ensembles over system sizes: scaling.csv, summary.txt",
        ))
}

fn overrides(mode: &str, matches: &ArgMatches) -> Result<Vec<(String, String)>, Error> {
    let mut out = vec![("mode".to_string(), mode.to_string())];
    for key in KEYS.iter().filter(|k| **k != "mode") {
        if let Some(v) = matches.get_one::<String>(key) {
            out.push((key.to_string(), v.clone()));
        }
    }
    for axis in matches.get_many::<String>("scan").into_iter().flatten() {
        match axis.split_once('=') {
            Some((k, v)) => out.push((format!("scan.{}", k.trim()), v.to_string())),
            None => {
                return Err(Error::Config(vec![format!(
                    "--scan {axis}: expected KEY=VALUES"
                )]))
            }
        }
    }
    Ok(out)
}

fn execute(mode: &str, matches: &ArgMatches) -> Result<bool, Error> {
    let text = match matches.get_one::<PathBuf>("config") {
        Some(path) => fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let spec = parse_config_with_overrides(&text, &overrides(mode, matches)?)?;
    let mut diverged = false;
    match mode {
        "run" => {
            let report = run_single(&spec)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            diverged = report.diverged.is_some();
            println!(
                "{}: t = {}, final std = {:.6e}, sync time = {}",
                report.dir.display(),
                report.final_t,
                report
                    .series
                    .spatial_std
                    .last()
                    .copied()
                    .unwrap_or(f64::NAN),
                report.sync.t_n.map_or("none".into(), |t| t.to_string()),
            );
        }
        "scan" => {
            let points = run_scan(&spec)?;
            for p in &points {
                for w in &p.report.warnings {
                    eprintln!("warning: {}: {w}", p.report.dir.display());
                }
                diverged |= p.report.diverged.is_some();
            }
            println!(
                "{} scan points written to {}",
                points.len(),
                spec.output_dir.display()
            );
        }
        _ => {
            let report = run_sync_scaling(&spec)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for r in &report.rows {
                println!(
                    "N = {:>6}  mean T_N = {:>12.1}  stderr = {:>10.1}  count = {}",
                    r.n, r.stats.mean, r.stats.stderr, r.stats.count
                );
            }
            match report.fit {
                Some(f) => println!("T_N ~ N^{:.4}", f.exponent),
                None => println!("no scaling fit"),
            }
        }
    }
    Ok(diverged)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (mode, sub) = matches.subcommand().expect("subcommand required");
    match execute(mode, sub) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: divergence: the field left the blow-up bound; outputs cover the steps before it");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(e) => {
            let code = match e {
                Error::Config(_) | Error::Domain { .. } => EXIT_CONFIG,
                Error::Io { .. } => EXIT_IO,
                _ => 1,
            };
            let category = match code {
                EXIT_CONFIG => "configuration error",
                EXIT_IO => "I/O error",
                _ => "error",
            };
            eprintln!("{category}: {e}");
            ExitCode::from(code)
        }
    }
}
