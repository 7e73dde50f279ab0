//! Command-line front end for the hexloc simulator.
//!
//! Exit codes: 0 on success, 1 for configuration/input errors, 2 for
//! runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use hexloc_core::harness::{self, ScenarioConfig};
use hexloc_core::{rssi_optimum_finder_with_mode, Error};

#[derive(Parser)]
#[command(
    name = "hexloc",
    version,
    about = "TDoA UAV self-localization over a hexagonal ground-node grid",
    propagate_version = true
)]
struct Cli {
    /// Scenario config file (flat `key = value`; see `print-config`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Override the trials per experiment point.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,

    /// Output directory for CSV results.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Override the worker-thread count (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Also write per-link observations.csv (large).
    #[arg(long, global = true)]
    dump_observations: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-N sweep plus the optimum finder over every (R, h_u) cell.
    Sweep,
    /// Optimum finder vs. the empirical fixed N across the Δ_LOS grid.
    LosStudy,
    /// Print the T₂ sequence and chosen N for a list of distances.
    Nopt {
        /// CSV of estimated distances (comma- and/or line-separated).
        #[arg(value_name = "CSV")]
        distances: PathBuf,

        /// Assumed UAV altitude, meters.
        #[arg(long, value_name = "METERS", default_value_t = 20.0)]
        altitude: f64,

        /// Candidate horizon fed to the optimum finder.
        #[arg(long, value_name = "N", default_value_t = 20)]
        nmax: usize,
    },
    /// Export the η̄(d2d, h) lookup table as CSV.
    ChannelTable {
        /// Output file (defaults to <out>/eta_table.csv).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Print the effective configuration (all keys, with defaults filled).
    PrintConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Malformed invocations are configuration errors.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) => ExitCode::from(1),
                Error::Domain(_) | Error::Io(_) => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> hexloc_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => harness::load_config(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if cli.dump_observations {
        cfg.dump_observations = true;
    }

    match cli.command {
        Command::Sweep => {
            cfg.validate()?;
            let output = harness::run_sweep(&cfg)?;
            report_run(&output, &cli.out)
        }
        Command::LosStudy => {
            cfg.validate()?;
            let output = harness::run_los_study(&cfg)?;
            report_run(&output, &cli.out)
        }
        Command::Nopt {
            distances,
            altitude,
            nmax,
        } => nopt(&cfg, &distances, altitude, nmax),
        Command::ChannelTable { output } => {
            let table = harness::table_for_radius(&cfg, cfg.coverage_radius)?;
            let path = output.unwrap_or_else(|| cli.out.join("eta_table.csv"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut buf = Vec::new();
            table.to_csv(&mut buf)?;
            std::fs::write(&path, buf)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::PrintConfig => {
            print!("{}", harness::print_config(&cfg));
            Ok(())
        }
    }
}

fn report_run(output: &harness::RunOutput, dir: &PathBuf) -> hexloc_core::Result<()> {
    let written = harness::emit_results(output, dir)?;
    print!("{}", harness::summary_csv(&output.summaries()));
    for s in output.summaries() {
        if s.failed_trials > 0 {
            println!(
                "# {} {} R={} h={}: {} of {} trials did not converge (still counted)",
                s.mode, s.n_or_policy, s.coverage_radius, s.uav_altitude, s.failed_trials,
                s.trials
            );
        }
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Parses a loose CSV of distances: values split on commas and line breaks,
/// with an optional non-numeric header line.
fn parse_distances(text: &str) -> hexloc_core::Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for token in line.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            match token.parse::<f64>() {
                Ok(v) => out.push(v),
                Err(_) if i == 0 && out.is_empty() => break, // header line
                Err(_) => {
                    return Err(Error::parse(format!(
                        "line {}: `{token}` is not a number",
                        i + 1
                    )))
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::parse("no distances found in input"));
    }
    Ok(out)
}

fn nopt(
    cfg: &ScenarioConfig,
    path: &PathBuf,
    altitude: f64,
    nmax: usize,
) -> hexloc_core::Result<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let distances = parse_distances(&text)?;
    let table = harness::table_for_radius(cfg, cfg.coverage_radius)?;
    let sel = rssi_optimum_finder_with_mode(&distances, altitude, &table, nmax, cfg.t2_phi_prime)?;
    println!("N,t2");
    for (i, t2) in sel.t2_sequence.iter().enumerate() {
        println!("{},{}", i + 1, t2);
    }
    println!("n_opt_raw = {}", sel.n_opt_raw);
    println!("n_opt_compensated = {}", sel.n_opt_compensated);
    println!("n_opt = {}", sel.n_opt);
    println!(
        "selected_indices = {}",
        sel.selected_ids
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_parsing_accepts_headers_and_mixed_separators() {
        let d = parse_distances("d_est_m\n30.5,41\n52\n").unwrap();
        assert_eq!(d, vec![30.5, 41.0, 52.0]);
        let d = parse_distances("1,2,3").unwrap();
        assert_eq!(d, vec![1.0, 2.0, 3.0]);
        assert!(parse_distances("30\nforty\n").is_err());
        assert!(parse_distances("").is_err());
    }
}
