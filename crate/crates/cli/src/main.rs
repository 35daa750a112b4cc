//! Command-line front end: fit observed curves, simulate the synthetic
//! studies, run replication experiments and scan the basis count by GCV.
//!
//! Exit status is 0 on success, 2 when outputs were written but some chain
//! failed the convergence check, and 1 on error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use basis_select::diagnostics::ConvergenceReport;
use basis_select::fit::{fit_dataset, gcv_scan, GcvScan};
use basis_select::io::{
    ingest_csv, write_dataset, write_draws, write_file, write_fitted, write_json,
    write_truth,
};
use basis_select::rng::stream_rng;
use basis_select::summary::FitSummary;
use basis_select::synth::run_replications;
use clap::{Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use config::Settings;

#[derive(Debug, Parser)]
#[command(name = "basis-select", version, about = "Spike-and-slab basis selection for curve data")]
struct Cli {
    /// TOML file with default settings; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit curves from a long-format CSV (curve_id,t,y)
    Fit {
        #[arg(long, short)]
        input: PathBuf,
        /// Directory for draws.csv, fitted.csv and summary.json
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write a simulated study dataset as CSV
    Simulate {
        #[arg(long, short)]
        output: PathBuf,
        /// Also write the noiseless curve (t,truth)
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Repeat simulate-and-fit and summarize the replications
    Replicate {
        /// Directory for replications.csv and report.json
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Fit once per basis count and report the mean GCV of each
    GcvScan {
        #[arg(long, short)]
        input: PathBuf,
        /// Basis counts to try
        #[arg(long, value_delimiter = ',', default_value = "10,15,20,25,30")]
        ks: Vec<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Ok,
    NotConverged,
}

type CliResult = Result<Outcome, Box<dyn std::error::Error>>;

#[derive(Serialize)]
struct GcvRow<'a> {
    curve_id: &'a str,
    gcv: f64,
    trace: f64,
}

#[derive(Serialize)]
struct FitReport<'a> {
    input: &'a Path,
    convergence_warning: bool,
    gcv_table: Vec<GcvRow<'a>>,
    options: &'a basis_select::fit::FitOptions,
    summary: &'a FitSummary,
}

fn settings_with_file(flags: Settings, file: Option<&Path>) -> Result<Settings, String> {
    match file {
        Some(path) => Ok(flags.over(Settings::load(path)?)),
        None => Ok(flags),
    }
}

fn outcome(converged: bool) -> Outcome {
    if converged {
        Outcome::Ok
    } else {
        Outcome::NotConverged
    }
}

fn log_convergence(report: Option<&ConvergenceReport>) {
    if let Some(r) = report {
        if r.converged {
            info!("all {} R-hat values below {}", r.entries.len(), r.threshold);
        } else {
            for e in r.failing() {
                warn!("{} has R-hat {:.4}", e.parameter, e.rhat);
            }
        }
    }
}

fn run_fit(input: &Path, out: &Path, settings: &Settings) -> CliResult {
    let data = ingest_csv(input)?;
    let options = settings.fit_options()?;
    let fit = fit_dataset(&data, &options)?;
    fs::create_dir_all(out)?;
    write_file(out.join("draws.csv"), |w| write_draws(&fit.sample, w))?;
    write_file(out.join("fitted.csv"), |w| {
        write_fitted(&fit.data, &fit.bases, &fit.summary, w)
    })?;
    let summary = &fit.summary;
    let report = FitReport {
        input,
        convergence_warning: !fit.converged(),
        gcv_table: summary
            .curve_ids
            .iter()
            .zip(&summary.gcv_per_curve)
            .zip(&summary.gcv_trace_per_curve)
            .map(|((id, g), t)| GcvRow {
                curve_id: id,
                gcv: *g,
                trace: *t,
            })
            .collect(),
        options: &options,
        summary,
    };
    write_file(out.join("summary.json"), |w| write_json(&report, w))?;
    log_convergence(summary.convergence.as_ref());
    println!(
        "K_end {}  metric {:.5}  averaged {:.5}  mean GCV {:.6e}",
        summary.k_end, summary.metric_global, summary.metric_averaged, summary.gcv_mean
    );
    Ok(outcome(fit.converged()))
}

fn run_simulate(output: &Path, truth: Option<&Path>, settings: &Settings) -> CliResult {
    let spec = settings.scenario_spec()?;
    let mut rng = stream_rng(spec.seed, 0);
    let sim = spec
        .scenario
        .generate(spec.sigma, spec.num_curves, spec.num_points, &mut rng)?;
    write_file(output, |w| write_dataset(&sim.dataset, w))?;
    if let Some(path) = truth {
        write_file(path, |w| write_truth(&sim.grid, &sim.truth, w))?;
    }
    Ok(Outcome::Ok)
}

fn run_replicate(out: &Path, settings: &Settings) -> CliResult {
    let spec = settings.scenario_spec()?;
    let report = run_replications(&spec)?;
    fs::create_dir_all(out)?;
    write_file(out.join("replications.csv"), |w| report.write_csv(w))?;
    write_file(out.join("report.json"), |w| write_json(&report, w))?;
    for c in &report.coefficients {
        println!(
            "xi{:<3} median {:>9.5}  IQR [{:>9.5}, {:>9.5}]  zero {:>5.1}%",
            c.basis,
            c.distribution.median,
            c.distribution.q1,
            c.distribution.q3,
            100.0 * c.zero_frequency
        );
    }
    if let Some(m) = report.metric_global {
        println!("metric median {:.5}", m.median);
    }
    if let Some(m) = report.mse {
        println!("MSE median {:.3e}", m.median);
    }
    println!(
        "{} completed, {} failed, {:.0}% converged",
        report.completed,
        report.failed,
        100.0 * report.converged_fraction
    );
    if report.completed == 0 {
        return Err("every replication failed".into());
    }
    Ok(outcome(report.failed == 0 && report.converged_fraction == 1.0))
}

fn run_gcv_scan(input: &Path, ks: &[usize], out: Option<&Path>, settings: &Settings) -> CliResult {
    let data = ingest_csv(input)?;
    let options = settings.fit_options()?;
    let scan: GcvScan = gcv_scan(&data, &options, ks)?;
    println!("{:>4}  {:>14}  {:>9}  {:>5}", "K", "mean GCV", "metric", "K_end");
    for e in &scan.entries {
        let mark = if e.num_bases == scan.best { "  <- min" } else { "" };
        println!(
            "{:>4}  {:>14.6e}  {:>9.5}  {:>5}{mark}",
            e.num_bases, e.gcv_mean, e.metric_global, e.k_end
        );
    }
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        write_file(out.join("gcv_scan.json"), |w| write_json(&scan, w))?;
    }
    Ok(outcome(scan.entries.iter().all(|e| e.converged)))
}

fn run(cli: Cli) -> CliResult {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Fit { input, out, settings } => {
            run_fit(&input, &out, &settings_with_file(settings, file)?)
        }
        Command::Simulate {
            output,
            truth,
            settings,
        } => run_simulate(&output, truth.as_deref(), &settings_with_file(settings, file)?),
        Command::Replicate { out, settings } => {
            run_replicate(&out, &settings_with_file(settings, file)?)
        }
        Command::GcvScan {
            input,
            ks,
            out,
            settings,
        } => run_gcv_scan(&input, &ks, out.as_deref(), &settings_with_file(settings, file)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: convergence check failed; outputs were written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
