use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ris_tq::harness::{run_sweep, scenario_presets, write_csv, SweepSpec};

/// Monte-Carlo NMSE sweeps for task-based RIS channel estimation.
#[derive(Parser)]
#[command(name = "ris-tq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a JSON config and write CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the built-in scenario presets.
    ListScenarios,
    /// Run quick internal consistency checks.
    Selftest,
}

fn run(config: PathBuf, out: PathBuf) -> Result<()> {
    let spec = SweepSpec::load(&config)?;
    log::info!(
        "{}: {} points x {} trials",
        spec.scenario_id,
        spec.axis_values.len(),
        spec.n_trials
    );
    let start = Instant::now();
    let rows = run_sweep(&spec)?;
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(&rows, BufWriter::new(file))?;
    log::info!(
        "wrote {} rows to {} in {:.1} s",
        rows.len(),
        out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn list_scenarios() {
    for (name, summary, cfg) in scenario_presets() {
        println!("{name}: {summary}");
        println!(
            "  N={} RIS={}x{} K={} M_RB={} M_UR={:?} f_c={} GHz",
            cfg.n_bs_antennas,
            cfg.ris_rows,
            cfg.ris_cols,
            cfg.n_ues,
            cfg.paths_rb,
            cfg.paths_ur,
            cfg.carrier_freq_hz / 1e9
        );
    }
}

fn selftest() -> bool {
    let mut ok = true;
    for c in ris_tq::selftest::run_all() {
        println!(
            "{} {:<22} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.pass;
    }
    ok
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::ListScenarios => {
            list_scenarios();
            Ok(())
        }
        Command::Selftest => {
            if selftest() {
                Ok(())
            } else {
                Err(anyhow::anyhow!("selftest failed"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
