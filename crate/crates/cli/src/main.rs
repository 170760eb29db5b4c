use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ltm_lab::output::{ensure_dir, write_csv, write_json, write_sidecar};
use ltm_lab::{parse_grid, run_config_file, run_fig3, run_swap_example, CliError, CliResult, Fig3Options, SwapOptions};

#[derive(Parser)]
#[command(name = "ltm-lab", version, about = "Loss-variance experiments with locality transfer matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-qubit SWAP circuit whose variance alternates with depth.
    SwapExample {
        /// Monte Carlo samples per depth (0 skips simulation).
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write swap.csv and swap.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deep variance against noise strength for both entanglers.
    Fig3 {
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Noise grid as start:stop:count.
        #[arg(long, default_value = "0.05:0.95:19")]
        p_grid: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo samples per grid point (0 for the analytic path only).
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        rapid_depth: usize,
        #[arg(long, default_value_t = 20)]
        slow_depth: usize,
        /// Rotation angle of the controlled-RX cascade.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value = "fig3-out")]
        out: PathBuf,
    },
    /// Run a JSON experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Exit with status 4 when a configured check fails.
        #[arg(long)]
        check: bool,
        /// Output directory, overriding the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn swap_example(samples: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let options = SwapOptions {
        samples,
        seed,
        ..SwapOptions::default()
    };
    let report = run_swap_example(&options)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let csv = dir.join("swap.csv");
        let sidecar = dir.join("swap.json");
        write_csv(&csv, &report.rows)?;
        write_sidecar(&sidecar, "swap-example", &options, &[csv, sidecar.clone()], &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn fig3(options: Fig3Options, out: &Path) -> CliResult<()> {
    let result = run_fig3(&options)?;
    ensure_dir(out)?;
    let rows = out.join("fig3.csv");
    let convergence = out.join("fig3_convergence.csv");
    let sidecar = out.join("fig3.json");
    write_csv(&rows, &result.rows)?;
    write_csv(&convergence, &result.convergence)?;
    write_sidecar(&sidecar, "fig3", &options, &[rows, convergence, sidecar.clone()], &result.summaries)?;
    for s in &result.summaries {
        let beta = s.convergence_fit.as_ref().map(|f| f.beta);
        println!(
            "{:<20} L = {:<3} log-log slope {:>8} max |Var/(p/(2-p)) - 1| {:>8} beta {:>8}",
            s.entangler,
            s.depth,
            fmt(s.log_log_slope),
            fmt(s.max_relative_deviation_linear),
            fmt(beta)
        );
    }
    write_json(&out.join("fig3_summary.json"), &result.summaries)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::SwapExample { samples, seed, out } => swap_example(samples, seed, out.as_deref()),
        Command::Fig3 {
            n,
            p_grid,
            seed,
            samples,
            rapid_depth,
            slow_depth,
            theta,
            out,
        } => {
            let defaults = Fig3Options::default();
            let options = Fig3Options {
                n,
                p_grid: parse_grid(&p_grid)?,
                seed,
                samples,
                rapid_depth,
                slow_depth,
                theta: theta.unwrap_or(defaults.theta),
                ..defaults
            };
            fig3(options, &out)
        }
        Command::Run { config, check, out } => {
            let output = run_config_file(&config, out.as_deref(), check)?;
            for c in &output.summary.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &output.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Numerical { .. }) {
                eprintln!("{}", serde_json::to_string_pretty(&e.diagnostics()).expect("diagnostics serialize"));
            }
            ExitCode::from(e.exit_code())
        }
    }
}
