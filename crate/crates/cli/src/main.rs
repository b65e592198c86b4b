use std::f64::consts::LN_2;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use gne_cli::format::{
    load_scenario, read_json, save_convergence_csv, save_geometry_csv, save_json, save_scenario,
    save_sweep_csv, save_trace_csv, write_json,
};
use gne_cli::sweep::parallel_sweep;
use gne_core::conditions::diagnose;
use gne_core::experiments::{convergence_experiment, SweepConfig};
use gne_core::model::{rates, total_power};
use gne_core::netgen::{derive_seed, hex_network, scenario_from_geometry, HEX_CELLS};
use gne_core::solvers::{sequential_iwfa, simultaneous_iwfa, solve_single_subchannel};
use gne_core::{PowerAllocation, SolverOptions};
use serde::Serialize;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_EXISTENCE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Equilibrium certificates and iterative waterfilling for rate-constrained
/// power minimization over parallel interference channels.
#[derive(Parser)]
#[command(name = "gne", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every certificate on a scenario and write the diagnostics as JSON.
    /// Exits 2 when the existence certificate fails.
    Check {
        scenario: PathBuf,
        /// Report destination; stdout when omitted.
        output: Option<PathBuf>,
    },
    /// Solve for the equilibrium and print powers and rates as JSON.
    /// Exits 3 when the iteration does not converge.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Algorithm::Seq)]
        algorithm: Algorithm,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// Write the per-sweep trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Certificate probabilities over a proximity sweep (JSON config, CSV out).
    Montecarlo {
        config: PathBuf,
        output: PathBuf,
        /// Worker threads; all available cores when omitted.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run both algorithms from zero power and write their rate traces as CSV.
    Convergence {
        scenario: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
    },
    /// Generate a seven-cell scenario with Rayleigh multipath channels.
    Gen {
        output: PathBuf,
        /// Terminal proximity in [0, 1): 0 puts terminals on the cell edge.
        #[arg(long)]
        proximity: f64,
        /// Falls back to GNE_SEED, then 2008.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 6)]
        taps: usize,
        #[arg(long, default_value_t = 32)]
        subchannels: usize,
        #[arg(long, default_value_t = 2.5)]
        gamma: f64,
        /// Rate target per subchannel; each user's total is `subchannels` times this.
        #[arg(long, default_value_t = 1.0)]
        bits_per_subchannel: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 1.0)]
        cell_radius: f64,
        /// Also write node positions as CSV.
        #[arg(long)]
        geometry: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    /// Sequential (Gauss-Seidel) iterative waterfilling.
    Seq,
    /// Simultaneous (Jacobi) iterative waterfilling.
    Sim,
    /// Closed form for a single subchannel.
    N1,
}

#[derive(Serialize)]
struct SolveReport {
    algorithm: &'static str,
    converged: bool,
    iterations: usize,
    final_residual: Option<f64>,
    powers: Vec<Vec<f64>>,
    rates_nats: Vec<f64>,
    rates_bits: Vec<f64>,
    total_power: Vec<f64>,
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var("GNE_SEED") {
        Ok(v) => Ok(Some(
            v.trim()
                .parse()
                .with_context(|| format!("GNE_SEED={v:?}"))?,
        )),
        Err(_) => Ok(None),
    }
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> anyhow::Result<()> {
    match output {
        Some(path) => save_json(path, value)?,
        None => {
            let mut out = io::stdout().lock();
            write_json(&mut out, value)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn solver_options(tol: f64, max_iters: usize, record_trace: bool) -> SolverOptions {
    SolverOptions {
        max_iterations: max_iters,
        residual_tol: tol,
        record_trace,
    }
}

fn check(scenario: &Path, output: Option<&Path>) -> anyhow::Result<u8> {
    let s = load_scenario(scenario)?;
    let report = diagnose(&s);
    emit(&report, output)?;
    Ok(if report.zk_all_p {
        0
    } else {
        EXIT_NO_EXISTENCE
    })
}

fn solve(
    scenario: &Path,
    algorithm: Algorithm,
    opts: SolverOptions,
    trace: Option<&Path>,
) -> anyhow::Result<u8> {
    let s = load_scenario(scenario)?;
    let p0 = PowerAllocation::zeros(s.num_users(), s.num_subchannels());
    let (name, powers, converged, iterations, residual) = match algorithm {
        Algorithm::N1 => {
            if trace.is_some() {
                bail!("--trace needs an iterative algorithm");
            }
            ("n1", solve_single_subchannel(&s)?, true, 0, None)
        }
        Algorithm::Seq | Algorithm::Sim => {
            let (name, out) = match algorithm {
                Algorithm::Seq => ("seq", sequential_iwfa(&s, &p0, &opts)?),
                _ => ("sim", simultaneous_iwfa(&s, &p0, &opts)?),
            };
            if let Some(path) = trace {
                save_trace_csv(path, &out.trace)?;
            }
            (
                name,
                out.powers,
                out.converged,
                out.iterations,
                Some(out.final_residual),
            )
        }
    };
    let rates_nats = rates(&s, &powers)?;
    let report = SolveReport {
        algorithm: name,
        converged,
        iterations,
        final_residual: residual.filter(|r| r.is_finite()),
        rates_bits: rates_nats.iter().map(|r| r / LN_2).collect(),
        rates_nats,
        total_power: (0..s.num_users())
            .map(|q| total_power(&powers, q).map(|t| t.sum))
            .collect::<Result<_, _>>()?,
        powers: powers.to_rows(),
    };
    emit(&report, None)?;
    Ok(if converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn montecarlo(config: &Path, output: &Path, threads: Option<usize>) -> anyhow::Result<u8> {
    let mut cfg: SweepConfig = read_json(config)?;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    if threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    let rows = parallel_sweep(&cfg, threads)?;
    save_sweep_csv(output, &rows)?;
    Ok(0)
}

fn convergence(scenario: &Path, output: &Path, opts: SolverOptions) -> anyhow::Result<u8> {
    let s = load_scenario(scenario)?;
    let report = convergence_experiment(&s, &opts)?;
    save_convergence_csv(output, &report)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn gen(
    output: &Path,
    proximity: f64,
    seed: Option<u64>,
    taps: usize,
    subchannels: usize,
    gamma: f64,
    bits_per_subchannel: f64,
    noise: f64,
    cell_radius: f64,
    geometry: Option<&Path>,
) -> anyhow::Result<u8> {
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(2008),
    };
    if !(bits_per_subchannel.is_finite() && bits_per_subchannel > 0.0) {
        bail!("--bits-per-subchannel must be positive");
    }
    if !(noise.is_finite() && noise > 0.0) {
        bail!("--noise must be positive");
    }
    let geom = hex_network(proximity, derive_seed(seed, &[0]), cell_radius, gamma)?;
    let target = subchannels as f64 * bits_per_subchannel * LN_2;
    let s = scenario_from_geometry(
        &geom,
        taps,
        subchannels,
        derive_seed(seed, &[1]),
        noise,
        vec![target; HEX_CELLS],
    )?;
    save_scenario(output, &s)?;
    if let Some(path) = geometry {
        save_geometry_csv(path, &geom)?;
    }
    Ok(0)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Check { scenario, output } => check(&scenario, output.as_deref()),
        Command::Solve {
            scenario,
            algorithm,
            tol,
            max_iters,
            trace,
        } => solve(
            &scenario,
            algorithm,
            solver_options(tol, max_iters, trace.is_some()),
            trace.as_deref(),
        ),
        Command::Montecarlo {
            config,
            output,
            threads,
        } => montecarlo(&config, &output, threads),
        Command::Convergence {
            scenario,
            output,
            tol,
            max_iters,
        } => convergence(&scenario, &output, solver_options(tol, max_iters, true)),
        Command::Gen {
            output,
            proximity,
            seed,
            taps,
            subchannels,
            gamma,
            bits_per_subchannel,
            noise,
            cell_radius,
            geometry,
        } => gen(
            &output,
            proximity,
            seed,
            taps,
            subchannels,
            gamma,
            bits_per_subchannel,
            noise,
            cell_radius,
            geometry.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
