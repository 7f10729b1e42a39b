use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use topopt::cli;

#[derive(Parser)]
#[command(
    name = "topopt",
    version,
    about = "Density-based topology optimization: compliance minimization \
             with SIMP interpolation, OC/MMA updates, and density filtering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization described by a key = value config file.
    Run {
        /// Path to the config file.
        #[arg(long)]
        config: PathBuf,
        /// Override a config key (repeatable), e.g. --set volfrac=0.5
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Cross-check analytic sensitivities against finite differences.
    Gradcheck {
        /// Benchmark problem: cantilever2d | mbb2d | cantilever3d.
        #[arg(long)]
        problem: String,
        /// Cells per axis, e.g. 8x5 or 4x2x2.
        #[arg(long)]
        cells: String,
        /// Filter chain to check: none | density | heaviside.
        #[arg(long, default_value = "none")]
        filter: String,
        /// Filter radius (ignored for --filter none).
        #[arg(long, default_value_t = 2.0)]
        rmin: f64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        /// Fault-injection factor on the analytic gradient; any value other
        /// than 1.0 must make the check fail.
        #[arg(long, hide = true, default_value_t = 1.0)]
        corrupt_scale: f64,
    },
    /// Time the standard/fast/symbolic assembly strategies on one mesh.
    BenchAssembly {
        /// Benchmark problem: cantilever2d | mbb2d | cantilever3d.
        #[arg(long)]
        problem: String,
        /// Cells per axis, e.g. 60x20x4.
        #[arg(long)]
        cells: String,
        /// Assemblies per method.
        #[arg(long)]
        iters: usize,
        /// Where to write the CSV copy of the table.
        #[arg(long, default_value = "bench_assembly.csv")]
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let outcome = match args.command {
        Command::Run { config, set } => cli::cmd_run(&config, &set),
        Command::Gradcheck {
            problem,
            cells,
            filter,
            rmin,
            h,
            corrupt_scale,
        } => cli::cmd_gradcheck(&problem, &cells, &filter, rmin, h, corrupt_scale),
        Command::BenchAssembly {
            problem,
            cells,
            iters,
            csv,
        } => cli::cmd_bench_assembly(&problem, &cells, iters, &csv),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(cli::exit_code_for(&err))
        }
    }
}
