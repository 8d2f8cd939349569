use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rm_dpg_cli::commands::{self, MeshInfoArgs, RunArgs};
use rm_dpg_cli::verify::VerifyOptions;
use rm_dpg_cli::CliError;

/// Three-stage DPG solver for the Reissner-Mindlin plate.
#[derive(Debug, Parser)]
#[command(name = "rm-dpg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence study described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Worker threads for element kernels (0 = all cores).
        #[arg(long, env = "RM_DPG_THREADS", default_value_t = 0)]
        threads: usize,
    },
    /// Run the built-in oracle checks.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        /// Config file providing a seed when --seed is absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Flip the sign of one moment-trace term (oracle self-test).
        #[arg(long, hide = true)]
        inject_trace_sign_flip: bool,
    },
    /// Log-log plot columns with guide lines from a convergence CSV.
    Plotdata {
        csv: PathBuf,
        /// Slope of the guide lines.
        #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
        slope: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Statistics of an initial mesh, optionally refined and written out.
    MeshInfo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        levels: usize,
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out_dir, threads } => commands::run(&RunArgs { config, out_dir, threads }, out).map(|_| ()),
        Command::Verify { seed, config, inject_trace_sign_flip } => {
            let seed = commands::verify_seed(seed, config.as_deref())?;
            commands::verify(&VerifyOptions { seed, flip_trace_sign: inject_trace_sign_flip }, out)
        }
        Command::Plotdata { csv, slope, output } => commands::plotdata(&csv, slope, output.as_deref(), out),
        Command::MeshInfo { config, mesh, levels, write } => {
            commands::mesh_info(&MeshInfoArgs { config, mesh, levels, write }, out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
