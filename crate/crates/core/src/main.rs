use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pdlearn::harness::commands::{cmd_bounds, cmd_train, cmd_verify};
use pdlearn::harness::suites::SuiteContext;
use pdlearn::harness::{exit_code, EXIT_OK, EXIT_VERIFY_FAILED};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "PDLEARN_THREADS";

#[derive(Parser)]
#[command(name = "pdlearn", version, about = "Fenchel-Young learning diagnostics and risk bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the property suites and write verify.json.
    Verify {
        /// Run a single suite.
        #[arg(long)]
        suite: Option<String>,
        /// Directory for verify.json (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Negative control: offset every conjugate so the suites must fail.
        #[arg(long, hide = true)]
        perturb: bool,
    },
    /// Train a model and write metrics.csv and summary.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train per the config, then write bounds.json.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err(format!("{THREADS_VAR} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(pdlearn::harness::EXIT_CONFIG as u8);
    }
    let result = match cli.command {
        Command::Verify { suite, out, perturb } => {
            let ctx = if perturb { SuiteContext::perturbed() } else { SuiteContext::default() };
            cmd_verify(suite.as_deref(), &ctx, out.as_deref()).map(|summary| {
                for s in &summary.suites {
                    println!(
                        "{} {:<15} {:>5} cases {:>4} failures  worst {:.3e} (tol {:.0e})  {:.2}s",
                        if s.passed { "PASS" } else { "FAIL" },
                        s.name,
                        s.cases,
                        s.failures,
                        s.worst,
                        s.tolerance,
                        s.seconds
                    );
                }
                if summary.passed {
                    EXIT_OK
                } else {
                    EXIT_VERIFY_FAILED
                }
            })
        }
        Command::Train { config, out } => cmd_train(&config, out.as_deref()).map(|s| {
            println!(
                "trained {} steps: risk {:.6} -> {:.6}, gamma {:.4}, zeta {}, descent violations {}",
                s.steps, s.initial_risk, s.final_risk, s.gamma, s.zeta, s.descent_violations
            );
            EXIT_OK
        }),
        Command::Bounds { config, out } => cmd_bounds(&config, out.as_deref()).map(|r| {
            println!(
                "risk {:.6} in [{:.6}, {:.6}], gamma {:.4}, zeta {}, concentration bound {}",
                r.risk,
                r.reference.risk_lower,
                r.reference.risk_upper,
                r.gamma,
                r.zeta,
                if r.concentration_holds { "holds" } else { "violated" }
            );
            EXIT_OK
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
