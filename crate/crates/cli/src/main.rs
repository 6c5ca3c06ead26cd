use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dpfe2::driver::{self, ScenarioKind};
use dpfe2::io::compare::compare_dirs;
use dpfe2::io::RunConfig;
use dpfe2::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "dpfe2", version, about = "Two-scale simulation of large deforming double-porosity media")]
struct Cli {
    /// Worker threads for the cell problems (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print the default configuration of a scenario
    /// (validation, shear, inflation, custom) and exit.
    #[arg(long, value_name = "SCENARIO")]
    dump_defaults: Option<String>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured scenario.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Compare the pressure histories of two run directories (first is the reference).
    Compare {
        reference: PathBuf,
        candidate: PathBuf,
        #[arg(long, default_value_t = 0.10)]
        linf: f64,
        #[arg(long, default_value_t = 0.05)]
        l2: f64,
    },
    /// Run the identity and property checks on a cell without time stepping.
    Check {
        /// Configuration providing the cell and material (default: validation preset).
        config: Option<PathBuf>,
    },
}

fn exit_for(err: &Error) -> ExitCode {
    match err.root() {
        Error::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_SOLVER),
    }
}

fn load(path: &PathBuf) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("configuration error:\n{e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    if let Some(name) = &cli.dump_defaults {
        let Some(kind) = ScenarioKind::parse(name) else {
            eprintln!("unknown scenario '{name}' (expected validation, shear, inflation or custom)");
            return ExitCode::from(EXIT_CONFIG);
        };
        print!("{}", RunConfig::preset(kind).to_toml());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("no command given; see --help");
        return ExitCode::from(EXIT_CONFIG);
    };
    match command {
        Command::Run { config, output, quiet } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(o) = output {
                cfg.output.directory = o;
            }
            match driver::run(&cfg, !quiet) {
                Ok(summary) => {
                    println!(
                        "identity residual (worst over run): {:.3e} (limit {:.1e})",
                        summary.two_scale.identity_max, cfg.coefficients.identity_tol
                    );
                    for w in summary.two_scale.warnings.iter().take(5) {
                        eprintln!("warning: {w}");
                    }
                    if let Some(r) = &summary.comparison {
                        for w in &r.warnings {
                            eprintln!("warning: {w}");
                        }
                        for d in &r.quantities {
                            println!("{:<10} L-inf {:.4}  L2 {:.4}", d.quantity, d.linf, d.l2);
                        }
                    }
                    println!("output written to {}", summary.output.display());
                    if summary.passes(&cfg) {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("acceptance check failed");
                        ExitCode::from(EXIT_ACCEPTANCE)
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    exit_for(&e)
                }
            }
        }
        Command::Compare { reference, candidate, linf, l2 } => match compare_dirs(&reference, &candidate) {
            Ok(r) => {
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
                for d in &r.quantities {
                    println!("{:<10} L-inf {:.4}  L2 {:.4}", d.quantity, d.linf, d.l2);
                }
                if r.passes(linf, l2) {
                    println!("PASS");
                    ExitCode::SUCCESS
                } else {
                    println!("FAIL");
                    ExitCode::from(EXIT_ACCEPTANCE)
                }
            }
            Err(e) => {
                eprintln!("compare failed: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Check { config } => {
            let cfg = match config {
                Some(p) => match load(&p) {
                    Ok(c) => c,
                    Err(code) => return code,
                },
                None => RunConfig::preset(ScenarioKind::Validation),
            };
            match driver::check(&cfg, cli.seed) {
                Ok(results) => {
                    let mut ok = true;
                    for r in &results {
                        let tag = if r.passed() { "pass" } else { "FAIL" };
                        println!("{tag}  {:<60} {:.3e} (limit {:.1e})", r.name, r.value, r.limit);
                        ok &= r.passed();
                    }
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_ACCEPTANCE)
                    }
                }
                Err(e) => {
                    eprintln!("check failed: {e}");
                    exit_for(&e)
                }
            }
        }
    }
}
