use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfglab::harness::{self, ExperimentKind, ExperimentSpec, RunManifest, Tolerances};

#[derive(Parser)]
#[command(name = "mfglab", version, about = "Long-time experiments for potential mean field games on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the manifest and tables.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Slope fit of the ergodic constant.
    LambdaSlope(RunArgs),
    /// N-particle cell problems for N = 1..params.particles.
    CellProblem(RunArgs),
    /// Energy invariant along a fictitious-play solution.
    Energy(RunArgs),
    /// Corrector tables over the probe panel.
    Corrector(RunArgs),
    /// ξ along a long trajectory.
    Monotonicity(RunArgs),
    /// Occupation-measure diagnostics.
    Mather(RunArgs),
    /// Lax-Oleinik semigroup laws.
    Semigroup(RunArgs),
    /// Calibration defect of middle windows.
    Calibrated(RunArgs),
    /// All acceptance checks.
    FullReport(RunArgs),
    /// Numeric diff of two manifests.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        abs: f64,
        #[arg(long, default_value_t = 0.0)]
        rel: f64,
    },
}

fn run(kind: ExperimentKind, args: RunArgs) -> ExitCode {
    let spec = match ExperimentSpec::load(&args.config, Some(kind), args.seed, &args.out) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match harness::run(&spec) {
        Ok(m) => {
            for c in &m.checks {
                println!("{}\t{}\t{}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("manifest: {}", spec.out_dir.join("manifest").display());
            if m.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::LambdaSlope(a) => (ExperimentKind::LambdaSlope, a),
        Command::CellProblem(a) => (ExperimentKind::CellProblem, a),
        Command::Energy(a) => (ExperimentKind::Energy, a),
        Command::Corrector(a) => (ExperimentKind::Corrector, a),
        Command::Monotonicity(a) => (ExperimentKind::Monotonicity, a),
        Command::Mather(a) => (ExperimentKind::Mather, a),
        Command::Semigroup(a) => (ExperimentKind::Semigroup, a),
        Command::Calibrated(a) => (ExperimentKind::Calibrated, a),
        Command::FullReport(a) => (ExperimentKind::FullReport, a),
        Command::Compare { a, b, abs, rel } => {
            let diff = RunManifest::read(&a)
                .and_then(|ma| RunManifest::read(&b).map(|mb| (ma, mb)))
                .and_then(|(ma, mb)| harness::compare(&ma, &mb, &Tolerances::uniform(abs, rel)));
            return match diff {
                Ok(d) => {
                    print!("{d}");
                    if d.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    run(kind, args)
}
