//! Batch front end: run a verification command against a manifold spec file
//! and emit a JSON report.
//!
//! Exit codes: 0 = all checks pass, 1 = at least one check failed,
//! 2 = spec or usage error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use galilei::cli::{load_spec, run, CommandKind, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Check the structure (and observer/frame/data, if present).
    Validate,
    /// Build the special Galilei connection and verify its properties.
    Special,
    /// Assemble a connection from free data and verify the postconditions.
    Build,
    /// Extract free data from explicit coefficients and check its invariants.
    Extract,
    /// Round-trip: rebuild from extracted data, or re-extract built data.
    Roundtrip,
    /// Check the two identities relating torsion and non-metricities.
    Identities,
    /// Compare the three equivalent coefficient formulas.
    ThreeForms,
    /// Check the temporal-torsion and space-metric-derivative lemmas.
    Lemmas,
    /// Verify observer-independence under the spec's boost.
    Milne,
    /// Run the frame suite: connection form, Cartan torsion, algebra split.
    Frame,
}

impl From<Command> for CommandKind {
    fn from(command: Command) -> Self {
        match command {
            Command::Validate => CommandKind::Validate,
            Command::Special => CommandKind::Special,
            Command::Build => CommandKind::Build,
            Command::Extract => CommandKind::Extract,
            Command::Roundtrip => CommandKind::Roundtrip,
            Command::Identities => CommandKind::Identities,
            Command::ThreeForms => CommandKind::ThreeForms,
            Command::Lemmas => CommandKind::Lemmas,
            Command::Milne => CommandKind::Milne,
            Command::Frame => CommandKind::Frame,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "galilei", about = "Verify affine-connection identities on Galilei manifolds")]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Manifold spec file.
    spec: PathBuf,
    /// Override the number of sample points.
    #[arg(long)]
    points: Option<usize>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sample box bounds.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    r#box: Option<Vec<f64>>,
    /// Multiply every tolerance by this factor.
    #[arg(long)]
    tol_scale: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the command's connection coefficients, evaluated at the sample
    /// points, as JSON.
    #[arg(long)]
    dump_gamma: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();

    let mut spec = match load_spec(&args.spec) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(points) = args.points {
        spec.sampling.count = points;
    }
    if let Some(seed) = args.seed {
        spec.sampling.seed = seed;
    }
    if let Some(bounds) = &args.r#box {
        if bounds[0] >= bounds[1] {
            eprintln!("error: --box lower bound must be below upper bound");
            return ExitCode::from(2);
        }
        spec.sampling.lo = bounds[0];
        spec.sampling.hi = bounds[1];
    }

    let options = RunOptions {
        tol_scale: args.tol_scale,
        dump_gamma: args.dump_gamma,
    };
    let report = match run(
        args.command.into(),
        &spec,
        &args.spec.display().to_string(),
        &options,
    ) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let json = report.to_json();
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{json}"),
    }

    if report.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
