use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quadhull::cli::{self, ArtifactFormat};
use quadhull::config::Config;

/// Exact second-order-cone hulls of a quadratic equation over a polytope.
#[derive(Parser)]
#[command(name = "quadhull", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Cap on worker threads (also honored from QUADHULL_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Rotate the pure-linear block into a single coordinate before
    /// classifying.
    #[arg(long, global = true)]
    aggregate_linear: bool,
}

#[derive(Args)]
struct InstanceArg {
    /// Path to the instance JSON file.
    instance: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build the hull and write the flattened formulation.
    Build {
        #[command(flatten)]
        instance: InstanceArg,
        /// Artifact format: json (reloadable), cbf, or txt.
        #[arg(long, default_value = "json")]
        format: String,
        /// Output path; defaults next to the instance.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximize a linear objective over the hull.
    Optimize {
        #[command(flatten)]
        instance: InstanceArg,
        /// Objective coefficients, comma separated (e.g. --c 1,0).
        #[arg(long, value_name = "C1,C2,...")]
        c: String,
        /// Optimize each disjunct separately and take the best.
        #[arg(long)]
        per_leaf: bool,
        /// Reuse a previously built json artifact instead of rebuilding.
        #[arg(long)]
        from_artifact: Option<PathBuf>,
    },
    /// Check the hull against the brute-force oracle.
    Verify {
        #[command(flatten)]
        instance: InstanceArg,
        /// Number of random unit objectives to compare.
        #[arg(long, default_value_t = 8)]
        objectives: usize,
        /// Number of surface samples for membership testing.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Verify a stored artifact instead of rebuilding.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Write the formulation as conic-benchmark or human-readable text.
    Export {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long, default_value = "cbf")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print formulation statistics.
    Stats {
        #[command(flatten)]
        instance: InstanceArg,
    },
    /// Sample the surface and write a CSV point cloud.
    SampleSurface {
        #[command(flatten)]
        instance: InstanceArg,
        #[arg(long, default_value_t = 100)]
        density: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| std::env::var("QUADHULL_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }

    let mut cfg = Config::default();
    cfg.aggregate_linear = cli.aggregate_linear;

    let outcome = match &cli.command {
        Command::Build { instance, format, out } => format
            .parse::<ArtifactFormat>()
            .and_then(|f| cli::cmd_build(&instance.instance, f, out.clone(), &cfg))
            .map(|report| (report, true)),
        Command::Optimize { instance, c, per_leaf, from_artifact } => parse_objective(c)
            .and_then(|obj| {
                cli::cmd_optimize(
                    &instance.instance,
                    &obj,
                    *per_leaf,
                    from_artifact.as_deref(),
                    &cfg,
                )
            })
            .map(|report| (report, true)),
        Command::Verify { instance, objectives, samples, seed, artifact } => cli::cmd_verify(
            &instance.instance,
            *objectives,
            *samples,
            *seed,
            artifact.as_deref(),
            &cfg,
        ),
        Command::Export { instance, format, out } => format
            .parse::<ArtifactFormat>()
            .and_then(|f| cli::cmd_export(&instance.instance, f, out.clone(), &cfg))
            .map(|report| (report, true)),
        Command::Stats { instance } => {
            cli::cmd_stats(&instance.instance, &cfg).map(|report| (report, true))
        }
        Command::SampleSurface { instance, density, seed, out } => {
            cli::cmd_sample_surface(&instance.instance, *density, *seed, out.clone())
                .map(|report| (report, true))
        }
    };

    match outcome {
        Ok((report, pass)) => {
            print!("{report}");
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(cli::EXIT_VERIFY_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}

fn parse_objective(text: &str) -> quadhull::Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| quadhull::Error::Parse(format!("bad objective entry '{t}'")))
        })
        .collect()
}
