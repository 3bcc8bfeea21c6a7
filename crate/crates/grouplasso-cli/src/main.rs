use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grouplasso::glm::GlmFamily;
use grouplasso::norms::PNorm;
use grouplasso_cli::bench::{bench_csv, run_bench};
use grouplasso_cli::config::{load_config, BenchConfig, ExperimentConfig, FitSettings};
use grouplasso_cli::error::CliResult;
use grouplasso_cli::experiment::{run_experiment, write_experiment_files};
use grouplasso_cli::{commands, io};

/// Group-Lasso solver for generalized linear models with an l1,p
/// mixed-norm constraint.
#[derive(Parser)]
#[command(name = "grouplasso", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct JobsArg {
    /// Worker threads for experiment cells (default: GROUPLASSO_JOBS or all
    /// cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl JobsArg {
    fn resolve(&self) -> Option<usize> {
        self.jobs.or_else(|| {
            std::env::var("GROUPLASSO_JOBS").ok().and_then(|v| v.parse().ok())
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit one constrained GLM from CSV files.
    Fit {
        /// Design matrix CSV (header row, one observation per line).
        #[arg(long)]
        design: PathBuf,
        /// Response CSV (single column). Bernoulli responses may be coded
        /// +-1 or {0,1}.
        #[arg(long)]
        response: PathBuf,
        /// Group specification CSV: name,start,size per line, contiguous.
        #[arg(long)]
        groups: PathBuf,
        /// Model family.
        #[arg(long, value_parser = parse_family)]
        family: GlmFamily,
        /// Inner norm exponent; "inf" for the max norm.
        #[arg(long, value_parser = parse_pnorm)]
        p: PNorm,
        /// Mixed-norm budget.
        #[arg(long)]
        kappa: f64,
        /// Optional JSON file with solver tolerances.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output path for the JSON report ("-" for stdout).
        #[arg(long, default_value = "-")]
        output: PathBuf,
    },
    /// Project a vector onto the mixed-norm ball (debugging aid).
    Project {
        /// Vector CSV (single column).
        #[arg(long)]
        vector: PathBuf,
        #[arg(long)]
        groups: PathBuf,
        #[arg(long, value_parser = parse_pnorm)]
        p: PNorm,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value = "-")]
        output: PathBuf,
    },
    /// Run the synthetic shared-sparsity study.
    SynthExperiment {
        /// Experiment config JSON; a previous results CSV also works (its
        /// first line embeds the effective config).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replaces the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        jobs: JobsArg,
        /// Results CSV path; the summary and timing tables land next to it.
        #[arg(long, default_value = "results.csv")]
        output: PathBuf,
    },
    /// Time the active-set solver against the full-set baseline over a
    /// group-count grid.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replaces the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "bench.csv")]
        output: PathBuf,
    },
}

fn parse_family(s: &str) -> Result<GlmFamily, String> {
    match s.to_ascii_lowercase().as_str() {
        "gaussian" => Ok(GlmFamily::Gaussian),
        "bernoulli" => Ok(GlmFamily::Bernoulli),
        other => Err(format!("unknown family {other:?}; use gaussian or bernoulli")),
    }
}

fn parse_pnorm(s: &str) -> Result<PNorm, String> {
    s.parse().map_err(|e: grouplasso::Error| e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit { design, response, groups, family, p, kappa, config, output } => {
            let settings: FitSettings = match config {
                Some(path) => load_config(&path)?,
                None => FitSettings::default(),
            };
            commands::cmd_fit(&design, &response, &groups, family, p, kappa, &settings, &output)
        }
        Command::Project { vector, groups, p, kappa, output } => {
            commands::cmd_project(&vector, &groups, p, kappa, &output)
        }
        Command::SynthExperiment { config, seed, jobs, output } => {
            let mut cfg: ExperimentConfig = match config {
                Some(path) => load_config(&path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            let out = run_experiment(&cfg, jobs.resolve())?;
            write_experiment_files(&cfg, &out, &output)?;
            let failures = out.rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!(
                "wrote {} rows ({} failed cells) to {}",
                out.rows.len(),
                failures,
                output.display()
            );
            Ok(())
        }
        Command::Bench { config, seed, output } => {
            let mut cfg: BenchConfig = match config {
                Some(path) => load_config(&path)?,
                None => BenchConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let out = run_bench(&cfg)?;
            io::write_output(&output, &bench_csv(&cfg, &out))?;
            eprintln!("wrote {} bench rows to {}", out.rows.len(), output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success exits
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
