//! `dpsr run` executes a seeded run matrix; `dpsr compare` reports percentage
//! improvements between two modes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpsr_core::experiment::{aggregate, compare_report, parse_spec, read_summary, run_experiment, SUMMARY_FILE};
use dpsr_core::trainer::Mode;
use dpsr_core::Error;

/// Default output directory when neither `--out` nor the spec names one.
const OUT_ENV: &str = "DPSR_OUT_DIR";
const FALLBACK_OUT: &str = "dpsr-runs";

#[derive(Parser)]
#[command(name = "dpsr", version, about = "Experience-replay experiments with DPSR, PER and uniform replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (mode, seed) pair of a spec file.
    Run {
        specfile: PathBuf,
        /// Output directory. Overrides the spec's `out` key and $DPSR_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Percentage improvement of one mode over another on final evaluation.
    Compare {
        /// One summary.csv per environment.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        #[arg(long)]
        baseline: Mode,
        #[arg(long)]
        treatment: Mode,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { specfile, out, jobs } => run(&specfile, out, jobs),
        Command::Compare {
            summaries,
            baseline,
            treatment,
        } => compare(&summaries, baseline, treatment),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => 1,
                _ => 2,
            })
        }
    }
}

fn run(specfile: &Path, out: Option<PathBuf>, jobs: usize) -> Result<(), Error> {
    let text = std::fs::read_to_string(specfile).map_err(|source| Error::Io {
        path: specfile.to_path_buf(),
        source,
    })?;
    let spec = parse_spec(&text)?;
    let out = out
        .or_else(|| spec.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT));
    let rows = run_experiment(&spec, &out, jobs)?;

    println!("mode\truns\tmean_final_eval\tmedian_final_eval\tmedian_steps_to_threshold\treached");
    for &mode in &spec.modes {
        let agg = aggregate(&rows, mode);
        let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{mode}\t{}\t{}\t{}\t{}\t{}/{}",
            agg.runs,
            show(agg.mean_final_eval),
            show(agg.median_final_eval),
            show(agg.median_steps_to_threshold),
            agg.reached_threshold,
            agg.runs
        );
    }
    println!("wrote {}", out.join(SUMMARY_FILE).display());
    Ok(())
}

/// Labels a summary by its directory, falling back to the path itself.
fn label(path: &Path) -> String {
    path.parent()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn compare(paths: &[PathBuf], baseline: Mode, treatment: Mode) -> Result<(), Error> {
    let tables = paths
        .iter()
        .map(|p| Ok((label(p), read_summary(p)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    print!("{}", compare_report(&tables, baseline, treatment)?);
    Ok(())
}
