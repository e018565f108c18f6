use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use parafair::analysis::{read_curves, takens_csv, TAKENS_DME_FILE, TAKENS_MAE_FILE};
use parafair::experiment::{load_config, run_experiment, RunOptions};
use parafair::Error;

#[derive(Parser)]
#[command(
    name = "parafair",
    version,
    about = "Fairness-aware matrix factorization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every model in a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Experiment seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress progress on stderr.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// Delay-embed the curves in a `curves.csv`.
    Embed {
        curves: PathBuf,
        #[arg(long, default_value_t = 1)]
        delay: usize,
        /// Directory for the takens CSVs (defaults to the curves' directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_validation() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok((c, _)) => {
                let names: Vec<&str> = c.models.iter().map(|m| m.name()).collect();
                println!("ok: {} model(s): {}", names.len(), names.join(", "));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            out,
            seed,
            quiet,
        } => {
            let (mut cfg, base_dir) = match load_config(&config) {
                Ok(x) => x,
                Err(e) => return fail(&e),
            };
            if let Some(s) = seed {
                cfg.set_seed(s);
            }
            let mut opts = RunOptions {
                base_dir,
                progress: !quiet,
            };
            if let Some(dir) = out {
                // --out is taken relative to the working directory
                cfg.output_dir = std::path::absolute(&dir).unwrap_or(dir);
            }
            if cfg.output_dir.is_absolute() {
                opts.base_dir = std::path::absolute(&opts.base_dir).unwrap_or(opts.base_dir);
            }
            match run_experiment(&cfg, &opts) {
                Ok(outcome) => {
                    print!("{}", outcome.table());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Embed { curves, delay, out } => {
            if delay == 0 {
                eprintln!("error: --delay must be >= 1");
                return ExitCode::from(1);
            }
            let traces = match read_curves(&curves) {
                Ok(t) => t,
                Err(e) => return fail(&e),
            };
            let dir = out.unwrap_or_else(|| curves.parent().map(PathBuf::from).unwrap_or_default());
            if let Err(e) = std::fs::create_dir_all(&dir) {
                eprintln!("error: {}: {e}", dir.display());
                return ExitCode::from(2);
            }
            for (name, which) in [(TAKENS_MAE_FILE, 0), (TAKENS_DME_FILE, 1)] {
                let (csv, rows) = takens_csv(
                    &traces,
                    |t| {
                        if which == 0 {
                            &t.mae_curve
                        } else {
                            &t.dme_curve
                        }
                    },
                    delay,
                );
                let path = dir.join(name);
                if let Err(e) = std::fs::write(&path, csv) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
                eprintln!("wrote {rows} rows to {}", path.display());
            }
            ExitCode::SUCCESS
        }
    }
}
