use clap::{Parser, Subcommand};
use slowmix_cli::{config, run_suite, CONFIG_SCHEMA, EXIT_ASSERTION, EXIT_OK, EXIT_USAGE};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slowmix", version, about = "Run bottleneck and sampler verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite and write CSV results plus a manifest.
    Run {
        /// One of: fk-verify, davies-fixed-point, mixing-vs-bound, tfim-bottleneck,
        /// code-expansion, classical-barrier, lightcone, chen-truncation.
        suite: String,
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's `out`, else results/<suite>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config against the schema without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the JSON schema of the config format.
    Schema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(dispatch(cli.command) as u8)
}

fn dispatch(cmd: Command) -> i32 {
    match cmd {
        Command::Schema => {
            print!("{CONFIG_SCHEMA}");
            EXIT_OK
        }
        Command::Validate { config } => match config::load(&config, None) {
            Ok(cfg) => {
                println!("{}: ok (suite {})", config.display(), cfg.suite);
                EXIT_OK
            }
            Err(d) => {
                eprintln!("{d}");
                EXIT_USAGE
            }
        },
        Command::Run {
            suite,
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = match config::load(&config, Some(&suite)) {
                Ok(c) => c,
                Err(d) => {
                    eprintln!("{d}");
                    return EXIT_USAGE;
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if threads == Some(0) {
                eprintln!("--threads must be >= 1");
                return EXIT_USAGE;
            }
            if let Some(k) = threads.or(cfg.threads) {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
                    eprintln!("cannot configure thread pool: {e}");
                    return EXIT_USAGE;
                }
            }
            let out_dir = out
                .or_else(|| cfg.out.as_ref().map(|o| cfg.resolve(&o.to_string_lossy())))
                .unwrap_or_else(|| PathBuf::from("results").join(&cfg.suite));
            match run_suite(&cfg, &out_dir) {
                Ok(summary) if summary.failures.is_empty() => {
                    println!("{}: ok, results in {}", cfg.suite, summary.out_dir.display());
                    EXIT_OK
                }
                Ok(summary) => {
                    for f in &summary.failures {
                        eprintln!("FAIL {f}");
                    }
                    eprintln!(
                        "{}: {} assertion(s) failed, results in {}",
                        cfg.suite,
                        summary.failures.len(),
                        summary.out_dir.display()
                    );
                    EXIT_ASSERTION
                }
                Err(e) => {
                    eprintln!("{}: {e}", cfg.suite);
                    EXIT_USAGE
                }
            }
        }
    }
}
