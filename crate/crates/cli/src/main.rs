use std::path::{Path, PathBuf};
use std::process::ExitCode;

use canoa_cli::commands::{cmd_all, cmd_authenticate, cmd_simulate, cmd_sweep, cmd_train, grid_table};
use canoa_cli::report::confusion_table;
use canoa_cli::{CliError, OutputFormat, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "canoa",
    version,
    about = "CAN sender authentication from per-ECU power traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured decision threshold.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured scenario into a trace directory.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model bundle from a trace directory.
    Train {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Authenticate every transmission in a trace directory.
    Authenticate {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        /// Verdict CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the bitrate × format × program grid.
    Sweep {
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, train and authenticate in one go.
    All {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = c.delta {
        cfg.delta = d;
    }
    Ok(cfg)
}

fn print_table_file(path: &Path) {
    if let Ok(s) = std::fs::read_to_string(path) {
        print!("{s}");
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    let fmt = cli.common.format;
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Simulate { out } => {
            let s = cmd_simulate(&cfg, out)?;
            println!("{s}");
        }
        Command::Train { traces, out } => {
            let s = cmd_train(traces, &cfg, out, fmt)?;
            print!("{}", s.report.render(fmt));
            println!("bundle written to {}", s.bundle_path.display());
        }
        Command::Authenticate { traces, bundle, out } => {
            let s = cmd_authenticate(traces, bundle, out, fmt)?;
            println!("{} verdicts written to {}", s.evaluation.verdicts.len(), out.display());
            if let Some(a) = &s.attack_confusion {
                print!("{}", confusion_table(a).render(fmt));
            }
            let mean = s.evaluation.latency.mean();
            eprintln!("mean attribution time {:.3} ms", mean.as_secs_f64() * 1e3);
        }
        Command::Sweep { out } => {
            let g = cmd_sweep(&cfg, out, fmt)?;
            print!("{}", grid_table(&g).render(fmt));
        }
        Command::All { out } => {
            let s = cmd_all(&cfg, out, fmt)?;
            println!("train: {}", s.train);
            println!("eval: {}", s.eval);
            print!("{}", s.training.report.render(fmt));
            if let Some(a) = &s.auth.attack_confusion {
                print!("{}", confusion_table(a).render(fmt));
            }
            print_table_file(&out.join(format!("verdicts_sender_confusion.{}", fmt.extension())));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CANOA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
