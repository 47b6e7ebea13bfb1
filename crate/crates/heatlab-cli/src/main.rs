//! Command-line experiment runner.
//!
//! Usage: `heatlab <experiment> --config PATH [--out DIR] [--seed N]`
//!        `[--format csv|json]`
//!
//! The subcommand must match the `experiment` key of the config file.
//! Exit codes: 0 all assertions pass, 1 assertion failure, 2 config or
//! runtime error. HEATLAB_THREADS caps worker threads (default 1); results
//! are identical for every cap.

use heatlab_cli::config::ExperimentConfig;
use heatlab_cli::report::ReportFormat;
use std::path::PathBuf;
use std::process::ExitCode;

struct Args {
    experiment: String,
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    format: ReportFormat,
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let experiment = argv.next().ready_or("missing experiment subcommand")?;
    let mut config = None;
    let mut out = None;
    let mut seed = None;
    let mut format = ReportFormat::Csv;
    while let Some(flag) = argv.next() {
        match flag.as_str() {
            "--config" => {
                config = Some(PathBuf::from(
                    argv.next().ready_or("--config needs a path")?,
                ))
            }
            "--out" => {
                out = Some(PathBuf::from(
                    argv.next().ready_or("--out needs a directory")?,
                ))
            }
            "--seed" => {
                seed = Some(
                    argv.next()
                        .ready_or("--seed needs a number")?
                        .parse::<u64>()
                        .map_err(|e| format!("--seed: {e}"))?,
                )
            }
            "--format" => {
                format = match argv.next().ready_or("--format needs csv or json")?.as_str() {
                    "csv" => ReportFormat::Csv,
                    "json" => ReportFormat::Json,
                    other => return Err(format!("--format: unknown format `{other}`")),
                }
            }
            other => return Err(format!("unknown flag `{other}`")),
        }
    }
    Ok(Args {
        experiment,
        config: config.ready_or("--config is required")?,
        out,
        seed,
        format,
    })
}

trait ReadyOr<T> {
    fn ready_or(self, msg: &str) -> Result<T, String>;
}

impl<T> ReadyOr<T> for Option<T> {
    fn ready_or(self, msg: &str) -> Result<T, String> {
        self.ok_or_else(|| msg.to_string())
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<bool, String> {
    if let Ok(cap) = std::env::var("HEATLAB_THREADS") {
        let cap: usize = cap.parse().map_err(|e| format!("HEATLAB_THREADS: {e}"))?;
        heatlab::threads::set_thread_cap(cap);
    }
    let args = parse_args()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("reading {}: {e}", args.config.display()))?;
    let mut config = ExperimentConfig::parse(&text).map_err(|e| e.to_string())?;
    if config.experiment.name() != args.experiment {
        return Err(format!(
            "subcommand `{}` does not match config experiment `{}`",
            args.experiment,
            config.experiment.name()
        ));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let bundle = heatlab_cli::run_experiment(&config).map_err(|e| e.to_string())?;
    print!("{}", bundle.render_summary_lines());
    if let Some(dir) = &args.out {
        bundle
            .emit(dir, args.format)
            .map_err(|e| format!("writing {}: {e}", dir.display()))?;
    }
    Ok(bundle.pass())
}
