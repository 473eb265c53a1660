use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use conical_lab::{run, Config, LabError, ResultTable, EXPERIMENTS};

/// Numerical checks of conical square-function estimates.
#[derive(Debug, Parser)]
#[command(name = "conical-lab", version)]
struct Cli {
    /// One of sharpness, angles, carleson, cp-maximal, offdiag, boundedness, comparisons, all.
    experiment: String,

    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: PathBuf,

    /// Overrides one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Directory receiving `<experiment>.csv`.
    #[arg(long)]
    out: PathBuf,
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(failed) => ExitCode::from(if failed { EXIT_FAIL } else { 0 }),
        Err(e) => {
            eprintln!("conical-lab: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, LabError> {
    let mut cfg = Config::load(&cli.config)?;
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    let names: Vec<&str> = match cli.experiment.as_str() {
        "all" => EXPERIMENTS.to_vec(),
        name if EXPERIMENTS.contains(&name) => vec![name],
        other => return Err(LabError::Config(format!("unknown experiment `{other}`"))),
    };
    if let Ok(v) = std::env::var("CONICAL_LAB_THREADS") {
        let threads: usize =
            v.parse().map_err(|_| LabError::Config(format!("CONICAL_LAB_THREADS = {v:?} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| LabError::Config(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut failed = false;
    let mut combined = ResultTable::default();
    for name in names {
        let table = run(name, &cfg)?;
        failed |= table.any_fail();
        std::fs::write(cli.out.join(format!("{name}.csv")), table.to_csv_with_timestamp(&format!("unix={stamp}")))?;
        eprintln!("{name}: {} pass, {} fail, {} info", table.count(conical_lab::Verdict::Pass),
            table.count(conical_lab::Verdict::Fail), table.count(conical_lab::Verdict::Info));
        combined.extend(table);
    }
    if cli.experiment == "all" {
        std::fs::write(cli.out.join("all.csv"), combined.to_csv_with_timestamp(&format!("unix={stamp}")))?;
    }
    Ok(failed)
}
