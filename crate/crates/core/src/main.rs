use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use radcom::harness::{self, ExperimentSpec, ResultRow};
use radcom::{Error, ScenarioConfig};

#[derive(Parser)]
#[command(name = "radcom", version, about = "Radar/communication spectrum-sharing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected methods on the base scenario.
    Compare(Common),
    /// Run the selected methods over a parameter grid.
    Sweep(Common),
    /// Like `compare`, with Monte-Carlo recovery (10 trials unless set).
    McEval(Common),
    /// Spectral gap of the initial and the joint-design sampling masks.
    MaskGap(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (flat TOML: scenario keys plus methods, sweep, seeds,
    /// mc_trials, mask_coverage, restarts).
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of selfish,noncoop,coop,partial,full,joint.
    #[arg(long)]
    methods: Option<String>,
    /// var=start:stop:step with var in p, C, targets, rho2, sigma1_2.
    #[arg(long)]
    sweep: Option<String>,
    /// Monte-Carlo recovery trials per row.
    #[arg(long)]
    mc_trials: Option<usize>,
    /// Record wall-clock time per row (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

fn build_spec(c: &Common) -> Result<ExperimentSpec, Error> {
    let mut spec = match &c.config {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::new(ScenarioConfig::default()),
    };
    if let Some(m) = &c.methods {
        spec.methods = harness::parse_methods(m)?;
    }
    if let Some(s) = &c.sweep {
        spec.sweep = s.parse()?;
    }
    match (c.seed, c.seeds) {
        (Some(s), Some(n)) => spec.seeds = (s..s + n).collect(),
        (Some(s), None) => spec.seeds = vec![s],
        (None, Some(n)) => {
            let s = spec.seeds.first().copied().unwrap_or(0);
            spec.seeds = (s..s + n).collect();
        }
        (None, None) => {}
    }
    if let Some(n) = c.mc_trials {
        spec.mc_trials = n;
    }
    spec.timing = c.timing;
    spec.validate()?;
    Ok(spec)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish(rows: &[ResultRow], out: &Option<PathBuf>) -> ExitCode {
    if let Err(e) = emit(&harness::csv_string(rows), out) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if !rows.is_empty() && rows.iter().all(|r| r.error.is_some()) {
        eprintln!("error: every row failed");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, kind) = match &cli.command {
        Command::Compare(c) => (c, 0),
        Command::Sweep(c) => (c, 1),
        Command::McEval(c) => (c, 2),
        Command::MaskGap(c) => (c, 3),
    };
    let mut spec = match build_spec(common) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match kind {
        0 => harness::run_compare(&spec).map(|rows| finish(&rows, &common.out)),
        1 => {
            if spec.sweep.var == harness::SweepVar::None {
                eprintln!("error: sweep needs --sweep var=start:stop:step or a sweep key in the config");
                return ExitCode::from(1);
            }
            harness::sweep(&spec).map(|rows| finish(&rows, &common.out))
        }
        2 => {
            if common.mc_trials.is_none() && spec.mc_trials == 0 {
                spec.mc_trials = 10;
            }
            harness::run_compare(&spec).map(|rows| finish(&rows, &common.out))
        }
        _ => harness::mask_gaps(&spec).and_then(|rows| emit(&harness::gap_csv(&rows), &common.out).map(|_| ExitCode::SUCCESS)),
    };
    match result {
        Ok(code) => code,
        Err(e @ Error::Infeasible(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
