//! `lnn-rl`: run, compare and summarize coin-collector experiments.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lnn_rl::harness::{
    compare, read_csv, run_experiment_traced, summarize, write_csv, ComparisonReport, EpisodeRecord, Method, RunConfig,
    StepTrace, DEFAULT_THRESHOLD, DEFAULT_WINDOW,
};

#[derive(Parser)]
#[command(name = "lnn-rl", version, about = "Logic-constrained Q-learning on a coin-collector text game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method for one seed.
    Run {
        /// TOML run config.
        #[arg(long)]
        config: PathBuf,
        /// Override the method named in the config.
        #[arg(long)]
        method: Option<Method>,
        /// Override the seed named in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Write per-episode results here as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one JSON line per step here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Run baseline, shield and guide over several seeds.
    Compare {
        /// Shared config; its `method` is replaced per run.
        #[arg(long, conflicts_with_all = ["baseline", "shield", "guide"])]
        config: Option<PathBuf>,
        #[arg(long, requires_all = ["shield", "guide"])]
        baseline: Option<PathBuf>,
        #[arg(long, requires_all = ["baseline", "guide"])]
        shield: Option<PathBuf>,
        #[arg(long, requires_all = ["baseline", "shield"])]
        guide: Option<PathBuf>,
        /// Seeds 0..N.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Recompute the summary from a results CSV.
    Summarize {
        /// Directory holding `results.csv`, or the CSV itself.
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW, value_parser = positive_window)]
    window: usize,
    /// Also write `curves.dat` and a gnuplot script `plot.gp`.
    #[arg(long)]
    gnuplot: bool,
}

fn positive_window(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("window must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, method, seed, out, trace, report } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.method = method.unwrap_or(cfg.method);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let records = match trace {
                Some(path) => run_with_trace(&cfg, &path)?,
                None => run_experiment_traced(&cfg, None)?,
            };
            if let Some(path) = &out {
                write_csv(path, &records, report.window)?;
            }
            print!("{}", summarize(&records, report.threshold, report.window).to_text());
            Ok(())
        }
        Command::Compare { config, baseline, shield, guide, seeds, out, report } => {
            let configs = match (config, baseline, shield, guide) {
                (Some(shared), None, None, None) => {
                    let cfg = RunConfig::load(&shared)?;
                    Method::ALL.iter().map(|m| cfg.with_method(*m)).collect::<Vec<_>>()
                }
                (None, Some(b), Some(s), Some(g)) => {
                    let mut out = Vec::new();
                    for (method, path) in [(Method::Baseline, b), (Method::Shield, s), (Method::Guide, g)] {
                        let cfg = RunConfig::load(&path)?;
                        if cfg.method != method {
                            log::warn!("{} sets method {}; running it as {method}", path.display(), cfg.method);
                        }
                        out.push(cfg.with_method(method));
                    }
                    out
                }
                _ => bail!("pass either --config or all of --baseline, --shield and --guide"),
            };
            if seeds == 0 {
                bail!("--seeds must be at least 1");
            }
            let seeds: Vec<u64> = (0..seeds).collect();
            let records = compare(&configs, &seeds)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_csv(&out.join("results.csv"), &records, report.window)?;
            write_report(&out, &records, &report)
        }
        Command::Summarize { input, report } => {
            let (dir, csv) = if input.is_dir() {
                (input.clone(), input.join("results.csv"))
            } else {
                (input.parent().map(Path::to_path_buf).unwrap_or_default(), input.clone())
            };
            let records = read_csv(&csv).with_context(|| format!("reading {}", csv.display()))?;
            write_report(&dir, &records, &report)
        }
    }
}

fn run_with_trace(cfg: &RunConfig, path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let mut failure = None;
    let mut sink = |t: &StepTrace| {
        if failure.is_none() {
            if let Err(e) = serde_json::to_writer(&mut w, t).map_err(anyhow::Error::from).and_then(|()| Ok(w.write_all(b"\n")?)) {
                failure = Some(e);
            }
        }
    };
    let records = run_experiment_traced(cfg, Some(&mut sink))?;
    if let Some(e) = failure {
        return Err(e.context(format!("writing {}", path.display())));
    }
    w.flush()?;
    Ok(records)
}

fn write_report(dir: &Path, records: &[EpisodeRecord], args: &ReportArgs) -> Result<()> {
    let report: ComparisonReport = summarize(records, args.threshold, args.window);
    fs::write(dir.join("summary.json"), report.to_json())?;
    let text = report.to_text();
    fs::write(dir.join("summary.txt"), &text)?;
    if args.gnuplot {
        fs::write(dir.join("curves.dat"), report.curves_table())?;
        fs::write(dir.join("plot.gp"), report.gnuplot_script("curves.dat", "curves.png"))?;
    }
    print!("{text}");
    Ok(())
}
