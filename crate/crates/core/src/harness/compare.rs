use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{median, moving_average, CurveSummary};
use super::{run_experiment, EpisodeRecord, HarnessError, Method, Result, RunConfig, WORKERS_ENV};

pub const CSV_HEADER: &str = "method,seed,episode,reward,steps,fallbacks,moving_avg";

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    method: Method,
    seed: u64,
    episode: usize,
    reward: f64,
    steps: usize,
    fallbacks: usize,
    moving_avg: f64,
}

/// Runs every config for every seed. The configs must agree on everything a
/// fair comparison holds fixed: episodes, level and agent settings.
pub fn compare(configs: &[RunConfig], seeds: &[u64]) -> Result<Vec<EpisodeRecord>> {
    let Some(first) = configs.first() else {
        return Err(HarnessError::Invalid("no configs to compare".into()));
    };
    if seeds.is_empty() {
        return Err(HarnessError::Invalid("no seeds to compare".into()));
    }
    for cfg in configs {
        cfg.validate()?;
        let mismatch = if cfg.episodes != first.episodes {
            Some("episodes")
        } else if cfg.level != first.level {
            Some("level")
        } else if cfg.agent != first.agent {
            Some("agent")
        } else {
            None
        };
        if let Some(field) = mismatch {
            return Err(HarnessError::Invalid(format!(
                "{} and {} configs disagree on `{field}`",
                first.method, cfg.method
            )));
        }
    }
    let jobs: Vec<RunConfig> = configs.iter().flat_map(|c| seeds.iter().map(|s| c.with_seed(*s))).collect();
    let run_all = || jobs.par_iter().map(run_experiment).collect::<Result<Vec<_>>>();
    let runs = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Invalid(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };
    Ok(runs.into_iter().flatten().collect())
}

fn worker_count() -> Option<usize> {
    let raw = std::env::var(WORKERS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            log::warn!("ignoring {WORKERS_ENV}={raw:?}");
            None
        }
    }
}

fn group(records: &[EpisodeRecord]) -> BTreeMap<Method, BTreeMap<u64, Vec<&EpisodeRecord>>> {
    let mut out: BTreeMap<Method, BTreeMap<u64, Vec<&EpisodeRecord>>> = BTreeMap::new();
    for r in records {
        out.entry(r.method).or_default().entry(r.seed).or_default().push(r);
    }
    for seeds in out.values_mut() {
        for run in seeds.values_mut() {
            run.sort_by_key(|r| r.episode);
        }
    }
    out
}

pub fn write_csv(path: &Path, records: &[EpisodeRecord], window: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for seeds in group(records).values() {
        for run in seeds.values() {
            let rewards: Vec<f64> = run.iter().map(|r| r.reward).collect();
            for (r, ma) in run.iter().zip(moving_average(&rewards, window)) {
                w.serialize(CsvRow {
                    method: r.method,
                    seed: r.seed,
                    episode: r.episode,
                    reward: r.reward,
                    steps: r.steps,
                    fallbacks: r.fallbacks,
                    moving_avg: ma,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a results CSV back. Wall time is not stored and reads as zero.
pub fn read_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            Ok(EpisodeRecord {
                method: row.method,
                seed: row.seed,
                episode: row.episode,
                reward: row.reward,
                steps: row.steps,
                fallbacks: row.fallbacks,
                wall_time_ms: 0.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes_to_threshold: Option<usize>,
    pub final_moving_average: f64,
    pub fallbacks: usize,
    pub mean_steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// `None` when at least half the seeds never reach the threshold.
    pub median_episodes_to_threshold: Option<f64>,
    pub total_fallbacks: usize,
    pub seeds: Vec<SeedSummary>,
    pub curve: CurveSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub threshold: f64,
    pub window: usize,
    pub methods: Vec<MethodSummary>,
}

pub fn summarize(records: &[EpisodeRecord], threshold: f64, window: usize) -> ComparisonReport {
    let methods = group(records)
        .into_iter()
        .map(|(method, seeds)| {
            let runs: Vec<Vec<f64>> = seeds.values().map(|run| run.iter().map(|r| r.reward).collect()).collect();
            let curve = CurveSummary::from_runs(&runs, window, threshold);
            let seeds: Vec<SeedSummary> = seeds
                .iter()
                .zip(&runs)
                .zip(&curve.episodes_to_threshold)
                .map(|(((seed, run), rewards), ett)| SeedSummary {
                    seed: *seed,
                    episodes_to_threshold: *ett,
                    final_moving_average: moving_average(rewards, window).last().copied().unwrap_or(0.0),
                    fallbacks: run.iter().map(|r| r.fallbacks).sum(),
                    mean_steps: run.iter().map(|r| r.steps as f64).sum::<f64>() / run.len().max(1) as f64,
                })
                .collect();
            MethodSummary {
                method,
                median_episodes_to_threshold: median(&curve.episodes_to_threshold),
                total_fallbacks: seeds.iter().map(|s| s.fallbacks).sum(),
                seeds,
                curve,
            }
        })
        .collect();
    ComparisonReport { threshold, window, methods }
}

impl ComparisonReport {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let show = |v: Option<f64>| v.map_or("never".to_string(), |x| format!("{x}"));
        let mut s = format!(
            "episodes until the {}-episode moving average reaches {}\n\n",
            self.window, self.threshold
        );
        let _ = writeln!(s, "{:<10} {:>8} {:>10}", "method", "median", "fallbacks");
        for m in &self.methods {
            let _ = writeln!(s, "{:<10} {:>8} {:>10}", m.method.name(), show(m.median_episodes_to_threshold), m.total_fallbacks);
        }
        let _ = writeln!(s, "\n{:<10} {:>6} {:>8} {:>9} {:>10} {:>10}", "method", "seed", "episodes", "final_ma", "mean_steps", "fallbacks");
        for m in &self.methods {
            for seed in &m.seeds {
                let _ = writeln!(
                    s,
                    "{:<10} {:>6} {:>8} {:>9.3} {:>10.2} {:>10}",
                    m.method.name(),
                    seed.seed,
                    show(seed.episodes_to_threshold.map(|e| e as f64)),
                    seed.final_moving_average,
                    seed.mean_steps,
                    seed.fallbacks
                );
            }
        }
        s
    }

    /// Gnuplot script plotting the seed-averaged moving averages with a
    /// ±1 standard deviation band, read from `curves_file` as written by
    /// [`ComparisonReport::curves_table`].
    pub fn gnuplot_script(&self, curves_file: &str, output_png: &str) -> String {
        let mut s = format!(
            "set terminal pngcairo size 900,500\nset output '{output_png}'\nset xlabel 'episode'\n\
             set ylabel 'reward ({}-episode moving average)'\nset yrange [0:1.05]\nset key bottom right\nplot \\\n",
            self.window
        );
        let n = self.methods.len();
        for (i, m) in self.methods.iter().enumerate() {
            let (mean_col, sd_col) = (2 + 2 * i, 3 + 2 * i);
            let _ = write!(
                s,
                "  '{curves_file}' using 1:(${mean_col}-${sd_col}):(${mean_col}+${sd_col}) with filledcurves fs transparent solid 0.2 notitle, \\\n  '{curves_file}' using 1:{mean_col} with lines lw 2 title '{}'",
                m.method.name()
            );
            s.push_str(if i + 1 < n { ", \\\n" } else { "\n" });
        }
        s
    }

    /// Whitespace-separated columns: episode, then mean and std per method.
    pub fn curves_table(&self) -> String {
        let mut s = String::from("# episode");
        for m in &self.methods {
            let _ = write!(s, " {0}_mean {0}_std", m.method.name());
        }
        s.push('\n');
        let episodes = self.methods.iter().map(|m| m.curve.moving_average.len()).min().unwrap_or(0);
        for e in 0..episodes {
            let _ = write!(s, "{e}");
            for m in &self.methods {
                let _ = write!(s, " {} {}", m.curve.moving_average[e], m.curve.std_dev[e]);
            }
            s.push('\n');
        }
        s
    }
}
