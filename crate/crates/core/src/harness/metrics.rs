use serde::{Deserialize, Serialize};

/// Trailing mean over `min(window, i + 1)` points. `window` must be ≥ 1.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "moving average window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, x) in series.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= series[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// First episode whose trailing moving average reaches `threshold`.
pub fn episodes_to_threshold(rewards: &[f64], threshold: f64, window: usize) -> Option<usize> {
    // Tolerate the rounding of the running sum.
    moving_average(rewards, window).iter().position(|m| *m >= threshold - 1e-12)
}

/// Median where `None` ranks above every value; `None` when the median
/// itself falls on (or averages with) a `None`.
pub fn median(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.map_or(f64::INFINITY, |x| x as f64)).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let m = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    m.is_finite().then_some(m)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    mean(&xs.iter().map(|x| (x - m).powi(2)).collect::<Vec<_>>()).sqrt()
}

/// Reward curve of one method across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub window: usize,
    /// Raw reward per episode, averaged over seeds.
    pub mean_reward: Vec<f64>,
    /// Per-seed moving averages, averaged over seeds.
    pub moving_average: Vec<f64>,
    /// Standard deviation of the per-seed moving averages.
    pub std_dev: Vec<f64>,
    pub episodes_to_threshold: Vec<Option<usize>>,
}

impl CurveSummary {
    /// `runs` holds one reward series per seed, all the same length.
    pub fn from_runs(runs: &[Vec<f64>], window: usize, threshold: f64) -> Self {
        let episodes = runs.iter().map(Vec::len).min().unwrap_or(0);
        let smoothed: Vec<Vec<f64>> = runs.iter().map(|r| moving_average(r, window)).collect();
        let column = |data: &[Vec<f64>], e: usize| data.iter().map(|r| r[e]).collect::<Vec<_>>();
        Self {
            window,
            mean_reward: (0..episodes).map(|e| mean(&column(runs, e))).collect(),
            moving_average: (0..episodes).map(|e| mean(&column(&smoothed, e))).collect(),
            std_dev: (0..episodes).map(|e| std_dev(&column(&smoothed, e))).collect(),
            episodes_to_threshold: runs.iter().map(|r| episodes_to_threshold(r, threshold, window)).collect(),
        }
    }
}
