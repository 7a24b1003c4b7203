//! Summary statistics over learning curves. Every function here is a pure
//! function of per-episode returns, so `curves.csv` alone reproduces them.

pub const SMOOTHING_WINDOW: usize = 10;

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    pgsom_core::vecops::mean_std(xs)
}

/// Trailing moving average over full windows: element `i` averages
/// episodes `i ..= i + window - 1`.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || xs.len() < window {
        return Vec::new();
    }
    xs.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect()
}

/// 1-based episode at which the moving average first reaches `threshold`.
pub fn episodes_to_threshold(returns: &[f64], threshold: f64, window: usize) -> Option<usize> {
    moving_average(returns, window)
        .iter()
        .position(|&m| m >= threshold)
        .map(|i| i + window)
}

/// Median over seeds where `None` (threshold never reached) ranks above
/// every finite value. Returns `None` when the median itself is censored.
pub fn censored_median(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| x.map_or(f64::INFINITY, |e| e as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    m.is_finite().then_some(m)
}

/// Per-episode mean and std across seeds; all curves must share a length.
pub fn band(curves: &[&[f64]]) -> Vec<(f64, f64)> {
    let n = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..n)
        .map(|e| {
            let col: Vec<f64> = curves.iter().map(|c| c[e]).collect();
            mean_std(&col)
        })
        .collect()
}
