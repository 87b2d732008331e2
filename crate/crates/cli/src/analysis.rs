//! Trace statistics used by the sweeps and the online study.

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pointwise mean of equally long series.
pub fn pointwise_mean(series: &[Vec<f64>]) -> Vec<f64> {
    let Some(len) = series.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    (0..len)
        .map(|k| series.iter().map(|s| s[k]).sum::<f64>() / series.len() as f64)
        .collect()
}

fn max_min_ratio(window: &[f64]) -> f64 {
    let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Max/min ratio over the tail window (records `k >= ceil(K / 5)`).
pub fn tail_window_ratio(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    max_min_ratio(&errors[(errors.len() - 1).div_ceil(5)..])
}

/// Ranks with ties averaged, starting at 1.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Error behavior around one change of the cost functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    /// First iteration measured against the new optimum.
    pub boundary: usize,
    /// Mean error over the window just before the boundary.
    pub pre_plateau: f64,
    pub spike: f64,
    /// Mean error over the last window of the new epoch.
    pub post_plateau: f64,
    /// Max/min over that window.
    pub post_ratio: f64,
}

impl Spike {
    pub fn ratio(&self) -> f64 {
        self.spike / self.pre_plateau
    }

    /// Error at least doubles at the boundary.
    pub fn detected(&self) -> bool {
        self.ratio() >= 2.0
    }

    /// Settled (window max/min below 3) well below the spike.
    pub fn recontracted(&self) -> bool {
        self.post_ratio < 3.0 && self.post_plateau < 0.5 * self.spike
    }
}

/// Spikes at every boundary `0 < b < K` of a trace with `K + 1` records.
/// Plateaus are averaged over `min(20, period / 5)` iterations.
pub fn epoch_spikes(errors: &[f64], change_period: usize) -> Vec<Spike> {
    if errors.len() < 2 || change_period == 0 {
        return Vec::new();
    }
    let horizon = errors.len() - 1;
    let window = (change_period / 5).clamp(1, 20);
    let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
    (1..)
        .map(|j| j * change_period)
        .take_while(|&b| b < horizon)
        .filter(|&b| b >= window)
        .map(|b| {
            let end = (b + change_period).min(horizon);
            let post = &errors[end.saturating_sub(window).max(b)..end];
            Spike {
                boundary: b,
                pre_plateau: mean(&errors[b - window..b]),
                spike: errors[b],
                post_plateau: mean(post),
                post_ratio: max_min_ratio(post),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_hand_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        // ranks (1, 2, 3, 4) vs (2, 1, 4, 3): 1 - 6 * 4 / (4 * 15) = 0.6
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]) - 0.6).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tail_ratio_window() {
        assert_eq!(tail_window_ratio(&[100.0, 4.0, 2.0, 1.0, 2.0, 2.0]), 4.0);
        assert_eq!(tail_window_ratio(&[3.0; 11]), 1.0);
    }

    #[test]
    fn spikes_on_synthetic_trace() {
        let mut e = vec![1.0; 501];
        for b in [100, 200, 300, 400] {
            for k in b..b + 10 {
                e[k] = 10.0 / (k - b + 1) as f64 + 1.0;
            }
        }
        let spikes = epoch_spikes(&e, 100);
        assert_eq!(spikes.len(), 4);
        for s in spikes {
            assert_eq!(s.spike, 11.0);
            assert!(s.detected() && s.recontracted());
        }
        assert!(epoch_spikes(&vec![1.0; 501], 100).iter().all(|s| !s.detected()));
        assert!(epoch_spikes(&vec![1.0; 100], 1000).is_empty());
    }
}
