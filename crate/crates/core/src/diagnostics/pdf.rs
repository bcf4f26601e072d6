use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the moving-average window applied before counting modes.
pub const MODE_SMOOTHING_WINDOW: usize = 5;

/// A local maximum counts as a mode when its prominence is at least this
/// fraction of the highest smoothed density.
pub const MODE_PROMINENCE: f64 = 0.05;

/// Density-normalized histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `n_bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// Fraction of samples that fell outside `[edges[0], edges[n]]`.
    pub outside: f64,
}

impl Histogram {
    pub fn bin_width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Total probability mass inside the binned range.
    pub fn mass(&self) -> f64 {
        self.densities
            .iter()
            .enumerate()
            .map(|(i, d)| d * self.bin_width(i))
            .sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Default range: sample min/max padded by 1% of the span on each side.
pub(crate) fn default_range(samples: &[f64]) -> (f64, f64) {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.01 * span, hi + 0.01 * span)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Density histogram of `samples` with `n_bins` equal-width bins.
///
/// The last bin is closed on the right. Samples outside an explicit `range`
/// are counted in [`Histogram::outside`] but still part of the normalization.
pub fn pdf_histogram(
    samples: &[f64],
    n_bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::Data("histogram of an empty sample".into()));
    }
    if n_bins < 2 {
        return Err(Error::Data("histogram needs at least 2 bins".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("histogram samples must be finite".into()));
    }
    let (lo, hi) = range.unwrap_or_else(|| default_range(samples));
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Data(format!("invalid histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; n_bins];
    let mut outside = 0u64;
    for &v in samples {
        if v < lo || v > hi {
            outside += 1;
            continue;
        }
        let i = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    let total = samples.len() as f64;
    let densities = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    Ok(Histogram {
        edges,
        densities,
        outside: outside as f64 / total,
    })
}

/// Centered moving average; windows are truncated at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Number of modes: interior local maxima of the smoothed density whose
/// topographic prominence reaches [`MODE_PROMINENCE`] of the global maximum.
/// Plateaus count once.
pub fn count_modes(densities: &[f64]) -> usize {
    let s = moving_average(densities, MODE_SMOOTHING_WINDOW);
    let n = s.len();
    let peak = s.iter().copied().fold(0.0f64, f64::max);
    if n < 3 || peak <= 0.0 {
        return 0;
    }
    let threshold = MODE_PROMINENCE * peak;
    let mut modes = 0;
    let mut i = 1;
    while i + 1 < n {
        let mut j = i;
        while j + 1 < n && s[j + 1] == s[i] {
            j += 1;
        }
        let h = s[i];
        if j + 1 < n && s[i - 1] < h && s[j + 1] < h {
            // Lowest point on each side before the signal rises above h again.
            let left_min = s[..i]
                .iter()
                .rev()
                .take_while(|&&v| v <= h)
                .fold(h, |m, &v| m.min(v));
            let right_min = s[j + 1..]
                .iter()
                .take_while(|&&v| v <= h)
                .fold(h, |m, &v| m.min(v));
            if h - left_min.max(right_min) >= threshold {
                modes += 1;
            }
        }
        i = j + 1;
    }
    modes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_samples_fill_one_bin() {
        let h = pdf_histogram(&[3.0; 100], 10, None).unwrap();
        let occupied: Vec<usize> = (0..10).filter(|&i| h.densities[i] > 0.0).collect();
        assert_eq!(occupied.len(), 1);
        let i = occupied[0];
        assert_abs_diff_eq!(h.densities[i], 1.0 / h.bin_width(i), epsilon = 1e-12);
        assert_abs_diff_eq!(h.mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn explicit_range_tracks_outside_mass() {
        let h = pdf_histogram(&[0.5, 1.5, 2.5, 10.0], 4, Some((0.0, 4.0))).unwrap();
        assert_eq!(h.outside, 0.25);
        assert_abs_diff_eq!(h.mass(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pdf_histogram(&[], 10, None).is_err());
        assert!(pdf_histogram(&[1.0], 1, None).is_err());
        assert!(pdf_histogram(&[1.0, f64::NAN], 4, None).is_err());
    }

    fn bumps(centers: &[f64]) -> Vec<f64> {
        (0..100)
            .map(|i| {
                let x = i as f64 / 10.0;
                centers.iter().map(|c| (-(x - c).powi(2) / 0.3).exp()).sum()
            })
            .collect()
    }

    #[test]
    fn mode_counting() {
        assert_eq!(count_modes(&bumps(&[5.0])), 1);
        assert_eq!(count_modes(&bumps(&[2.0, 5.0, 8.0])), 3);
        // A shoulder far below 5% prominence does not count.
        let mut d = bumps(&[5.0]);
        for (i, v) in d.iter_mut().enumerate() {
            *v += 0.001 * ((i as f64) * 0.9).sin().max(0.0);
        }
        assert_eq!(count_modes(&d), 1);
        assert_eq!(count_modes(&[0.0; 10]), 0);
    }
}
