use serde::{Deserialize, Serialize};

use super::pdf::default_range;
use crate::error::{Error, Result};
use crate::series::SampleSeries;

/// Densities of `b` conditioned on the bin of the co-located `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPdf {
    pub x_edges: Vec<f64>,
    pub b_edges: Vec<f64>,
    /// One density per x-bin; `None` when no sample fell in that bin.
    pub densities: Vec<Option<Vec<f64>>>,
    pub counts: Vec<u64>,
    /// Conditional mean of `b` per x-bin.
    pub means: Vec<Option<f64>>,
}

fn locate(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if v < edges[0] || v > edges[n] {
        return None;
    }
    // Right-closed last bin, like the marginal histogram.
    let i = edges.partition_point(|&e| e <= v);
    Some(i.saturating_sub(1).min(n - 1))
}

/// Histogram of `b` per `x`-bin, pooled over grid points. Samples whose `x`
/// lies outside `x_edges` are ignored.
pub fn conditional_pdf(
    series: &SampleSeries,
    x_edges: &[f64],
    b_bins: usize,
) -> Result<ConditionalPdf> {
    if x_edges.len() < 2 || x_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Data(
            "x bin edges must be strictly increasing".into(),
        ));
    }
    if b_bins < 2 {
        return Err(Error::Data(
            "conditional density needs at least 2 b bins".into(),
        ));
    }
    if series.is_empty() {
        return Err(Error::Data("conditional density of an empty series".into()));
    }
    let xs = series.x.as_slice();
    let bs = series.b.as_slice();
    let (lo, hi) = default_range(bs);
    let width = (hi - lo) / b_bins as f64;
    let b_edges: Vec<f64> = (0..=b_bins).map(|i| lo + i as f64 * width).collect();
    let nx = x_edges.len() - 1;
    let mut hist = vec![vec![0u64; b_bins]; nx];
    let mut sums = vec![0.0; nx];
    for (&x, &b) in xs.iter().zip(bs) {
        if let Some(i) = locate(x_edges, x) {
            let j = (((b - lo) / width) as usize).min(b_bins - 1);
            hist[i][j] += 1;
            sums[i] += b;
        }
    }
    let counts: Vec<u64> = hist.iter().map(|h| h.iter().sum()).collect();
    let densities = hist
        .iter()
        .zip(&counts)
        .map(|(h, &c)| (c > 0).then(|| h.iter().map(|&v| v as f64 / (c as f64 * width)).collect()))
        .collect();
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    Ok(ConditionalPdf {
        x_edges: x_edges.to_vec(),
        b_edges,
        densities,
        counts,
        means,
    })
}
