use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::correlation::{acf_matrix, ccf, pacf_pooled};
use super::pdf::{count_modes, pdf_histogram, Histogram};
use super::waves::wave_stats;
use crate::error::{Error, Result};
use crate::series::RowMatrix;

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_MAX_LAG: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub n_bins: usize,
    /// Histogram range; `None` uses the padded sample range.
    pub range: Option<(f64, f64)>,
    pub max_lag: usize,
    pub pacf_lag: Option<usize>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            n_bins: DEFAULT_BINS,
            range: None,
            max_lag: DEFAULT_MAX_LAG,
            pacf_lag: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub k: usize,
    pub n: usize,
    pub pdf: Histogram,
    pub modes: usize,
    /// Lags `0..=max_lag`.
    pub acf: Vec<f64>,
    /// Lags `-max_lag..=max_lag`.
    pub ccf: Vec<f64>,
    pub wave_mean: Vec<f64>,
    pub wave_var: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pacf: Option<Vec<f64>>,
}

impl DiagnosticsReport {
    pub fn max_lag(&self) -> usize {
        self.acf.len() - 1
    }

    /// Wavenumber `m >= 1` with the largest mean amplitude.
    pub fn peak_wavenumber(&self) -> usize {
        peak_index(&self.wave_mean)
    }
}

fn peak_index(wave_mean: &[f64]) -> usize {
    (1..wave_mean.len()).fold(1, |best, m| {
        if wave_mean[m] > wave_mean[best] {
            m
        } else {
            best
        }
    })
}

/// Pooled mean and standard deviation of all entries.
pub fn moments(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Full set of statistics of `x`. The PACF, when requested, is computed on
/// `b` if given and on `x` otherwise.
pub fn build_report(
    x: &RowMatrix,
    b: Option<&RowMatrix>,
    opts: &ReportOptions,
) -> Result<DiagnosticsReport> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Data("diagnostics of an empty trajectory".into()));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("trajectory contains non-finite values".into()));
    }
    let pdf = pdf_histogram(x.as_slice(), opts.n_bins, opts.range)?;
    let modes = count_modes(&pdf.densities);
    let acf = acf_matrix(x, opts.max_lag)?;
    let ccf = ccf(x, opts.max_lag)?;
    let (wave_mean, wave_var) = wave_stats(x)?;
    let (mean, std) = moments(x.as_slice());
    let pacf = match opts.pacf_lag {
        Some(lag) => Some(pacf_pooled(b.unwrap_or(x), lag)?),
        None => None,
    };
    Ok(DiagnosticsReport {
        k: x.cols(),
        n: x.rows(),
        pdf,
        modes,
        acf,
        ccf,
        wave_mean,
        wave_var,
        mean,
        std,
        pacf,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Largest lag entering `acf_max_dev`; `None` uses every lag.
    pub acf_max_lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `int |p - q|` over the shared range plus the mass either report has outside it.
    pub pdf_l1: f64,
    pub acf_max_dev: f64,
    pub ccf_max_dev: f64,
    pub wave_mean_rel: Vec<f64>,
    pub wave_var_rel: Vec<f64>,
    pub mean_rel: f64,
    pub std_rel: f64,
    pub modes_ref: usize,
    pub modes_test: usize,
    pub wave_peak_ref: usize,
    pub wave_peak_test: usize,
}

fn rel(reference: f64, test: f64) -> f64 {
    let d = (test - reference).abs();
    if reference == 0.0 {
        d
    } else {
        d / reference.abs()
    }
}

fn max_abs_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Distances between two reports built on identical grids.
pub fn compare_reports(
    reference: &DiagnosticsReport,
    test: &DiagnosticsReport,
    opts: &CompareOptions,
) -> Result<Comparison> {
    let (er, et) = (&reference.pdf.edges, &test.pdf.edges);
    let span = er.last().unwrap_or(&0.0) - er.first().unwrap_or(&0.0);
    if er.len() != et.len()
        || er
            .iter()
            .zip(et)
            .any(|(a, b)| (a - b).abs() > 1e-12 * span.abs().max(1.0))
    {
        return Err(Error::Comparison(
            "histogram bins differ; rebuild the test report with the reference range".into(),
        ));
    }
    if reference.acf.len() != test.acf.len() || reference.ccf.len() != test.ccf.len() {
        return Err(Error::Comparison(format!(
            "lag grids differ ({} vs {})",
            reference.max_lag(),
            test.max_lag()
        )));
    }
    if reference.wave_mean.len() != test.wave_mean.len() {
        return Err(Error::Comparison(format!(
            "grid sizes differ ({} vs {})",
            reference.k, test.k
        )));
    }
    let acf_lag = opts.acf_max_lag.unwrap_or(reference.max_lag());
    if acf_lag > reference.max_lag() {
        return Err(Error::Comparison(format!(
            "ACF lag {acf_lag} exceeds the report's maximum lag {}",
            reference.max_lag()
        )));
    }
    let inside: f64 = (0..reference.pdf.densities.len())
        .map(|i| {
            (reference.pdf.densities[i] - test.pdf.densities[i]).abs() * reference.pdf.bin_width(i)
        })
        .sum();
    let per_wave = |r: &[f64], t: &[f64]| {
        r.iter()
            .zip(t)
            .map(|(&a, &b)| rel(a, b))
            .collect::<Vec<_>>()
    };
    Ok(Comparison {
        pdf_l1: inside + reference.pdf.outside + test.pdf.outside,
        acf_max_dev: max_abs_dev(&reference.acf[..=acf_lag], &test.acf[..=acf_lag]),
        ccf_max_dev: max_abs_dev(&reference.ccf, &test.ccf),
        wave_mean_rel: per_wave(&reference.wave_mean, &test.wave_mean),
        wave_var_rel: per_wave(&reference.wave_var, &test.wave_var),
        mean_rel: rel(reference.mean, test.mean),
        std_rel: rel(reference.std, test.std),
        modes_ref: reference.modes,
        modes_test: test.modes,
        wave_peak_ref: reference.peak_wavenumber(),
        wave_peak_test: test.peak_wavenumber(),
    })
}

/// Pass/fail gate over a [`Comparison`], read from `key = value` lines.
///
/// Recognised keys: `pdf_l1_max`, `acf_max_dev_max`, `ccf_max_dev_max`,
/// `mean_rel_max`, `std_rel_max`, `modes` (exact count expected in the test
/// report) and `acf_max_lag` (read by the caller into [`CompareOptions`]).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub pdf_l1_max: Option<f64>,
    pub acf_max_dev_max: Option<f64>,
    pub ccf_max_dev_max: Option<f64>,
    pub mean_rel_max: Option<f64>,
    pub std_rel_max: Option<f64>,
    pub modes: Option<usize>,
    pub acf_max_lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Thresholds {
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Thresholds::default();
        let mut seen = BTreeSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("thresholds line {}: expected key = value", no + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!(
                    "thresholds line {}: duplicate key {key}",
                    no + 1
                )));
            }
            let bad = || {
                Error::Config(format!(
                    "thresholds line {}: invalid value for {key}: {value}",
                    no + 1
                ))
            };
            match key {
                "pdf_l1_max" => t.pdf_l1_max = Some(value.parse().map_err(|_| bad())?),
                "acf_max_dev_max" => t.acf_max_dev_max = Some(value.parse().map_err(|_| bad())?),
                "ccf_max_dev_max" => t.ccf_max_dev_max = Some(value.parse().map_err(|_| bad())?),
                "mean_rel_max" => t.mean_rel_max = Some(value.parse().map_err(|_| bad())?),
                "std_rel_max" => t.std_rel_max = Some(value.parse().map_err(|_| bad())?),
                "modes" => t.modes = Some(value.parse().map_err(|_| bad())?),
                "acf_max_lag" => t.acf_max_lag = Some(value.parse().map_err(|_| bad())?),
                other => {
                    return Err(Error::Config(format!(
                        "thresholds line {}: unknown key {other}",
                        no + 1
                    )))
                }
            }
        }
        Ok(t)
    }

    pub fn compare_options(&self) -> CompareOptions {
        CompareOptions {
            acf_max_lag: self.acf_max_lag,
        }
    }

    pub fn check(&self, c: &Comparison) -> Vec<Check> {
        let mut out = Vec::new();
        let mut push = |name: &str, value: f64, limit: Option<f64>| {
            if let Some(limit) = limit {
                out.push(Check {
                    name: name.into(),
                    value,
                    limit,
                    pass: value <= limit,
                });
            }
        };
        push("pdf_l1", c.pdf_l1, self.pdf_l1_max);
        push("acf_max_dev", c.acf_max_dev, self.acf_max_dev_max);
        push("ccf_max_dev", c.ccf_max_dev, self.ccf_max_dev_max);
        push("mean_rel", c.mean_rel, self.mean_rel_max);
        push("std_rel", c.std_rel, self.std_rel_max);
        if let Some(m) = self.modes {
            out.push(Check {
                name: "modes".into(),
                value: c.modes_test as f64,
                limit: m as f64,
                pass: c.modes_test == m,
            });
        }
        out
    }
}
