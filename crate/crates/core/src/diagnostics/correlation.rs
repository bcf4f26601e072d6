use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::estimation::pacf_from_acf;
use crate::series::RowMatrix;

fn centered(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let d: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let var = d.iter().map(|v| v * v).sum::<f64>() / n;
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !var.is_finite() || var <= (1e-12 * scale).powi(2) {
        return Err(Error::Data("series has zero variance".into()));
    }
    Ok((d, var))
}

/// Biased cross-covariances `(1/n) sum_t a[t] b[t+tau]` for `tau` in
/// `-max_lag..=max_lag`, computed with zero-padded FFTs.
fn cross_covariance(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let n = a.len();
    let m = (n + max_lag + 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let pad = |s: &[f64]| {
        let mut v: Vec<Complex64> = s.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        v.resize(m, Complex64::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    fwd.process(&mut fa);
    let mut fb = if std::ptr::eq(a, b) {
        fa.clone()
    } else {
        let mut v = pad(b);
        fwd.process(&mut v);
        v
    };
    for (x, y) in fb.iter_mut().zip(&fa) {
        *x *= y.conj();
    }
    inv.process(&mut fb);
    let norm = 1.0 / (m as f64 * n as f64);
    (0..=2 * max_lag)
        .map(|i| {
            let idx = if i >= max_lag {
                i - max_lag
            } else {
                m - (max_lag - i)
            };
            fb[idx].re * norm
        })
        .collect()
}

/// Sample autocorrelation at lags `0..=max_lag` with the biased (`1/N`)
/// covariance estimator; `acf[0]` is exactly 1.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(Error::Data(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let (d, var) = centered(series)?;
    let cov = cross_covariance(&d, &d, max_lag);
    let mut out: Vec<f64> = cov[max_lag..].iter().map(|c| c / var).collect();
    out[0] = 1.0;
    Ok(out)
}

/// Average of the per-column autocorrelations.
pub fn acf_matrix(x: &RowMatrix, max_lag: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; max_lag + 1];
    for k in 0..x.cols() {
        for (a, v) in acc.iter_mut().zip(acf(&x.column(k), max_lag)?) {
            *a += v;
        }
    }
    let kk = x.cols() as f64;
    acc.iter_mut().for_each(|a| *a /= kk);
    acc[0] = 1.0;
    Ok(acc)
}

/// Correlation of `a[t]` with `b[t + tau]` for `tau` in `-max_lag..=max_lag`
/// (entry `max_lag` is lag 0).
pub fn cross_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Data(
            "cross-correlation needs equal-length series".into(),
        ));
    }
    if a.len() <= max_lag {
        return Err(Error::Data(format!(
            "series of length {} is too short for lag {max_lag}",
            a.len()
        )));
    }
    let (da, va) = centered(a)?;
    let (db, vb) = centered(b)?;
    let s = (va * vb).sqrt();
    Ok(cross_covariance(&da, &db, max_lag)
        .into_iter()
        .map(|c| c / s)
        .collect())
}

/// Lag-resolved correlation between neighbouring grid points `k` and `k+1`
/// (cyclic), averaged over `k`. Lags run `-max_lag..=max_lag`.
pub fn ccf(x: &RowMatrix, max_lag: usize) -> Result<Vec<f64>> {
    let kk = x.cols();
    if kk < 2 {
        return Err(Error::Data(
            "cross-correlation needs at least 2 grid points".into(),
        ));
    }
    let cols: Vec<Vec<f64>> = (0..kk).map(|k| x.column(k)).collect();
    let mut acc = vec![0.0; 2 * max_lag + 1];
    for k in 0..kk {
        let c = cross_correlation(&cols[k], &cols[(k + 1) % kk], max_lag)?;
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= kk as f64);
    Ok(acc)
}

/// PACF of a matrix of scalar series: Durbin–Levinson on the column-averaged ACF.
pub fn pacf_pooled(b: &RowMatrix, max_lag: usize) -> Result<Vec<f64>> {
    let rho = acf_matrix(b, max_lag)?;
    pacf_from_acf(&rho, max_lag)
}
