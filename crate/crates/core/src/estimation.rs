//! Pooled least-squares fitting of VARX parameterizations and PACF-based
//! order-selection statistics.
//!
//! Regression rows are pooled over all grid points: each `(n, k)` with
//! `n >= p` contributes one row `[1, x[n,k], b[n-p,k]]` (inactive regressors
//! omitted) with target `b[n,k]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::acf;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, lstsq_qr, GivensQr};
use crate::series::{RowMatrix, SampleSeries};
use crate::varx::{
    check_stability, CompanionSpectrum, CovarianceKind, LagMode, LowerTriangular, NoiseRoot,
    VarxModel, VarxSpec,
};

/// Minimum rows beyond the lag order needed to regress.
const MIN_EXTRA_ROWS: usize = 10;

/// Endogenous lags that enter the design, in column order.
fn active_lags(spec: &VarxSpec) -> Vec<usize> {
    if !spec.use_endogenous {
        return Vec::new();
    }
    match spec.lag_mode {
        LagMode::Single => vec![spec.p],
        LagMode::All => (1..=spec.p).collect(),
    }
}

/// Column labels of the design matrix for `spec`.
pub fn regressor_names(spec: &VarxSpec) -> Vec<String> {
    let mut names = vec!["intercept".to_string()];
    if spec.use_exogenous {
        names.push("x(lag 0)".into());
    }
    names.extend(active_lags(spec).into_iter().map(|l| format!("b(lag {l})")));
    names
}

fn check_series(series: &SampleSeries, spec: &VarxSpec) -> Result<()> {
    spec.validate()?;
    if series.width() != spec.k {
        return Err(Error::Data(format!(
            "series has K = {}, spec expects {}",
            series.width(),
            spec.k
        )));
    }
    let p = spec.history_len();
    if series.len() <= p + MIN_EXTRA_ROWS {
        return Err(Error::Data(format!(
            "{} samples are too few to regress with lag {p} (need more than {})",
            series.len(),
            p + MIN_EXTRA_ROWS
        )));
    }
    Ok(())
}

/// Fills `row` with the design entries for sample `n`, grid point `k`.
fn design_row(
    series: &SampleSeries,
    spec: &VarxSpec,
    lags: &[usize],
    n: usize,
    k: usize,
    row: &mut [f64],
) {
    row[0] = 1.0;
    let mut c = 1;
    if spec.use_exogenous {
        row[c] = series.x.get(n, k);
        c += 1;
    }
    for &l in lags {
        row[c] = series.b.get(n - l, k);
        c += 1;
    }
}

/// Design matrix `Z` and target vector, rows ordered by sample then grid point.
pub fn build_regressor_matrix(
    series: &SampleSeries,
    spec: &VarxSpec,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_series(series, spec)?;
    let lags = active_lags(spec);
    let p = spec.history_len();
    let k = spec.k;
    let cols = 1 + usize::from(spec.use_exogenous) + lags.len();
    let rows = (series.len() - p) * k;
    let mut z = DMatrix::zeros(rows, cols);
    let mut target = DVector::zeros(rows);
    let mut buf = vec![0.0; cols];
    for n in p..series.len() {
        for kk in 0..k {
            let r = (n - p) * k + kk;
            design_row(series, spec, &lags, n, kk, &mut buf);
            for (c, &v) in buf.iter().enumerate() {
                z[(r, c)] = v;
            }
            target[r] = series.b.get(n, kk);
        }
    }
    Ok((z, target))
}

/// Least-squares coefficients of `target` on the columns of `z`, by QR.
pub fn ols_fit(z: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let names: Vec<String> = (0..z.ncols()).map(|j| format!("column {j}")).collect();
    lstsq_qr(z, target, &names)
}

/// Weighted variant; uniform weights reproduce [`ols_fit`].
pub fn ols_fit_weighted(
    z: &DMatrix<f64>,
    target: &DVector<f64>,
    weights: &[f64],
) -> Result<DVector<f64>> {
    if weights.len() != z.nrows() {
        return Err(Error::Data(format!(
            "{} weights for {} rows",
            weights.len(),
            z.nrows()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Data(
            "weights must be finite and non-negative".into(),
        ));
    }
    let mut zw = z.clone();
    let mut tw = target.clone();
    for (i, &w) in weights.iter().enumerate() {
        let s = w.sqrt();
        zw.row_mut(i).scale_mut(s);
        tw[i] *= s;
    }
    ols_fit(&zw, &tw)
}

/// Residuals `b[n] - drift(n)` for `n >= p`, one row per retained sample.
pub fn residuals(series: &SampleSeries, model: &VarxModel) -> Result<RowMatrix> {
    let k = model.spec.k;
    if series.width() != k {
        return Err(Error::Data(format!(
            "series has K = {}, model expects {k}",
            series.width()
        )));
    }
    let p = model.spec.history_len();
    let n_rows = series.len().saturating_sub(p);
    let lags: Vec<(usize, f64)> = (1..=p)
        .map(|l| (l, model.lag_coefficient(l)))
        .filter(|&(_, c)| c != 0.0)
        .collect();
    let mut out = RowMatrix::zeros(n_rows, k);
    for n in p..series.len() {
        let x = series.x.row(n);
        let b = series.b.row(n);
        let r = out.row_mut(n - p);
        for kk in 0..k {
            let mut drift = model.a0;
            if model.spec.use_exogenous {
                drift += model.d * x[kk];
            }
            for &(l, c) in &lags {
                drift += c * series.b.get(n - l, kk);
            }
            r[kk] = b[kk] - drift;
        }
    }
    Ok(out)
}

fn column_mean_std(r: &RowMatrix, k: usize) -> (f64, f64) {
    let n = r.rows() as f64;
    let mean = (0..r.rows()).map(|i| r.get(i, k)).sum::<f64>() / n;
    let ss: f64 = (0..r.rows()).map(|i| (r.get(i, k) - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Isotropic noise scale: arithmetic mean over grid points of the per-column
/// sample standard deviation (denominator `n - 1`).
pub fn fit_sigma_diag(r: &RowMatrix) -> Result<f64> {
    if r.rows() < 2 || r.cols() == 0 {
        return Err(Error::Data(format!(
            "need at least 2 residual rows, got {}",
            r.rows()
        )));
    }
    let total: f64 = (0..r.cols()).map(|k| column_mean_std(r, k).1).sum();
    Ok(total / r.cols() as f64)
}

/// Unbiased `K x K` sample covariance of the residual rows.
pub fn sample_covariance(r: &RowMatrix) -> Result<DMatrix<f64>> {
    if r.rows() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 residual rows, got {}",
            r.rows()
        )));
    }
    let k = r.cols();
    let n = r.rows();
    let means: Vec<f64> = (0..k).map(|c| column_mean_std(r, c).0).collect();
    let mut acc = vec![0.0; k * k];
    let mut centered = vec![0.0; k];
    for i in 0..n {
        for (c, (v, m)) in centered.iter_mut().zip(r.row(i).iter().zip(&means)) {
            *c = v - m;
        }
        for a in 0..k {
            let ca = centered[a];
            for b in 0..=a {
                acc[a * k + b] += ca * centered[b];
            }
        }
    }
    let scale = 1.0 / (n as f64 - 1.0);
    Ok(DMatrix::from_fn(k, k, |a, b| {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        acc[hi * k + lo] * scale
    }))
}

/// Dense noise root: Cholesky factor of the residual sample covariance.
pub fn fit_sigma_dense(r: &RowMatrix) -> Result<LowerTriangular> {
    let cov = sample_covariance(r)?;
    let l = cholesky_lower(&cov)?;
    LowerTriangular::from_matrix(&l)
}

/// Pooled residual moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub rows: usize,
    pub mean: f64,
    pub std: f64,
}

/// A fitted VARX process with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarxFit {
    pub model: VarxModel,
    /// `None` when the spec has no endogenous term.
    pub stability: Option<CompanionSpectrum>,
    pub residuals: ResidualSummary,
    pub regressors: Vec<String>,
    pub coefficients: Vec<f64>,
}

/// Least-squares coefficients accumulated row by row, without forming `Z`.
pub fn fit_coefficients_streaming(series: &SampleSeries, spec: &VarxSpec) -> Result<Vec<f64>> {
    check_series(series, spec)?;
    let lags = active_lags(spec);
    let names = regressor_names(spec);
    let mut qr = GivensQr::new(names.len());
    let mut row = vec![0.0; names.len()];
    for n in spec.history_len()..series.len() {
        for k in 0..spec.k {
            design_row(series, spec, &lags, n, k, &mut row);
            qr.push(&row, series.b.get(n, k));
        }
    }
    qr.solve(&names)
}

fn model_from_coefficients(spec: &VarxSpec, coef: &[f64], noise: NoiseRoot) -> VarxModel {
    let mut c = 1;
    let d = if spec.use_exogenous {
        c += 1;
        coef[1]
    } else {
        0.0
    };
    let lag_coefs = &coef[c..];
    let (a_p, lower_lags) = match lag_coefs.split_last() {
        Some((&last, rest)) => (last, rest.to_vec()),
        None => (0.0, Vec::new()),
    };
    VarxModel {
        spec: spec.clone(),
        a0: coef[0],
        a_p,
        lower_lags,
        d,
        noise,
    }
}

/// Regression, residuals, noise root and stability check in one pass.
pub fn fit_parameterization(series: &SampleSeries, spec: &VarxSpec) -> Result<VarxFit> {
    let coef = fit_coefficients_streaming(series, spec)?;
    let draft = model_from_coefficients(spec, &coef, NoiseRoot::Diagonal { sigma: 0.0 });
    let r = residuals(series, &draft)?;
    let noise = match spec.covariance_kind {
        CovarianceKind::DiagonalIso => NoiseRoot::Diagonal {
            sigma: fit_sigma_diag(&r)?,
        },
        CovarianceKind::Dense => NoiseRoot::Dense(fit_sigma_dense(&r)?),
    };
    let model = VarxModel { noise, ..draft };
    model.validate()?;
    let stability = if spec.use_endogenous {
        Some(check_stability(&model)?)
    } else {
        None
    };
    let values = r.as_slice();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0);
    Ok(VarxFit {
        model,
        stability,
        residuals: ResidualSummary {
            rows: r.rows(),
            mean,
            std: var.sqrt(),
        },
        regressors: regressor_names(spec),
        coefficients: coef,
    })
}

/// Partial autocorrelations at lags `1..=max_lag` from autocorrelations
/// `rho[0..=max_lag]` (with `rho[0] = 1`), by the Durbin–Levinson recursion.
pub fn pacf_from_acf(rho: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if rho.len() <= max_lag {
        return Err(Error::Data(format!(
            "need {} autocorrelations, got {}",
            max_lag + 1,
            rho.len()
        )));
    }
    let mut out = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut prev = Vec::with_capacity(max_lag);
    for l in 1..=max_lag {
        let num = rho[l] - (1..l).map(|j| phi[j - 1] * rho[l - j]).sum::<f64>();
        let den = 1.0 - (1..l).map(|j| phi[j - 1] * rho[j]).sum::<f64>();
        if den.abs() < f64::EPSILON {
            return Err(Error::Data(format!(
                "Durbin-Levinson recursion is singular at lag {l}"
            )));
        }
        let phi_ll = num / den;
        prev.clear();
        prev.extend_from_slice(&phi);
        for j in 1..l {
            phi[j - 1] = prev[j - 1] - phi_ll * prev[l - j - 1];
        }
        phi.push(phi_ll);
        out.push(phi_ll);
    }
    Ok(out)
}

/// Sample PACF of a scalar series at lags `1..=max_lag`.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let rho = acf(series, max_lag)?;
    pacf_from_acf(&rho, max_lag)
}
