//! Two fixed NARMAX surrogates, applied independently at every grid point.
//!
//! With `z` the surrogate output, `x` the current large-scale value and
//! `x_prev` the one before it, the deterministic part is
//!
//! ```text
//! n1201: phi = mu + a1 z_prev + b11 x + b21 x_prev + d1 xi_prev
//! n1110: phi = mu + a1 z_prev + b11 x + b12 x^2 + b13 x^3 + c11 R(x)
//! ```
//!
//! where `R(x)_k = x_{k-1} (x_{k+1} - x_{k-2}) - x_k + F` and the output is
//! `z = phi + xi` with `xi ~ N(0, sigma2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l96::resolved_tendency;
use crate::linalg::GivensQr;
use crate::series::{RowMatrix, SampleSeries};

const PRESET_1201: &str = include_str!("../data/narmax_1201.json");
const PRESET_1110: &str = include_str!("../data/narmax_1110.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarmaxVariant {
    /// Linear in two large-scale lags, with a moving-average term.
    N1201,
    /// Cubic in the current large-scale value plus the resolved tendency.
    N1110,
}

impl NarmaxVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1201" | "n1201" => Ok(NarmaxVariant::N1201),
            "1110" | "n1110" => Ok(NarmaxVariant::N1110),
            other => Err(Error::Config(format!(
                "unknown NARMAX variant {other:?} (expected 1201 or 1110)"
            ))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NarmaxVariant::N1201 => "NARMAX-1201",
            NarmaxVariant::N1110 => "NARMAX-1110",
        }
    }

    fn names(self) -> &'static [&'static str] {
        match self {
            NarmaxVariant::N1201 => &["mu", "a1", "b11", "b21", "d1"],
            NarmaxVariant::N1110 => &["mu", "a1", "b11", "b12", "b13", "c11"],
        }
    }
}

/// Coefficients of one variant; fields that the variant does not use are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarmaxModel {
    pub variant: NarmaxVariant,
    pub mu: f64,
    pub sigma2: f64,
    pub a1: f64,
    pub b11: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b21: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b12: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b13: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c11: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
}

impl NarmaxModel {
    /// Preset coefficient set for `variant`.
    pub fn preset(variant: NarmaxVariant) -> Self {
        let text = match variant {
            NarmaxVariant::N1201 => PRESET_1201,
            NarmaxVariant::N1110 => PRESET_1110,
        };
        serde_json::from_str(text).expect("bundled NARMAX preset is valid")
    }

    fn from_coefficients(variant: NarmaxVariant, c: &[f64], sigma2: f64) -> Self {
        match variant {
            NarmaxVariant::N1201 => NarmaxModel {
                variant,
                mu: c[0],
                sigma2,
                a1: c[1],
                b11: c[2],
                b21: Some(c[3]),
                b12: None,
                b13: None,
                c11: None,
                d1: Some(c.get(4).copied().unwrap_or(0.0)),
            },
            NarmaxVariant::N1110 => NarmaxModel {
                variant,
                mu: c[0],
                sigma2,
                a1: c[1],
                b11: c[2],
                b21: None,
                b12: Some(c[3]),
                b13: Some(c[4]),
                c11: Some(c[5]),
                d1: None,
            },
        }
    }

    /// Coefficients in the variant's canonical order.
    pub fn coefficients(&self) -> Vec<f64> {
        let g = |v: Option<f64>| v.unwrap_or(f64::NAN);
        match self.variant {
            NarmaxVariant::N1201 => vec![self.mu, self.a1, self.b11, g(self.b21), g(self.d1)],
            NarmaxVariant::N1110 => vec![
                self.mu,
                self.a1,
                self.b11,
                g(self.b12),
                g(self.b13),
                g(self.c11),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Config(format!(
                "sigma2 must be a finite non-negative number, got {}",
                self.sigma2
            )));
        }
        let (active, inactive): (&[(&str, Option<f64>)], &[(&str, Option<f64>)]) =
            match self.variant {
                NarmaxVariant::N1201 => (
                    &[("b21", self.b21), ("d1", self.d1)],
                    &[("b12", self.b12), ("b13", self.b13), ("c11", self.c11)],
                ),
                NarmaxVariant::N1110 => (
                    &[("b12", self.b12), ("b13", self.b13), ("c11", self.c11)],
                    &[("b21", self.b21), ("d1", self.d1)],
                ),
            };
        for (name, v) in active {
            if v.is_none() {
                return Err(Error::Config(format!(
                    "{} needs coefficient {name}",
                    self.variant.label()
                )));
            }
        }
        for (name, v) in inactive {
            if v.is_some() {
                return Err(Error::Config(format!(
                    "{} has no coefficient {name}",
                    self.variant.label()
                )));
            }
        }
        if self.coefficients().iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("NARMAX coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Deterministic part at one grid point. `resolved` is `R(x)` there and is
    /// ignored by n1201; `xi_prev` is ignored by n1110.
    pub fn phi(&self, z_prev: f64, x: f64, x_prev: f64, xi_prev: f64, resolved: f64) -> f64 {
        let base = self.mu + self.a1 * z_prev + self.b11 * x;
        match self.variant {
            NarmaxVariant::N1201 => {
                base + self.b21.unwrap_or(0.0) * x_prev + self.d1.unwrap_or(0.0) * xi_prev
            }
            NarmaxVariant::N1110 => {
                base + self.b12.unwrap_or(0.0) * x * x
                    + self.b13.unwrap_or(0.0) * x * x * x
                    + self.c11.unwrap_or(0.0) * resolved
            }
        }
    }
}

/// Per-grid-point memory of a NARMAX run.
#[derive(Debug, Clone, PartialEq)]
pub struct NarmaxHistory {
    pub z_prev: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub xi_prev: Vec<f64>,
}

impl NarmaxHistory {
    /// History from the second-to-last reference row; the last row supplies
    /// the initial state of the run. The previous innovation is unknown and
    /// starts at zero.
    pub fn from_reference(series: &SampleSeries) -> Result<Self> {
        let n = series.len();
        if n < 2 {
            return Err(Error::State(format!(
                "NARMAX history needs 2 reference rows, got {n}"
            )));
        }
        Ok(NarmaxHistory {
            z_prev: series.b.row(n - 2).to_vec(),
            x_prev: series.x.row(n - 2).to_vec(),
            xi_prev: vec![0.0; series.width()],
        })
    }

    pub fn width(&self) -> usize {
        self.z_prev.len()
    }
}

/// One surrogate step at a single grid point: returns `(phi, z)` with `z = phi + xi_now`.
pub fn narmax_step(
    model: &NarmaxModel,
    z_prev: f64,
    x_hist: [f64; 2],
    xi_prev: f64,
    xi_now: f64,
    resolved: f64,
) -> (f64, f64) {
    let phi = model.phi(z_prev, x_hist[0], x_hist[1], xi_prev, resolved);
    (phi, phi + xi_now)
}

/// Surrogate output for the whole grid given the current state `x` and
/// standard-normal draws `std_normal`; advances `history`.
pub fn narmax_step_grid(
    model: &NarmaxModel,
    history: &mut NarmaxHistory,
    x: &[f64],
    forcing: f64,
    std_normal: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let k = x.len();
    if history.width() != k || std_normal.len() != k || out.len() != k {
        return Err(Error::State(format!(
            "NARMAX step widths differ: history {}, state {k}, noise {}, output {}",
            history.width(),
            std_normal.len(),
            out.len()
        )));
    }
    let sd = model.sigma2.sqrt();
    if model.variant == NarmaxVariant::N1110 {
        resolved_tendency(x, forcing, out);
    }
    for i in 0..k {
        let resolved = if model.variant == NarmaxVariant::N1110 {
            out[i]
        } else {
            0.0
        };
        let xi = sd * std_normal[i];
        let (_, z) = narmax_step(
            model,
            history.z_prev[i],
            [x[i], history.x_prev[i]],
            history.xi_prev[i],
            xi,
            resolved,
        );
        out[i] = z;
        history.xi_prev[i] = xi;
    }
    history.z_prev.copy_from_slice(out);
    history.x_prev.copy_from_slice(x);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarmaxFitOptions {
    /// Estimate `d1`; when false it is fixed at zero and the fit is one OLS pass.
    pub moving_average: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NarmaxFitOptions {
    fn default() -> Self {
        NarmaxFitOptions {
            moving_average: true,
            tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarmaxFit {
    pub model: NarmaxModel,
    pub iterations: usize,
    pub rows: usize,
}

fn design_row(
    variant: NarmaxVariant,
    series: &SampleSeries,
    resolved: &RowMatrix,
    xi: &RowMatrix,
    n: usize,
    k: usize,
    with_ma: bool,
    row: &mut Vec<f64>,
) {
    let x = series.x.get(n, k);
    row.clear();
    row.extend_from_slice(&[1.0, series.b.get(n - 1, k), x]);
    match variant {
        NarmaxVariant::N1201 => {
            row.push(series.x.get(n - 1, k));
            if with_ma {
                row.push(xi.get(n - 1, k));
            }
        }
        NarmaxVariant::N1110 => row.extend_from_slice(&[x * x, x * x * x, resolved.get(n, k)]),
    }
}

fn solve_pass(
    variant: NarmaxVariant,
    series: &SampleSeries,
    resolved: &RowMatrix,
    xi: &RowMatrix,
    with_ma: bool,
) -> Result<Vec<f64>> {
    let count = match (variant, with_ma) {
        (NarmaxVariant::N1201, false) => 4,
        _ => variant.names().len(),
    };
    let names: Vec<String> = variant.names()[..count]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut qr = GivensQr::new(names.len());
    let mut row = Vec::with_capacity(names.len());
    for n in 1..series.len() {
        for k in 0..series.width() {
            design_row(variant, series, resolved, xi, n, k, with_ma, &mut row);
            qr.push(&row, series.b.get(n, k));
        }
    }
    qr.solve(&names)
}

/// Innovations implied by `model`, recovered forward in time from `xi[0] = 0`.
fn innovations(
    model: &NarmaxModel,
    series: &SampleSeries,
    resolved: &RowMatrix,
    xi: &mut RowMatrix,
) {
    let kk = series.width();
    xi.row_mut(0).fill(0.0);
    for n in 1..series.len() {
        for k in 0..kk {
            let phi = model.phi(
                series.b.get(n - 1, k),
                series.x.get(n, k),
                series.x.get(n - 1, k),
                xi.get(n - 1, k),
                resolved.get(n, k),
            );
            xi.row_mut(n)[k] = series.b.get(n, k) - phi;
        }
    }
}

fn innovation_variance(xi: &RowMatrix) -> f64 {
    // Row 0 is the zero initial condition, not an estimate.
    let v = &xi.as_slice()[xi.cols()..];
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn n1201_regressors(series: &SampleSeries, n: usize, k: usize) -> [f64; 4] {
    [
        1.0,
        series.b.get(n - 1, k),
        series.x.get(n, k),
        series.x.get(n - 1, k),
    ]
}

/// Sum of squared n1201 innovations for coefficients `c`.
fn n1201_sse(series: &SampleSeries, c: &[f64]) -> f64 {
    let mut xi_prev = vec![0.0; series.width()];
    let mut sse = 0.0;
    for n in 1..series.len() {
        for (k, prev) in xi_prev.iter_mut().enumerate() {
            let r = n1201_regressors(series, n, k);
            let phi: f64 = r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() + c[4] * *prev;
            *prev = series.b.get(n, k) - phi;
            sse += *prev * *prev;
        }
    }
    sse
}

/// Gauss-Newton step for n1201: OLS of the innovations on their negated
/// derivatives, both recovered forward in time from zero.
fn n1201_step(series: &SampleSeries, c: &[f64], names: &[String]) -> Result<Vec<f64>> {
    let kk = series.width();
    let d1 = c[4];
    let mut xi_prev = vec![0.0; kk];
    let mut grad_prev = vec![[0.0; 5]; kk];
    let mut qr = GivensQr::new(5);
    for n in 1..series.len() {
        for k in 0..kk {
            let r = n1201_regressors(series, n, k);
            let phi: f64 = r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() + d1 * xi_prev[k];
            let xi = series.b.get(n, k) - phi;
            let mut g = [0.0; 5];
            for j in 0..4 {
                g[j] = -r[j] - d1 * grad_prev[k][j];
            }
            g[4] = -xi_prev[k] - d1 * grad_prev[k][4];
            qr.push(&g.map(|v| -v), xi);
            grad_prev[k] = g;
            xi_prev[k] = xi;
        }
    }
    qr.solve(names)
}

/// Conditional least-squares fit pooled over grid points. `forcing` enters
/// the resolved-tendency regressor of n1110.
///
/// n1201 starts from the OLS fit without the moving-average column and then
/// takes damped Gauss-Newton steps on the innovation recursion, keeping
/// `|d1| < 1` so that the innovations stay recoverable.
pub fn fit_narmax(
    series: &SampleSeries,
    variant: NarmaxVariant,
    forcing: f64,
    opts: &NarmaxFitOptions,
) -> Result<NarmaxFit> {
    if series.len() < 12 {
        return Err(Error::Data(format!(
            "{} samples are too few for a NARMAX fit",
            series.len()
        )));
    }
    let b = series.b.as_slice();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mean = b.iter().sum::<f64>() / b.len() as f64;
    if b.iter()
        .all(|v| (v - mean).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE))
    {
        return Err(Error::Estimation(
            "feedback series has zero variance".into(),
        ));
    }
    let (rows, kk) = (series.len(), series.width());
    let mut resolved = RowMatrix::zeros(rows, kk);
    if variant == NarmaxVariant::N1110 {
        for n in 0..rows {
            resolved_tendency(series.x.row(n), forcing, resolved.row_mut(n));
        }
    }
    let mut xi = RowMatrix::zeros(rows, kk);
    let mut coef = solve_pass(variant, series, &resolved, &xi, false)?;
    let mut iterations = 1;
    if variant == NarmaxVariant::N1201 && opts.moving_average {
        let names: Vec<String> = variant.names().iter().map(|s| s.to_string()).collect();
        coef.push(0.0);
        let mut sse = n1201_sse(series, &coef);
        loop {
            let step = n1201_step(series, &coef, &names)?;
            iterations += 1;
            let mut t = 1.0;
            let mut change = 0.0;
            let before = sse;
            while t > 1e-12 {
                let trial: Vec<f64> = coef.iter().zip(&step).map(|(c, s)| c + t * s).collect();
                if trial[4].abs() < 1.0 {
                    let trial_sse = n1201_sse(series, &trial);
                    if trial_sse <= sse {
                        change = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
                        coef = trial;
                        sse = trial_sse;
                        break;
                    }
                }
                t *= 0.5;
            }
            // Stationary in the coefficients, or the objective has flattened
            // out (slow creep of d1 towards the unit circle).
            if change < opts.tolerance || before - sse <= 1e-10 * before {
                break;
            }
            if iterations >= opts.max_iterations {
                let last = NarmaxModel::from_coefficients(variant, &coef, 0.0);
                return Err(Error::Estimation(format!(
                    "NARMAX fit did not converge in {iterations} iterations (last change {change:.3e}); last iterate {:?}",
                    last.coefficients()
                )));
            }
        }
    }
    let mut model = NarmaxModel::from_coefficients(variant, &coef, 0.0);
    innovations(&model, series, &resolved, &mut xi);
    model.sigma2 = innovation_variance(&xi);
    model.validate()?;
    Ok(NarmaxFit {
        model,
        iterations,
        rows: (rows - 1) * kk,
    })
}
