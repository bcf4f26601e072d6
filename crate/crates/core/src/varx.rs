//! VARX(p) surrogate processes for the small-scale feedback.
//!
//! All drift matrices are scalar multiples of the identity (one pooled
//! coefficient per regressor), and by default only lag `p` is active:
//!
//! ```text
//! b[n] = a0 + a_p * b[n-p] + d * x[n] + S * xi[n]
//! ```
//!
//! `S` is either `sigma * I` or a dense lower-triangular Cholesky root.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigen_moduli;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    /// `sigma * I`.
    DiagonalIso,
    /// Dense lower-triangular root.
    Dense,
}

/// Which endogenous lags enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagMode {
    /// Only lag `p` (all other lag matrices are zero).
    #[default]
    Single,
    /// Every lag `1..=p`.
    All,
}

/// Structure of a VARX parameterization: which regressors are active and the noise form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarxSpec {
    pub p: usize,
    pub use_endogenous: bool,
    pub use_exogenous: bool,
    pub covariance_kind: CovarianceKind,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default)]
    pub lag_mode: LagMode,
}

impl VarxSpec {
    /// White noise around a constant offset.
    pub fn white_noise(k: usize) -> Self {
        VarxSpec {
            p: 0,
            use_endogenous: false,
            use_exogenous: false,
            covariance_kind: CovarianceKind::DiagonalIso,
            k,
            lag_mode: LagMode::Single,
        }
    }

    /// Independent AR(1) processes at every grid point.
    pub fn multi_ar1(k: usize) -> Self {
        VarxSpec {
            p: 1,
            use_endogenous: true,
            ..Self::white_noise(k)
        }
    }

    /// White noise with drift `d * x`.
    pub fn white_noise_drift(k: usize) -> Self {
        VarxSpec {
            use_exogenous: true,
            ..Self::white_noise(k)
        }
    }

    /// Lag-`p` endogenous term plus exogenous drift.
    pub fn varx(p: usize, covariance_kind: CovarianceKind, k: usize) -> Self {
        VarxSpec {
            p,
            use_endogenous: true,
            use_exogenous: true,
            covariance_kind,
            k,
            lag_mode: LagMode::Single,
        }
    }

    pub fn label(&self) -> String {
        let cov = match self.covariance_kind {
            CovarianceKind::DiagonalIso => "diag",
            CovarianceKind::Dense => "dense",
        };
        match (self.use_endogenous, self.use_exogenous) {
            (false, false) => format!("wn-{cov}"),
            (true, false) if self.p == 1 => format!("ar1-{cov}"),
            (true, false) => format!("ar{}-{cov}", self.p),
            (false, true) => format!("wnd-{cov}"),
            (true, true) => format!("varx{}-{cov}", self.p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K: must be positive".into()));
        }
        if self.use_endogenous && self.p == 0 {
            return Err(Error::Config("p: endogenous term needs p >= 1".into()));
        }
        if !self.use_endogenous && self.p != 0 {
            return Err(Error::Config(
                "p: must be 0 without an endogenous term".into(),
            ));
        }
        Ok(())
    }

    /// Number of past `b` rows the process reads.
    pub fn history_len(&self) -> usize {
        if self.use_endogenous {
            self.p
        } else {
            0
        }
    }
}

/// Dense `K x K` lower-triangular matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerTriangular {
    #[serde(rename = "K")]
    pub k: usize,
    /// Row-major `K*K` entries; the strict upper triangle is zero.
    pub values: Vec<f64>,
}

impl LowerTriangular {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != k * k {
            return Err(Error::Data(format!(
                "{} values cannot fill a {k}x{k} root",
                values.len()
            )));
        }
        for r in 0..k {
            if values[r * k + r] < 0.0 || !values[r * k + r].is_finite() {
                return Err(Error::Data(format!(
                    "root diagonal entry {r} is negative or non-finite"
                )));
            }
            if values[r * k + r + 1..(r + 1) * k].iter().any(|&v| v != 0.0) {
                return Err(Error::Data(format!(
                    "root row {r} has entries above the diagonal"
                )));
            }
        }
        Ok(LowerTriangular { k, values })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let k = m.nrows();
        let mut values = vec![0.0; k * k];
        for r in 0..k {
            for c in 0..=r {
                values[r * k + c] = m[(r, c)];
            }
        }
        Self::new(k, values)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k, self.k, &self.values)
    }

    /// `out = L * xi`.
    pub fn mul_into(&self, xi: &[f64], out: &mut [f64]) {
        let k = self.k;
        for (r, o) in out.iter_mut().enumerate().take(k) {
            let row = &self.values[r * k..r * k + r + 1];
            *o = row.iter().zip(&xi[..=r]).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseRoot {
    Diagonal { sigma: f64 },
    Dense(LowerTriangular),
}

/// A fitted VARX process; immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarxModel {
    pub spec: VarxSpec,
    pub a0: f64,
    /// Coefficient of lag `p`.
    pub a_p: f64,
    /// Coefficients of lags `1..p` (only in [`LagMode::All`]).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lower_lags: Vec<f64>,
    pub d: f64,
    pub noise: NoiseRoot,
}

impl VarxModel {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let coeffs = [self.a0, self.a_p, self.d];
        if coeffs
            .iter()
            .chain(&self.lower_lags)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Data("VARX coefficients must be finite".into()));
        }
        let expected_lower = match (self.spec.use_endogenous, self.spec.lag_mode) {
            (true, LagMode::All) => self.spec.p - 1,
            _ => 0,
        };
        if self.lower_lags.len() != expected_lower {
            return Err(Error::Data(format!(
                "expected {expected_lower} lower-lag coefficients, found {}",
                self.lower_lags.len()
            )));
        }
        match (&self.noise, self.spec.covariance_kind) {
            (NoiseRoot::Diagonal { sigma }, CovarianceKind::DiagonalIso) => {
                if !(*sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::Data("sigma must be finite and non-negative".into()));
                }
            }
            (NoiseRoot::Dense(l), CovarianceKind::Dense) => {
                if l.k != self.spec.k {
                    return Err(Error::Data(format!(
                        "noise root is {0}x{0}, K = {1}",
                        l.k, self.spec.k
                    )));
                }
                LowerTriangular::new(l.k, l.values.clone())?;
            }
            _ => {
                return Err(Error::Data(
                    "noise root does not match covariance kind".into(),
                ))
            }
        }
        Ok(())
    }

    /// Coefficient of `b[n - lag]` for `lag` in `1..=p`.
    pub fn lag_coefficient(&self, lag: usize) -> f64 {
        if !self.spec.use_endogenous || lag == 0 || lag > self.spec.p {
            0.0
        } else if lag == self.spec.p {
            self.a_p
        } else {
            self.lower_lags.get(lag - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn dense_root(&self) -> Option<&LowerTriangular> {
        match &self.noise {
            NoiseRoot::Dense(l) => Some(l),
            NoiseRoot::Diagonal { .. } => None,
        }
    }

    /// Writes the next surrogate value into `out`; `xi` is a standard-normal draw.
    pub fn step_into(
        &self,
        lags: &LagBuffer,
        x_now: &[f64],
        xi: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let k = self.spec.k;
        if x_now.len() != k || xi.len() != k || out.len() != k {
            return Err(Error::State(format!(
                "VARX step expects vectors of length {k}"
            )));
        }
        match &self.noise {
            NoiseRoot::Diagonal { sigma } => {
                for (o, &e) in out.iter_mut().zip(xi) {
                    *o = self.a0 + sigma * e;
                }
            }
            NoiseRoot::Dense(l) => {
                l.mul_into(xi, out);
                out.iter_mut().for_each(|o| *o += self.a0);
            }
        }
        if self.spec.use_exogenous {
            for (o, &x) in out.iter_mut().zip(x_now) {
                *o += self.d * x;
            }
        }
        if self.spec.use_endogenous {
            if !lags.is_seeded() || lags.depth() != self.spec.p || lags.width() != k {
                return Err(Error::State(format!(
                    "VARX step needs {} seeded lag rows of width {k}",
                    self.spec.p
                )));
            }
            for lag in 1..=self.spec.p {
                let c = self.lag_coefficient(lag);
                if c != 0.0 {
                    for (o, &b) in out.iter_mut().zip(lags.lag(lag)) {
                        *o += c * b;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One step of the VARX recursion.
pub fn varx_step(
    model: &VarxModel,
    lags: &LagBuffer,
    x_now: &[f64],
    xi: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.spec.k];
    model.step_into(lags, x_now, xi, &mut out)?;
    Ok(out)
}

/// Ring buffer of the last `p` surrogate vectors.
#[derive(Debug, Clone)]
pub struct LagBuffer {
    depth: usize,
    width: usize,
    data: Vec<f64>,
    /// Slot holding the oldest row (lag `depth`).
    oldest: usize,
    filled: usize,
}

impl LagBuffer {
    pub fn new(depth: usize, width: usize) -> Self {
        LagBuffer {
            depth,
            width,
            data: vec![0.0; depth * width],
            oldest: 0,
            filled: 0,
        }
    }

    /// Seeds from rows ordered oldest first; the last row becomes lag 1.
    pub fn seeded<'a>(
        depth: usize,
        width: usize,
        rows: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Self> {
        let mut buf = Self::new(depth, width);
        for row in rows {
            buf.push(row);
        }
        if !buf.is_seeded() {
            return Err(Error::State(format!(
                "lag buffer needs {depth} rows, got {}",
                buf.filled
            )));
        }
        Ok(buf)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_seeded(&self) -> bool {
        self.filled >= self.depth
    }

    /// Appends the newest row, evicting the oldest once full.
    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width, "lag row width mismatch");
        if self.depth == 0 {
            return;
        }
        let slot = self.oldest;
        self.data[slot * self.width..(slot + 1) * self.width].copy_from_slice(row);
        self.oldest = (self.oldest + 1) % self.depth;
        self.filled = (self.filled + 1).min(self.depth);
    }

    /// Row `lag` steps back, `lag` in `1..=depth`.
    pub fn lag(&self, lag: usize) -> &[f64] {
        assert!(
            lag >= 1 && lag <= self.depth,
            "lag {lag} outside 1..={}",
            self.depth
        );
        let slot = (self.oldest + self.depth - lag) % self.depth;
        &self.data[slot * self.width..(slot + 1) * self.width]
    }
}

/// Eigenvalue moduli of the companion matrix, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionSpectrum {
    pub moduli: Vec<f64>,
    pub stable: bool,
}

impl CompanionSpectrum {
    fn from_moduli(mut moduli: Vec<f64>) -> Self {
        moduli.sort_by(|a, b| b.total_cmp(a));
        let stable = moduli.first().is_none_or(|&m| m < 1.0);
        CompanionSpectrum { moduli, stable }
    }

    pub fn spectral_radius(&self) -> f64 {
        self.moduli.first().copied().unwrap_or(0.0)
    }
}

fn require_lag(model: &VarxModel) -> Result<usize> {
    if !model.spec.use_endogenous || model.spec.p == 0 {
        return Err(Error::Config("companion matrix needs p >= 1".into()));
    }
    Ok(model.spec.p)
}

/// The `pK x pK` block companion matrix: `A_1 .. A_p` across the top block
/// row, identity blocks on the block subdiagonal.
pub fn build_companion(model: &VarxModel) -> Result<DMatrix<f64>> {
    let p = require_lag(model)?;
    let k = model.spec.k;
    let n = p * k;
    let mut m = DMatrix::zeros(n, n);
    for lag in 1..=p {
        let c = model.lag_coefficient(lag);
        for i in 0..k {
            m[(i, (lag - 1) * k + i)] = c;
        }
    }
    for i in k..n {
        m[(i, i - k)] = 1.0;
    }
    Ok(m)
}

/// Stability verdict from the companion spectrum.
///
/// Scalar drift matrices make the spectrum that of the `p x p` scalar
/// companion, repeated `K` times; with a single active lag the moduli are all
/// `|a_p|^(1/p)`.
pub fn check_stability(model: &VarxModel) -> Result<CompanionSpectrum> {
    let p = require_lag(model)?;
    let k = model.spec.k;
    let scalar = match model.spec.lag_mode {
        LagMode::Single => vec![model.a_p.abs().powf(1.0 / p as f64); p],
        LagMode::All => {
            let mut c = DMatrix::zeros(p, p);
            for lag in 1..=p {
                c[(0, lag - 1)] = model.lag_coefficient(lag);
            }
            for i in 1..p {
                c[(i, i - 1)] = 1.0;
            }
            eigen_moduli(&c)?
        }
    };
    let moduli = scalar
        .iter()
        .flat_map(|&m| std::iter::repeat_n(m, k))
        .collect();
    Ok(CompanionSpectrum::from_moduli(moduli))
}

/// Spectrum from a general eigensolver on the full companion matrix.
pub fn companion_spectrum_general(model: &VarxModel) -> Result<CompanionSpectrum> {
    let m = build_companion(model)?;
    Ok(CompanionSpectrum::from_moduli(eigen_moduli(&m)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(spec: VarxSpec, a0: f64, a_p: f64, d: f64, noise: NoiseRoot) -> VarxModel {
        VarxModel {
            spec,
            a0,
            a_p,
            lower_lags: Vec::new(),
            d,
            noise,
        }
    }

    fn two_lag(a1: f64, a2: f64) -> VarxModel {
        let mut spec = VarxSpec::varx(2, CovarianceKind::DiagonalIso, 1);
        spec.use_exogenous = false;
        spec.lag_mode = LagMode::All;
        VarxModel {
            lower_lags: vec![a1],
            ..model(spec, 0.0, a2, 0.0, NoiseRoot::Diagonal { sigma: 0.0 })
        }
    }

    #[test]
    fn white_noise_is_identity_on_noise() {
        let m = model(
            VarxSpec::white_noise(3),
            0.0,
            0.0,
            0.0,
            NoiseRoot::Diagonal { sigma: 1.0 },
        );
        let lags = LagBuffer::new(0, 3);
        let xi = [0.3, -1.2, 2.5];
        assert_eq!(varx_step(&m, &lags, &[9.0; 3], &xi).unwrap(), xi.to_vec());
    }

    #[test]
    fn pure_offset() {
        let m = model(
            VarxSpec::white_noise(4),
            2.0,
            0.0,
            0.0,
            NoiseRoot::Diagonal { sigma: 0.0 },
        );
        let out = varx_step(&m, &LagBuffer::new(0, 4), &[1.0; 4], &[5.0, -3.0, 1.0, 0.1]).unwrap();
        assert_eq!(out, vec![2.0; 4]);
    }

    #[test]
    fn dense_noise_product() {
        let l = LowerTriangular::new(2, vec![2.0, 0.0, 1.0, 2f64.sqrt()]).unwrap();
        let mut spec = VarxSpec::white_noise(2);
        spec.covariance_kind = CovarianceKind::Dense;
        let m = model(spec, 0.0, 0.0, 0.0, NoiseRoot::Dense(l));
        let out = varx_step(&m, &LagBuffer::new(0, 2), &[0.0; 2], &[1.0, 0.0]).unwrap();
        assert_eq!(out, vec![2.0, 1.0]);
    }

    #[test]
    fn reads_only_lag_p_and_exogenous() {
        let spec = VarxSpec::varx(3, CovarianceKind::DiagonalIso, 2);
        let m = model(spec, 1.0, 0.5, 2.0, NoiseRoot::Diagonal { sigma: 0.0 });
        let rows: Vec<Vec<f64>> = vec![vec![10.0, 20.0], vec![-1.0, -1.0], vec![-2.0, -2.0]];
        let lags = LagBuffer::seeded(3, 2, rows.iter().map(|r| r.as_slice())).unwrap();
        let out = varx_step(&m, &lags, &[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0 + 5.0 + 2.0, 1.0 + 10.0 - 2.0]);
    }

    #[test]
    fn missing_history_is_state_error() {
        let m = model(
            VarxSpec::multi_ar1(2),
            0.0,
            0.5,
            0.0,
            NoiseRoot::Diagonal { sigma: 1.0 },
        );
        let lags = LagBuffer::new(1, 2);
        assert!(matches!(
            varx_step(&m, &lags, &[0.0; 2], &[0.0; 2]),
            Err(Error::State(_))
        ));
        assert!(LagBuffer::seeded(2, 1, [[1.0].as_slice()]).is_err());
    }

    #[test]
    fn lag_buffer_evicts_oldest() {
        let mut buf = LagBuffer::new(3, 1);
        for v in 1..=5 {
            buf.push(&[v as f64]);
        }
        assert_eq!(
            (buf.lag(1)[0], buf.lag(2)[0], buf.lag(3)[0]),
            (5.0, 4.0, 3.0)
        );
    }

    #[test]
    fn diagonal_model_holds_no_dense_root() {
        let m = model(
            VarxSpec::varx(14, CovarianceKind::DiagonalIso, 18),
            0.0,
            0.9,
            0.1,
            NoiseRoot::Diagonal { sigma: 0.3 },
        );
        assert!(m.dense_root().is_none());
        m.validate().unwrap();
    }

    #[test]
    fn companion_layouts() {
        let ar1 = model(
            VarxSpec::multi_ar1(1),
            0.0,
            0.5,
            0.0,
            NoiseRoot::Diagonal { sigma: 1.0 },
        );
        assert_eq!(
            build_companion(&ar1).unwrap(),
            DMatrix::from_element(1, 1, 0.5)
        );

        let c = build_companion(&two_lag(0.5, 0.6)).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 1.0, 0.0]));

        let mut spec = VarxSpec::varx(2, CovarianceKind::DiagonalIso, 2);
        spec.use_exogenous = false;
        let m = model(spec, 0.0, 0.3, 0.0, NoiseRoot::Diagonal { sigma: 1.0 });
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 0.3, 0.0,
            0.0, 0.0, 0.0, 0.3,
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        ]);
        assert_eq!(build_companion(&m).unwrap(), expected);

        let wn = model(
            VarxSpec::white_noise(2),
            0.0,
            0.0,
            0.0,
            NoiseRoot::Diagonal { sigma: 1.0 },
        );
        assert!(matches!(build_companion(&wn), Err(Error::Config(_))));
    }

    #[test]
    fn stability_fixtures() {
        let ar1 = model(
            VarxSpec::multi_ar1(1),
            0.0,
            0.5,
            0.0,
            NoiseRoot::Diagonal { sigma: 1.0 },
        );
        let s = check_stability(&ar1).unwrap();
        assert_eq!(s.moduli, vec![0.5]);
        assert!(s.stable);

        // Roots of l^2 - 0.5 l - 0.6 from the quadratic formula.
        let disc = (0.25f64 + 2.4).sqrt();
        let (r1, r2) = ((0.5 + disc) / 2.0, ((0.5 - disc) / 2.0f64).abs());
        for s in [
            check_stability(&two_lag(0.5, 0.6)).unwrap(),
            companion_spectrum_general(&two_lag(0.5, 0.6)).unwrap(),
        ] {
            assert_abs_diff_eq!(s.moduli[0], r1, epsilon = 1e-12);
            assert_abs_diff_eq!(s.moduli[1], r2, epsilon = 1e-12);
            assert!(!s.stable);
        }
        assert_abs_diff_eq!(r1, 1.064, epsilon = 5e-4);
        assert_abs_diff_eq!(r2, 0.564, epsilon = 5e-4);

        let m = model(
            VarxSpec::varx(14, CovarianceKind::DiagonalIso, 3),
            0.0,
            0.9,
            0.0,
            NoiseRoot::Diagonal { sigma: 1.0 },
        );
        let closed = check_stability(&m).unwrap();
        let general = companion_spectrum_general(&m).unwrap();
        assert!(closed.stable && general.stable);
        assert_eq!(closed.moduli.len(), 42);
        assert_abs_diff_eq!(closed.moduli[0], 0.99250, epsilon = 1e-5);
        for (a, b) in closed.moduli.iter().zip(&general.moduli) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn serde_round_trip_keeps_structure() {
        let l = LowerTriangular::new(2, vec![1.0, 0.0, 0.5, 2.0]).unwrap();
        let m = model(
            VarxSpec::varx(30, CovarianceKind::Dense, 2),
            0.1,
            0.95,
            -0.2,
            NoiseRoot::Dense(l),
        );
        let text = serde_json::to_string(&m).unwrap();
        let back: VarxModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        back.validate().unwrap();
    }
}
