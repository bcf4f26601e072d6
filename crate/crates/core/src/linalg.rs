//! Small dense linear-algebra helpers: least squares by orthogonal
//! factorization (in-memory and streaming), Cholesky with a guarded jitter
//! retry, and general eigenvalue moduli.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A column whose triangular pivot falls below this fraction of its norm is
/// treated as linearly dependent on earlier columns.
pub const RANK_TOLERANCE: f64 = 1e-10;

fn check_pivots(
    r_diag: impl Iterator<Item = f64>,
    col_norms: &[f64],
    names: &[String],
) -> Result<()> {
    for (j, (rjj, &norm)) in r_diag.zip(col_norms).enumerate() {
        if norm == 0.0 || rjj.abs() <= RANK_TOLERANCE * norm {
            let name = names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("column {j}"));
            return Err(Error::Estimation(format!(
                "regressor matrix is rank deficient: '{name}' is collinear with earlier columns"
            )));
        }
    }
    Ok(())
}

fn back_substitute(r: impl Fn(usize, usize) -> f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut coef = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            acc -= r(i, j) * coef[j];
        }
        coef[i] = acc / r(i, i);
    }
    coef
}

/// Least squares `min |Z c - y|` via Householder QR of the full design matrix.
pub fn lstsq_qr(z: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<DVector<f64>> {
    let (m, n) = z.shape();
    if y.len() != m {
        return Err(Error::Data(format!(
            "design has {m} rows but target has {}",
            y.len()
        )));
    }
    if m < n {
        return Err(Error::Data(format!(
            "{m} rows cannot determine {n} coefficients"
        )));
    }
    let norms: Vec<f64> = z.column_iter().map(|c| c.norm()).collect();
    let qr = z.clone().qr();
    let r = qr.r();
    check_pivots((0..n).map(|j| r[(j, j)]), &norms, names)?;
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let coef = back_substitute(|i, j| r[(i, j)], &qty.as_slice()[..n]);
    Ok(DVector::from_vec(coef))
}

/// Row-by-row QR of a tall design matrix using Givens rotations.
///
/// Memory is `O(p^2)` in the number of columns, independent of the row count.
#[derive(Debug, Clone)]
pub struct GivensQr {
    n: usize,
    r: Vec<f64>,
    qty: Vec<f64>,
    col_sq: Vec<f64>,
    rows: usize,
    scratch: Vec<f64>,
}

impl GivensQr {
    pub fn new(columns: usize) -> Self {
        GivensQr {
            n: columns,
            r: vec![0.0; columns * columns],
            qty: vec![0.0; columns],
            col_sq: vec![0.0; columns],
            rows: 0,
            scratch: vec![0.0; columns],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Folds one row `(z, y)` into the factorization.
    pub fn push(&mut self, z: &[f64], y: f64) {
        debug_assert_eq!(z.len(), self.n);
        let n = self.n;
        self.scratch.copy_from_slice(z);
        for (s, &v) in self.col_sq.iter_mut().zip(z) {
            *s += v * v;
        }
        let mut yv = y;
        for j in 0..n {
            let zj = self.scratch[j];
            if zj == 0.0 {
                continue;
            }
            let rjj = self.r[j * n + j];
            let h = rjj.hypot(zj);
            let (c, s) = (rjj / h, zj / h);
            self.r[j * n + j] = h;
            self.scratch[j] = 0.0;
            for l in j + 1..n {
                let (a, b) = (self.r[j * n + l], self.scratch[l]);
                self.r[j * n + l] = c * a + s * b;
                self.scratch[l] = c * b - s * a;
            }
            let q = self.qty[j];
            self.qty[j] = c * q + s * yv;
            yv = c * yv - s * q;
        }
        self.rows += 1;
    }

    /// Solves for the coefficients; `names` label columns in rank errors.
    pub fn solve(&self, names: &[String]) -> Result<Vec<f64>> {
        if self.rows < self.n {
            return Err(Error::Data(format!(
                "{} rows cannot determine {} coefficients",
                self.rows, self.n
            )));
        }
        let norms: Vec<f64> = self.col_sq.iter().map(|s| s.sqrt()).collect();
        let n = self.n;
        check_pivots((0..n).map(|j| self.r[j * n + j]), &norms, names)?;
        Ok(back_substitute(|i, j| self.r[i * n + j], &self.qty))
    }
}

/// Lower-triangular Cholesky factor of a symmetric matrix.
///
/// A failed factorization is retried once with `jitter = 1e-12 * trace / K`
/// added to the diagonal. Either result is accepted only if every squared
/// pivot exceeds ten times that jitter, so rank-deficient matrices fail.
pub fn cholesky_lower(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = cov.nrows();
    if k == 0 || cov.ncols() != k {
        return Err(Error::Data(format!(
            "covariance must be square, got {:?}",
            cov.shape()
        )));
    }
    let jitter = 1e-12 * cov.trace() / k as f64;
    let fail = || {
        Error::Estimation(
            "sample covariance is not positive definite; add diagonal loading or use the diagonal \
             noise model"
                .to_string(),
        )
    };
    if !(jitter > 0.0) {
        return Err(fail());
    }
    let accept = |l: DMatrix<f64>| {
        if (0..k).all(|i| l[(i, i)] * l[(i, i)] > 10.0 * jitter) {
            Ok(l)
        } else {
            Err(fail())
        }
    };
    if let Some(ch) = cov.clone().cholesky() {
        return accept(ch.l());
    }
    let mut loaded = cov.clone();
    for i in 0..k {
        loaded[(i, i)] += jitter;
    }
    accept(loaded.cholesky().ok_or_else(fail)?.l())
}

/// Moduli of all (complex) eigenvalues of a square matrix.
pub fn eigen_moduli(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Numerical(format!(
            "eigenvalues of a non-square {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "eigenvalues of a matrix with non-finite entries".into(),
        ));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let h = m.clone().hessenberg().h();
    let mut a: Vec<f64> = (0..n * n).map(|i| h[(i / n, i % n)]).collect();
    let values = hessenberg_eigenvalues(&mut a, n)
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    Ok(values.iter().map(|c| c.norm()).collect())
}

/// Maximum shifted QR sweeps spent on one eigenvalue before giving up.
const MAX_SWEEPS: usize = 60;

/// Eigenvalues of the upper Hessenberg matrix `h` (row-major, destroyed) by
/// the implicit double-shift QR iteration. Exceptional shifts after 10, 20
/// and 40 stalled sweeps break the cycles that plain Francis shifts fall into
/// on cyclic structures such as block companion matrices.
fn hessenberg_eigenvalues(h: &mut [f64], n: usize) -> Option<Vec<Complex64>> {
    // One-based indexing keeps the deflation bookkeeping readable.
    let at = |i: usize, j: usize| (i - 1) * n + (j - 1);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut norm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            norm += h[at(i, j)].abs();
        }
    }
    let mut nn = n;
    let mut shift = 0.0;
    while nn >= 1 {
        let mut sweeps = 0;
        loop {
            // Smallest l such that rows l..nn form an unreduced block.
            let mut l = nn;
            while l >= 2 {
                let mut s = h[at(l - 1, l - 1)].abs() + h[at(l, l)].abs();
                if s == 0.0 {
                    s = norm;
                }
                if h[at(l, l - 1)].abs() + s == s {
                    h[at(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[at(nn, nn)];
            if l == nn {
                out[nn - 1] = Complex64::new(x + shift, 0.0);
                nn -= 1;
                break;
            }
            let mut y = h[at(nn - 1, nn - 1)];
            let mut w = h[at(nn, nn - 1)] * h[at(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += shift;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    out[nn - 2] = Complex64::new(x + z, 0.0);
                    out[nn - 1] = Complex64::new(if z != 0.0 { x - w / z } else { x + z }, 0.0);
                } else {
                    out[nn - 2] = Complex64::new(x + p, -z);
                    out[nn - 1] = Complex64::new(x + p, z);
                }
                nn -= 2;
                break;
            }
            if sweeps == MAX_SWEEPS {
                return None;
            }
            if sweeps == 10 || sweeps == 20 || sweeps == 40 {
                shift += x;
                for i in 1..=nn {
                    h[at(i, i)] -= x;
                }
                let s = h[at(nn, nn - 1)].abs() + h[at(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            sweeps += 1;
            // Look for two consecutive small subdiagonal elements.
            let (mut p, mut q, mut r);
            let mut m = nn - 2;
            loop {
                let z = h[at(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[at(m + 1, m)] + h[at(m, m + 1)];
                q = h[at(m + 1, m + 1)] - z - rr - ss;
                r = h[at(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[at(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (h[at(m - 1, m - 1)].abs() + z.abs() + h[at(m + 1, m + 1)].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                h[at(i, i - 2)] = 0.0;
                if i != m + 2 {
                    h[at(i, i - 3)] = 0.0;
                }
            }
            // Chase the bulge down the block with 3x3 Householder reflections.
            for k in m..nn {
                if k != m {
                    p = h[at(k, k - 1)];
                    q = h[at(k + 1, k - 1)];
                    r = if k != nn - 1 {
                        h[at(k + 2, k - 1)]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        h[at(k, k - 1)] = -h[at(k, k - 1)];
                    }
                } else {
                    h[at(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nn {
                    let mut t = h[at(k, j)] + q * h[at(k + 1, j)];
                    if k != nn - 1 {
                        t += r * h[at(k + 2, j)];
                        h[at(k + 2, j)] -= t * z;
                    }
                    h[at(k + 1, j)] -= t * y;
                    h[at(k, j)] -= t * x;
                }
                for i in l..=nn.min(k + 3) {
                    let mut t = x * h[at(i, k)] + y * h[at(i, k + 1)];
                    if k != nn - 1 {
                        t += z * h[at(i, k + 2)];
                        h[at(i, k + 2)] -= t * r;
                    }
                    h[at(i, k + 1)] -= t * q;
                    h[at(i, k)] -= t;
                }
            }
        }
    }
    Some(out)
}
