use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::series::RowMatrix;

/// Unnormalized forward DFT `u_m = sum_k x_k exp(-2 pi i m k / K)`, all `K` wavenumbers.
pub fn spatial_dft(row: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(row.len())
        .process(&mut buf);
    buf
}

/// Mean wave amplitude `E|u_m|` and wave variance `E|u_m - E u_m|^2` for
/// `m = 0..=K/2`, time averages over the rows of `x`.
pub fn wave_stats(x: &RowMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = x.cols();
    if k < 2 {
        return Err(Error::Data(
            "wave statistics need at least 2 grid points".into(),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::Data("wave statistics of an empty trajectory".into()));
    }
    let m_count = k / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(k);
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut transform = |row: &[f64], buf: &mut Vec<Complex64>| {
        for (b, &v) in buf.iter_mut().zip(row) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process_with_scratch(buf, &mut scratch);
    };
    let n = x.rows() as f64;
    let mut amp = vec![0.0; m_count];
    let mut mean = vec![Complex64::new(0.0, 0.0); m_count];
    for r in 0..x.rows() {
        transform(x.row(r), &mut buf);
        for m in 0..m_count {
            amp[m] += buf[m].norm();
            mean[m] += buf[m];
        }
    }
    mean.iter_mut().for_each(|u| *u /= n);
    let mut var = vec![0.0; m_count];
    for r in 0..x.rows() {
        transform(x.row(r), &mut buf);
        for m in 0..m_count {
            var[m] += (buf[m] - mean[m]).norm_sqr();
        }
    }
    Ok((
        amp.into_iter().map(|a| a / n).collect(),
        var.into_iter().map(|v| v / n).collect(),
    ))
}
