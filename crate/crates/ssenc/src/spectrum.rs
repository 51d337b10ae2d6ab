//! DFT magnitude of a prediction residual next to that of the reference.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Bin frequencies `k / (N Ts)` in Hz, or `k / N` in cycles per sample
    /// when no sample period is known.
    pub frequency: Vec<f64>,
    /// `|DFT(y_hat - y)|` per bin.
    pub residual: Vec<f64>,
    /// `|DFT(y)|` per bin.
    pub reference: Vec<f64>,
}

fn dft_magnitude(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

/// All `N` bins of the unnormalized DFT, `X[k] = sum_t x[t] e^{-2 pi i k t / N}`.
pub fn error_spectrum(y_hat: &[f64], y: &[f64], sample_period: Option<f64>) -> Result<Spectrum> {
    if y_hat.len() != y.len() {
        return Err(ssenc_core::Error::Dimension {
            what: "prediction length",
            expected: y.len(),
            got: y_hat.len(),
        }
        .into());
    }
    let n = y.len();
    if n < 2 {
        return Err(ssenc_core::Error::TooShort { required: 2, available: n }.into());
    }
    if let Some(ts) = sample_period {
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::Usage(format!("sample period must be positive, got {ts}")));
        }
    }
    let residual: Vec<f64> = y_hat.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut planner = FftPlanner::new();
    let scale = sample_period.map_or(1.0, |ts| 1.0 / ts);
    Ok(Spectrum {
        frequency: (0..n).map(|k| k as f64 / n as f64 * scale).collect(),
        residual: dft_magnitude(&residual, &mut planner),
        reference: dft_magnitude(y, &mut planner),
    })
}
