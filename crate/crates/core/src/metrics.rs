//! Evaluation metrics in physical units.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::valid_starts;
use crate::model::{SimInit, SsEncoderModel};
use crate::real::Real;

/// RMS and NRMS of a simulation error over `[t0, t0 + count)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub rms: f64,
    /// `rms / sigma_y`, a fraction (not a percentage).
    pub nrms: f64,
    pub sigma_y: f64,
    pub t0: usize,
    pub count: usize,
}

/// Population standard deviation of row-major multi-channel samples,
/// `sqrt(mean_t |y_t - mean(y)|^2)`. Equals the usual std for one channel.
pub fn output_sigma(y: &[f64], n_y: usize) -> f64 {
    let n = y.len() / n_y;
    if n == 0 {
        return 0.0;
    }
    let mut mean = vec![0.0; n_y];
    for row in y.chunks_exact(n_y) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let ss: f64 = y
        .chunks_exact(n_y)
        .map(|row| row.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>())
        .sum();
    (ss / n as f64).sqrt()
}

/// `rms = sqrt(mean_t |y_hat_t - y_t|^2)` and `nrms = rms / sigma_y`.
///
/// `sigma_y` defaults to [`output_sigma`] of `y`.
pub fn nrms(y_hat: &[f64], y: &[f64], n_y: usize, sigma_y: Option<f64>) -> Result<MetricReport> {
    if y_hat.len() != y.len() {
        return Err(Error::Dimension {
            what: "prediction length",
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    let count = y.len() / n_y.max(1);
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let sigma = sigma_y.unwrap_or_else(|| output_sigma(y, n_y));
    if sigma == 0.0 {
        return Err(Error::ZeroSigma);
    }
    let ss: f64 = y_hat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let rms = (ss / count as f64).sqrt();
    Ok(MetricReport {
        rms,
        nrms: rms / sigma,
        sigma_y: sigma,
        t0: 0,
        count,
    })
}

/// Free-run simulation error of `model` on `d`, scored from the simulation's
/// start `t0` onward with `sigma_y` taken over the same range.
pub fn simulation_report<S: Real>(model: &SsEncoderModel<S>, d: &Dataset, init: &SimInit<S>) -> Result<MetricReport> {
    let sim = model.simulate(d, init)?;
    let target = &d.y()[sim.t0 * d.n_y()..];
    let mut report = nrms(&sim.outputs, target, d.n_y(), None)?;
    report.t0 = sim.t0;
    Ok(report)
}

/// `NRMS_n` for `n = 0..=n_max`, averaged over `count` sections.
#[derive(Clone, Debug, PartialEq)]
pub struct NStepCurve {
    pub values: Vec<f64>,
    pub count: usize,
    pub sigma_y: f64,
}

/// Expected normalized error `n` steps after encoder initialization,
/// averaged over every valid start of `d`:
/// `NRMS_n = sqrt(1/M sum_i |y_hat[t_i -> t_i+n] - y[t_i+n]|^2) / sigma_y`,
/// with `sigma_y` the output std over `t >= max(n_a, n_b)`.
pub fn nstep_nrms<S: Real>(model: &SsEncoderModel<S>, d: &Dataset, n_max: usize) -> Result<NStepCurve> {
    let dims = model.dims();
    let starts = valid_starts(d.len(), dims.n_a, dims.n_b, n_max, 0)?;
    let data = model.normalize(d)?;
    let n_y = dims.n_y;
    let sigma = output_sigma(&d.y()[dims.warmup() * n_y..], n_y);
    if sigma == 0.0 {
        return Err(Error::ZeroSigma);
    }
    let mut sums = vec![0.0f64; n_max + 1];
    for &start in &starts {
        let pred = model.predict_section(&data, start, n_max)?;
        let phys = model.denormalize_outputs(&pred);
        for (n, sum) in sums.iter_mut().enumerate() {
            let y = d.y_at(start + n);
            let p = &phys[n * n_y..(n + 1) * n_y];
            *sum += p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    let m = starts.len() as f64;
    Ok(NStepCurve {
        values: sums.iter().map(|s| (s / m).sqrt() / sigma).collect(),
        count: starts.len(),
        sigma_y: sigma,
    })
}
