//! Time-series datasets, per-channel normalization and synthetic
//! data-generating systems.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Aligned input/output samples, stored row-major (`N x n_u` and `N x n_y`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    u: Vec<f64>,
    y: Vec<f64>,
    n_u: usize,
    n_y: usize,
    sample_period: Option<f64>,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>, n_u: usize, n_y: usize) -> Result<Self> {
        if n_y == 0 {
            return Err(Error::Dimension {
                what: "output width",
                expected: 1,
                got: 0,
            });
        }
        if y.len() % n_y != 0 {
            return Err(Error::Dimension {
                what: "output samples",
                expected: (y.len() / n_y + 1) * n_y,
                got: y.len(),
            });
        }
        let n = y.len() / n_y;
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if u.len() != n * n_u {
            return Err(Error::Dimension {
                what: "input samples",
                expected: n * n_u,
                got: u.len(),
            });
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "input",
                index: i / n_u,
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "output",
                index: i / n_y,
            });
        }
        Ok(Self {
            u,
            y,
            n_u,
            n_y,
            sample_period: None,
        })
    }

    pub fn with_sample_period(mut self, sample_period: Option<f64>) -> Self {
        self.sample_period = sample_period;
        self
    }

    pub fn len(&self) -> usize {
        self.y.len() / self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn sample_period(&self) -> Option<f64> {
        self.sample_period
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn u_at(&self, t: usize) -> &[f64] {
        &self.u[t * self.n_u..(t + 1) * self.n_u]
    }

    pub fn y_at(&self, t: usize) -> &[f64] {
        &self.y[t * self.n_y..(t + 1) * self.n_y]
    }

    /// Cuts the dataset into the given sample ranges, in the order given.
    ///
    /// Ranges must be non-empty, in bounds and pairwise disjoint.
    pub fn split(&self, ranges: &[Range<usize>]) -> Result<Vec<Dataset>> {
        let len = self.len();
        for r in ranges {
            if r.start >= r.end || r.end > len {
                return Err(Error::RangeOutOfBounds {
                    start: r.start,
                    end: r.end,
                    len,
                });
            }
        }
        let mut sorted: Vec<&Range<usize>> = ranges.iter().collect();
        sorted.sort_by_key(|r| r.start);
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::OverlappingRanges {
                    first: (pair[0].start, pair[0].end),
                    second: (pair[1].start, pair[1].end),
                });
            }
        }
        Ok(ranges
            .iter()
            .map(|r| Dataset {
                u: self.u[r.start * self.n_u..r.end * self.n_u].to_vec(),
                y: self.y[r.start * self.n_y..r.end * self.n_y].to_vec(),
                n_u: self.n_u,
                n_y: self.n_y,
                sample_period: self.sample_period,
            })
            .collect())
    }
}

/// Per-channel affine map `x -> (x - mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(width: usize) -> Self {
        Self {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    /// Builds a normalizer from explicit statistics; every std must be positive.
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::Dimension {
                what: "normalizer std",
                expected: mean.len(),
                got: std.len(),
            });
        }
        if let Some(c) = std.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::ZeroVariance {
                signal: "normalizer",
                channel: c,
            });
        }
        Ok(Self { mean, std })
    }

    /// Fits mean and population standard deviation (divide by `N`) per channel
    /// of row-major `values` with `width` channels.
    pub fn fit(values: &[f64], width: usize, signal: &'static str) -> Result<Self> {
        let n = if width == 0 { 0 } else { values.len() / width };
        if width == 0 {
            return Ok(Self::identity(0));
        }
        if n < 2 {
            return Err(Error::TooShort {
                required: 2,
                available: n,
            });
        }
        let mut mean = vec![0.0; width];
        for row in values.chunks_exact(width) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; width];
        for row in values.chunks_exact(width) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        if let Some(c) = std.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::ZeroVariance { signal, channel: c });
        }
        Ok(Self { mean, std })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let w = self.width();
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % w]) / self.std[i % w])
            .collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        let w = self.width();
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i % w] + self.mean[i % w])
            .collect()
    }
}

/// Fits `(input, output)` normalizers on a (training) dataset.
pub fn fit_normalizers(d: &Dataset) -> Result<(Normalizer, Normalizer)> {
    let u = Normalizer::fit(&d.u, d.n_u, "input")?;
    let y = Normalizer::fit(&d.y, d.n_y, "output")?;
    Ok((u, y))
}

/// Discrete-time linear state-space system, matrices row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSs {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl LinearSs {
    pub fn new(
        n_x: usize,
        n_u: usize,
        n_y: usize,
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
        d: Vec<f64>,
    ) -> Result<Self> {
        let sys = Self {
            n_x,
            n_u,
            n_y,
            a,
            b,
            c,
            d,
        };
        sys.check_shapes()?;
        Ok(sys)
    }

    fn check_shapes(&self) -> Result<()> {
        let checks = [
            ("A", self.a.len(), self.n_x * self.n_x),
            ("B", self.b.len(), self.n_x * self.n_u),
            ("C", self.c.len(), self.n_y * self.n_x),
            ("D", self.d.len(), self.n_y * self.n_u),
        ];
        for (name, got, expected) in checks {
            if got != expected {
                return Err(Error::InvalidSystem(alloc::format!(
                    "matrix {name} has {got} entries, expected {expected}"
                )));
            }
        }
        if self.n_y == 0 {
            return Err(Error::InvalidSystem("system has no outputs".into()));
        }
        Ok(())
    }

    /// Whether the spectral radius of `A` is strictly below one.
    ///
    /// Gelfand's formula: `rho(A) < 1` iff some power `A^m` has a norm below
    /// one. Checks `m = 1, 2, 4, ..., 2^40` by repeated squaring, which
    /// resolves radii up to about `1 - 1e-12`. Powers that overflow are
    /// treated as unstable.
    pub fn is_stable(&self) -> bool {
        let n = self.n_x;
        if n == 0 {
            return true;
        }
        let mut p = self.a.clone();
        for _ in 0..=40 {
            let norm = frobenius(&p);
            if !norm.is_finite() {
                return false;
            }
            if norm < 1.0 {
                return true;
            }
            p = matmul(&p, &p, n, n, n);
        }
        false
    }

    fn next_state(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        for i in 0..self.n_x {
            let mut acc = 0.0;
            for j in 0..self.n_x {
                acc += self.a[i * self.n_x + j] * x[j];
            }
            for j in 0..self.n_u {
                acc += self.b[i * self.n_u + j] * u[j];
            }
            out[i] = acc;
        }
    }

    fn output(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        for i in 0..self.n_y {
            let mut acc = 0.0;
            for j in 0..self.n_x {
                acc += self.c[i * self.n_x + j] * x[j];
            }
            for j in 0..self.n_u {
                acc += self.d[i * self.n_u + j] * u[j];
            }
            out[i] = acc;
        }
    }

    /// Noiseless response from zero initial state, row-major `N x n_y`.
    pub fn respond(&self, u: &[f64]) -> Vec<f64> {
        let n = if self.n_u == 0 { 0 } else { u.len() / self.n_u };
        let mut x = vec![0.0; self.n_x];
        let mut next = vec![0.0; self.n_x];
        let mut y = vec![0.0; n * self.n_y];
        for t in 0..n {
            let ut = &u[t * self.n_u..(t + 1) * self.n_u];
            self.output(&x, ut, &mut y[t * self.n_y..(t + 1) * self.n_y]);
            self.next_state(&x, ut, &mut next);
            core::mem::swap(&mut x, &mut next);
        }
        y
    }
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn matmul(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for k in 0..inner {
            let aik = a[i * inner + k];
            for j in 0..cols {
                out[i * cols + j] += aik * b[k * cols + j];
            }
        }
    }
    out
}

/// Static output nonlinearity of a Wiener system, applied elementwise.
#[derive(Clone, Debug, PartialEq)]
pub enum StaticNonlinearity {
    /// `tanh(gain * z)`
    Tanh { gain: f64 },
    /// `sum_i coeffs[i] * z^i`
    Polynomial(Vec<f64>),
}

impl StaticNonlinearity {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            StaticNonlinearity::Tanh { gain } => (gain * z).tanh(),
            StaticNonlinearity::Polynomial(coeffs) => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
            }
        }
    }
}

/// Forced Duffing oscillator `m p'' + c p' + k p + k3 p^3 = g u(t)`,
/// observed as `y = p` at every sample. The input is held constant over each
/// sample interval and integrated with `substeps` fixed RK4 steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Duffing {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub cubic_stiffness: f64,
    pub input_gain: f64,
    pub sample_period: f64,
    pub substeps: usize,
}

impl Duffing {
    fn deriv(&self, p: f64, v: f64, u: f64) -> (f64, f64) {
        let acc = (self.input_gain * u
            - self.damping * v
            - self.stiffness * p
            - self.cubic_stiffness * p * p * p)
            / self.mass;
        (v, acc)
    }

    fn rk4(&self, p: f64, v: f64, u: f64, h: f64) -> (f64, f64) {
        let (k1p, k1v) = self.deriv(p, v, u);
        let (k2p, k2v) = self.deriv(p + 0.5 * h * k1p, v + 0.5 * h * k1v, u);
        let (k3p, k3v) = self.deriv(p + 0.5 * h * k2p, v + 0.5 * h * k2v, u);
        let (k4p, k4v) = self.deriv(p + h * k3p, v + h * k3v, u);
        (
            p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }

    pub fn respond(&self, u: &[f64]) -> Vec<f64> {
        let h = self.sample_period / self.substeps as f64;
        let (mut p, mut v) = (0.0, 0.0);
        let mut y = Vec::with_capacity(u.len());
        for &ut in u {
            y.push(p);
            for _ in 0..self.substeps {
                (p, v) = self.rk4(p, v, ut, h);
            }
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SystemKind {
    LinearSs(LinearSs),
    /// Linear filter followed by an elementwise static nonlinearity.
    Wiener {
        filter: LinearSs,
        nonlinearity: StaticNonlinearity,
    },
    Duffing(Duffing),
}

/// Ground-truth system with additive i.i.d. Gaussian output noise.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSystem {
    pub kind: SystemKind,
    pub noise_std: f64,
}

impl SyntheticSystem {
    pub fn true_state_dim(&self) -> usize {
        match &self.kind {
            SystemKind::LinearSs(s) => s.n_x,
            SystemKind::Wiener { filter, .. } => filter.n_x,
            SystemKind::Duffing(_) => 2,
        }
    }

    pub fn n_u(&self) -> usize {
        match &self.kind {
            SystemKind::LinearSs(s) => s.n_u,
            SystemKind::Wiener { filter, .. } => filter.n_u,
            SystemKind::Duffing(_) => 1,
        }
    }

    pub fn n_y(&self) -> usize {
        match &self.kind {
            SystemKind::LinearSs(s) => s.n_y,
            SystemKind::Wiener { filter, .. } => filter.n_y,
            SystemKind::Duffing(_) => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidSystem("noise_std must be finite and >= 0".into()));
        }
        match &self.kind {
            SystemKind::LinearSs(s) | SystemKind::Wiener { filter: s, .. } => {
                s.check_shapes()?;
                if s.n_u == 0 {
                    return Err(Error::InvalidSystem("system has no inputs".into()));
                }
                if !s.is_stable() {
                    return Err(Error::Unstable);
                }
            }
            SystemKind::Duffing(d) => {
                if !(d.mass > 0.0) || d.substeps == 0 || !(d.sample_period > 0.0) {
                    return Err(Error::InvalidSystem(
                        "duffing needs mass > 0, sample_period > 0 and substeps >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Noiseless response from zero initial state.
    pub fn respond(&self, u: &[f64]) -> Vec<f64> {
        match &self.kind {
            SystemKind::LinearSs(s) => s.respond(u),
            SystemKind::Wiener {
                filter,
                nonlinearity,
            } => {
                let mut y = filter.respond(u);
                for v in &mut y {
                    *v = nonlinearity.apply(*v);
                }
                y
            }
            SystemKind::Duffing(d) => d.respond(u),
        }
    }
}

/// Simulates `sys` from zero initial state on the row-major input `u` and
/// adds output noise drawn from a ChaCha8 stream seeded with `seed`.
pub fn generate(sys: &SyntheticSystem, u: &[f64], seed: u64) -> Result<Dataset> {
    sys.validate()?;
    let n_u = sys.n_u();
    if u.len() % n_u != 0 {
        return Err(Error::Dimension {
            what: "input samples",
            expected: (u.len() / n_u + 1) * n_u,
            got: u.len(),
        });
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "input",
            index: i / n_u,
        });
    }
    let mut y = sys.respond(u);
    if sys.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut y {
            let e: f64 = rng.sample(StandardNormal);
            *v += sys.noise_std * e;
        }
    }
    Dataset::new(u.to_vec(), y, n_u, sys.n_y())
}

/// Random excitation signals for the generators.
#[derive(Clone, Debug, PartialEq)]
pub enum Excitation {
    WhiteGaussian { std: f64 },
    /// Unit-variance AR(1) process `s[t+1] = a s[t] + sqrt(1 - a^2) e[t]`,
    /// scaled by `std`; `pole` is `a`, in `[0, 1)`.
    LowpassGaussian { std: f64, pole: f64 },
}

impl Excitation {
    /// Row-major `n_samples x n_u` signal. Uses stream 1 of the seeded
    /// generator so it never coincides with the output-noise stream.
    pub fn sample(&self, n_samples: usize, n_u: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut normal = move || -> f64 { rng.sample(StandardNormal) };
        match *self {
            Excitation::WhiteGaussian { std } => {
                (0..n_samples * n_u).map(|_| std * normal()).collect()
            }
            Excitation::LowpassGaussian { std, pole } => {
                let gain = (1.0 - pole * pole).sqrt();
                let mut state: Vec<f64> = (0..n_u).map(|_| normal()).collect();
                let mut out = Vec::with_capacity(n_samples * n_u);
                for _ in 0..n_samples {
                    for s in &mut state {
                        out.push(std * *s);
                        *s = pole * *s + gain * normal();
                    }
                }
                out
            }
        }
    }
}
