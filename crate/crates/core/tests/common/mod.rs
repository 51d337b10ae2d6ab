#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssenc_core::model::NormalizedData;
use ssenc_core::{InitScale, ModelDims, Normalizer, SsEncoderModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_model(dims: ModelDims, hidden: &[usize], seed: u64) -> SsEncoderModel<f64> {
    SsEncoderModel::init(
        dims,
        hidden,
        InitScale::Standard,
        seed,
        Normalizer::identity(dims.n_u),
        Normalizer::identity(dims.n_y),
    )
    .unwrap()
}

/// Random model whose parameters are all drawn from `U(-scale, scale)`, so
/// that every tanh unit works in its nonlinear range.
pub fn scrambled_model(dims: ModelDims, hidden: &[usize], seed: u64, scale: f64) -> SsEncoderModel<f64> {
    let mut m = random_model(dims, hidden, seed);
    let mut r = rng(seed ^ 0x5eed);
    let p: Vec<f64> = (0..m.num_params()).map(|_| r.random_range(-scale..scale)).collect();
    m.set_params_flat(&p).unwrap();
    m
}

pub fn random_data(n: usize, n_u: usize, n_y: usize, seed: u64) -> NormalizedData<f64> {
    let mut r = rng(seed);
    NormalizedData {
        u: (0..n * n_u).map(|_| r.random_range(-1.0..1.0)).collect(),
        y: (0..n * n_y).map(|_| r.random_range(-1.0..1.0)).collect(),
        n_u,
        n_y,
    }
}

/// Outputs `y_hat[start + k]` for `k = burn_in ..= burn_in + horizon`, from
/// plain calls to `encode`, `step` and `output`.
pub fn naive_rollout(
    m: &SsEncoderModel<f64>,
    d: &NormalizedData<f64>,
    start: usize,
    horizon: usize,
    burn_in: usize,
) -> Vec<f64> {
    let dims = m.dims();
    let mut y_hist = Vec::new();
    for t in start - dims.n_a..start {
        y_hist.extend_from_slice(d.y_at(t));
    }
    let mut u_hist = Vec::new();
    for t in start - dims.n_b..start {
        u_hist.extend_from_slice(d.u_at(t));
    }
    let mut x = m.encode(&y_hist, &u_hist).unwrap();
    let mut out = Vec::new();
    for k in 0..=horizon + burn_in {
        let u = d.u_at(start + k);
        if k >= burn_in {
            out.extend(m.output(&x, u).unwrap());
        }
        x = m.step(&x, u).unwrap();
    }
    out
}

/// `1/(2 N (T+1)) sum_i sum_k |y_hat - y|^2` by double loop.
pub fn naive_encoder_loss(
    m: &SsEncoderModel<f64>,
    d: &NormalizedData<f64>,
    starts: &[usize],
    horizon: usize,
    burn_in: usize,
) -> f64 {
    let n_y = d.n_y;
    let mut total = 0.0;
    for &s in starts {
        let pred = naive_rollout(m, d, s, horizon, burn_in);
        for k in 0..=horizon {
            let y = d.y_at(s + burn_in + k);
            for c in 0..n_y {
                let r = pred[k * n_y + c] - y[c];
                total += r * r;
            }
        }
    }
    total / (2.0 * starts.len() as f64 * (horizon + 1) as f64)
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error, where components with absolute error below
/// `abs_floor` count as exact.
pub fn max_rel_err(a: &[f64], b: &[f64], abs_floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d < abs_floor {
                0.0
            } else {
                d / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn affine_net(n_in: usize, n_out: usize, weight: Vec<f64>, bias: Vec<f64>) -> ssenc_core::ResidualNet<f64> {
    ssenc_core::ResidualNet::from_parts(
        vec![],
        vec![],
        ssenc_core::net::Dense {
            n_in,
            n_out,
            weight,
            bias,
        },
    )
    .unwrap()
}

/// Exact affine model of `y[t] = 0.5 u[t-1] + 0.25 u[t-2]` with state
/// `x[t] = (u[t-1], u[t-2])`, identity normalizers and `n_a = 1, n_b = 2`.
pub fn fir_model() -> SsEncoderModel<f64> {
    let dims = ModelDims {
        n_x: 2,
        n_u: 1,
        n_y: 1,
        n_a: 1,
        n_b: 2,
    };
    // encoder input [y[t-1]; u[t-2], u[t-1]]
    let enc = affine_net(3, 2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0], vec![0.0; 2]);
    let f = affine_net(3, 2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0], vec![0.0; 2]);
    let h = affine_net(3, 1, vec![0.5, 0.25, 0.0], vec![0.0]);
    SsEncoderModel::from_nets(dims, enc, f, h, Normalizer::identity(1), Normalizer::identity(1)).unwrap()
}

/// Noiseless data of the [`fir_model`] system driven by small integers.
pub fn fir_dataset(n: usize, seed: u64) -> ssenc_core::Dataset {
    let mut r = rng(seed);
    let u: Vec<f64> = (0..n).map(|_| r.random_range(-8i32..=8) as f64).collect();
    let y: Vec<f64> = (0..n)
        .map(|t| {
            let u1 = if t >= 1 { u[t - 1] } else { 0.0 };
            let u2 = if t >= 2 { u[t - 2] } else { 0.0 };
            0.5 * u1 + 0.25 * u2
        })
        .collect();
    ssenc_core::Dataset::new(u, y, 1, 1).unwrap()
}
