mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use ssenc_core::data::{fit_normalizers, generate, Excitation, LinearSs, StaticNonlinearity, SystemKind};
use ssenc_core::metrics::{nrms, nstep_nrms, output_sigma};
use ssenc_core::{Dataset, ModelDims, Normalizer, SsEncoderModel, SyntheticSystem};

fn wiener() -> SyntheticSystem {
    let filter = LinearSs::new(
        2,
        1,
        1,
        vec![1.2, -0.5, 1.0, 0.0],
        vec![1.0, 0.0],
        vec![0.3, 0.2],
        vec![0.0],
    )
    .unwrap();
    SyntheticSystem {
        kind: SystemKind::Wiener {
            filter,
            nonlinearity: StaticNonlinearity::Tanh { gain: 1.5 },
        },
        noise_std: 0.0,
    }
}

#[test]
fn noiseless_wiener_matches_naive_loop() {
    let u = Excitation::WhiteGaussian { std: 1.0 }.sample(500, 1, 3);
    let ds = generate(&wiener(), &u, 9).unwrap();
    let (mut x0, mut x1) = (0.0f64, 0.0f64);
    for (t, ut) in u.iter().enumerate() {
        let z = 0.3 * x0 + 0.2 * x1;
        let y = (1.5 * z).tanh();
        assert!((ds.y()[t] - y).abs() <= 1e-12, "t = {t}");
        let n0 = 1.2 * x0 - 0.5 * x1 + ut;
        x1 = x0;
        x0 = n0;
    }
}

#[test]
fn generation_is_a_pure_function_of_the_seed() {
    let mut sys = wiener();
    sys.noise_std = 0.1;
    let u = Excitation::LowpassGaussian { std: 1.0, pole: 0.5 }.sample(200, 1, 1);
    let a = generate(&sys, &u, 4).unwrap();
    assert_eq!(a, generate(&sys, &u, 4).unwrap());
    assert_ne!(a, generate(&sys, &u, 5).unwrap());
}

#[test]
fn nstep_matches_naive_per_start_loop() {
    let dims = ModelDims {
        n_x: 2,
        n_u: 1,
        n_y: 1,
        n_a: 3,
        n_b: 2,
    };
    let base = scrambled_model(dims, &[4], 12, 0.6);
    let mut r = rng(13);
    let u: Vec<f64> = (0..60).map(|_| r.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = (0..60).map(|_| r.random_range(5.0..9.0)).collect();
    let ds = Dataset::new(u, y, 1, 1).unwrap();
    let (un, yn) = fit_normalizers(&ds).unwrap();
    let m = SsEncoderModel::from_nets(
        dims,
        base.encoder().clone(),
        base.state_map().clone(),
        base.output_map().clone(),
        un,
        yn,
    )
    .unwrap();
    let n_max = 5;
    let curve = nstep_nrms(&m, &ds, n_max).unwrap();

    let data = m.normalize(&ds).unwrap();
    let starts: Vec<usize> = (3..=60 - 1 - n_max).collect();
    let sigma = output_sigma(&ds.y()[3..], 1);
    assert_eq!(curve.count, starts.len());
    assert_eq!(curve.sigma_y, sigma);
    for n in 0..=n_max {
        let mut sq = 0.0;
        for &s in &starts {
            let pred = m.denormalize_outputs(&naive_rollout(&m, &data, s, n_max, 0));
            sq += (pred[n] - ds.y()[s + n]).powi(2);
        }
        let want = (sq / starts.len() as f64).sqrt() / sigma;
        assert!((curve.values[n] - want).abs() <= 1e-12, "n = {n}");
    }

    let zero = nstep_nrms(&m, &ds, 0).unwrap();
    assert_eq!(zero.values.len(), 1);
    assert!(zero.values[0].is_finite());
    assert!(nstep_nrms(&m, &ds, 60).is_err());
}

#[test]
fn perfect_model_has_exactly_zero_nstep_error() {
    let m = fir_model();
    let ds = fir_dataset(400, 2);
    let curve = nstep_nrms(&m, &ds, 80).unwrap();
    assert_eq!(curve.values.len(), 81);
    assert!(curve.values.iter().all(|v| *v == 0.0));
}

#[test]
fn normalizer_round_trip_and_moments() {
    let u = Excitation::WhiteGaussian { std: 3.0 }.sample(1000, 2, 8);
    let y: Vec<f64> = u.chunks(2).map(|r| 100.0 + 5.0 * r[0] - r[1]).collect();
    let ds = Dataset::new(u, y, 2, 1).unwrap();
    let (un, yn) = fit_normalizers(&ds).unwrap();
    let z = un.apply(ds.u());
    for c in 0..2 {
        let col: Vec<f64> = z.iter().skip(c).step_by(2).copied().collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        assert!(mean.abs() < 1e-10 && (std - 1.0).abs() < 1e-10);
    }
    let back = un.invert(&z);
    assert!(max_abs_diff(&back, ds.u()) < 1e-12);
    assert!(max_abs_diff(&yn.invert(&yn.apply(ds.y())), ds.y()) < 1e-12);
    assert!(Normalizer::new(vec![0.0], vec![0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nrms_is_scale_equivariant(
        y in proptest::collection::vec(-100.0f64..100.0, 2..40),
        noise in proptest::collection::vec(-1.0f64..1.0, 40),
        c in 1e-3f64..1e3,
    ) {
        let y_hat: Vec<f64> = y.iter().zip(&noise).map(|(a, e)| a + e).collect();
        let sigma = output_sigma(&y, 1);
        prop_assume!(sigma > 1e-6);
        let base = nrms(&y_hat, &y, 1, Some(sigma)).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| c * v).collect();
        let yhs: Vec<f64> = y_hat.iter().map(|v| c * v).collect();
        let scaled = nrms(&yhs, &ys, 1, Some(c * sigma)).unwrap();
        prop_assert!((scaled.nrms - base.nrms).abs() <= 1e-12 * (1.0 + base.nrms));
        prop_assert!((scaled.rms - c * base.rms).abs() <= 1e-12 * (1.0 + c * base.rms));
    }

    #[test]
    fn normalizer_invert_apply_is_identity(
        vals in proptest::collection::vec(-1e4f64..1e4, 6..60),
    ) {
        let n = vals.len() / 3 * 3;
        let v = &vals[..n];
        if let Ok(norm) = Normalizer::fit(v, 3, "x") {
            let back = norm.invert(&norm.apply(v));
            for (a, b) in back.iter().zip(v) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }
}
