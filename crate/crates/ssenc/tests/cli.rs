use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use ssenc::csvio::save_csv;
use ssenc::modelfile::{save_model, InitMeta};
use ssenc::report;
use ssenc_core::data::{generate, Excitation, LinearSs, SystemKind};
use ssenc_core::net::{Dense, ResidualNet};
use ssenc_core::{InitScale, ModelDims, Normalizer, SsEncoderModel, SyntheticSystem};

fn ssenc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssenc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Writes noiseless FIR data `y = 0.5 u[t-1] + 0.25 u[t-2]` split into
/// train/val/test files and returns their paths.
fn fir_files(dir: &Path) -> [PathBuf; 3] {
    fir_files_n(dir, 600)
}

fn fir_files_n(dir: &Path, n: usize) -> [PathBuf; 3] {
    let a = vec![0.0, 0.0, 1.0, 0.0];
    let sys = SyntheticSystem {
        kind: SystemKind::LinearSs(LinearSs::new(2, 1, 1, a, vec![1.0, 0.0], vec![0.5, 0.25], vec![0.0]).unwrap()),
        noise_std: 0.0,
    };
    let u = Excitation::WhiteGaussian { std: 1.0 }.sample(n, 1, 3);
    let d = generate(&sys, &u, 3).unwrap();
    let parts = d.split(&[0..n / 2, n / 2..3 * n / 4, 3 * n / 4..n]).unwrap();
    let names = ["train.csv", "val.csv", "test.csv"];
    let mut out = names.map(|n| dir.join(n));
    for (p, part) in out.iter_mut().zip(&parts) {
        save_csv(&*p, part).unwrap();
    }
    out
}

fn small_config(dir: &Path, out_dir: &str) -> PathBuf {
    fir_files(dir);
    let text = format!(
        "train_file = \"train.csv\"\nval_file = \"val.csv\"\ntest_file = \"test.csv\"\nout_dir = \"{out_dir}\"\n\
         n_x = 2\nn_a = 3\nn_b = 3\nhorizon = 6\nhidden = [4]\nbatch_size = 32\nmax_epochs = 3\n\
         final_refine_epochs = 2\nseed = 5\nrecord_time = false\n"
    );
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

/// Exact affine model of the FIR system above: state (u[t-1], u[t-2]).
fn perfect_fir_model() -> SsEncoderModel<f64> {
    let dims = ModelDims {
        n_x: 2,
        n_u: 1,
        n_y: 1,
        n_a: 1,
        n_b: 2,
    };
    let affine = |n_in, n_out, weight: Vec<f64>| {
        ResidualNet::from_parts(
            vec![],
            vec![],
            Dense {
                n_in,
                n_out,
                weight,
                bias: vec![0.0; n_out],
            },
        )
        .unwrap()
    };
    SsEncoderModel::from_nets(
        dims,
        affine(3, 2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
        affine(3, 2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]),
        affine(3, 1, vec![0.5, 0.25, 0.0]),
        Normalizer::identity(1),
        Normalizer::identity(1),
    )
    .unwrap()
}

#[test]
fn missing_train_file_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    std::fs::write(&p, "val_file = \"v.csv\"\nout_dir = \"o\"\nn_x = 2\nn_a = 2\nn_b = 2\nhorizon = 3\n").unwrap();
    let o = ssenc(&["train", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("train_file"), "{}", stderr(&o));
}

#[test]
fn bad_override_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "out");
    let o = ssenc(&["train", "--config", cfg.to_str().unwrap(), "--set", "precision=f16"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("precision"));
    let o = ssenc(&["train", "--config", cfg.to_str().unwrap(), "--set", "learning_rate=-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "out");
    std::fs::write(dir.path().join("val.csv"), "u1,y1\n1,oops\n").unwrap();
    let o = ssenc(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("row 1"));
}

#[test]
fn benchmark_config_is_accepted_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let files = fir_files_n(dir.path(), 2400);
    let out = dir.path().join("wh");
    let set = |k: &str, v: &Path| format!("{k}=\"{}\"", v.display());
    let cfg = repo_file("configs/wiener_hammerstein.toml");
    let args = [
        "train".to_string(),
        "--config".into(),
        cfg.display().to_string(),
        "--set".into(),
        set("train_file", &files[0]),
        "--set".into(),
        set("val_file", &files[1]),
        "--set".into(),
        set("test_file", &files[2]),
        "--set".into(),
        set("out_dir", &out),
        "--set".into(),
        "max_epochs=0".into(),
        "--set".into(),
        "final_refine_epochs=0".into(),
        "--set".into(),
        "n_a=5".into(),
        "--set".into(),
        "n_b=5".into(),
        "--set".into(),
        "horizon=8".into(),
    ];
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = ssenc(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let resolved: toml::Table = toml::from_str(&std::fs::read_to_string(out.join("resolved_config.toml")).unwrap()).unwrap();
    assert_eq!(resolved["n_x"].as_integer(), Some(6));
    assert_eq!(resolved["burn_in"].as_integer(), Some(0));
    assert_eq!(resolved["batch_size"].as_integer(), Some(1024));
    assert_eq!(resolved["learning_rate"].as_float(), Some(1e-3));
    assert_eq!(resolved["precision"].as_str(), Some("f32"));
    assert_eq!(resolved["horizon"].as_integer(), Some(8));

    let file: toml::Table = toml::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!(file["horizon"].as_integer(), Some(80));
    assert_eq!(file["n_a"].as_integer(), Some(50));
    assert_eq!(file["n_b"].as_integer(), Some(50));
}

#[test]
fn training_twice_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "a");
    let cfg = cfg.to_str().unwrap();
    let a = ssenc(&["train", "--config", cfg]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = ssenc(&["train", "--config", cfg, "--set", "out_dir=b", "--workers", "3"]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    for f in ["model.json", "train_log.csv", "report.txt"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let log = ssenc::trainlog::read_log(dir.path().join("a/train_log.csv")).unwrap();
    assert_eq!(log.len(), 5);
    let lines = report::parse(&stdout(&a)).unwrap();
    assert!(lines.iter().any(|(k, _)| k == "test_nrms"));
}

#[test]
fn evaluate_perfect_model_prints_zero_and_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let [_, _, test] = fir_files(dir.path());
    let model = dir.path().join("m.json");
    save_model(&model, &perfect_fir_model(), &InitMeta::new(InitScale::Standard, 0, &[])).unwrap();
    let nstep = dir.path().join("n.csv");
    let spec = dir.path().join("s.csv");
    let o = ssenc(&[
        "evaluate",
        "--model",
        model.to_str().unwrap(),
        "--data",
        test.to_str().unwrap(),
        "--nstep",
        "80",
        "--nstep-out",
        nstep.to_str().unwrap(),
        "--spectrum-out",
        spec.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = report::parse(&stdout(&o)).expect("report grammar");
    let get = |k: &str| lines.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone()).unwrap();
    assert_eq!(get("nrms"), "0.0000%");
    assert_eq!(get("rms"), "0");

    let curve = std::fs::read_to_string(&nstep).unwrap();
    let rows: Vec<&str> = curve.lines().collect();
    assert_eq!(rows[0], "n,nrms");
    assert_eq!(rows.len(), 82);
    assert!(rows[1..].iter().all(|r| r.ends_with(",0")));

    let spectrum = std::fs::read_to_string(&spec).unwrap();
    assert!(spectrum.starts_with("frequency,residual_y1,reference_y1\n"));
    assert_eq!(spectrum.lines().count(), 1 + 150 - 2);
}

#[test]
fn evaluate_report_matches_golden_layout() {
    let dir = tempfile::tempdir().unwrap();
    let [_, _, test] = fir_files(dir.path());
    let model = dir.path().join("m.json");
    save_model(&model, &perfect_fir_model(), &InitMeta::new(InitScale::Standard, 0, &[])).unwrap();
    let o = ssenc(&["evaluate", "--model", model.to_str().unwrap(), "--data", test.to_str().unwrap()]);
    let text = stdout(&o);
    let keys: Vec<String> = report::parse(&text).unwrap().into_iter().map(|(k, _)| k).collect();
    assert_eq!(keys, ["samples", "t0", "rms", "sigma_y", "nrms", "nrms_fraction"]);
    assert!(text.starts_with("samples: 148\nt0: 2\nrms: 0\nsigma_y: "));
    assert!(text.ends_with("nrms: 0.0000%\nnrms_fraction: 0\n"));
}

#[test]
fn simulate_nstep_and_spectrum_subcommands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let [_, _, test] = fir_files(dir.path());
    let model = dir.path().join("m.json");
    save_model(&model, &perfect_fir_model(), &InitMeta::new(InitScale::Standard, 0, &[])).unwrap();
    let (m, t) = (model.to_str().unwrap(), test.to_str().unwrap());
    let sim = dir.path().join("sim.csv");
    let o = ssenc(&["simulate", "--model", m, "--data", t, "--init", "zero", "--out", sim.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&sim).unwrap();
    assert!(text.starts_with("t,y1_hat\n0,"));
    assert_eq!(text.lines().count(), 151);

    let n = dir.path().join("n.csv");
    let o = ssenc(&["nstep", "--model", m, "--data", t, "--max", "10", "--out", n.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&n).unwrap().lines().count(), 12);

    let s = dir.path().join("s.csv");
    let o = ssenc(&["spectrum", "--model", m, "--data", t, "--sample-period", "0.5", "--out", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&s).unwrap();
    assert_eq!(text.lines().nth(2).unwrap().split(',').next().unwrap(), (1.0 / (148.0 * 0.5)).to_string());
}

#[test]
fn data_with_wrong_channels_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    save_model(&model, &perfect_fir_model(), &InitMeta::new(InitScale::Standard, 0, &[])).unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "u1,u2,y1\n1,2,3\n").unwrap();
    let o = ssenc(&["evaluate", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("header mismatch"));
}

#[test]
fn version_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let [_, _, test] = fir_files(dir.path());
    let model = dir.path().join("m.json");
    save_model(&model, &perfect_fir_model(), &InitMeta::new(InitScale::Standard, 0, &[])).unwrap();
    let text = std::fs::read_to_string(&model).unwrap().replace("\"version\": 1", "\"version\": 2");
    std::fs::write(&model, text).unwrap();
    let o = ssenc(&["evaluate", "--model", model.to_str().unwrap(), "--data", test.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("version 2"));
}

const DUFFING: &str = "kind = \"duffing\"\nnoise_std = 0.01\n[duffing]\nmass = 1.0\ndamping = 0.3\n\
                       stiffness = 1.0\ncubic_stiffness = 0.5\ninput_gain = 1.0\nsample_period = 0.1\n";

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("duffing.toml");
    std::fs::write(&sys, DUFFING).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = ssenc(&[
            "generate",
            "--system",
            sys.to_str().unwrap(),
            "--input",
            "lowpass",
            "--samples",
            "500",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 501);
}

#[test]
fn generate_from_input_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("lin.toml");
    std::fs::write(
        &sys,
        "kind = \"linear\"\n[linear]\nn_x = 1\nn_u = 1\nn_y = 1\na = [0.5]\nb = [1.0]\nc = [1.0]\nd = [0.0]\n",
    )
    .unwrap();
    let input = dir.path().join("u.csv");
    std::fs::write(&input, "u1\n1\n0\n0\n").unwrap();
    let out = dir.path().join("d.csv");
    let o = ssenc(&[
        "generate",
        "--system",
        sys.to_str().unwrap(),
        "--input-csv",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out).unwrap(), "u1,y1\n1,0\n0,1\n0,0.5\n");
}

#[test]
fn unstable_system_exits_2_naming_stability() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("bad.toml");
    std::fs::write(
        &sys,
        "kind = \"linear\"\n[linear]\nn_x = 2\nn_u = 1\nn_y = 1\na = [1.0, 1.0, 0.0, 1.0]\nb = [0.0, 1.0]\nc = [1.0, 0.0]\nd = [0.0]\n",
    )
    .unwrap();
    let out = dir.path().join("d.csv");
    let o = ssenc(&["generate", "--system", sys.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unstable"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn generating_ten_thousand_samples_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("duffing.toml");
    std::fs::write(&sys, DUFFING).unwrap();
    let out = dir.path().join("d.csv");
    let start = Instant::now();
    let o = ssenc(&[
        "generate",
        "--system",
        sys.to_str().unwrap(),
        "--samples",
        "10000",
        "--out",
        out.to_str().unwrap(),
    ]);
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(secs < 5.0, "took {secs} s");
}

#[test]
fn help_lists_every_subcommand() {
    let o = ssenc(&["--help"]);
    let text = stdout(&o);
    for cmd in ["train", "evaluate", "simulate", "nstep", "spectrum", "generate"] {
        assert!(text.contains(cmd), "{cmd} missing from --help");
    }
    assert_eq!(ssenc(&["frobnicate"]).status.code(), Some(2));
}
