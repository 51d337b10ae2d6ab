//! TOML descriptions of synthetic systems for `ssenc generate`.
//!
//! ```toml
//! kind = "wiener"        # "linear", "wiener" or "duffing"
//! noise_std = 0.01       # optional, default 0
//!
//! [linear]               # linear and wiener; matrices row-major
//! n_x = 2
//! n_u = 1
//! n_y = 1
//! a = [1.5, -0.7, 1.0, 0.0]
//! b = [1.0, 0.0]
//! c = [0.5, 0.3]
//! d = [0.0]
//!
//! [nonlinearity]         # wiener only
//! type = "tanh"          # or type = "polynomial", coeffs = [c0, c1, ...]
//! gain = 1.0
//!
//! [duffing]              # duffing only; substeps defaults to 10
//! mass = 1.0
//! damping = 0.2
//! stiffness = 1.0
//! cubic_stiffness = 0.5
//! input_gain = 1.0
//! sample_period = 0.1
//! ```

use std::path::Path;

use serde::Deserialize;
use ssenc_core::data::{Duffing, LinearSs, StaticNonlinearity, SystemKind};
use ssenc_core::SyntheticSystem;

use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    kind: String,
    #[serde(default)]
    noise_std: f64,
    linear: Option<LinearSpec>,
    nonlinearity: Option<NonlinearitySpec>,
    duffing: Option<DuffingSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearSpec {
    n_x: usize,
    n_u: usize,
    n_y: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum NonlinearitySpec {
    Tanh { gain: f64 },
    Polynomial { coeffs: Vec<f64> },
}

fn default_substeps() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DuffingSpec {
    mass: f64,
    damping: f64,
    stiffness: f64,
    cubic_stiffness: f64,
    input_gain: f64,
    sample_period: f64,
    #[serde(default = "default_substeps")]
    substeps: usize,
}

fn missing(section: &str, kind: &str) -> Error {
    Error::config(section, format!("required for kind = \"{kind}\""))
}

/// Parses a system description; shapes and stability are checked too.
pub fn parse_system(text: &str) -> Result<SyntheticSystem> {
    let f: SystemFile = toml::from_str(text).map_err(|e| Error::config("system", e.message().to_owned()))?;
    let linear = |spec: Option<LinearSpec>| -> Result<LinearSs> {
        let s = spec.ok_or_else(|| missing("linear", &f.kind))?;
        Ok(LinearSs::new(s.n_x, s.n_u, s.n_y, s.a, s.b, s.c, s.d)?)
    };
    let kind = match f.kind.as_str() {
        "linear" => SystemKind::LinearSs(linear(f.linear)?),
        "wiener" => SystemKind::Wiener {
            filter: linear(f.linear)?,
            nonlinearity: match f.nonlinearity.ok_or_else(|| missing("nonlinearity", "wiener"))? {
                NonlinearitySpec::Tanh { gain } => StaticNonlinearity::Tanh { gain },
                NonlinearitySpec::Polynomial { coeffs } => StaticNonlinearity::Polynomial(coeffs),
            },
        },
        "duffing" => {
            let d = f.duffing.ok_or_else(|| missing("duffing", "duffing"))?;
            SystemKind::Duffing(Duffing {
                mass: d.mass,
                damping: d.damping,
                stiffness: d.stiffness,
                cubic_stiffness: d.cubic_stiffness,
                input_gain: d.input_gain,
                sample_period: d.sample_period,
                substeps: d.substeps,
            })
        }
        other => {
            return Err(Error::config(
                "kind",
                format!("unknown system kind {other:?} (expected linear, wiener or duffing)"),
            ))
        }
    };
    let sys = SyntheticSystem {
        kind,
        noise_std: f.noise_std,
    };
    sys.validate()?;
    Ok(sys)
}

pub fn load_system(path: impl AsRef<Path>) -> Result<SyntheticSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_system(&text)
}

/// Sample period carried into generated data, if the system defines one.
pub fn sample_period(sys: &SyntheticSystem) -> Option<f64> {
    match &sys.kind {
        SystemKind::Duffing(d) => Some(d.sample_period),
        _ => None,
    }
}
