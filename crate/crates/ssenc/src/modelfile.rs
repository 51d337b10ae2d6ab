//! Versioned JSON model files.
//!
//! ```text
//! {
//!   "format": "ss-encoder-model",
//!   "version": 1,
//!   "precision": "f64" | "f32",
//!   "dims": { "n_x", "n_u", "n_y", "n_a", "n_b" },
//!   "init": { "scale": "standard" | "sqrt-fan-in", "seed", "hidden": [..] },
//!   "normalizers": { "u": { "mean": [..], "std": [..] }, "y": { .. } },
//!   "nets": { "encoder": NET, "state": NET, "output": NET }
//! }
//! NET = { "n_in", "n_out",
//!         "hidden": [ { "n_in", "n_out", "weight": [..], "bias": [..] } ],
//!         "output_weight": [..],
//!         "bypass": { "n_in", "n_out", "weight": [..], "bias": [..] } }
//! ```
//!
//! Matrices are row-major (`n_out x n_in`). Parameters are written as
//! decimal `f64` in their shortest round-trip form, so a load reproduces
//! every scalar bit for bit, including `f32` models.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ssenc_core::net::Dense;
use ssenc_core::optim::Precision;
use ssenc_core::{InitScale, ModelDims, Normalizer, Real, ResidualNet, SsEncoderModel};

use crate::error::{Error, Result};

pub const FORMAT: &str = "ss-encoder-model";
pub const VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimsJson {
    n_x: usize,
    n_u: usize,
    n_y: usize,
    n_a: usize,
    n_b: usize,
}

/// How a model's parameters were first drawn. Informational only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitMeta {
    pub scale: String,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl InitMeta {
    pub fn new(scale: InitScale, seed: u64, hidden: &[usize]) -> Self {
        Self {
            scale: init_scale_name(scale).into(),
            seed,
            hidden: hidden.to_vec(),
        }
    }
}

pub fn init_scale_name(scale: InitScale) -> &'static str {
    match scale {
        InitScale::Standard => "standard",
        InitScale::SqrtFanIn => "sqrt-fan-in",
    }
}

pub fn parse_init_scale(s: &str) -> Option<InitScale> {
    match s {
        "standard" => Some(InitScale::Standard),
        "sqrt-fan-in" => Some(InitScale::SqrtFanIn),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormJson {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalizersJson {
    u: NormJson,
    y: NormJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseJson {
    n_in: usize,
    n_out: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetJson {
    n_in: usize,
    n_out: usize,
    hidden: Vec<DenseJson>,
    output_weight: Vec<f64>,
    bypass: DenseJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetsJson {
    encoder: NetJson,
    state: NetJson,
    output: NetJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    format: String,
    version: u64,
    precision: String,
    dims: DimsJson,
    init: InitMeta,
    normalizers: NormalizersJson,
    nets: NetsJson,
}

/// A loaded model in its stored precision.
#[derive(Clone, Debug)]
pub enum AnyModel {
    F32(SsEncoderModel<f32>),
    F64(SsEncoderModel<f64>),
}

impl AnyModel {
    pub fn dims(&self) -> ModelDims {
        match self {
            AnyModel::F32(m) => m.dims(),
            AnyModel::F64(m) => m.dims(),
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            AnyModel::F32(_) => Precision::F32,
            AnyModel::F64(_) => Precision::F64,
        }
    }
}

fn dense_to_json<S: Real>(d: &Dense<S>) -> DenseJson {
    DenseJson {
        n_in: d.n_in,
        n_out: d.n_out,
        weight: d.weight.iter().map(|v| v.as_f64()).collect(),
        bias: d.bias.iter().map(|v| v.as_f64()).collect(),
    }
}

fn net_to_json<S: Real>(net: &ResidualNet<S>) -> NetJson {
    NetJson {
        n_in: net.n_in(),
        n_out: net.n_out(),
        hidden: net.hidden().iter().map(dense_to_json).collect(),
        output_weight: net.output_weight().iter().map(|v| v.as_f64()).collect(),
        bypass: dense_to_json(net.bypass()),
    }
}

fn to_scalars<S: Real>(v: &[f64], path: &Path) -> Result<Vec<S>> {
    v.iter()
        .map(|x| {
            let s = S::from_f64(*x);
            if s.as_f64() == *x {
                Ok(s)
            } else {
                Err(Error::ModelFormat {
                    path: path.to_path_buf(),
                    message: format!("parameter {x} is not representable in {}", S::NAME),
                })
            }
        })
        .collect()
}

fn dense_from_json<S: Real>(d: &DenseJson, path: &Path) -> Result<Dense<S>> {
    Ok(Dense {
        n_in: d.n_in,
        n_out: d.n_out,
        weight: to_scalars(&d.weight, path)?,
        bias: to_scalars(&d.bias, path)?,
    })
}

fn net_from_json<S: Real>(n: &NetJson, path: &Path) -> Result<ResidualNet<S>> {
    let hidden = n.hidden.iter().map(|d| dense_from_json(d, path)).collect::<Result<Vec<_>>>()?;
    let net = ResidualNet::from_parts(hidden, to_scalars(&n.output_weight, path)?, dense_from_json(&n.bypass, path)?)?;
    if (net.n_in(), net.n_out()) != (n.n_in, n.n_out) {
        return Err(Error::ModelFormat {
            path: path.to_path_buf(),
            message: format!(
                "network declares {}x{} but its layers give {}x{}",
                n.n_in,
                n.n_out,
                net.n_in(),
                net.n_out()
            ),
        });
    }
    Ok(net)
}

fn model_to_json<S: Real>(m: &SsEncoderModel<S>, init: &InitMeta) -> ModelJson {
    let d = m.dims();
    let norm = |n: &Normalizer| NormJson {
        mean: n.mean.clone(),
        std: n.std.clone(),
    };
    ModelJson {
        format: FORMAT.into(),
        version: VERSION,
        precision: S::NAME.into(),
        dims: DimsJson {
            n_x: d.n_x,
            n_u: d.n_u,
            n_y: d.n_y,
            n_a: d.n_a,
            n_b: d.n_b,
        },
        init: init.clone(),
        normalizers: NormalizersJson {
            u: norm(m.input_normalizer()),
            y: norm(m.output_normalizer()),
        },
        nets: NetsJson {
            encoder: net_to_json(m.encoder()),
            state: net_to_json(m.state_map()),
            output: net_to_json(m.output_map()),
        },
    }
}

fn model_from_json<S: Real>(j: &ModelJson, path: &Path) -> Result<SsEncoderModel<S>> {
    let dims = ModelDims {
        n_x: j.dims.n_x,
        n_u: j.dims.n_u,
        n_y: j.dims.n_y,
        n_a: j.dims.n_a,
        n_b: j.dims.n_b,
    };
    let u = Normalizer::new(j.normalizers.u.mean.clone(), j.normalizers.u.std.clone())?;
    let y = Normalizer::new(j.normalizers.y.mean.clone(), j.normalizers.y.std.clone())?;
    Ok(SsEncoderModel::from_nets(
        dims,
        net_from_json(&j.nets.encoder, path)?,
        net_from_json(&j.nets.state, path)?,
        net_from_json(&j.nets.output, path)?,
        u,
        y,
    )?)
}

/// Serializes a model to the JSON document described in the module docs.
pub fn to_json_string<S: Real>(m: &SsEncoderModel<S>, init: &InitMeta) -> String {
    let mut s = serde_json::to_string_pretty(&model_to_json(m, init)).expect("model JSON is always serializable");
    s.push('\n');
    s
}

pub fn save_model<S: Real>(path: impl AsRef<Path>, m: &SsEncoderModel<S>, init: &InitMeta) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json_string(m, init)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a model document. The format tag and version are checked before
/// anything else, so files from other versions fail with [`Error::Version`].
pub fn from_json_str(text: &str, path: &Path) -> Result<(AnyModel, InitMeta)> {
    let fmt_err = |message: String| Error::ModelFormat {
        path: path.to_path_buf(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| fmt_err(format!("invalid JSON: {e}")))?;
    if value.get("format").and_then(|v| v.as_str()) != Some(FORMAT) {
        return Err(fmt_err(format!("not an {FORMAT} document")));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| fmt_err("missing integer `version`".into()))?;
    if version != VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    let j: ModelJson = serde_json::from_value(value).map_err(|e| fmt_err(e.to_string()))?;
    let model = match Precision::parse(&j.precision) {
        Some(Precision::F32) => AnyModel::F32(model_from_json(&j, path)?),
        Some(Precision::F64) => AnyModel::F64(model_from_json(&j, path)?),
        None => return Err(fmt_err(format!("unknown precision {:?}", j.precision))),
    };
    Ok((model, j.init))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(AnyModel, InitMeta)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json_str(&text, path)
}
