//! Run configuration: a flat TOML file plus `key=value` overrides.
//!
//! Required keys: `train_file`, `val_file`, `out_dir`, `n_x`, `n_a`, `n_b`,
//! `horizon`. Everything else has a default, see [`RunConfig`]. Relative
//! paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use ssenc_core::optim::{AdamHyper, Precision, ValInit};
use ssenc_core::{InitScale, TrainConfig, TrainMode};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::modelfile::parse_init_scale;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub train_file: PathBuf,
    pub val_file: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_file: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub n_x: usize,
    pub n_a: usize,
    pub n_b: usize,
    /// Scored steps per section minus one (`T`).
    pub horizon: usize,
    /// Unscored leading steps per section (`k0`); default 0.
    pub burn_in: usize,
    /// Hidden tanh widths shared by the three networks; default `[15]`.
    pub hidden: Vec<usize>,
    /// Default 64.
    pub batch_size: usize,
    /// Default 1e-3.
    pub learning_rate: f64,
    /// Default 100.
    pub max_epochs: usize,
    /// Default 0.
    pub seed: u64,
    /// `"f64"` (default) or `"f32"`.
    pub precision: String,
    /// `"encoder-batch"` (default), `"encoder-full"` or `"simulation"`.
    pub mode: String,
    /// Full-batch refinement epochs after the main phase; default 50.
    pub final_refine_epochs: usize,
    /// `"encoder"` (default) or `"zero"`.
    pub val_init: String,
    /// `"standard"` (default, bound `1/sqrt(n_in)`) or `"sqrt-fan-in"` (bound `n_in^(-1/4)`).
    pub init_k: String,
    /// Worker threads for section evaluation; 0 (default) uses every core.
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_budget_secs: Option<f64>,
    /// Write wall-clock seconds to the log (default true). Turn off for
    /// byte-identical logs across runs.
    pub record_time: bool,
    /// If set, `evaluate` on the test file also writes an n-step curve up to this n.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nstep_max: Option<usize>,
    /// Sample period in seconds, used for spectrum frequencies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_period: Option<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

pub const REQUIRED: [&str; 7] = ["train_file", "val_file", "out_dir", "n_x", "n_a", "n_b", "horizon"];

fn take<T: DeserializeOwned>(t: &mut Table, key: &str) -> Result<Option<T>> {
    t.remove(key)
        .map(|v| {
            let shown = v.to_string();
            v.try_into::<T>()
                .map_err(|e| Error::config(key, format!("invalid value {shown}: {}", e.message())))
        })
        .transpose()
}

fn need<T: DeserializeOwned>(t: &mut Table, key: &str) -> Result<T> {
    take(t, key)?.ok_or_else(|| Error::config(key, "missing required key"))
}

/// Parses one `key=value` override. The value is read as a TOML value and
/// falls back to a plain string, so `mode=simulation` needs no quotes.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("override {s:?} is not of the form key=value")))?;
    let k = k.trim().to_owned();
    let v = v.trim();
    let value = toml::from_str::<Table>(&format!("x = {v}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| Value::String(v.to_owned()));
    Ok((k, value))
}

impl RunConfig {
    /// Builds a config from a TOML table with overrides applied on top.
    /// `base` resolves relative paths.
    pub fn from_table(mut t: Table, overrides: &[(String, Value)], base: &Path) -> Result<Self> {
        for (k, v) in overrides {
            t.insert(k.clone(), v.clone());
        }
        let path = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        let cfg = RunConfig {
            train_file: path(need(&mut t, "train_file")?),
            val_file: path(need(&mut t, "val_file")?),
            test_file: take::<PathBuf>(&mut t, "test_file")?.map(path),
            out_dir: path(need(&mut t, "out_dir")?),
            n_x: need(&mut t, "n_x")?,
            n_a: need(&mut t, "n_a")?,
            n_b: need(&mut t, "n_b")?,
            horizon: need(&mut t, "horizon")?,
            burn_in: take(&mut t, "burn_in")?.unwrap_or(0),
            hidden: take(&mut t, "hidden")?.unwrap_or_else(|| vec![15]),
            batch_size: take(&mut t, "batch_size")?.unwrap_or(64),
            learning_rate: take(&mut t, "learning_rate")?.unwrap_or(1e-3),
            max_epochs: take(&mut t, "max_epochs")?.unwrap_or(100),
            seed: take(&mut t, "seed")?.unwrap_or(0),
            precision: take(&mut t, "precision")?.unwrap_or_else(|| "f64".into()),
            mode: take(&mut t, "mode")?.unwrap_or_else(|| "encoder-batch".into()),
            final_refine_epochs: take(&mut t, "final_refine_epochs")?.unwrap_or(50),
            val_init: take(&mut t, "val_init")?.unwrap_or_else(|| "encoder".into()),
            init_k: take(&mut t, "init_k")?.unwrap_or_else(|| "standard".into()),
            workers: take(&mut t, "workers")?.unwrap_or(0),
            time_budget_secs: take(&mut t, "time_budget_secs")?,
            record_time: take(&mut t, "record_time")?.unwrap_or(true),
            nstep_max: take(&mut t, "nstep_max")?,
            sample_period: take(&mut t, "sample_period")?,
            adam_beta1: take(&mut t, "adam_beta1")?.unwrap_or(AdamHyper::default().beta1),
            adam_beta2: take(&mut t, "adam_beta2")?.unwrap_or(AdamHyper::default().beta2),
            adam_eps: take(&mut t, "adam_eps")?.unwrap_or(AdamHyper::default().eps),
        };
        if let Some(k) = t.keys().next() {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        cfg.train_config()?;
        cfg.init_scale()?;
        if cfg.hidden.contains(&0) {
            return Err(Error::config("hidden", "hidden widths must be >= 1"));
        }
        if cfg.n_x == 0 {
            return Err(Error::config("n_x", "must be >= 1"));
        }
        Ok(cfg)
    }

    pub fn from_str(text: &str, overrides: &[(String, Value)], base: &Path) -> Result<Self> {
        let t: Table = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_owned()))?;
        Self::from_table(t, overrides, base)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, overrides, base)
    }

    pub fn init_scale(&self) -> Result<InitScale> {
        parse_init_scale(&self.init_k).ok_or_else(|| {
            Error::config("init_k", format!("expected \"standard\" or \"sqrt-fan-in\", got {:?}", self.init_k))
        })
    }

    /// The optimizer settings, with every enum-like key checked.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let precision = Precision::parse(&self.precision)
            .ok_or_else(|| Error::config("precision", format!("expected \"f32\" or \"f64\", got {:?}", self.precision)))?;
        let mode = TrainMode::parse(&self.mode).ok_or_else(|| {
            Error::config(
                "mode",
                format!("expected \"encoder-batch\", \"encoder-full\" or \"simulation\", got {:?}", self.mode),
            )
        })?;
        let val_init = match self.val_init.as_str() {
            "encoder" => ValInit::Encoder,
            "zero" => ValInit::Zero,
            other => return Err(Error::config("val_init", format!("expected \"encoder\" or \"zero\", got {other:?}"))),
        };
        let cfg = TrainConfig {
            n_x: self.n_x,
            n_a: self.n_a,
            n_b: self.n_b,
            horizon: self.horizon,
            burn_in: self.burn_in,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            seed: self.seed,
            precision,
            mode,
            final_refine_epochs: self.final_refine_epochs,
            val_init,
            time_budget_secs: self.time_budget_secs,
            adam: AdamHyper {
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
            },
        };
        cfg.validate().map_err(|e| {
            let msg = e.to_string();
            let key = ["batch_size", "learning_rate", "adam", "time_budget_secs"]
                .into_iter()
                .find(|k| msg.contains(k))
                .unwrap_or("config");
            Error::config(key, msg)
        })?;
        Ok(cfg)
    }

    /// The fully resolved configuration as TOML, every default spelled out.
    pub fn to_toml(&self) -> String {
        let mut s = toml::to_string(self).expect("run config is always serializable");
        if !s.ends_with('\n') {
            s.push('\n');
        }
        s
    }
}
