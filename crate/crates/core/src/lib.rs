//! Encoder-initialized multiple-shooting identification of nonlinear
//! discrete-time state-space models.
//!
//! A model is the triple of residual networks `(e, f, h)`:
//!
//! ```text
//! x[t_i]   = e(y[t_i-n_a .. t_i], u[t_i-n_b .. t_i])
//! x[t+1]   = f(x[t], u[t])
//! y_hat[t] = h(x[t], u[t])
//! ```
//!
//! Training splits the data into many short, possibly overlapping sections,
//! estimates each section's initial state with the encoder `e`, and minimizes
//! the multi-step output error with Adam over random batches of sections.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! section evaluation and the command-line front end live in the `ssenc`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod net;
pub mod optim;
pub mod real;

pub use data::{Dataset, Normalizer, SyntheticSystem};
pub use error::{Error, Result};
pub use loss::{Batch, LossEval, SectionEvaluator, SectionSet, Sequential};
pub use metrics::{MetricReport, NStepCurve};
pub use model::{ModelDims, SimInit, SsEncoderModel};
pub use net::{InitScale, ParamVector, ResidualNet};
pub use optim::{AdamState, TrainConfig, TrainLog, TrainMode};
pub use real::Real;
