//! Section sampling and the multi-step losses.
//!
//! For sections starting at `t_i` with horizon `T` and burn-in `k0`:
//!
//! ```text
//! V_encoder = 1 / (2 N (T+1)) * sum_i sum_{k=k0}^{T+k0} |y_hat[t_i -> t_i+k] - y[t_i+k]|^2
//! V_batch   = same sum over a subset B, normalized by |B| instead of N
//! V_sim     = 1 / N_sim * sum_t |y_hat[t] - y[t]|^2     (one free run)
//! ```
//!
//! Gradients are exact (backpropagation through the whole unrolled section,
//! encoder included). Per-section gradients are always computed in a fresh
//! buffer and summed in section order, so the result does not depend on how
//! an evaluator distributes the work.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ModelGrad, NormalizedData, SsEncoderModel};
use crate::net::ParamVector;
use crate::real::Real;

/// Every start `t_i` admitting a full section: `[max(n_a, n_b), N - 1 - T - k0]`.
pub fn valid_starts(n_samples: usize, n_a: usize, n_b: usize, horizon: usize, burn_in: usize) -> Result<Vec<usize>> {
    let first = n_a.max(n_b);
    let required = first + horizon + burn_in + 1;
    if n_samples < required {
        return Err(Error::TooShort {
            required,
            available: n_samples,
        });
    }
    Ok((first..=n_samples - 1 - horizon - burn_in).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionSet {
    pub starts: Vec<usize>,
    pub horizon: usize,
    pub burn_in: usize,
}

impl SectionSet {
    /// All valid (overlapping, stride-one) sections of a dataset.
    pub fn all(n_samples: usize, n_a: usize, n_b: usize, horizon: usize, burn_in: usize) -> Result<Self> {
        Ok(Self {
            starts: valid_starts(n_samples, n_a, n_b, horizon, burn_in)?,
            horizon,
            burn_in,
        })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn validate(&self, n_samples: usize, warmup: usize) -> Result<()> {
        let tail = self.horizon + self.burn_in + 1;
        if n_samples < warmup + tail {
            return Err(Error::TooShort {
                required: warmup + tail,
                available: n_samples,
            });
        }
        let max = n_samples - tail;
        for &start in &self.starts {
            if start < warmup || start > max {
                return Err(Error::SectionOutOfRange {
                    start,
                    min: warmup,
                    max,
                });
            }
        }
        Ok(())
    }
}

/// Indices into a [`SectionSet`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
}

/// Loss value with its gradient.
#[derive(Clone, Debug)]
pub struct LossEval<S> {
    pub loss: S,
    pub grad: ParamVector<S>,
}

/// Squared-error sum of one section and the gradient of half that sum.
pub fn section_terms<S: Real>(
    model: &SsEncoderModel<S>,
    data: &NormalizedData<S>,
    start: usize,
    horizon: usize,
    burn_in: usize,
) -> Result<(S, ModelGrad<S>)> {
    let rollout = model.rollout(data, start, horizon, burn_in)?;
    let pred = rollout.predictions();
    let n_y = data.n_y;
    let first = start + burn_in;
    let target = &data.y[first * n_y..(first + horizon + 1) * n_y];
    let residual: Vec<S> = pred.iter().zip(target).map(|(p, y)| *p - *y).collect();
    let sq = residual.iter().fold(S::zero(), |acc, r| acc + *r * *r);
    let mut grad = model.zero_grad();
    model.rollout_backward(&rollout, &residual, &mut grad)?;
    Ok((sq, grad))
}

/// Strategy for evaluating many sections.
///
/// Contract: returns `sum_i sq_i` and adds `sum_i g_i` into `grad`, where
/// `(sq_i, g_i)` is [`section_terms`] of `starts[i]`, and both sums are taken
/// in the order of `starts` with each `g_i` computed in its own buffer.
pub trait SectionEvaluator<S: Real> {
    fn accumulate(
        &self,
        model: &SsEncoderModel<S>,
        data: &NormalizedData<S>,
        starts: &[usize],
        horizon: usize,
        burn_in: usize,
        grad: &mut [S],
    ) -> Result<S>;
}

/// Evaluates sections one after another on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl<S: Real> SectionEvaluator<S> for Sequential {
    fn accumulate(
        &self,
        model: &SsEncoderModel<S>,
        data: &NormalizedData<S>,
        starts: &[usize],
        horizon: usize,
        burn_in: usize,
        grad: &mut [S],
    ) -> Result<S> {
        let mut total = S::zero();
        for &start in starts {
            let (sq, g) = section_terms(model, data, start, horizon, burn_in)?;
            total += sq;
            g.add_into(grad);
        }
        Ok(total)
    }
}

fn mean_section_loss<S: Real, E: SectionEvaluator<S> + ?Sized>(
    model: &SsEncoderModel<S>,
    data: &NormalizedData<S>,
    starts: &[usize],
    horizon: usize,
    burn_in: usize,
    eval: &E,
) -> Result<LossEval<S>> {
    let mut grad = vec![S::zero(); model.num_params()];
    let sq = eval.accumulate(model, data, starts, horizon, burn_in, &mut grad)?;
    // d/dθ [sq / (2 n (T+1))] = (sum of half-sum gradients) / (n (T+1))
    let denom = S::from_usize(starts.len()) * S::from_usize(horizon + 1);
    let loss = sq / (S::from_f64(2.0) * denom);
    for g in &mut grad {
        *g /= denom;
    }
    Ok(LossEval {
        loss,
        grad: model.grad_vector(grad),
    })
}

/// Encoder loss over every section in `sections`.
pub fn encoder_loss<S: Real>(
    model: &SsEncoderModel<S>,
    data: &NormalizedData<S>,
    sections: &SectionSet,
) -> Result<LossEval<S>> {
    encoder_loss_with(model, data, sections, &Sequential)
}

pub fn encoder_loss_with<S: Real, E: SectionEvaluator<S> + ?Sized>(
    model: &SsEncoderModel<S>,
    data: &NormalizedData<S>,
    sections: &SectionSet,
    eval: &E,
) -> Result<LossEval<S>> {
    if sections.is_empty() {
        return Err(Error::EmptyBatch);
    }
    sections.validate(data.len(), model.dims().warmup())?;
    mean_section_loss(model, data, &sections.starts, sections.horizon, sections.burn_in, eval)
}

/// Encoder loss restricted to the sections selected by `batch`.
pub fn batch_loss<S: Real>(
    model: &SsEncoderModel<S>,
    data: &NormalizedData<S>,
    sections: &SectionSet,
    batch: &Batch,
) -> Result<LossEval<S>> {
    batch_loss_with(model, data, sections, batch, &Sequential)
}

pub fn batch_loss_with<S: Real, E: SectionEvaluator<S> + ?Sized>(
    model: &SsEncoderModel<S>,
    data: &NormalizedData<S>,
    sections: &SectionSet,
    batch: &Batch,
    eval: &E,
) -> Result<LossEval<S>> {
    if batch.indices.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let starts = batch
        .indices
        .iter()
        .map(|&i| {
            sections.starts.get(i).copied().ok_or(Error::BatchIndex {
                index: i,
                count: sections.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let selected = SectionSet {
        starts,
        horizon: sections.horizon,
        burn_in: sections.burn_in,
    };
    selected.validate(data.len(), model.dims().warmup())?;
    mean_section_loss(model, data, &selected.starts, selected.horizon, selected.burn_in, eval)
}

/// Initial state of the single free run in [`simulation_loss`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SimLossInit {
    /// Encoder state at `max(n_a, n_b)`; the run covers the rest of the data.
    #[default]
    Encoder,
    /// Zero state at `t = 0`; the run covers all samples.
    Zero,
}

/// Mean squared free-run output error over the whole dataset.
///
/// With encoder initialization this equals exactly twice the encoder loss
/// of the single section `t_1 = max(n_a, n_b)`, `k0 = 0`,
/// `T = N - t_1 - 1`.
pub fn simulation_loss<S: Real>(
    model: &SsEncoderModel<S>,
    data: &NormalizedData<S>,
    init: SimLossInit,
) -> Result<LossEval<S>> {
    let len = data.len();
    let rollout = match init {
        SimLossInit::Encoder => {
            let t0 = model.dims().warmup();
            if len <= t0 {
                return Err(Error::TooShort {
                    required: t0 + 1,
                    available: len,
                });
            }
            model.rollout(data, t0, len - t0 - 1, 0)?
        }
        SimLossInit::Zero => model.rollout_from_zero(data, len)?,
    };
    let n_y = data.n_y;
    let target = &data.y[rollout.start * n_y..];
    let residual: Vec<S> = rollout
        .predictions()
        .iter()
        .zip(target)
        .map(|(p, y)| *p - *y)
        .collect();
    let sq = residual.iter().fold(S::zero(), |acc, r| acc + *r * *r);
    let mut g = model.zero_grad();
    model.rollout_backward(&rollout, &residual, &mut g)?;
    let n = S::from_usize(rollout.horizon + 1);
    let mut grad = vec![S::zero(); model.num_params()];
    g.add_into(&mut grad);
    // Gradient of half the sum, so d/dθ [sq / n] = 2 (g / n).
    let two = S::from_f64(2.0);
    for v in &mut grad {
        *v = two * (*v / n);
    }
    Ok(LossEval {
        loss: sq / n,
        grad: model.grad_vector(grad),
    })
}

/// Shuffles the section indices `0..n_sections` with a generator keyed on
/// `(seed, epoch)` and cuts them into consecutive batches of `batch_size`.
/// A final short remainder is dropped.
pub fn make_epoch_batches(n_sections: usize, batch_size: usize, seed: u64, epoch: u64) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    if batch_size > n_sections {
        return Err(Error::BatchTooLarge {
            batch: batch_size,
            available: n_sections,
        });
    }
    let mut order: Vec<usize> = (0..n_sections).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    Ok(order
        .chunks_exact(batch_size)
        .map(|c| Batch { indices: c.to_vec() })
        .collect())
}
