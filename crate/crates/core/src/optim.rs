//! Adam, the batch training loop with early stopping on the validation
//! simulation error, and the optional full-batch refinement phase.

use alloc::format;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{batch_loss_with, encoder_loss_with, make_epoch_batches, simulation_loss, SectionEvaluator, SectionSet, SimLossInit};
use crate::metrics::simulation_report;
use crate::model::{NormalizedData, SimInit, SsEncoderModel};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub step: u64,
    pub learning_rate: f64,
    pub hyper: AdamHyper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// The gradient had a NaN or infinite entry; nothing was changed.
    SkippedNonFinite,
}

impl<S: Real> AdamState<S> {
    pub fn new(n_params: usize, learning_rate: f64, hyper: AdamHyper) -> Self {
        Self {
            m: alloc::vec![S::zero(); n_params],
            v: alloc::vec![S::zero(); n_params],
            step: 0,
            learning_rate,
            hyper,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [S], grad: &[S]) -> Result<StepOutcome> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Dimension {
                what: "optimizer parameters",
                expected: self.m.len(),
                got: if params.len() != self.m.len() {
                    params.len()
                } else {
                    grad.len()
                },
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Ok(StepOutcome::SkippedNonFinite);
        }
        self.step += 1;
        let b1 = S::from_f64(self.hyper.beta1);
        let b2 = S::from_f64(self.hyper.beta2);
        let eps = S::from_f64(self.hyper.eps);
        let lr = S::from_f64(self.learning_rate);
        let t = self.step.min(i32::MAX as u64) as i32;
        let bc1 = S::one() - b1.powi(t);
        let bc2 = S::one() - b2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (S::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (S::one() - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(StepOutcome::Applied)
    }
}

pub fn adam_step<S: Real>(state: &mut AdamState<S>, params: &mut [S], grad: &[S]) -> Result<StepOutcome> {
    state.update(params, grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TrainMode {
    /// Adam over shuffled batches of overlapping encoder sections.
    #[default]
    EncoderBatch,
    /// One full-gradient Adam step over all sections per epoch.
    EncoderFull,
    /// One full free-run simulation-error step per epoch.
    Simulation,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::EncoderBatch => "encoder-batch",
            TrainMode::EncoderFull => "encoder-full",
            TrainMode::Simulation => "simulation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "encoder-batch" => Some(TrainMode::EncoderBatch),
            "encoder-full" => Some(TrainMode::EncoderFull),
            "simulation" => Some(TrainMode::Simulation),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Precision::F32),
            "f64" => Some(Precision::F64),
            _ => None,
        }
    }
}

/// Initialization of validation and test free runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ValInit {
    #[default]
    Encoder,
    Zero,
}

impl ValInit {
    pub fn sim_init<S>(self) -> SimInit<S> {
        match self {
            ValInit::Encoder => SimInit::Encoder,
            ValInit::Zero => SimInit::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_x: usize,
    pub n_a: usize,
    pub n_b: usize,
    /// Scored steps per section minus one (`T`).
    pub horizon: usize,
    /// Unscored leading steps per section (`k0`).
    pub burn_in: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub precision: Precision,
    pub mode: TrainMode,
    pub final_refine_epochs: usize,
    pub val_init: ValInit,
    /// Stops the main phase once this much clock time has elapsed.
    pub time_budget_secs: Option<f64>,
    pub adam: AdamHyper,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_x: 2,
            n_a: 10,
            n_b: 10,
            horizon: 20,
            burn_in: 0,
            batch_size: 64,
            learning_rate: 1e-3,
            max_epochs: 100,
            seed: 0,
            precision: Precision::F64,
            mode: TrainMode::EncoderBatch,
            final_refine_epochs: 0,
            val_init: ValInit::Encoder,
            time_budget_secs: None,
            adam: AdamHyper::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        let h = self.adam;
        if !(0.0..1.0).contains(&h.beta1) || !(0.0..1.0).contains(&h.beta2) || !(h.eps > 0.0) {
            return Err(Error::Config("adam betas must lie in [0, 1) and eps be positive".into()));
        }
        if let Some(b) = self.time_budget_secs {
            if !(b > 0.0) {
                return Err(Error::Config("time_budget_secs must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Source of elapsed time for logs and time budgets.
pub trait Clock {
    fn elapsed_secs(&self) -> f64;
}

/// Clock that never advances; logs record zero seconds.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based; refinement epochs continue the numbering.
    pub epoch: usize,
    /// Mean of the finite losses of this epoch's updates (NaN if none).
    pub train_loss: f64,
    pub val_nrms: f64,
    pub seconds: f64,
    pub is_best: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub skipped_steps: usize,
}

impl TrainLog {
    pub fn best_val_nrms(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.val_nrms)
            .filter(|v| v.is_finite())
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    pub model: SsEncoderModel<S>,
    pub log: TrainLog,
    /// Validation NRMS of `model`, if any epoch produced a finite one.
    pub best_val_nrms: Option<f64>,
}

pub fn validation_nrms<S: Real>(model: &SsEncoderModel<S>, val: &Dataset, init: ValInit) -> Result<f64> {
    Ok(simulation_report(model, val, &init.sim_init())?.nrms)
}

fn check_setup<S: Real>(model: &SsEncoderModel<S>, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.precision.as_str() != S::NAME {
        return Err(Error::Config(format!(
            "precision {} does not match the model's {}",
            cfg.precision.as_str(),
            S::NAME
        )));
    }
    let d = model.dims();
    if (d.n_x, d.n_a, d.n_b) != (cfg.n_x, cfg.n_a, cfg.n_b) {
        return Err(Error::Config(format!(
            "model dims (n_x={}, n_a={}, n_b={}) differ from the configuration (n_x={}, n_a={}, n_b={})",
            d.n_x, d.n_a, d.n_b, cfg.n_x, cfg.n_a, cfg.n_b
        )));
    }
    if train.len() <= d.warmup() {
        return Err(Error::TooShort {
            required: d.warmup() + 1,
            available: train.len(),
        });
    }
    if cfg.val_init == ValInit::Encoder && val.len() <= d.warmup() {
        return Err(Error::TooShort {
            required: d.warmup() + 1,
            available: val.len(),
        });
    }
    Ok(())
}

/// Trains `model` and returns the snapshot with the lowest validation NRMS
/// together with the per-epoch log.
///
/// Every epoch ends with one validation free run; the model is snapshotted
/// whenever that NRMS strictly improves. With `final_refine_epochs > 0` the
/// best snapshot is then refined with full-batch Adam (see [`refine_full`])
/// and those epochs are appended to the log.
pub fn train<S, E, C>(
    model: SsEncoderModel<S>,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    eval: &E,
    clock: &C,
) -> Result<TrainOutcome<S>>
where
    S: Real,
    E: SectionEvaluator<S> + ?Sized,
    C: Clock + ?Sized,
{
    check_setup(&model, train, val, cfg)?;
    let data = model.normalize(train)?;
    let sections = match cfg.mode {
        TrainMode::Simulation => None,
        _ => Some(SectionSet::all(train.len(), cfg.n_a, cfg.n_b, cfg.horizon, cfg.burn_in)?),
    };
    if let (TrainMode::EncoderBatch, Some(s)) = (cfg.mode, &sections) {
        if cfg.batch_size > s.len() {
            return Err(Error::BatchTooLarge {
                batch: cfg.batch_size,
                available: s.len(),
            });
        }
    }

    let mut model = model;
    let mut params = model.params_flat();
    let mut adam = AdamState::<S>::new(params.len(), cfg.learning_rate, cfg.adam);
    let mut best: Option<(f64, SsEncoderModel<S>)> = None;
    let mut log = TrainLog::default();
    let mut any_finite = false;
    let budget_hit = |clock: &C| cfg.time_budget_secs.is_some_and(|b| clock.elapsed_secs() >= b);

    for epoch in 0..cfg.max_epochs {
        let batches = match (cfg.mode, &sections) {
            (TrainMode::EncoderBatch, Some(s)) => Some(make_epoch_batches(s.len(), cfg.batch_size, cfg.seed, epoch as u64)?),
            _ => None,
        };
        let n_updates = batches.as_ref().map_or(1, |b| b.len());
        let (mut loss_sum, mut n_loss) = (0.0f64, 0usize);
        let mut stop = false;
        for u in 0..n_updates {
            let ev = match (cfg.mode, &sections) {
                (TrainMode::EncoderBatch, Some(s)) => {
                    batch_loss_with(&model, &data, s, &batches.as_ref().expect("batches")[u], eval)?
                }
                (TrainMode::EncoderFull, Some(s)) => encoder_loss_with(&model, &data, s, eval)?,
                _ => simulation_loss(&model, &data, SimLossInit::Encoder)?,
            };
            let loss = ev.loss.as_f64();
            if loss.is_finite() {
                loss_sum += loss;
                n_loss += 1;
            }
            match adam.update(&mut params, &ev.grad.values)? {
                StepOutcome::Applied => model.set_params_flat(&params)?,
                StepOutcome::SkippedNonFinite => {
                    log.skipped_steps += 1;
                    log::warn!("epoch {}: non-finite gradient, update skipped", epoch + 1);
                }
            }
            if budget_hit(clock) {
                stop = true;
                break;
            }
        }
        any_finite |= n_loss > 0;
        let train_loss = if n_loss > 0 { loss_sum / n_loss as f64 } else { f64::NAN };
        let val_nrms = validation_nrms(&model, val, cfg.val_init)?;
        let is_best = val_nrms.is_finite() && best.as_ref().is_none_or(|(b, _)| val_nrms < *b);
        if is_best {
            best = Some((val_nrms, model.clone()));
        }
        log.records.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_nrms,
            seconds: clock.elapsed_secs(),
            is_best,
        });
        log::debug!("epoch {}: loss {train_loss:.6e}, val nrms {val_nrms:.6e}", epoch + 1);
        if stop {
            break;
        }
    }
    if cfg.max_epochs > 0 && !any_finite {
        return Err(Error::Diverged);
    }

    let (mut model, mut best_val) = match best {
        Some((v, m)) => (m, Some(v)),
        None => (model, None),
    };
    if cfg.final_refine_epochs > 0 {
        let sections = match sections {
            Some(s) => s,
            None => SectionSet::all(train.len(), cfg.n_a, cfg.n_b, cfg.horizon, cfg.burn_in)?,
        };
        let offset = log.records.len();
        let refined = refine_inner(model, &data, &sections, val, cfg, eval, clock, best_val, offset, &mut log)?;
        model = refined.0;
        best_val = refined.1;
    }
    Ok(TrainOutcome {
        model,
        log,
        best_val_nrms: best_val,
    })
}

#[derive(Clone, Debug)]
pub struct RefineOutcome<S> {
    pub model: SsEncoderModel<S>,
    pub records: Vec<EpochRecord>,
    /// Whether any refinement epoch beat the input's validation NRMS.
    pub improved: bool,
}

/// Continues optimization with full-batch Adam over every training section
/// for `cfg.final_refine_epochs` epochs, starting from a fresh optimizer
/// state. Returns the refined snapshot only if it lowers the validation
/// NRMS; otherwise the input model.
pub fn refine_full<S, E, C>(
    model: SsEncoderModel<S>,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    eval: &E,
    clock: &C,
) -> Result<RefineOutcome<S>>
where
    S: Real,
    E: SectionEvaluator<S> + ?Sized,
    C: Clock + ?Sized,
{
    check_setup(&model, train, val, cfg)?;
    if cfg.final_refine_epochs == 0 {
        return Ok(RefineOutcome {
            model,
            records: Vec::new(),
            improved: false,
        });
    }
    let data = model.normalize(train)?;
    let sections = SectionSet::all(train.len(), cfg.n_a, cfg.n_b, cfg.horizon, cfg.burn_in)?;
    let baseline = validation_nrms(&model, val, cfg.val_init)?;
    let baseline = baseline.is_finite().then_some(baseline);
    let mut log = TrainLog::default();
    let (model, best) = refine_inner(model, &data, &sections, val, cfg, eval, clock, baseline, 0, &mut log)?;
    Ok(RefineOutcome {
        model,
        records: log.records,
        improved: best != baseline,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine_inner<S, E, C>(
    model: SsEncoderModel<S>,
    data: &NormalizedData<S>,
    sections: &SectionSet,
    val: &Dataset,
    cfg: &TrainConfig,
    eval: &E,
    clock: &C,
    baseline: Option<f64>,
    epoch_offset: usize,
    log: &mut TrainLog,
) -> Result<(SsEncoderModel<S>, Option<f64>)>
where
    S: Real,
    E: SectionEvaluator<S> + ?Sized,
    C: Clock + ?Sized,
{
    let mut current = model.clone();
    let mut params = current.params_flat();
    let mut adam = AdamState::<S>::new(params.len(), cfg.learning_rate, cfg.adam);
    let mut best: (Option<f64>, SsEncoderModel<S>) = (baseline, model);
    for e in 0..cfg.final_refine_epochs {
        let ev = encoder_loss_with(&current, data, sections, eval)?;
        match adam.update(&mut params, &ev.grad.values)? {
            StepOutcome::Applied => current.set_params_flat(&params)?,
            StepOutcome::SkippedNonFinite => log.skipped_steps += 1,
        }
        let val_nrms = validation_nrms(&current, val, cfg.val_init)?;
        let is_best = val_nrms.is_finite() && best.0.is_none_or(|b| val_nrms < b);
        if is_best {
            best = (Some(val_nrms), current.clone());
        }
        log.records.push(EpochRecord {
            epoch: epoch_offset + e + 1,
            train_loss: ev.loss.as_f64(),
            val_nrms,
            seconds: clock.elapsed_secs(),
            is_best,
        });
    }
    Ok((best.1, best.0))
}
