//! The state-space encoder model `(e, f, h)`.
//!
//! Networks operate in normalized signal space. [`SsEncoderModel::simulate`]
//! takes and returns physical units; everything else works on
//! [`NormalizedData`].

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Normalizer};
use crate::error::{Error, Result};
use crate::net::{InitScale, ParamVector, ResidualNet, Tape};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    /// Number of past outputs fed to the encoder.
    pub n_a: usize,
    /// Number of past inputs fed to the encoder.
    pub n_b: usize,
}

impl ModelDims {
    /// First time index whose encoder history lies inside the data.
    pub fn warmup(&self) -> usize {
        self.n_a.max(self.n_b)
    }

    pub fn encoder_inputs(&self) -> usize {
        self.n_y * self.n_a + self.n_u * self.n_b
    }
}

/// Dataset converted to the model's normalized space and working precision.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedData<S> {
    pub u: Vec<S>,
    pub y: Vec<S>,
    pub n_u: usize,
    pub n_y: usize,
}

impl<S: Real> NormalizedData<S> {
    pub fn len(&self) -> usize {
        self.y.len() / self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn u_at(&self, t: usize) -> &[S] {
        &self.u[t * self.n_u..(t + 1) * self.n_u]
    }

    pub fn y_at(&self, t: usize) -> &[S] {
        &self.y[t * self.n_y..(t + 1) * self.n_y]
    }
}

/// How a free-run simulation obtains its initial state.
#[derive(Clone, Debug, PartialEq)]
pub enum SimInit<S> {
    /// Encode the first `max(n_a, n_b)` samples and start right after them.
    Encoder,
    /// Start at `t = 0` from the zero state.
    Zero,
    /// Start at `start` from the given (model-coordinate) state.
    State { start: usize, state: Vec<S> },
}

/// Free-run predictions in physical units, row-major, for `t >= t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub t0: usize,
    pub n_y: usize,
    pub outputs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SsEncoderModel<S> {
    dims: ModelDims,
    encoder: ResidualNet<S>,
    state_map: ResidualNet<S>,
    output_map: ResidualNet<S>,
    u_norm: Normalizer,
    y_norm: Normalizer,
}

/// Gradient buffers shaped like the three networks of a model.
#[derive(Clone, Debug)]
pub struct ModelGrad<S> {
    pub encoder: ResidualNet<S>,
    pub state_map: ResidualNet<S>,
    pub output_map: ResidualNet<S>,
}

impl<S: Real> ModelGrad<S> {
    pub fn add_into(&self, acc: &mut [S]) {
        let mut off = 0;
        for net in [&self.encoder, &self.state_map, &self.output_map] {
            for b in net.blocks() {
                for (a, g) in acc[off..off + b.len()].iter_mut().zip(b) {
                    *a += *g;
                }
                off += b.len();
            }
        }
    }
}

/// Cached forward pass of one section, for backpropagation through time.
#[derive(Clone, Debug)]
pub struct Rollout<S> {
    pub start: usize,
    pub horizon: usize,
    pub burn_in: usize,
    n_y: usize,
    /// All `horizon + burn_in + 1` outputs, row-major.
    outputs: Vec<S>,
    encoder_tape: Option<Tape<S>>,
    state_tapes: Vec<Tape<S>>,
    output_tapes: Vec<Tape<S>>,
}

impl<S: Real> Rollout<S> {
    /// Scored predictions `y_hat[start+k]` for `k = burn_in ..= burn_in + horizon`.
    pub fn predictions(&self) -> &[S] {
        &self.outputs[self.burn_in * self.n_y..]
    }

    /// Every evaluated output, including the burn-in steps.
    pub fn all_outputs(&self) -> &[S] {
        &self.outputs
    }
}

const NET_NAMES: [&str; 3] = ["encoder", "state", "output"];

impl<S: Real> SsEncoderModel<S> {
    /// Randomly initialized model; all three networks share `hidden` and are
    /// drawn from one seeded stream in the order encoder, state, output.
    pub fn init(
        dims: ModelDims,
        hidden: &[usize],
        scale: InitScale,
        seed: u64,
        u_norm: Normalizer,
        y_norm: Normalizer,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xu = dims.n_x + dims.n_u;
        let encoder = ResidualNet::init_with(dims.encoder_inputs(), hidden, dims.n_x, scale, &mut rng)?;
        let state_map = ResidualNet::init_with(xu, hidden, dims.n_x, scale, &mut rng)?;
        let output_map = ResidualNet::init_with(xu, hidden, dims.n_y, scale, &mut rng)?;
        Self::from_nets(dims, encoder, state_map, output_map, u_norm, y_norm)
    }

    pub fn from_nets(
        dims: ModelDims,
        encoder: ResidualNet<S>,
        state_map: ResidualNet<S>,
        output_map: ResidualNet<S>,
        u_norm: Normalizer,
        y_norm: Normalizer,
    ) -> Result<Self> {
        let xu = dims.n_x + dims.n_u;
        let checks = [
            ("encoder input width", encoder.n_in(), dims.encoder_inputs()),
            ("encoder output width", encoder.n_out(), dims.n_x),
            ("state map input width", state_map.n_in(), xu),
            ("state map output width", state_map.n_out(), dims.n_x),
            ("output map input width", output_map.n_in(), xu),
            ("output map output width", output_map.n_out(), dims.n_y),
            ("input normalizer width", u_norm.width(), dims.n_u),
            ("output normalizer width", y_norm.width(), dims.n_y),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::Dimension { what, expected, got });
            }
        }
        Ok(Self {
            dims,
            encoder,
            state_map,
            output_map,
            u_norm,
            y_norm,
        })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn encoder(&self) -> &ResidualNet<S> {
        &self.encoder
    }

    pub fn state_map(&self) -> &ResidualNet<S> {
        &self.state_map
    }

    pub fn output_map(&self) -> &ResidualNet<S> {
        &self.output_map
    }

    pub fn input_normalizer(&self) -> &Normalizer {
        &self.u_norm
    }

    pub fn output_normalizer(&self) -> &Normalizer {
        &self.y_norm
    }

    pub fn num_params(&self) -> usize {
        self.encoder.num_params() + self.state_map.num_params() + self.output_map.num_params()
    }

    pub fn params(&self) -> ParamVector<S> {
        ParamVector::flatten(&[
            (NET_NAMES[0], &self.encoder),
            (NET_NAMES[1], &self.state_map),
            (NET_NAMES[2], &self.output_map),
        ])
    }

    pub fn params_flat(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.num_params());
        self.encoder.write_flat(&mut out);
        self.state_map.write_flat(&mut out);
        self.output_map.write_flat(&mut out);
        out
    }

    pub fn set_params_flat(&mut self, flat: &[S]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut off = self.encoder.read_flat(flat)?;
        off += self.state_map.read_flat(&flat[off..])?;
        self.output_map.read_flat(&flat[off..])?;
        Ok(())
    }

    pub fn set_params(&mut self, params: &ParamVector<S>) -> Result<()> {
        params.unflatten(&mut [&mut self.encoder, &mut self.state_map, &mut self.output_map])
    }

    pub fn zero_grad(&self) -> ModelGrad<S> {
        ModelGrad {
            encoder: self.encoder.zeros_like(),
            state_map: self.state_map.zeros_like(),
            output_map: self.output_map.zeros_like(),
        }
    }

    /// Layout-carrying view of a gradient buffer.
    pub fn grad_vector(&self, values: Vec<S>) -> ParamVector<S> {
        let mut layout = self.params();
        layout.values = values;
        layout
    }

    pub fn normalize(&self, d: &Dataset) -> Result<NormalizedData<S>> {
        if d.n_u() != self.dims.n_u || d.n_y() != self.dims.n_y {
            return Err(Error::Dimension {
                what: "dataset channels (n_u + n_y)",
                expected: self.dims.n_u + self.dims.n_y,
                got: d.n_u() + d.n_y(),
            });
        }
        Ok(NormalizedData {
            u: self.u_norm.apply(d.u()).into_iter().map(S::from_f64).collect(),
            y: self.y_norm.apply(d.y()).into_iter().map(S::from_f64).collect(),
            n_u: d.n_u(),
            n_y: d.n_y(),
        })
    }

    pub fn denormalize_outputs(&self, y: &[S]) -> Vec<f64> {
        let raw: Vec<f64> = y.iter().map(|v| v.as_f64()).collect();
        self.y_norm.invert(&raw)
    }

    fn encoder_input(&self, y_hist: &[S], u_hist: &[S]) -> Result<Vec<S>> {
        let d = self.dims;
        if y_hist.len() != d.n_a * d.n_y {
            return Err(Error::Dimension {
                what: "output history",
                expected: d.n_a * d.n_y,
                got: y_hist.len(),
            });
        }
        if u_hist.len() != d.n_b * d.n_u {
            return Err(Error::Dimension {
                what: "input history",
                expected: d.n_b * d.n_u,
                got: u_hist.len(),
            });
        }
        let mut z = Vec::with_capacity(y_hist.len() + u_hist.len());
        z.extend_from_slice(y_hist);
        z.extend_from_slice(u_hist);
        Ok(z)
    }

    /// Initial state from the last `n_a` outputs and `n_b` inputs, both
    /// oldest first and flattened per time step. The encoder sees
    /// `[y history; u history]`.
    pub fn encode(&self, y_hist: &[S], u_hist: &[S]) -> Result<Vec<S>> {
        let z = self.encoder_input(y_hist, u_hist)?;
        self.encoder.eval(&z)
    }

    fn state_input(&self, x: &[S], u: &[S]) -> Result<Vec<S>> {
        if x.len() != self.dims.n_x {
            return Err(Error::Dimension {
                what: "state",
                expected: self.dims.n_x,
                got: x.len(),
            });
        }
        if u.len() != self.dims.n_u {
            return Err(Error::Dimension {
                what: "input",
                expected: self.dims.n_u,
                got: u.len(),
            });
        }
        let mut z = Vec::with_capacity(x.len() + u.len());
        z.extend_from_slice(x);
        z.extend_from_slice(u);
        Ok(z)
    }

    pub fn step(&self, x: &[S], u: &[S]) -> Result<Vec<S>> {
        self.state_map.eval(&self.state_input(x, u)?)
    }

    pub fn output(&self, x: &[S], u: &[S]) -> Result<Vec<S>> {
        self.output_map.eval(&self.state_input(x, u)?)
    }

    fn history(&self, data: &NormalizedData<S>, t: usize) -> (Vec<S>, Vec<S>) {
        let d = self.dims;
        let y = data.y[(t - d.n_a) * d.n_y..t * d.n_y].to_vec();
        let u = data.u[(t - d.n_b) * d.n_u..t * d.n_u].to_vec();
        (y, u)
    }

    fn check_section(&self, data: &NormalizedData<S>, start: usize, steps: usize) -> Result<()> {
        let min = self.dims.warmup();
        let len = data.len();
        if data.n_u != self.dims.n_u || data.n_y != self.dims.n_y {
            return Err(Error::Dimension {
                what: "dataset channels (n_u + n_y)",
                expected: self.dims.n_u + self.dims.n_y,
                got: data.n_u + data.n_y,
            });
        }
        if len < min + steps {
            return Err(Error::TooShort {
                required: min + steps,
                available: len,
            });
        }
        let max = len - steps;
        if start < min || start > max {
            return Err(Error::SectionOutOfRange { start, min, max });
        }
        Ok(())
    }

    /// Runs `steps` output evaluations from state `x` at time `start`,
    /// optionally recording tapes.
    fn unroll(
        &self,
        data: &NormalizedData<S>,
        start: usize,
        mut x: Vec<S>,
        steps: usize,
        tapes: Option<(&mut Vec<Tape<S>>, &mut Vec<Tape<S>>)>,
    ) -> Result<Vec<S>> {
        let mut outputs = Vec::with_capacity(steps * self.dims.n_y);
        match tapes {
            Some((state_tapes, output_tapes)) => {
                for k in 0..steps {
                    let z = self.state_input(&x, data.u_at(start + k))?;
                    let (y, ht) = self.output_map.forward(&z)?;
                    outputs.extend_from_slice(&y);
                    output_tapes.push(ht);
                    if k + 1 < steps {
                        let (next, ft) = self.state_map.forward(&z)?;
                        state_tapes.push(ft);
                        x = next;
                    }
                }
            }
            None => {
                for k in 0..steps {
                    let z = self.state_input(&x, data.u_at(start + k))?;
                    outputs.extend_from_slice(&self.output_map.eval(&z)?);
                    if k + 1 < steps {
                        x = self.state_map.eval(&z)?;
                    }
                }
            }
        }
        Ok(outputs)
    }

    /// Encodes the state at `start` and unrolls `horizon + burn_in + 1`
    /// outputs, keeping everything needed for [`SsEncoderModel::rollout_backward`].
    pub fn rollout(
        &self,
        data: &NormalizedData<S>,
        start: usize,
        horizon: usize,
        burn_in: usize,
    ) -> Result<Rollout<S>> {
        let steps = horizon + burn_in + 1;
        self.check_section(data, start, steps)?;
        let (yh, uh) = self.history(data, start);
        let (x0, enc_tape) = self.encoder.forward(&self.encoder_input(&yh, &uh)?)?;
        let mut state_tapes = Vec::with_capacity(steps - 1);
        let mut output_tapes = Vec::with_capacity(steps);
        let outputs = self.unroll(data, start, x0, steps, Some((&mut state_tapes, &mut output_tapes)))?;
        Ok(Rollout {
            start,
            horizon,
            burn_in,
            n_y: self.dims.n_y,
            outputs,
            encoder_tape: Some(enc_tape),
            state_tapes,
            output_tapes,
        })
    }

    /// Zero-initial-state rollout from `t = 0` over `steps` outputs, used by
    /// the zero-initialized simulation loss. The encoder receives no gradient.
    pub fn rollout_from_zero(&self, data: &NormalizedData<S>, steps: usize) -> Result<Rollout<S>> {
        if steps == 0 || data.len() < steps {
            return Err(Error::TooShort {
                required: steps.max(1),
                available: data.len(),
            });
        }
        let mut state_tapes = Vec::with_capacity(steps - 1);
        let mut output_tapes = Vec::with_capacity(steps);
        let x0 = vec![S::zero(); self.dims.n_x];
        let outputs = self.unroll(data, 0, x0, steps, Some((&mut state_tapes, &mut output_tapes)))?;
        Ok(Rollout {
            start: 0,
            horizon: steps - 1,
            burn_in: 0,
            n_y: self.dims.n_y,
            outputs,
            encoder_tape: None,
            state_tapes,
            output_tapes,
        })
    }

    /// Forward-only section prediction: the `horizon + 1` outputs starting at
    /// `start`, with the state encoded at `start`.
    pub fn predict_section(&self, data: &NormalizedData<S>, start: usize, horizon: usize) -> Result<Vec<S>> {
        let steps = horizon + 1;
        self.check_section(data, start, steps)?;
        let (yh, uh) = self.history(data, start);
        let x0 = self.encoder.eval(&self.encoder_input(&yh, &uh)?)?;
        self.unroll(data, start, x0, steps, None)
    }

    /// Backpropagation through time: `d_predictions` is the cotangent of
    /// [`Rollout::predictions`]; parameter gradients are added into `grad`.
    pub fn rollout_backward(&self, rollout: &Rollout<S>, d_predictions: &[S], grad: &mut ModelGrad<S>) -> Result<()> {
        let n_y = self.dims.n_y;
        let n_x = self.dims.n_x;
        let steps = rollout.output_tapes.len();
        let k0 = rollout.burn_in;
        if d_predictions.len() != (steps - k0) * n_y {
            return Err(Error::Dimension {
                what: "prediction cotangent",
                expected: (steps - k0) * n_y,
                got: d_predictions.len(),
            });
        }
        let mut dx = vec![S::zero(); n_x];
        for k in (0..steps).rev() {
            let mut dz = vec![S::zero(); n_x + self.dims.n_u];
            if k + 1 < steps {
                let d = self.state_map.backward_into(&rollout.state_tapes[k], &dx, &mut grad.state_map)?;
                for (a, b) in dz.iter_mut().zip(&d) {
                    *a += *b;
                }
            }
            if k >= k0 {
                let dy = &d_predictions[(k - k0) * n_y..(k - k0 + 1) * n_y];
                let d = self
                    .output_map
                    .backward_into(&rollout.output_tapes[k], dy, &mut grad.output_map)?;
                for (a, b) in dz.iter_mut().zip(&d) {
                    *a += *b;
                }
            }
            dx.copy_from_slice(&dz[..n_x]);
        }
        if let Some(tape) = &rollout.encoder_tape {
            self.encoder.backward_into(tape, &dx, &mut grad.encoder)?;
        }
        Ok(())
    }

    /// Free-run simulation over a dataset in physical units.
    pub fn simulate(&self, d: &Dataset, init: &SimInit<S>) -> Result<Simulation> {
        let data = self.normalize(d)?;
        let out = self.simulate_normalized(&data, init)?;
        Ok(Simulation {
            t0: out.0,
            n_y: self.dims.n_y,
            outputs: self.denormalize_outputs(&out.1),
        })
    }

    /// Normalized-space free run; returns `(t0, outputs for t >= t0)`.
    pub fn simulate_normalized(&self, data: &NormalizedData<S>, init: &SimInit<S>) -> Result<(usize, Vec<S>)> {
        let len = data.len();
        match init {
            SimInit::Encoder => {
                let t0 = self.dims.warmup();
                if len <= t0 {
                    return Err(Error::TooShort {
                        required: t0 + 1,
                        available: len,
                    });
                }
                Ok((t0, self.predict_section(data, t0, len - t0 - 1)?))
            }
            SimInit::Zero => {
                if data.n_u != self.dims.n_u || data.n_y != self.dims.n_y {
                    return Err(Error::Dimension {
                        what: "dataset channels (n_u + n_y)",
                        expected: self.dims.n_u + self.dims.n_y,
                        got: data.n_u + data.n_y,
                    });
                }
                let x0 = vec![S::zero(); self.dims.n_x];
                Ok((0, self.unroll(data, 0, x0, len, None)?))
            }
            SimInit::State { start, state } => {
                if *start >= len {
                    return Err(Error::TooShort {
                        required: start + 1,
                        available: len,
                    });
                }
                if state.len() != self.dims.n_x {
                    return Err(Error::Dimension {
                        what: "initial state",
                        expected: self.dims.n_x,
                        got: state.len(),
                    });
                }
                Ok((*start, self.unroll(data, *start, state.clone(), len - start, None)?))
            }
        }
    }
}
