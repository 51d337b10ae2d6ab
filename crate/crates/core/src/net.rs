//! Residual tanh networks with a parallel affine bypass and exact
//! reverse-mode gradients.
//!
//! ```text
//! h_1   = tanh(W_1 z + c_1)
//! h_l   = tanh(W_l h_{l-1} + c_l)
//! z_out = A h_L + B z + b
//! ```
//!
//! With a single hidden layer this is `A tanh(W z + c) + B z + b`; with no
//! hidden layers it is the affine map `B z + b`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::real::Real;

/// Scale of the uniform initialization `U(-sqrt(k), sqrt(k))` for a layer
/// with fan-in `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitScale {
    /// `k = 1/n`, bound `n^(-1/2)`.
    #[default]
    Standard,
    /// `k = 1/sqrt(n)`, bound `n^(-1/4)`.
    SqrtFanIn,
}

impl InitScale {
    pub fn bound(self, fan_in: usize) -> f64 {
        let n = fan_in.max(1) as f64;
        match self {
            InitScale::Standard => (1.0 / n).sqrt(),
            InitScale::SqrtFanIn => (1.0 / n.sqrt()).sqrt(),
        }
    }
}

/// Fully connected layer, weight row-major `n_out x n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub n_in: usize,
    pub n_out: usize,
    pub weight: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Real> Dense<S> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weight: vec![S::zero(); n_in * n_out],
            bias: vec![S::zero(); n_out],
        }
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.weight.len() != self.n_in * self.n_out || self.bias.len() != self.n_out {
            return Err(Error::InvalidDims(format!(
                "{what}: weight has {} entries and bias {}, expected {}x{} and {}",
                self.weight.len(),
                self.bias.len(),
                self.n_out,
                self.n_in,
                self.n_out
            )));
        }
        Ok(())
    }
}

/// `out = W x + b`
fn affine<S: Real>(w: &[S], b: &[S], x: &[S]) -> Vec<S> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(i, bi)| {
            let row = &w[i * n_in..(i + 1) * n_in];
            let mut acc = S::zero();
            for (wij, xj) in row.iter().zip(x) {
                acc += *wij * *xj;
            }
            acc + *bi
        })
        .collect()
}

/// `out += W^T g`, and `grad_w += g x^T`.
fn adjoint<S: Real>(w: &[S], x: &[S], g: &[S], grad_w: &mut [S], dx: &mut [S]) {
    let n_in = x.len();
    for (i, gi) in g.iter().enumerate() {
        if *gi == S::zero() {
            continue;
        }
        let row = &w[i * n_in..(i + 1) * n_in];
        let grow = &mut grad_w[i * n_in..(i + 1) * n_in];
        for j in 0..n_in {
            grow[j] += *gi * x[j];
            dx[j] += row[j] * *gi;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResidualNet<S> {
    n_in: usize,
    n_out: usize,
    hidden: Vec<Dense<S>>,
    /// Row-major `n_out x last hidden width`; empty without hidden layers.
    output_weight: Vec<S>,
    bypass: Dense<S>,
    generation: u64,
}

/// Activations cached by [`ResidualNet::forward`] for the matching backward.
#[derive(Clone, Debug)]
pub struct Tape<S> {
    input: Vec<S>,
    hidden: Vec<Vec<S>>,
    generation: u64,
    n_out: usize,
}

impl<S> Tape<S> {
    pub fn input(&self) -> &[S] {
        &self.input
    }
}

impl<S: Real> ResidualNet<S> {
    /// Randomly initialized network; every weight and bias of a layer with
    /// fan-in `n` is drawn from `U(-bound, bound)` with `bound = scale.bound(n)`.
    pub fn init(n_in: usize, hidden: &[usize], n_out: usize, scale: InitScale, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(n_in, hidden, n_out, scale, &mut rng)
    }

    /// As [`ResidualNet::init`], drawing from a caller-owned generator.
    /// Layers are filled in the flat parameter order.
    pub fn init_with<R: Rng>(
        n_in: usize,
        hidden: &[usize],
        n_out: usize,
        scale: InitScale,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(n_in, hidden, n_out)?;
        let mut fill = |vals: &mut [S], fan_in: usize| {
            let bound = scale.bound(fan_in);
            for v in vals {
                let r: f64 = rng.random();
                *v = S::from_f64(bound * (2.0 * r - 1.0));
            }
        };
        let mut fan_in = n_in;
        for layer in &mut net.hidden {
            fill(&mut layer.weight, fan_in);
            fill(&mut layer.bias, fan_in);
            fan_in = layer.n_out;
        }
        fill(&mut net.output_weight, fan_in);
        fill(&mut net.bypass.weight, n_in);
        fill(&mut net.bypass.bias, n_in);
        Ok(net)
    }

    pub fn zeros(n_in: usize, hidden: &[usize], n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 || hidden.contains(&0) {
            return Err(Error::InvalidDims(format!(
                "widths must be >= 1 (n_in={n_in}, hidden={hidden:?}, n_out={n_out})"
            )));
        }
        let mut layers = Vec::with_capacity(hidden.len());
        let mut prev = n_in;
        for &w in hidden {
            layers.push(Dense::zeros(prev, w));
            prev = w;
        }
        let last = if hidden.is_empty() { 0 } else { prev };
        Ok(Self {
            n_in,
            n_out,
            hidden: layers,
            output_weight: vec![S::zero(); n_out * last],
            bypass: Dense::zeros(n_in, n_out),
            generation: 0,
        })
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_parts(hidden: Vec<Dense<S>>, output_weight: Vec<S>, bypass: Dense<S>) -> Result<Self> {
        bypass.check("bypass")?;
        let (n_in, n_out) = (bypass.n_in, bypass.n_out);
        if n_in == 0 || n_out == 0 {
            return Err(Error::InvalidDims(format!("n_in={n_in}, n_out={n_out}")));
        }
        let mut prev = n_in;
        for (l, layer) in hidden.iter().enumerate() {
            layer.check(&format!("hidden layer {l}"))?;
            if layer.n_in != prev || layer.n_out == 0 {
                return Err(Error::InvalidDims(format!(
                    "hidden layer {l} takes {} inputs, previous width is {prev}",
                    layer.n_in
                )));
            }
            prev = layer.n_out;
        }
        let last = if hidden.is_empty() { 0 } else { prev };
        if output_weight.len() != n_out * last {
            return Err(Error::InvalidDims(format!(
                "output weight has {} entries, expected {}x{}",
                output_weight.len(),
                n_out,
                last
            )));
        }
        Ok(Self {
            n_in,
            n_out,
            hidden,
            output_weight,
            bypass,
            generation: 0,
        })
    }

    /// Zero-initialized network with the same shape.
    pub fn zeros_like(&self) -> Self {
        Self {
            n_in: self.n_in,
            n_out: self.n_out,
            hidden: self
                .hidden
                .iter()
                .map(|l| Dense::zeros(l.n_in, l.n_out))
                .collect(),
            output_weight: vec![S::zero(); self.output_weight.len()],
            bypass: Dense::zeros(self.n_in, self.n_out),
            generation: 0,
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.n_out).collect()
    }

    pub fn hidden(&self) -> &[Dense<S>] {
        &self.hidden
    }

    pub fn output_weight(&self) -> &[S] {
        &self.output_weight
    }

    pub fn bypass(&self) -> &Dense<S> {
        &self.bypass
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// Parameter blocks in flat order: per hidden layer (weight, bias), then
    /// output weight, bypass weight, bypass bias.
    pub fn blocks(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::with_capacity(2 * self.hidden.len() + 3);
        for l in &self.hidden {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.output_weight);
        out.push(&self.bypass.weight);
        out.push(&self.bypass.bias);
        out
    }

    /// Mutable parameter blocks in flat order. Invalidates existing tapes.
    pub fn blocks_mut(&mut self) -> Vec<&mut [S]> {
        self.generation = self.generation.wrapping_add(1);
        let mut out: Vec<&mut [S]> = Vec::with_capacity(2 * self.hidden.len() + 3);
        for l in &mut self.hidden {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.output_weight);
        out.push(&mut self.bypass.weight);
        out.push(&mut self.bypass.bias);
        out
    }

    /// `(name, rows, cols)` of each block, aligned with [`ResidualNet::blocks`].
    pub fn block_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for (l, layer) in self.hidden.iter().enumerate() {
            out.push((format!("hidden{l}.weight"), layer.n_out, layer.n_in));
            out.push((format!("hidden{l}.bias"), layer.n_out, 1));
        }
        let last = self.hidden.last().map_or(0, |l| l.n_out);
        out.push(("output_weight".into(), self.n_out, last));
        out.push(("bypass.weight".into(), self.n_out, self.n_in));
        out.push(("bypass.bias".into(), self.n_out, 1));
        out
    }

    pub fn write_flat(&self, out: &mut Vec<S>) {
        for b in self.blocks() {
            out.extend_from_slice(b);
        }
    }

    /// Loads parameters from the front of `flat`; returns the number consumed.
    pub fn read_flat(&mut self, flat: &[S]) -> Result<usize> {
        let n = self.num_params();
        if flat.len() < n {
            return Err(Error::Dimension {
                what: "flat parameters",
                expected: n,
                got: flat.len(),
            });
        }
        let mut off = 0;
        for b in self.blocks_mut() {
            b.copy_from_slice(&flat[off..off + b.len()]);
            off += b.len();
        }
        Ok(off)
    }

    /// Adds `other`'s parameters elementwise (gradient accumulation).
    pub fn add_assign(&mut self, other: &Self) {
        let src = other.blocks();
        for (dst, src) in self.blocks_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
    }

    fn run(&self, z: &[S], mut record: Option<&mut Vec<Vec<S>>>) -> Result<Vec<S>> {
        if z.len() != self.n_in {
            return Err(Error::Dimension {
                what: "network input",
                expected: self.n_in,
                got: z.len(),
            });
        }
        let mut out = vec![S::zero(); self.n_out];
        if let Some(first) = self.hidden.first() {
            let mut act = affine(&first.weight, &first.bias, z);
            act.iter_mut().for_each(|v| *v = v.tanh());
            for layer in &self.hidden[1..] {
                let mut next = affine(&layer.weight, &layer.bias, &act);
                next.iter_mut().for_each(|v| *v = v.tanh());
                let prev = core::mem::replace(&mut act, next);
                if let Some(r) = record.as_deref_mut() {
                    r.push(prev);
                }
            }
            let last = act.len();
            for (i, o) in out.iter_mut().enumerate() {
                let row = &self.output_weight[i * last..(i + 1) * last];
                for (w, h) in row.iter().zip(&act) {
                    *o += *w * *h;
                }
            }
            if let Some(r) = record.as_deref_mut() {
                r.push(act);
            }
        }
        let n_in = self.n_in;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.bypass.weight[i * n_in..(i + 1) * n_in];
            let mut acc = S::zero();
            for (w, x) in row.iter().zip(z) {
                acc += *w * *x;
            }
            *o += acc + self.bypass.bias[i];
        }
        Ok(out)
    }

    /// Output only, without caching activations. Same arithmetic as
    /// [`ResidualNet::forward`].
    pub fn eval(&self, z: &[S]) -> Result<Vec<S>> {
        self.run(z, None)
    }

    pub fn forward(&self, z: &[S]) -> Result<(Vec<S>, Tape<S>)> {
        let mut hidden = Vec::with_capacity(self.hidden.len());
        let out = self.run(z, Some(&mut hidden))?;
        Ok((
            out,
            Tape {
                input: z.to_vec(),
                hidden,
                generation: self.generation,
                n_out: self.n_out,
            },
        ))
    }

    fn check_tape(&self, tape: &Tape<S>) -> Result<()> {
        let shapes_match = tape.generation == self.generation
            && tape.input.len() == self.n_in
            && tape.n_out == self.n_out
            && tape.hidden.len() == self.hidden.len()
            && tape
                .hidden
                .iter()
                .zip(&self.hidden)
                .all(|(h, l)| h.len() == l.n_out);
        if shapes_match {
            Ok(())
        } else {
            Err(Error::StaleTape)
        }
    }

    /// Reverse pass: adds parameter gradients into `grad` (a network of the
    /// same shape) and returns the gradient with respect to the input.
    pub fn backward_into(&self, tape: &Tape<S>, d_out: &[S], grad: &mut Self) -> Result<Vec<S>> {
        self.check_tape(tape)?;
        if d_out.len() != self.n_out {
            return Err(Error::Dimension {
                what: "output cotangent",
                expected: self.n_out,
                got: d_out.len(),
            });
        }
        if grad.num_params() != self.num_params() || grad.n_in != self.n_in {
            return Err(Error::InvalidDims("gradient buffer has a different shape".into()));
        }
        let z = &tape.input;
        let mut dz = vec![S::zero(); self.n_in];

        adjoint(&self.bypass.weight, z, d_out, &mut grad.bypass.weight, &mut dz);
        for (gb, g) in grad.bypass.bias.iter_mut().zip(d_out) {
            *gb += *g;
        }

        if let Some(last) = tape.hidden.last() {
            let mut dh = vec![S::zero(); last.len()];
            adjoint(&self.output_weight, last, d_out, &mut grad.output_weight, &mut dh);
            for l in (0..self.hidden.len()).rev() {
                let act = &tape.hidden[l];
                let da: Vec<S> = dh
                    .iter()
                    .zip(act)
                    .map(|(d, a)| *d * (S::one() - *a * *a))
                    .collect();
                let input: &[S] = if l == 0 { z } else { &tape.hidden[l - 1] };
                let layer = &self.hidden[l];
                let glayer = &mut grad.hidden[l];
                for (gb, d) in glayer.bias.iter_mut().zip(&da) {
                    *gb += *d;
                }
                let mut din = vec![S::zero(); input.len()];
                adjoint(&layer.weight, input, &da, &mut glayer.weight, &mut din);
                if l == 0 {
                    for (a, b) in dz.iter_mut().zip(&din) {
                        *a += *b;
                    }
                } else {
                    dh = din;
                }
            }
        }
        Ok(dz)
    }

    /// Reverse pass returning `(d_input, parameter gradients)`.
    pub fn backward(&self, tape: &Tape<S>, d_out: &[S]) -> Result<(Vec<S>, Self)> {
        let mut grad = self.zeros_like();
        let dz = self.backward_into(tape, d_out, &mut grad)?;
        Ok((dz, grad))
    }
}

/// One named block in a [`ParamVector`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Every trainable scalar of a set of networks in one flat array, with the
/// index map back to named blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<S> {
    pub values: Vec<S>,
    pub layout: Vec<ParamBlock>,
}

impl<S: Real> ParamVector<S> {
    /// Flattens `nets` in the order given; each is prefixed with its name.
    pub fn flatten(nets: &[(&str, &ResidualNet<S>)]) -> Self {
        let mut values = Vec::new();
        let mut layout = Vec::new();
        for (prefix, net) in nets {
            for (name, rows, cols) in net.block_shapes() {
                layout.push(ParamBlock {
                    name: format!("{prefix}.{name}"),
                    offset: values.len(),
                    rows,
                    cols,
                });
                values.resize(values.len() + rows * cols, S::zero());
            }
            let start = values.len() - net.num_params();
            let mut off = start;
            for b in net.blocks() {
                values[off..off + b.len()].copy_from_slice(b);
                off += b.len();
            }
        }
        Self { values, layout }
    }

    /// Writes the values back into `nets`, which must have the flattened shapes.
    pub fn unflatten(&self, nets: &mut [&mut ResidualNet<S>]) -> Result<()> {
        let total: usize = nets.iter().map(|n| n.num_params()).sum();
        if total != self.values.len() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: total,
                got: self.values.len(),
            });
        }
        let mut off = 0;
        for net in nets.iter_mut() {
            off += net.read_flat(&self.values[off..])?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&[S]> {
        self.layout
            .iter()
            .find(|b| b.name == name)
            .map(|b| &self.values[b.offset..b.offset + b.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(a2: f64, b2: f64, a1: f64, a3: f64, b3: f64) -> ResidualNet<f64> {
        ResidualNet::from_parts(
            vec![Dense {
                n_in: 1,
                n_out: 1,
                weight: vec![a2],
                bias: vec![b2],
            }],
            vec![a1],
            Dense {
                n_in: 1,
                n_out: 1,
                weight: vec![a3],
                bias: vec![b3],
            },
        )
        .unwrap()
    }

    #[test]
    fn scalar_tanh_value() {
        let net = scalar_net(1.0, 0.0, 1.0, 0.0, 0.0);
        let y = net.eval(&[0.5]).unwrap();
        assert!((y[0] - 0.4621171572600098).abs() < 1e-15);
        assert!((y[0] - 0.4621171573).abs() < 1e-10);
    }

    #[test]
    fn all_zero_net_outputs_zero() {
        let net = ResidualNet::<f64>::zeros(3, &[4, 2], 2).unwrap();
        assert_eq!(net.eval(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_through_bypass() {
        let mut net = ResidualNet::<f64>::init(2, &[5], 2, InitScale::Standard, 3).unwrap();
        net.output_weight.iter_mut().for_each(|v| *v = 0.0);
        net.bypass.weight = vec![1.0, 0.0, 0.0, 1.0];
        net.bypass.bias = vec![0.0, 0.0];
        assert_eq!(net.eval(&[0.3, -1.7]).unwrap(), vec![0.3, -1.7]);
    }

    #[test]
    fn init_bounds_and_determinism() {
        let a = ResidualNet::<f64>::init(4, &[8], 3, InitScale::Standard, 11).unwrap();
        let b = ResidualNet::<f64>::init(4, &[8], 3, InitScale::Standard, 11).unwrap();
        let fa = ParamVector::flatten(&[("n", &a)]);
        let fb = ParamVector::flatten(&[("n", &b)]);
        assert_eq!(fa, fb);
        // First layer and bypass have fan-in 4.
        for name in ["n.hidden0.weight", "n.hidden0.bias", "n.bypass.weight", "n.bypass.bias"] {
            assert!(fa.block(name).unwrap().iter().all(|v| v.abs() <= 0.5));
        }
        let out = fa.block("n.output_weight").unwrap();
        assert!(out.iter().all(|v| v.abs() <= (1.0f64 / 8.0).sqrt()));
    }

    #[test]
    fn literal_init_bound() {
        assert!((InitScale::SqrtFanIn.bound(16) - 0.5).abs() < 1e-15);
        assert!((InitScale::Standard.bound(16) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn init_moments_match_uniform() {
        // 10^5 draws at fan-in 4: U(-1/2, 1/2), mean 0, variance (1/4)/3.
        let net = ResidualNet::<f64>::init(4, &[], 25_000, InitScale::Standard, 5).unwrap();
        let w = &net.bypass.weight;
        assert_eq!(w.len(), 100_000);
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let target = 0.25 / 3.0;
        assert!(mean.abs() < 3.0 * (target / n).sqrt(), "mean {mean}");
        assert!((var - target).abs() < 0.05 * target, "var {var}");
    }

    #[test]
    fn zero_hidden_layer_adjoint_is_transpose() {
        let net = ResidualNet::<f64>::init(3, &[], 2, InitScale::Standard, 1).unwrap();
        let (_, tape) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let (dz, grad) = net.backward(&tape, &[1.5, -0.5]).unwrap();
        let w = &net.bypass.weight;
        for j in 0..3 {
            assert_eq!(dz[j], w[j] * 1.5 + w[3 + j] * -0.5);
        }
        assert_eq!(grad.bypass.bias, vec![1.5, -0.5]);
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let net = ResidualNet::<f64>::init(3, &[4, 4], 2, InitScale::Standard, 2).unwrap();
        let (_, tape) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let (dz, grad) = net.backward(&tape, &[0.0, 0.0]).unwrap();
        assert!(dz.iter().all(|v| *v == 0.0));
        let flat = ParamVector::flatten(&[("g", &grad)]);
        assert!(flat.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stale_and_mismatched_tapes_are_rejected() {
        let mut net = ResidualNet::<f64>::init(2, &[3], 1, InitScale::Standard, 2).unwrap();
        let other = ResidualNet::<f64>::init(2, &[4], 1, InitScale::Standard, 2).unwrap();
        let (_, tape) = net.forward(&[0.1, 0.2]).unwrap();
        let (_, other_tape) = other.forward(&[0.1, 0.2]).unwrap();
        assert_eq!(net.backward(&other_tape, &[1.0]).unwrap_err(), Error::StaleTape);
        net.blocks_mut()[0][0] = 0.7;
        assert_eq!(net.backward(&tape, &[1.0]).unwrap_err(), Error::StaleTape);
    }

    #[test]
    fn dimension_errors() {
        let net = ResidualNet::<f64>::zeros(2, &[3], 1).unwrap();
        assert!(matches!(net.eval(&[1.0]), Err(Error::Dimension { .. })));
        assert!(ResidualNet::<f64>::zeros(0, &[3], 1).is_err());
        assert!(ResidualNet::<f64>::zeros(2, &[0], 1).is_err());
    }
}
