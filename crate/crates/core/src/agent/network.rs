//! Shared-trunk actor-critic MLP with hand-written backpropagation.
//!
//! Layout: `x → tanh(W1 x + b1) → tanh(W2 h1 + b2)`, then a linear policy
//! head producing action logits and a linear value head. All parameters live
//! in one flat vector so optimizers and checkpoints treat them uniformly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input: crate::sensor::DEFAULT_SAMPLES + 1,
            hidden: 64,
            actions: 3,
        }
    }
}

/// A named region of the flat parameter vector. Weight matrices are
/// row-major `rows × cols`; biases have `cols == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlice {
    pub name: &'static str,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamSlice {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    w1: ParamSlice,
    b1: ParamSlice,
    w2: ParamSlice,
    b2: ParamSlice,
    wp: ParamSlice,
    bp: ParamSlice,
    wv: ParamSlice,
    bv: ParamSlice,
    total: usize,
}

impl Layout {
    fn new(a: &Architecture) -> Self {
        let mut offset = 0;
        let mut next = |name, rows, cols| {
            let s = ParamSlice {
                name,
                offset,
                rows,
                cols,
            };
            offset += rows * cols;
            s
        };
        let w1 = next("trunk.0.weight", a.hidden, a.input);
        let b1 = next("trunk.0.bias", a.hidden, 1);
        let w2 = next("trunk.1.weight", a.hidden, a.hidden);
        let b2 = next("trunk.1.bias", a.hidden, 1);
        let wp = next("policy.weight", a.actions, a.hidden);
        let bp = next("policy.bias", a.actions, 1);
        let wv = next("value.weight", 1, a.hidden);
        let bv = next("value.bias", 1, 1);
        Self {
            w1,
            b1,
            w2,
            b2,
            wp,
            bp,
            wv,
            bv,
            total: offset,
        }
    }

    fn slices(&self) -> [ParamSlice; 8] {
        [
            self.w1, self.b1, self.w2, self.b2, self.wp, self.bp, self.wv, self.bv,
        ]
    }
}

/// Activations kept from a forward pass for use in backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    arch: Architecture,
    layout: Layout,
    params: Vec<f64>,
}

/// `y += W x` for row-major `W`.
fn matvec_acc(w: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (row, out) in w.chunks_exact(cols).zip(y.iter_mut()) {
        *out += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `y += Wᵀ d` for row-major `W`.
fn matvec_t_acc(w: &[f64], d: &[f64], y: &mut [f64]) {
    let cols = y.len();
    for (row, di) in w.chunks_exact(cols).zip(d) {
        for (yj, wij) in y.iter_mut().zip(row) {
            *yj += wij * di;
        }
    }
}

/// `G += d xᵀ`.
fn outer_acc(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, di) in g.chunks_exact_mut(cols).zip(d) {
        for (gij, xj) in row.iter_mut().zip(x) {
            *gij += di * xj;
        }
    }
}

impl PolicyNetwork {
    pub fn zeros(arch: Architecture) -> Self {
        let layout = Layout::new(&arch);
        Self {
            arch,
            params: vec![0.0; layout.total],
            layout,
        }
    }

    /// Scaled-uniform initialization with variance `gain² / fan_in`: unit
    /// gain in the trunk and value head, 0.01 on the policy head so the
    /// initial policy is close to uniform. Biases start at zero.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut net = Self::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = net.layout;
        for (slice, gain) in [(l.w1, 1.0), (l.w2, 1.0), (l.wp, 0.01), (l.wv, 1.0)] {
            let a = gain * (3.0 / slice.cols as f64).sqrt();
            for p in &mut net.params[slice.range()] {
                *p = rng.random_range(-a..a);
            }
        }
        net
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(&arch);
        if params.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters for {:?}, got {}",
                layout.total,
                arch,
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameter".into()));
        }
        Ok(Self {
            arch,
            layout,
            params,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn slices(&self) -> [ParamSlice; 8] {
        self.layout.slices()
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.slices()
            .into_iter()
            .find(|s| s.name == name)
            .map(|s| &self.params[s.range()])
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(x.len(), self.arch.input, "observation length");
        let l = &self.layout;
        let p = &self.params;
        let mut h1 = p[l.b1.range()].to_vec();
        matvec_acc(&p[l.w1.range()], x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut h2 = p[l.b2.range()].to_vec();
        matvec_acc(&p[l.w2.range()], &h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut logits = p[l.bp.range()].to_vec();
        matvec_acc(&p[l.wp.range()], &h2, &mut logits);
        let mut value = [p[l.bv.offset]];
        matvec_acc(&p[l.wv.range()], &h2, &mut value);
        ForwardCache {
            input: x.to_vec(),
            h1,
            h2,
            logits,
            value: value[0],
        }
    }

    /// Action logits and state value.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let c = self.forward_cached(x);
        (c.logits, c.value)
    }

    /// Accumulates into `grad` the parameter gradient given the loss
    /// gradients with respect to the logits and the value output.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &[f64], d_value: f64, grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let l = &self.layout;
        let p = &self.params;
        let hidden = self.arch.hidden;

        outer_acc(&mut grad[l.wp.range()], d_logits, &cache.h2);
        for (g, d) in grad[l.bp.range()].iter_mut().zip(d_logits) {
            *g += d;
        }
        outer_acc(&mut grad[l.wv.range()], &[d_value], &cache.h2);
        grad[l.bv.offset] += d_value;

        let mut dh2 = vec![0.0; hidden];
        matvec_t_acc(&p[l.wp.range()], d_logits, &mut dh2);
        matvec_t_acc(&p[l.wv.range()], &[d_value], &mut dh2);
        let dz2: Vec<f64> = dh2.iter().zip(&cache.h2).map(|(d, h)| d * (1.0 - h * h)).collect();
        outer_acc(&mut grad[l.w2.range()], &dz2, &cache.h1);
        for (g, d) in grad[l.b2.range()].iter_mut().zip(&dz2) {
            *g += d;
        }

        let mut dh1 = vec![0.0; hidden];
        matvec_t_acc(&p[l.w2.range()], &dz2, &mut dh1);
        let dz1: Vec<f64> = dh1.iter().zip(&cache.h1).map(|(d, h)| d * (1.0 - h * h)).collect();
        outer_acc(&mut grad[l.w1.range()], &dz1, &cache.input);
        for (g, d) in grad[l.b1.range()].iter_mut().zip(&dz1) {
            *g += d;
        }
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from the categorical distribution given by `probs`.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
