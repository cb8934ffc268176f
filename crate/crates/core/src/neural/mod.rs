//! Feed-forward tanh networks `s(z) = W_K l_{K-1} ∘ … ∘ l_1(z) + b_K` on
//! inputs `z = (x, y, t)`, with derivatives obtained by forward propagation
//! of Taylor jets and parameter gradients by reverse accumulation through
//! that propagation.

mod check;
mod jet;

use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::config::Activation;
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub use check::{fd_check, FdReport};
pub use jet::{Jet, JetOrder};
use jet::{activate, activate_adjoint, NCOMP, T, V, X, Y};

/// How to draw initial weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform on `±√(3/fan_in)`, i.e. zero mean and variance `1/fan_in`.
    Scaled,
    /// All weights and biases zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

impl Mlp {
    /// Builds a network with layer widths `widths = [d_0, …, d_K]`.
    pub fn new(widths: &[usize], init: Init, rng: &RngStream) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Invalid(format!("bad layer widths {widths:?}")));
        }
        if widths[0] != 3 {
            return Err(Error::Invalid(format!(
                "networks take (x, y, t) inputs; first width is {}",
                widths[0]
            )));
        }
        if widths[widths.len() - 1] != 1 {
            return Err(Error::Invalid("networks have a scalar output".into()));
        }
        let mut net = Self {
            widths: widths.to_vec(),
            activation: Activation::Tanh,
            params: Vec::new(),
        };
        net.params = vec![0.0; net.layout().last().map_or(0, |l| l.end)];
        if init == Init::Scaled {
            let mut r = rng.rng();
            for (k, l) in net.layout().into_iter().enumerate() {
                let a = (3.0 / widths[k] as f64).sqrt();
                let dist = Uniform::new_inclusive(-a, a);
                for w in &mut net.params[l.w..l.b] {
                    *w = dist.sample(&mut r);
                }
            }
        }
        Ok(net)
    }

    /// Zero weights with output bias `c`: the constant function `c`.
    pub fn constant(widths: &[usize], c: f64) -> Result<Self> {
        let mut net = Self::new(widths, Init::Zero, &RngStream::new(0, "unused"))?;
        let n = net.params.len();
        net.params[n - 1] = c;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Parameter offsets: layer `k` stores `W_k` row-major (`d_{k+1} × d_k`)
    /// at `w..b`, then `b_k` at `b..end`.
    fn layout(&self) -> Vec<LayerSpan> {
        let mut off = 0;
        (0..self.layers())
            .map(|k| {
                let (din, dout) = (self.widths[k], self.widths[k + 1]);
                let w = off;
                let b = w + din * dout;
                off = b + dout;
                LayerSpan { w, b, end: off }
            })
            .collect()
    }

    pub fn tape(&self) -> Tape {
        Tape::new(self)
    }

    /// Network value and derivatives at `(x, y, t)` up to `order`.
    pub fn jet(&self, z: [f64; 3], order: JetOrder) -> Jet {
        self.forward(z, order, &mut self.tape())
    }

    pub fn value(&self, z: [f64; 3]) -> f64 {
        self.jet(z, JetOrder::Value).v
    }

    /// Forward jet propagation, recording what [`Mlp::backward`] needs.
    pub fn forward(&self, z: [f64; 3], order: JetOrder, tape: &mut Tape) -> Jet {
        let nc = order.ncomp();
        tape.order = order;
        tape.input = [0.0; NCOMP * 3];
        tape.input[..3].copy_from_slice(&z);
        if nc > 1 {
            tape.input[X * 3] = 1.0;
            tape.input[Y * 3 + 1] = 1.0;
            tape.input[T * 3 + 2] = 1.0;
        }
        let layout = &tape.layout;
        let nl = self.layers();
        for k in 0..nl {
            let (din, dout) = (self.widths[k], self.widths[k + 1]);
            let w = &self.params[layout[k].w..layout[k].b];
            let b = &self.params[layout[k].b..layout[k].end];
            let (before, rest) = tape.act.split_at_mut(k);
            let h: &[f64] = if k == 0 { &tape.input } else { &before[k - 1] };
            let pre = &mut tape.pre[k];
            for c in 0..nc {
                let hc = &h[c * din..(c + 1) * din];
                for o in 0..dout {
                    let row = &w[o * din..(o + 1) * din];
                    let mut s = dot(row, hc);
                    if c == V {
                        s += b[o];
                    }
                    pre[c * dout + o] = s;
                }
            }
            if k + 1 < nl {
                let out = &mut rest[0];
                for o in 0..dout {
                    let mut a = [0.0; NCOMP];
                    for c in 0..nc {
                        a[c] = pre[c * dout + o];
                    }
                    let mut s = [0.0; NCOMP];
                    activate(&a, nc, &mut s);
                    for c in 0..nc {
                        out[c * dout + o] = s[c];
                    }
                }
            }
        }
        let last = &tape.pre[nl - 1];
        let mut out = [0.0; NCOMP];
        out[..nc].copy_from_slice(&last[..nc]);
        Jet::from_array(out)
    }

    /// Accumulates into `grad` the parameter gradient of `⟨seed, jet⟩`, where
    /// `jet` is the output recorded in `tape` by the last [`Mlp::forward`].
    pub fn backward(&self, tape: &mut Tape, seed: &Jet, grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let nc = tape.order.ncomp();
        let nl = self.layers();
        let seed = seed.to_array();
        let Tape {
            layout,
            input,
            pre,
            act,
            abar,
            hbar,
            ..
        } = tape;
        abar[..nc].copy_from_slice(&seed[..nc]);
        for k in (0..nl).rev() {
            let (din, dout) = (self.widths[k], self.widths[k + 1]);
            let span = layout[k];
            let h: &[f64] = if k == 0 { &input[..] } else { &act[k - 1] };
            {
                let (gw, gb) = grad[span.w..span.end].split_at_mut(span.b - span.w);
                for c in 0..nc {
                    let hc = &h[c * din..(c + 1) * din];
                    for o in 0..dout {
                        let ab = abar[c * dout + o];
                        if ab == 0.0 {
                            continue;
                        }
                        for (g, hv) in gw[o * din..(o + 1) * din].iter_mut().zip(hc) {
                            *g += ab * hv;
                        }
                    }
                }
                for o in 0..dout {
                    gb[o] += abar[V * dout + o];
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.params[span.w..span.b];
            for v in hbar[..nc * din].iter_mut() {
                *v = 0.0;
            }
            for c in 0..nc {
                for o in 0..dout {
                    let ab = abar[c * dout + o];
                    if ab == 0.0 {
                        continue;
                    }
                    let row = &w[o * din..(o + 1) * din];
                    for (hb, wv) in hbar[c * din..(c + 1) * din].iter_mut().zip(row) {
                        *hb += ab * wv;
                    }
                }
            }
            // through the activation of layer k-1 (width din)
            let pk = &pre[k - 1];
            for i in 0..din {
                let mut a = [0.0; NCOMP];
                let mut g = [0.0; NCOMP];
                for c in 0..nc {
                    a[c] = pk[c * din + i];
                    g[c] = hbar[c * din + i];
                }
                let r = activate_adjoint(&a, &g, nc);
                for c in 0..nc {
                    abar[c * din + i] = r[c];
                }
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(self, path)
    }

    /// Reloads a checkpoint written by [`Mlp::save`], bit for bit.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: Mlp = serde_json::from_str(&text)?;
        let expected = net.layout().last().map_or(0, |l| l.end);
        if net.params.len() != expected || net.widths.len() < 2 {
            return Err(Error::Shape(format!(
                "checkpoint has {} parameters for widths {:?}",
                net.params.len(),
                net.widths
            )));
        }
        Ok(net)
    }
}

/// Dot product with independent partial sums so it vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (p, q) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += p[k] * q[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (p, q) in ra.iter().zip(rb) {
        s += p * q;
    }
    s
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    w: usize,
    b: usize,
    end: usize,
}

/// Per-point scratch space for jet propagation and its reverse pass.
/// Reuse one tape per network across points to avoid allocation.
#[derive(Debug, Clone)]
pub struct Tape {
    order: JetOrder,
    layout: Vec<LayerSpan>,
    input: [f64; NCOMP * 3],
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    abar: Vec<f64>,
    hbar: Vec<f64>,
}

impl Tape {
    fn new(net: &Mlp) -> Self {
        let nl = net.layers();
        let maxw = *net.widths.iter().max().unwrap_or(&1);
        Self {
            order: JetOrder::Value,
            layout: net.layout(),
            input: [0.0; NCOMP * 3],
            pre: (0..nl).map(|k| vec![0.0; NCOMP * net.widths[k + 1]]).collect(),
            act: (0..nl.saturating_sub(1))
                .map(|k| vec![0.0; NCOMP * net.widths[k + 1]])
                .collect(),
            abar: vec![0.0; NCOMP * maxw],
            hbar: vec![0.0; NCOMP * maxw],
        }
    }
}

/// Gradient of `Σ_p loss_p` over a batch, where `loss_fn(p, jet)` returns
/// the loss contribution of point `p` and its adjoint `∂loss_p/∂jet`.
pub fn param_grad<F>(net: &Mlp, points: &[[f64; 3]], order: JetOrder, mut loss_fn: F) -> (f64, Vec<f64>)
where
    F: FnMut(usize, &Jet) -> (f64, Jet),
{
    let mut tape = net.tape();
    let mut grad = vec![0.0; net.param_count()];
    let mut total = 0.0;
    for (p, &z) in points.iter().enumerate() {
        let jet = net.forward(z, order, &mut tape);
        let (loss, seed) = loss_fn(p, &jet);
        total += loss;
        net.backward(&mut tape, &seed, &mut grad);
    }
    (total, grad)
}
