//! Per-point offset predictor: a three-layer MLP with PReLU activations,
//! `C -> H -> H -> 3`, applied row by row to a feature matrix.
//!
//! All parameters live in one flat vector laid out as
//! `w1 (H x C), b1 (H), a1, w2 (H x H), b2 (H), a2, w3 (3 x H), b3 (3)`,
//! weights row-major with one row per output unit. Gradients, optimizer
//! state and checkpoints share that layout.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::math::{sqrt, Vec3};

pub const OUTPUT_DIM: usize = 3;
pub const DEFAULT_HIDDEN: usize = 64;
pub const PRELU_INIT: f64 = 0.25;

/// Names of the parameter blocks, in layout order.
pub const BLOCK_NAMES: [&str; 8] = ["w1", "b1", "a1", "w2", "b2", "a2", "w3", "b3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    input: usize,
    hidden: usize,
}

impl Layout {
    fn shapes(&self) -> [(usize, usize); 8] {
        let (c, h) = (self.input, self.hidden);
        [(h, c), (h, 1), (1, 1), (h, h), (h, 1), (1, 1), (OUTPUT_DIM, h), (OUTPUT_DIM, 1)]
    }

    fn offsets(&self) -> [usize; 9] {
        let mut out = [0; 9];
        for (b, (r, c)) in self.shapes().iter().enumerate() {
            out[b + 1] = out[b] + r * c;
        }
        out
    }

    fn len(&self) -> usize {
        self.offsets()[8]
    }
}

/// Immutable views into the flat parameter vector.
struct View<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    a1: f64,
    w2: &'a [f64],
    b2: &'a [f64],
    a2: f64,
    w3: &'a [f64],
    b3: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetNet {
    layout: Layout,
    params: Vec<f64>,
}

#[inline]
fn prelu(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        slope * z
    }
}

/// `out += s * x`, written so it vectorizes.
#[inline]
fn axpy(out: &mut [f64], s: f64, x: &[f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += s * v;
    }
}

fn transpose(w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = w[r * cols + c];
        }
    }
    t
}

/// Activations kept from a forward pass for backpropagation.
pub(crate) struct ForwardCache {
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    pub(crate) out: Vec<Vec3>,
}

impl OffsetNet {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero
    /// biases and PReLU slopes of 0.25.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(input, hidden)?;
        let offs = net.layout.offsets();
        let shapes = net.layout.shapes();
        for b in [0usize, 3, 6] {
            let (fan_out, fan_in) = shapes[b];
            let limit = sqrt(6.0 / (fan_in + fan_out) as f64);
            for w in &mut net.params[offs[b]..offs[b + 1]] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        net.params[offs[2]] = PRELU_INIT;
        net.params[offs[5]] = PRELU_INIT;
        Ok(net)
    }

    /// Every parameter zero (the network outputs zero everywhere).
    pub fn zeros(input: usize, hidden: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::invalid("network shape", "input and hidden widths must be positive"));
        }
        let layout = Layout { input, hidden };
        Ok(Self { layout, params: vec![0.0; layout.len()] })
    }

    pub fn from_params(input: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(input, hidden)?;
        if params.len() != net.params.len() {
            return Err(Error::LengthMismatch { what: "network parameters", expected: net.params.len(), found: params.len() });
        }
        net.params = params;
        net.check_finite()?;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.layout.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `(name, rows, cols)` of each block, in layout order.
    pub fn block_shapes(&self) -> Vec<(&'static str, usize, usize)> {
        BLOCK_NAMES.iter().zip(self.layout.shapes()).map(|(&n, (r, c))| (n, r, c)).collect()
    }

    /// Human-readable name of flat parameter `index`, e.g. `w2[3,17]`.
    pub fn param_name(&self, index: usize) -> String {
        let offs = self.layout.offsets();
        let shapes = self.layout.shapes();
        for b in 0..8 {
            if index < offs[b + 1] {
                let local = index - offs[b];
                let (_, cols) = shapes[b];
                return match BLOCK_NAMES[b] {
                    "a1" | "a2" => String::from(BLOCK_NAMES[b]),
                    name if cols == 1 => format!("{name}[{local}]"),
                    name => format!("{name}[{},{}]", local / cols, local % cols),
                };
            }
        }
        format!("param[{index}]")
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.params.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(Error::NonFiniteParameter { parameter: self.param_name(i) }),
            None => Ok(()),
        }
    }

    fn view(&self) -> View<'_> {
        let o = self.layout.offsets();
        let p = &self.params;
        View {
            w1: &p[o[0]..o[1]],
            b1: &p[o[1]..o[2]],
            a1: p[o[2]],
            w2: &p[o[3]..o[4]],
            b2: &p[o[4]..o[5]],
            a2: p[o[5]],
            w3: &p[o[6]..o[7]],
            b3: &p[o[7]..o[8]],
        }
    }

    fn check_width(&self, features: &FeatureMatrix) -> Result<()> {
        if features.cols() != self.layout.input {
            return Err(Error::FeatureWidth { expected: self.layout.input, found: features.cols() });
        }
        Ok(())
    }

    /// Predicted offset for every feature row.
    pub fn forward(&self, features: &FeatureMatrix) -> Result<Vec<Vec3>> {
        Ok(self.forward_cached(features)?.out)
    }

    pub(crate) fn forward_cached(&self, features: &FeatureMatrix) -> Result<ForwardCache> {
        self.check_width(features)?;
        let (c, h) = (self.layout.input, self.layout.hidden);
        let n = features.rows();
        let v = self.view();
        let w1t = transpose(v.w1, h, c);
        let w2t = transpose(v.w2, h, h);
        let mut z1 = vec![0.0; n * h];
        let mut h1 = vec![0.0; n * h];
        let mut z2 = vec![0.0; n * h];
        let mut h2 = vec![0.0; n * h];
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let g = features.row(i);
            let z1r = &mut z1[i * h..(i + 1) * h];
            z1r.copy_from_slice(v.b1);
            for (col, &x) in g.iter().enumerate() {
                if x != 0.0 {
                    axpy(z1r, x, &w1t[col * h..(col + 1) * h]);
                }
            }
            let h1r = &mut h1[i * h..(i + 1) * h];
            for (a, &z) in h1r.iter_mut().zip(z1r.iter()) {
                *a = prelu(z, v.a1);
            }
            let z2r = &mut z2[i * h..(i + 1) * h];
            z2r.copy_from_slice(v.b2);
            for (col, &x) in h1r.iter().enumerate() {
                axpy(z2r, x, &w2t[col * h..(col + 1) * h]);
            }
            let h2r = &mut h2[i * h..(i + 1) * h];
            for (a, &z) in h2r.iter_mut().zip(z2r.iter()) {
                *a = prelu(z, v.a2);
            }
            let mut o = [0.0; OUTPUT_DIM];
            for (r, slot) in o.iter_mut().enumerate() {
                let w = &v.w3[r * h..(r + 1) * h];
                *slot = v.b3[r] + w.iter().zip(h2r.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
            out.push(Vec3::from_array(o));
        }
        Ok(ForwardCache { z1, h1, z2, h2, out })
    }

    /// Backpropagate `d_out` (gradient of the loss w.r.t. each output row).
    /// Parameter gradients are *added* to `grads`; when `d_input` is given,
    /// it receives the gradient w.r.t. every feature entry.
    pub(crate) fn backward(
        &self,
        features: &FeatureMatrix,
        cache: &ForwardCache,
        d_out: &[[f64; OUTPUT_DIM]],
        grads: &mut [f64],
        mut d_input: Option<&mut [f64]>,
    ) {
        let (c, h) = (self.layout.input, self.layout.hidden);
        let o = self.layout.offsets();
        let v = self.view();
        let (gw1, rest) = grads.split_at_mut(o[1]);
        let (gb1, rest) = rest.split_at_mut(o[2] - o[1]);
        let (ga1, rest) = rest.split_at_mut(1);
        let (gw2, rest) = rest.split_at_mut(o[4] - o[3]);
        let (gb2, rest) = rest.split_at_mut(o[5] - o[4]);
        let (ga2, rest) = rest.split_at_mut(1);
        let (gw3, gb3) = rest.split_at_mut(o[7] - o[6]);

        let mut dh = vec![0.0; h];
        let mut dz = vec![0.0; h];
        for (i, dout) in d_out.iter().enumerate() {
            if dout.iter().all(|&d| d == 0.0) && d_input.is_none() {
                continue;
            }
            let row = i * h..(i + 1) * h;
            let (z1, h1, z2, h2) = (&cache.z1[row.clone()], &cache.h1[row.clone()], &cache.z2[row.clone()], &cache.h2[row]);

            // Output layer.
            dh.fill(0.0);
            for (r, &d) in dout.iter().enumerate() {
                gb3[r] += d;
                axpy(&mut gw3[r * h..(r + 1) * h], d, h2);
                axpy(&mut dh, d, &v.w3[r * h..(r + 1) * h]);
            }
            // Second hidden layer.
            for j in 0..h {
                if z2[j] >= 0.0 {
                    dz[j] = dh[j];
                } else {
                    dz[j] = dh[j] * v.a2;
                    ga2[0] += dh[j] * z2[j];
                }
            }
            dh.fill(0.0);
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb2[r] += d;
                axpy(&mut gw2[r * h..(r + 1) * h], d, h1);
                axpy(&mut dh, d, &v.w2[r * h..(r + 1) * h]);
            }
            // First hidden layer.
            for j in 0..h {
                if z1[j] >= 0.0 {
                    dz[j] = dh[j];
                } else {
                    dz[j] = dh[j] * v.a1;
                    ga1[0] += dh[j] * z1[j];
                }
            }
            let g = features.row(i);
            let mut d_row = d_input.as_deref_mut().map(|d| &mut d[i * c..(i + 1) * c]);
            if let Some(d) = d_row.as_deref_mut() {
                d.fill(0.0);
            }
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb1[r] += d;
                axpy(&mut gw1[r * c..(r + 1) * c], d, g);
                if let Some(dr) = d_row.as_deref_mut() {
                    axpy(dr, d, &v.w1[r * c..(r + 1) * c]);
                }
            }
        }
    }
}
