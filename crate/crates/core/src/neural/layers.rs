//! Layers with hand-written backward passes.
//!
//! `forward` runs in training mode and caches what `backward` needs;
//! `infer` is the pure evaluation-mode pass. Parameter gradients accumulate
//! until the optimizer clears them.

use std::fmt;

use rand::Rng;

use super::tensor::{Param, Tensor3};
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

pub trait Layer: Send + Sync + fmt::Debug {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3>;

    fn infer(&self, x: &Tensor3) -> Result<Tensor3>;

    /// Gradient with respect to the input of the last `forward` call.
    fn backward(&mut self, grad: &Tensor3) -> Tensor3;

    fn params(&mut self) -> Vec<&mut Param> {
        Vec::new()
    }

    /// Parameter values followed by running statistics.
    fn buffers(&self) -> Vec<&[f64]> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        Vec::new()
    }

    /// Drops cached activations.
    fn clear(&mut self) {}
}

/// `c = a·b + beta·c` for strided `a (m×k)` and `b (k×n)`, row-major `c`.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_rs: usize, a_cs: usize, b: &[f64], b_rs: usize, b_cs: usize, beta: f64, c: &mut [f64]) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * a_rs + (k - 1) * a_cs);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * b_rs + (n - 1) * b_cs);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts bound every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_rs as isize,
            a_cs as isize,
            b.as_ptr(),
            b_rs as isize,
            b_cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn uniform(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn load(dst: &mut [f64], src: Vec<f64>, what: &str) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::validation(format!("{what}: expected {} values, got {}", dst.len(), src.len())));
    }
    dst.copy_from_slice(&src);
    Ok(())
}

/// Cross-correlation at stride 1 with "same" zero padding: `(k-1)/2`
/// samples on the left, the rest on the right.
#[derive(Clone, Debug)]
pub struct Conv1d {
    in_ch: usize,
    out_ch: usize,
    k: usize,
    weight: Param,
    bias: Param,
    input: Option<Tensor3>,
}

impl Conv1d {
    /// Weights and bias uniform in `±1/sqrt(in_ch·k)`.
    pub fn new(in_ch: usize, out_ch: usize, k: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / ((in_ch * k) as f64).sqrt();
        let weight = uniform(rng, out_ch * in_ch * k, bound);
        let bias = uniform(rng, out_ch, bound);
        Self { in_ch, out_ch, k, weight: Param::new(weight), bias: Param::new(bias), input: None }
    }

    /// Weights laid out `(out_ch, in_ch, k)`.
    pub fn from_weights(in_ch: usize, out_ch: usize, k: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || k == 0 {
            return Err(Error::validation("convolution needs positive channels and kernel size"));
        }
        if weight.len() != out_ch * in_ch * k {
            return Err(Error::dimension(out_ch * in_ch * k, weight.len()));
        }
        if bias.len() != out_ch {
            return Err(Error::dimension(out_ch, bias.len()));
        }
        Ok(Self { in_ch, out_ch, k, weight: Param::new(weight), bias: Param::new(bias), input: None })
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    fn pad_left(&self) -> usize {
        (self.k - 1) / 2
    }

    /// Range of outputs `i` whose tap at offset `s` lands inside `[0, t)`,
    /// if any.
    fn valid(t: usize, s: isize) -> Option<(usize, usize)> {
        let lo = (-s).max(0);
        let hi = (t as isize - s).min(t as isize);
        (lo < hi).then_some((lo as usize, hi as usize))
    }

    fn im2col(&self, x: &[f64], t: usize, col: &mut [f64]) {
        let pl = self.pad_left() as isize;
        col.iter_mut().for_each(|v| *v = 0.0);
        for ci in 0..self.in_ch {
            let row = &x[ci * t..(ci + 1) * t];
            for j in 0..self.k {
                let s = j as isize - pl;
                let Some((lo, hi)) = Self::valid(t, s) else { continue };
                let dst = &mut col[(ci * self.k + j) * t..(ci * self.k + j + 1) * t];
                let src_lo = (lo as isize + s) as usize;
                dst[lo..hi].copy_from_slice(&row[src_lo..src_lo + hi - lo]);
            }
        }
    }

    fn col2im(&self, col: &[f64], t: usize, x: &mut [f64]) {
        let pl = self.pad_left() as isize;
        for ci in 0..self.in_ch {
            for j in 0..self.k {
                let s = j as isize - pl;
                let Some((lo, hi)) = Self::valid(t, s) else { continue };
                let src = &col[(ci * self.k + j) * t..(ci * self.k + j + 1) * t];
                let src_lo = (lo as isize + s) as usize;
                let row = &mut x[ci * t + src_lo..ci * t + src_lo + hi - lo];
                row.iter_mut().zip(&src[lo..hi]).for_each(|(a, b)| *a += b);
            }
        }
    }

    fn run(&self, x: &Tensor3) -> Result<Tensor3> {
        let (b, c, t) = x.shape();
        if c != self.in_ch {
            return Err(Error::dimension(self.in_ch, c));
        }
        let ink = self.in_ch * self.k;
        let mut out = Tensor3::zeros(b, self.out_ch, t);
        let mut col = vec![0.0; ink * t];
        for i in 0..b {
            self.im2col(x.item(i), t, &mut col);
            let y = out.item_mut(i);
            gemm(self.out_ch, ink, t, &self.weight.value, ink, 1, &col, t, 1, 0.0, y);
            for (o, &bias) in self.bias.value.iter().enumerate() {
                y[o * t..(o + 1) * t].iter_mut().for_each(|v| *v += bias);
            }
        }
        Ok(out)
    }
}

impl Layer for Conv1d {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let out = self.run(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        self.run(x)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let x = self.input.as_ref().expect("backward before forward");
        let (b, _, t) = x.shape();
        let ink = self.in_ch * self.k;
        let mut gx = Tensor3::zeros(b, self.in_ch, t);
        let mut col = vec![0.0; ink * t];
        let mut gcol = vec![0.0; ink * t];
        for i in 0..b {
            let gy = grad.item(i);
            self.im2col(x.item(i), t, &mut col);
            gemm(self.out_ch, t, ink, gy, t, 1, &col, 1, t, 1.0, &mut self.weight.grad);
            gemm(ink, self.out_ch, t, &self.weight.value, 1, ink, gy, t, 1, 0.0, &mut gcol);
            self.col2im(&gcol, t, gx.item_mut(i));
            for (o, g) in self.bias.grad.iter_mut().enumerate() {
                *g += gy[o * t..(o + 1) * t].iter().sum::<f64>();
            }
        }
        gx
    }

    fn params(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn buffers(&self) -> Vec<&[f64]> {
        vec![&self.weight.value, &self.bias.value]
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight.value, &mut self.bias.value]
    }

    fn clear(&mut self) {
        self.input = None;
    }
}

/// Per-channel normalization over batch and time.
#[derive(Clone, Debug)]
pub struct BatchNorm1d {
    gamma: Param,
    beta: Param,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    cache: Option<(Tensor3, Vec<f64>)>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            cache: None,
        }
    }

    pub fn set_affine(&mut self, gamma: Vec<f64>, beta: Vec<f64>) -> Result<()> {
        load(&mut self.gamma.value, gamma, "batch-norm scale")?;
        load(&mut self.beta.value, beta, "batch-norm shift")
    }

    pub fn running_stats(&self) -> (&[f64], &[f64]) {
        (&self.running_mean, &self.running_var)
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.channels() != self.gamma.len() {
            return Err(Error::dimension(self.gamma.len(), x.channels()));
        }
        Ok(())
    }
}

impl Layer for BatchNorm1d {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        self.check(x)?;
        let (b, c, t) = x.shape();
        if b < 2 {
            return Err(Error::validation("batch normalization needs a batch of at least 2 in training mode"));
        }
        let n = (b * t) as f64;
        let mut xhat = x.clone();
        let mut out = Tensor3::zeros(b, c, t);
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let mean = (0..b).map(|i| x.row(i, ch).iter().sum::<f64>()).sum::<f64>() / n;
            let var = (0..b).map(|i| x.row(i, ch).iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sum::<f64>() / n;
            let inv = 1.0 / (var + BN_EPS).sqrt();
            inv_std[ch] = inv;
            let (g, be) = (self.gamma.value[ch], self.beta.value[ch]);
            for i in 0..b {
                let h = xhat.row_mut(i, ch);
                h.iter_mut().for_each(|v| *v = (*v - mean) * inv);
                out.row_mut(i, ch).iter_mut().zip(h.iter()).for_each(|(o, h)| *o = g * h + be);
            }
            self.running_mean[ch] = (1.0 - BN_MOMENTUM) * self.running_mean[ch] + BN_MOMENTUM * mean;
            let unbiased = var * n / (n - 1.0);
            self.running_var[ch] = (1.0 - BN_MOMENTUM) * self.running_var[ch] + BN_MOMENTUM * unbiased;
        }
        self.cache = Some((xhat, inv_std));
        Ok(out)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check(x)?;
        let (b, c, _) = x.shape();
        let mut out = x.clone();
        for ch in 0..c {
            let inv = 1.0 / (self.running_var[ch] + BN_EPS).sqrt();
            let (m, g, be) = (self.running_mean[ch], self.gamma.value[ch], self.beta.value[ch]);
            for i in 0..b {
                out.row_mut(i, ch).iter_mut().for_each(|v| *v = g * (*v - m) * inv + be);
            }
        }
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let (xhat, inv_std) = self.cache.as_ref().expect("backward before forward");
        let (b, c, t) = grad.shape();
        let n = (b * t) as f64;
        let mut gx = Tensor3::zeros(b, c, t);
        for ch in 0..c {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for i in 0..b {
                for (g, h) in grad.row(i, ch).iter().zip(xhat.row(i, ch)) {
                    sum_g += g;
                    sum_gx += g * h;
                }
            }
            self.gamma.grad[ch] += sum_gx;
            self.beta.grad[ch] += sum_g;
            let scale = self.gamma.value[ch] * inv_std[ch] / n;
            for i in 0..b {
                let (g, h) = (grad.row(i, ch), xhat.row(i, ch));
                for (k, o) in gx.row_mut(i, ch).iter_mut().enumerate() {
                    *o = scale * (n * g[k] - sum_g - h[k] * sum_gx);
                }
            }
        }
        gx
    }

    fn params(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&[f64]> {
        vec![&self.gamma.value, &self.beta.value, &self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.gamma.value, &mut self.beta.value, &mut self.running_mean, &mut self.running_var]
    }

    fn clear(&mut self) {
        self.cache = None;
    }
}

#[derive(Clone, Debug, Default)]
pub struct Relu {
    input: Option<Tensor3>,
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let out = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        let mut out = x.clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let x = self.input.as_ref().expect("backward before forward");
        let mut g = grad.clone();
        g.data_mut().iter_mut().zip(x.data()).for_each(|(g, &v)| {
            if v <= 0.0 {
                *g = 0.0;
            }
        });
        g
    }

    fn clear(&mut self) {
        self.input = None;
    }
}

/// Max pooling at stride 1 with "same" padding that never wins.
#[derive(Clone, Debug)]
pub struct MaxPool1d {
    k: usize,
    argmax: Option<(Vec<usize>, (usize, usize, usize))>,
}

impl MaxPool1d {
    pub fn new(k: usize) -> Self {
        Self { k, argmax: None }
    }

    fn run(&self, x: &Tensor3, mut record: Option<&mut Vec<usize>>) -> Tensor3 {
        let (b, c, t) = x.shape();
        let pl = (self.k - 1) / 2;
        let mut out = Tensor3::zeros(b, c, t);
        for i in 0..b {
            for ch in 0..c {
                let row = x.row(i, ch);
                let o = out.row_mut(i, ch);
                for (p, slot) in o.iter_mut().enumerate() {
                    let lo = p.saturating_sub(pl);
                    let hi = (p + self.k - pl).min(t);
                    let mut best = lo;
                    for q in lo + 1..hi {
                        if row[q] > row[best] {
                            best = q;
                        }
                    }
                    *slot = row[best];
                    if let Some(r) = record.as_deref_mut() {
                        r.push(best);
                    }
                }
            }
        }
        out
    }
}

impl Layer for MaxPool1d {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let mut idx = Vec::with_capacity(x.data().len());
        let out = self.run(x, Some(&mut idx));
        self.argmax = Some((idx, x.shape()));
        Ok(out)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        Ok(self.run(x, None))
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let (idx, (b, c, t)) = self.argmax.as_ref().expect("backward before forward");
        let mut gx = Tensor3::zeros(*b, *c, *t);
        for (r, chunk) in grad.data().chunks(*t).enumerate() {
            let row = &mut gx.data_mut()[r * t..(r + 1) * t];
            for (p, g) in chunk.iter().enumerate() {
                row[idx[r * t + p]] += g;
            }
        }
        gx
    }

    fn clear(&mut self) {
        self.argmax = None;
    }
}

/// Global average pooling to a time axis of length 1.
#[derive(Clone, Debug, Default)]
pub struct Gap {
    time: usize,
}

impl Layer for Gap {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        self.time = x.time();
        self.infer(x)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        let (b, c, t) = x.shape();
        let data = x.data().chunks(t).map(|r| r.iter().sum::<f64>() / t as f64).collect();
        Tensor3::from_vec(b, c, 1, data)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let (b, c, _) = grad.shape();
        let t = self.time;
        let data = grad.data().iter().flat_map(|g| std::iter::repeat_n(g / t as f64, t)).collect();
        Tensor3::from_vec(b, c, t, data).expect("shape from forward")
    }
}

/// Dense layer on `(batch, in, 1)` inputs.
#[derive(Clone, Debug)]
pub struct Linear {
    inp: usize,
    out: usize,
    weight: Param,
    bias: Param,
    input: Option<Tensor3>,
}

impl Linear {
    pub fn new(inp: usize, out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inp as f64).sqrt();
        let weight = Param::new(uniform(rng, out * inp, bound));
        let bias = Param::new(uniform(rng, out, bound));
        Self { inp, out, weight, bias, input: None }
    }

    fn run(&self, x: &Tensor3) -> Result<Tensor3> {
        let (b, c, t) = x.shape();
        if c != self.inp || t != 1 {
            return Err(Error::dimension(self.inp, c * t));
        }
        let mut out = Tensor3::zeros(b, self.out, 1);
        for i in 0..b {
            let xi = x.item(i);
            for (o, y) in out.item_mut(i).iter_mut().enumerate() {
                let w = &self.weight.value[o * self.inp..(o + 1) * self.inp];
                *y = self.bias.value[o] + w.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(out)
    }
}

impl Layer for Linear {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let out = self.run(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        self.run(x)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let x = self.input.as_ref().expect("backward before forward");
        let b = x.batch();
        let mut gx = Tensor3::zeros(b, self.inp, 1);
        for i in 0..b {
            let (xi, gi) = (x.item(i), grad.item(i));
            for (o, &g) in gi.iter().enumerate() {
                self.bias.grad[o] += g;
                let row = o * self.inp..(o + 1) * self.inp;
                self.weight.grad[row.clone()].iter_mut().zip(xi).for_each(|(w, x)| *w += g * x);
                gx.item_mut(i).iter_mut().zip(&self.weight.value[row]).for_each(|(d, w)| *d += g * w);
            }
        }
        gx
    }

    fn params(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn buffers(&self) -> Vec<&[f64]> {
        vec![&self.weight.value, &self.bias.value]
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight.value, &mut self.bias.value]
    }

    fn clear(&mut self) {
        self.input = None;
    }
}

#[derive(Debug, Default)]
pub struct Sequential {
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new(layers: Vec<Box<dyn Layer>>) -> Self {
        Self { layers }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl Layer for Sequential {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        let mut h = x.clone();
        for l in &self.layers {
            h = l.infer(&h)?;
        }
        Ok(h)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let mut g = grad.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g);
        }
        g
    }

    fn params(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params()).collect()
    }

    fn buffers(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.buffers()).collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.buffers_mut()).collect()
    }

    fn clear(&mut self) {
        self.layers.iter_mut().for_each(|l| l.clear());
    }
}

/// `relu(main(x) + shortcut(x))`, the shortcut being the identity when absent.
#[derive(Debug)]
pub struct Residual {
    main: Sequential,
    shortcut: Option<Sequential>,
    relu: Relu,
}

impl Residual {
    pub fn new(main: Sequential, shortcut: Option<Sequential>) -> Self {
        Self { main, shortcut, relu: Relu::default() }
    }
}

impl Layer for Residual {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let mut m = self.main.forward(x)?;
        match &mut self.shortcut {
            Some(s) => m.add_assign(&s.forward(x)?),
            None => m.add_assign(x),
        }
        self.relu.forward(&m)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        let mut m = self.main.infer(x)?;
        match &self.shortcut {
            Some(s) => m.add_assign(&s.infer(x)?),
            None => {
                if m.shape() != x.shape() {
                    return Err(Error::dimension(x.channels(), m.channels()));
                }
                m.add_assign(x)
            }
        }
        self.relu.infer(&m)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let g = self.relu.backward(grad);
        let mut gx = self.main.backward(&g);
        match &mut self.shortcut {
            Some(s) => gx.add_assign(&s.backward(&g)),
            None => gx.add_assign(&g),
        }
        gx
    }

    fn params(&mut self) -> Vec<&mut Param> {
        let mut p = self.main.params();
        if let Some(s) = &mut self.shortcut {
            p.extend(s.params());
        }
        p
    }

    fn buffers(&self) -> Vec<&[f64]> {
        let mut b = self.main.buffers();
        if let Some(s) = &self.shortcut {
            b.extend(s.buffers());
        }
        b
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut b = self.main.buffers_mut();
        if let Some(s) = &mut self.shortcut {
            b.extend(s.buffers_mut());
        }
        b
    }

    fn clear(&mut self) {
        self.main.clear();
        if let Some(s) = &mut self.shortcut {
            s.clear();
        }
        self.relu.clear();
    }
}

pub const INCEPTION_FILTERS: usize = 32;
pub const INCEPTION_KERNELS: [usize; 3] = [10, 20, 40];

/// Bottleneck (multichannel input only), three parallel convolutions, a
/// max-pool branch with a 1×1 convolution, concatenation, ReLU, batch norm.
#[derive(Debug)]
pub struct Inception {
    bottleneck: Option<Conv1d>,
    convs: Vec<Conv1d>,
    pool: MaxPool1d,
    pool_conv: Conv1d,
    relu: Relu,
    bn: BatchNorm1d,
}

impl Inception {
    pub fn new(in_ch: usize, rng: &mut impl Rng) -> Self {
        let bottleneck = (in_ch > 1).then(|| Conv1d::new(in_ch, INCEPTION_FILTERS, 1, rng));
        let z_ch = if in_ch > 1 { INCEPTION_FILTERS } else { in_ch };
        let convs = INCEPTION_KERNELS.iter().map(|&k| Conv1d::new(z_ch, INCEPTION_FILTERS, k, rng)).collect();
        let pool_conv = Conv1d::new(in_ch, INCEPTION_FILTERS, 1, rng);
        Self {
            bottleneck,
            convs,
            pool: MaxPool1d::new(3),
            pool_conv,
            relu: Relu::default(),
            bn: BatchNorm1d::new(Self::out_channels()),
        }
    }

    pub fn out_channels() -> usize {
        INCEPTION_FILTERS * (INCEPTION_KERNELS.len() + 1)
    }

    fn branch_sizes(&self) -> Vec<usize> {
        vec![INCEPTION_FILTERS; self.convs.len() + 1]
    }
}

impl Layer for Inception {
    fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        let z = match &mut self.bottleneck {
            Some(b) => b.forward(x)?,
            None => x.clone(),
        };
        let mut parts = Vec::with_capacity(self.convs.len() + 1);
        for c in &mut self.convs {
            parts.push(c.forward(&z)?);
        }
        let pooled = self.pool.forward(x)?;
        parts.push(self.pool_conv.forward(&pooled)?);
        let h = self.relu.forward(&Tensor3::concat_channels(&parts))?;
        self.bn.forward(&h)
    }

    fn infer(&self, x: &Tensor3) -> Result<Tensor3> {
        let z = match &self.bottleneck {
            Some(b) => b.infer(x)?,
            None => x.clone(),
        };
        let mut parts = Vec::with_capacity(self.convs.len() + 1);
        for c in &self.convs {
            parts.push(c.infer(&z)?);
        }
        parts.push(self.pool_conv.infer(&self.pool.infer(x)?)?);
        let h = self.relu.infer(&Tensor3::concat_channels(&parts))?;
        self.bn.infer(&h)
    }

    fn backward(&mut self, grad: &Tensor3) -> Tensor3 {
        let g = self.relu.backward(&self.bn.backward(grad));
        let mut parts = g.split_channels(&self.branch_sizes());
        let g_pool = parts.pop().expect("pool branch");
        let mut gx = self.pool.backward(&self.pool_conv.backward(&g_pool));
        let mut gz: Option<Tensor3> = None;
        for (c, gp) in self.convs.iter_mut().zip(&parts) {
            let d = c.backward(gp);
            match &mut gz {
                Some(acc) => acc.add_assign(&d),
                None => gz = Some(d),
            }
        }
        let gz = gz.expect("at least one convolution branch");
        match &mut self.bottleneck {
            Some(b) => gx.add_assign(&b.backward(&gz)),
            None => gx.add_assign(&gz),
        }
        gx
    }

    fn params(&mut self) -> Vec<&mut Param> {
        let mut p: Vec<&mut Param> = Vec::new();
        if let Some(b) = &mut self.bottleneck {
            p.extend(b.params());
        }
        self.convs.iter_mut().for_each(|c| p.extend(c.params()));
        p.extend(self.pool_conv.params());
        p.extend(self.bn.params());
        p
    }

    fn buffers(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        if let Some(b) = &self.bottleneck {
            v.extend(b.buffers());
        }
        self.convs.iter().for_each(|c| v.extend(c.buffers()));
        v.extend(self.pool_conv.buffers());
        v.extend(self.bn.buffers());
        v
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        if let Some(b) = &mut self.bottleneck {
            v.extend(b.buffers_mut());
        }
        self.convs.iter_mut().for_each(|c| v.extend(c.buffers_mut()));
        v.extend(self.pool_conv.buffers_mut());
        v.extend(self.bn.buffers_mut());
        v
    }

    fn clear(&mut self) {
        if let Some(b) = &mut self.bottleneck {
            b.clear();
        }
        self.convs.iter_mut().for_each(Conv1d::clear);
        self.pool.clear();
        self.pool_conv.clear();
        self.relu.clear();
        self.bn.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_tensor(b: usize, c: usize, t: usize, seed: u64) -> Tensor3 {
        let mut r = rng::stream(seed, 77);
        Tensor3::from_vec(b, c, t, (0..b * c * t).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn probe(layer: &mut dyn Layer, x: &Tensor3, r: &Tensor3) -> f64 {
        let y = layer.forward(x).unwrap();
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
    }

    /// Central differences at h = 1e-5 on up to 10 coordinates of the input
    /// and of every parameter, for the loss `sum(r * layer(x))`.
    fn grad_check(layer: &mut dyn Layer, x: &Tensor3, seed: u64) {
        let h = 1e-5;
        let y = layer.forward(x).unwrap();
        let (b, c, t) = y.shape();
        let r = random_tensor(b, c, t, seed + 1);
        layer.params().into_iter().for_each(Param::zero_grad);
        layer.forward(x).unwrap();
        let gx = layer.backward(&r);
        let grads: Vec<Vec<f64>> = layer.params().into_iter().map(|p| p.grad.clone()).collect();
        let mut pick = rng::stream(seed, 5);

        for _ in 0..10 {
            let i = pick.random_range(0..x.data().len());
            let (mut up, mut down) = (x.clone(), x.clone());
            up.data_mut()[i] += h;
            down.data_mut()[i] -= h;
            let numeric = (probe(layer, &up, &r) - probe(layer, &down, &r)) / (2.0 * h);
            let e = rel_err(gx.data()[i], numeric);
            assert!(e < 1e-6, "input {i}: {} vs {numeric} ({e:e})", gx.data()[i]);
        }
        for (p, g) in grads.iter().enumerate() {
            for _ in 0..10 {
                let i = pick.random_range(0..g.len());
                let orig = layer.params()[p].value[i];
                layer.params()[p].value[i] = orig + h;
                let up = probe(layer, x, &r);
                layer.params()[p].value[i] = orig - h;
                let down = probe(layer, x, &r);
                layer.params()[p].value[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let e = rel_err(g[i], numeric);
                assert!(e < 1e-6, "param {p}[{i}]: {} vs {numeric} ({e:e})", g[i]);
            }
        }
    }

    #[test]
    fn conv_examples() {
        let x = Tensor3::from_vec(1, 1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let diff = Conv1d::from_weights(1, 1, 3, vec![1.0, 0.0, -1.0], vec![0.0]).unwrap();
        assert_eq!(diff.infer(&x).unwrap().data(), &[-2.0, -2.0, 2.0]);
        let id = Conv1d::from_weights(1, 1, 3, vec![0.0, 1.0, 0.0], vec![0.0]).unwrap();
        assert_eq!(id.infer(&x).unwrap(), x);
        assert!(diff.infer(&Tensor3::zeros(1, 2, 3)).is_err());
    }

    #[test]
    fn conv_gradients() {
        let mut r = rng::stream(1, 1);
        for (cin, cout, k, t) in [(1, 3, 3, 9), (2, 4, 8, 11), (3, 2, 1, 6), (2, 2, 5, 4)] {
            let mut conv = Conv1d::new(cin, cout, k, &mut r);
            grad_check(&mut conv, &random_tensor(2, cin, t, k as u64), 10 + k as u64);
        }
    }

    #[test]
    fn batchnorm_identity_and_statistics() {
        let mut bn = BatchNorm1d::new(1);
        let x = Tensor3::from_vec(2, 1, 2, vec![-1.0, 1.0, 1.0, -1.0]).unwrap();
        let y = bn.forward(&x).unwrap();
        // Unit variance is scaled by 1/sqrt(1 + eps).
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-5);
        }
        let mut bn = BatchNorm1d::new(2);
        bn.set_affine(vec![2.0, 0.5], vec![3.0, -1.0]).unwrap();
        let y = bn.forward(&random_tensor(4, 2, 25, 3)).unwrap();
        for (ch, (g, b)) in [(2.0, 3.0), (0.5, -1.0)].into_iter().enumerate() {
            let v: Vec<f64> = (0..4).flat_map(|i| y.row(i, ch).to_vec()).collect();
            let mean = v.iter().sum::<f64>() / 100.0;
            let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 100.0).sqrt();
            assert!((mean - b).abs() < 1e-12);
            assert!((std - g).abs() < 1e-3 * g);
        }
        assert!(bn.forward(&random_tensor(1, 2, 25, 3)).is_err());
        let (_, var) = bn.running_stats();
        assert!(var.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn batchnorm_gradients() {
        let mut bn = BatchNorm1d::new(3);
        bn.set_affine(vec![1.5, 0.7, -0.4], vec![0.1, -0.3, 0.2]).unwrap();
        grad_check(&mut bn, &random_tensor(3, 3, 7, 8), 20);
    }

    #[test]
    fn elementwise_and_pooling_gradients() {
        grad_check(&mut Relu::default(), &random_tensor(2, 3, 10, 4), 30);
        grad_check(&mut MaxPool1d::new(3), &random_tensor(2, 2, 12, 5), 31);
        grad_check(&mut Gap::default(), &random_tensor(3, 2, 6, 6), 32);
        let mut r = rng::stream(2, 2);
        grad_check(&mut Linear::new(5, 2, &mut r), &random_tensor(3, 5, 1, 7), 33);
    }

    #[test]
    fn gap_examples() {
        let mut gap = Gap::default();
        let x = Tensor3::from_vec(1, 2, 2, vec![1.0, 3.0, 4.0, 4.0]).unwrap();
        assert_eq!(gap.forward(&x).unwrap().data(), &[2.0, 4.0]);
        let g = gap.backward(&Tensor3::from_vec(1, 2, 1, vec![1.0, 1.0]).unwrap());
        assert_eq!(g.data(), &[0.5; 4]);
    }

    #[test]
    fn maxpool_keeps_length() {
        let p = MaxPool1d::new(3);
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0, 5.0, 2.0, 0.0]).unwrap();
        assert_eq!(p.infer(&x).unwrap().data(), &[5.0, 5.0, 5.0, 2.0]);
    }

    #[test]
    fn composite_gradients() {
        let mut r = rng::stream(3, 3);
        let mut block = crate::neural::nets::resnet_block(2, 3, &mut r);
        grad_check(&mut block, &random_tensor(2, 2, 10, 9), 40);
        let mut same = crate::neural::nets::resnet_block(3, 3, &mut r);
        grad_check(&mut same, &random_tensor(2, 3, 9, 10), 41);
        grad_check(&mut Inception::new(1, &mut r), &random_tensor(2, 1, 12, 11), 42);
        grad_check(&mut Inception::new(4, &mut r), &random_tensor(2, 4, 12, 12), 43);
    }
}
