use std::fmt;

use crate::error::{Error, Result};

/// Dense `(batch, channels, time)` array, time fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    b: usize,
    c: usize,
    t: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(b: usize, c: usize, t: usize) -> Self {
        Self { b, c, t, data: vec![0.0; b * c * t] }
    }

    pub fn from_vec(b: usize, c: usize, t: usize, data: Vec<f64>) -> Result<Self> {
        if b == 0 || c == 0 || t == 0 {
            return Err(Error::validation(format!("tensor shape ({b}, {c}, {t}) has an empty axis")));
        }
        if data.len() != b * c * t {
            return Err(Error::dimension(b * c * t, data.len()));
        }
        Ok(Self { b, c, t, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.b, self.c, self.t)
    }

    pub fn batch(&self) -> usize {
        self.b
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The `channels × time` block of one batch item.
    pub fn item(&self, i: usize) -> &[f64] {
        let n = self.c * self.t;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn item_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.c * self.t;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn row(&self, i: usize, c: usize) -> &[f64] {
        let at = (i * self.c + c) * self.t;
        &self.data[at..at + self.t]
    }

    pub fn row_mut(&mut self, i: usize, c: usize) -> &mut [f64] {
        let at = (i * self.c + c) * self.t;
        &mut self.data[at..at + self.t]
    }

    pub fn get(&self, i: usize, c: usize, t: usize) -> f64 {
        self.data[(i * self.c + c) * self.t + t]
    }

    pub fn add_assign(&mut self, other: &Tensor3) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    /// Stacks tensors with equal batch and time along the channel axis.
    pub fn concat_channels(parts: &[Tensor3]) -> Tensor3 {
        let (b, t) = (parts[0].b, parts[0].t);
        let c: usize = parts.iter().map(|p| p.c).sum();
        let mut out = Tensor3::zeros(b, c, t);
        for i in 0..b {
            let mut at = 0;
            for p in parts {
                let block = p.item(i);
                out.item_mut(i)[at..at + block.len()].copy_from_slice(block);
                at += block.len();
            }
        }
        out
    }

    /// Inverse of [`Tensor3::concat_channels`].
    pub fn split_channels(&self, sizes: &[usize]) -> Vec<Tensor3> {
        let mut parts: Vec<Tensor3> = sizes.iter().map(|&c| Tensor3::zeros(self.b, c, self.t)).collect();
        for i in 0..self.b {
            let mut at = 0;
            for p in parts.iter_mut() {
                let n = p.c * p.t;
                p.item_mut(i).copy_from_slice(&self.item(i)[at..at + n]);
                at += n;
            }
        }
        parts
    }
}

/// A trainable array with its gradient and Adam moments.
#[derive(Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl fmt::Debug for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Param({})", self.value.len())
    }
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let n = value.len();
        Self { value, grad: vec![0.0; n], m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}
