//! Flat little-endian records for fitted kernel models.
//!
//! Payload layout: variant u8, then
//! * rocket: kernel table, ridge
//! * minirocket: series length u64, dilation table, bias vector, ridge
//! * arsenal: member count u32, then a kernel table and ridge per member
//!
//! A kernel table is a u64 count followed by, per kernel, the weight count
//! u8, the weights, bias f64, dilation u64 and padded u8. A ridge is the
//! kept column indices, means, inverse deviations and weights (each a u64
//! count and values), then intercept and lambda as f64.

use std::sync::Arc;

use super::minirocket::MiniRocketParams;
use super::ridge::{Ridge, Standardizer};
use super::rocket::RandomKernel;
use super::{ArsenalModel, MiniRocketModel, RocketModel};
use crate::classifier::Model;
use crate::error::{Error, Result};

pub(crate) const TAG_ROCKET: u8 = 0;
pub(crate) const TAG_MINIROCKET: u8 = 1;
pub(crate) const TAG_ARSENAL: u8 = 2;

/// Upper bound on decoded element counts, against corrupt length fields.
const MAX_ITEMS: u64 = 1 << 28;

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn usizes(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u64(x as u64));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::validation("truncated record"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_ITEMS {
            return Err(Error::validation(format!("implausible element count {n}")));
        }
        Ok(n as usize)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count()?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.count()?;
        (0..n).map(|_| self.u64().map(|v| v as usize)).collect()
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::validation("trailing bytes in record"))
        }
    }
}

pub(crate) fn write_kernels(w: &mut Writer, kernels: &[RandomKernel]) {
    w.u64(kernels.len() as u64);
    for k in kernels {
        w.u8(k.weights.len() as u8);
        k.weights.iter().for_each(|&v| w.f64(v));
        w.f64(k.bias);
        w.u64(k.dilation as u64);
        w.u8(u8::from(k.padded));
    }
}

fn read_kernels(r: &mut Reader) -> Result<Vec<RandomKernel>> {
    let n = r.count()?;
    (0..n)
        .map(|_| {
            let len = r.u8()? as usize;
            let weights = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let bias = r.f64()?;
            let dilation = r.u64()? as usize;
            let padded = r.u8()? != 0;
            if len == 0 || dilation == 0 {
                return Err(Error::validation("corrupt kernel table"));
            }
            Ok(RandomKernel { weights, bias, dilation, padded })
        })
        .collect()
}

pub(crate) fn write_ridge(w: &mut Writer, ridge: &Ridge) {
    w.usizes(&ridge.standardizer.kept);
    w.f64s(&ridge.standardizer.mean);
    w.f64s(&ridge.standardizer.inv_std);
    w.f64s(&ridge.weights);
    w.f64(ridge.intercept);
    w.f64(ridge.lambda);
}

fn read_ridge(r: &mut Reader, n_features: usize) -> Result<Ridge> {
    let kept = r.usizes()?;
    let mean = r.f64s()?;
    let inv_std = r.f64s()?;
    let weights = r.f64s()?;
    let intercept = r.f64()?;
    let lambda = r.f64()?;
    let p = kept.len();
    if mean.len() != p || inv_std.len() != p || weights.len() != p || kept.iter().any(|&c| c >= n_features) {
        return Err(Error::validation("corrupt ridge record"));
    }
    Ok(Ridge { standardizer: Standardizer { kept, mean, inv_std }, weights, intercept, lambda })
}

pub(crate) fn write_minirocket(w: &mut Writer, p: &MiniRocketParams) {
    w.u64(p.series_len as u64);
    w.usizes(&p.dilations);
    w.usizes(&p.features_per_dilation);
    w.f64s(&p.biases);
}

fn read_minirocket(r: &mut Reader) -> Result<MiniRocketParams> {
    let series_len = r.u64()? as usize;
    let dilations = r.usizes()?;
    let features_per_dilation = r.usizes()?;
    let biases = r.f64s()?;
    let expected = features_per_dilation.iter().sum::<usize>() * super::minirocket::MINIROCKET_KERNELS;
    if dilations.len() != features_per_dilation.len() || biases.len() != expected {
        return Err(Error::validation("corrupt MiniRocket parameters"));
    }
    if dilations.iter().any(|&d| d == 0 || 8 * d >= series_len) {
        return Err(Error::validation("MiniRocket dilation does not fit the series length"));
    }
    Ok(MiniRocketParams { series_len, dilations, features_per_dilation, biases })
}

fn check_fit(kernels: &[RandomKernel], series_len: usize) -> Result<()> {
    if kernels.iter().any(|k| k.output_len(series_len).is_none()) {
        return Err(Error::validation(format!("stored kernel does not fit series length {series_len}")));
    }
    Ok(())
}

/// Rebuilds a kernel model from its payload for series of `series_len`.
pub fn decode(bytes: &[u8], series_len: usize) -> Result<Arc<dyn Model>> {
    let mut r = Reader::new(bytes);
    let model: Arc<dyn Model> = match r.u8()? {
        TAG_ROCKET => {
            let kernels = read_kernels(&mut r)?;
            check_fit(&kernels, series_len)?;
            let ridge = read_ridge(&mut r, 2 * kernels.len())?;
            Arc::new(RocketModel { kernels, ridge })
        }
        TAG_MINIROCKET => {
            let params = read_minirocket(&mut r)?;
            if params.series_len != series_len {
                return Err(Error::dimension(series_len, params.series_len));
            }
            let ridge = read_ridge(&mut r, params.n_features())?;
            Arc::new(MiniRocketModel { params, ridge })
        }
        TAG_ARSENAL => {
            let m = r.u32()? as usize;
            let members = (0..m)
                .map(|_| {
                    let kernels = read_kernels(&mut r)?;
                    check_fit(&kernels, series_len)?;
                    let ridge = read_ridge(&mut r, 2 * kernels.len())?;
                    Ok(RocketModel { kernels, ridge })
                })
                .collect::<Result<Vec<_>>>()?;
            if members.is_empty() {
                return Err(Error::validation("Arsenal record has no members"));
            }
            Arc::new(ArsenalModel { members })
        }
        t => return Err(Error::validation(format!("unknown kernel model tag {t}"))),
    };
    r.finish()?;
    Ok(model)
}
