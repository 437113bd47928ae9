//! Network checkpoints.
//!
//! Layout (little-endian): architecture u8, member count u32, then per
//! member a u64 buffer count followed by each buffer as a u64 length and
//! its f64 values. Buffers are the parameters and batch-norm running
//! statistics in network order; the shapes come from rebuilding the
//! architecture for the stored series length.

use std::sync::Arc;

use super::layers::Layer;
use super::nets::{build_network, Arch};
use super::NeuralModel;
use crate::classifier::Model;
use crate::error::{Error, Result};
use crate::kernel::persist::{Reader, Writer};
use crate::rng;

pub fn encode(model: &NeuralModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(model.arch.tag());
    w.u32(model.members.len() as u32);
    for m in &model.members {
        let buffers = m.buffers();
        w.u64(buffers.len() as u64);
        buffers.iter().for_each(|b| w.f64s(b));
    }
    w.into_bytes()
}

pub fn decode(bytes: &[u8], series_len: usize) -> Result<Arc<dyn Model>> {
    let mut r = Reader::new(bytes);
    let arch = Arch::from_tag(r.u8()?).ok_or_else(|| Error::validation("unknown network architecture tag"))?;
    let n = r.u32()? as usize;
    if n == 0 || n > 64 {
        return Err(Error::validation(format!("implausible member count {n}")));
    }
    let mut members = Vec::with_capacity(n);
    for _ in 0..n {
        let mut net = build_network(arch, series_len, &mut rng::stream(0, 0))?;
        let count = r.u64()? as usize;
        let mut dst = net.buffers_mut();
        if count != dst.len() {
            return Err(Error::validation(format!("checkpoint has {count} buffers, {arch} expects {}", dst.len())));
        }
        for d in dst.iter_mut() {
            let values = r.f64s()?;
            if values.len() != d.len() {
                return Err(Error::dimension(d.len(), values.len()));
            }
            d.copy_from_slice(&values);
        }
        drop(dst);
        members.push(net);
    }
    r.finish()?;
    Ok(Arc::new(NeuralModel { arch, members }))
}
