//! ConvNet, ResNet and InceptionTime bodies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::layers::{BatchNorm1d, Conv1d, Gap, Inception, Layer, Linear, Relu, Residual, Sequential};
use crate::classifier::ClassifierKind;
use crate::error::{Error, Result};

pub const CONVNET_FILTERS: [usize; 3] = [128, 256, 128];
pub const CONVNET_KERNELS: [usize; 3] = [8, 5, 3];
pub const RESNET_FILTERS: [usize; 3] = [64, 128, 128];
pub const INCEPTION_MODULES: usize = 3;
pub const INCEPTION_MEMBERS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arch {
    ConvNet,
    ResNet,
    InceptionTime,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::ConvNet, Arch::ResNet, Arch::InceptionTime];

    pub fn kind(self) -> ClassifierKind {
        match self {
            Arch::ConvNet => ClassifierKind::ConvNet,
            Arch::ResNet => ClassifierKind::ResNet,
            Arch::InceptionTime => ClassifierKind::InceptionTime,
        }
    }

    pub fn from_kind(kind: ClassifierKind) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.kind() == kind)
    }

    /// Shortest series each architecture accepts.
    pub fn min_len(self) -> usize {
        match self {
            Arch::InceptionTime => 40,
            _ => 8,
        }
    }

    /// Independently trained networks averaged at prediction time.
    pub fn members(self) -> usize {
        match self {
            Arch::InceptionTime => INCEPTION_MEMBERS,
            _ => 1,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        Self::ALL.iter().position(|a| *a == self).unwrap() as u8
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind().fmt(f)
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind: ClassifierKind = s.parse()?;
        Self::from_kind(kind).ok_or_else(|| Error::validation(format!("{kind} is not a neural classifier")))
    }
}

fn conv_bn(in_ch: usize, out_ch: usize, k: usize, relu: bool, rng: &mut impl Rng) -> Vec<Box<dyn Layer>> {
    let mut v: Vec<Box<dyn Layer>> = vec![Box::new(Conv1d::new(in_ch, out_ch, k, rng)), Box::new(BatchNorm1d::new(out_ch))];
    if relu {
        v.push(Box::new(Relu::default()));
    }
    v
}

fn head(channels: usize, rng: &mut impl Rng) -> Vec<Box<dyn Layer>> {
    vec![Box::new(Gap::default()), Box::new(Linear::new(channels, 2, rng))]
}

/// Three convolution / batch norm / ReLU blocks, global pooling, a linear
/// layer to two logits.
pub fn build_convnet(t: usize, rng: &mut impl Rng) -> Result<Sequential> {
    check_len(Arch::ConvNet, t)?;
    let mut layers = Vec::new();
    let mut in_ch = 1;
    for (&f, &k) in CONVNET_FILTERS.iter().zip(&CONVNET_KERNELS) {
        layers.extend(conv_bn(in_ch, f, k, true, rng));
        in_ch = f;
    }
    layers.extend(head(in_ch, rng));
    Ok(Sequential::new(layers))
}

/// One residual block: three convolutions with kernels 8, 5, 3 and a 1×1
/// convolution shortcut when the channel count changes.
pub fn resnet_block(in_ch: usize, filters: usize, rng: &mut impl Rng) -> Residual {
    let mut main = Vec::new();
    main.extend(conv_bn(in_ch, filters, CONVNET_KERNELS[0], true, rng));
    main.extend(conv_bn(filters, filters, CONVNET_KERNELS[1], true, rng));
    main.extend(conv_bn(filters, filters, CONVNET_KERNELS[2], false, rng));
    let shortcut = (in_ch != filters).then(|| Sequential::new(conv_bn(in_ch, filters, 1, false, rng)));
    Residual::new(Sequential::new(main), shortcut)
}

pub fn build_resnet(t: usize, rng: &mut impl Rng) -> Result<Sequential> {
    check_len(Arch::ResNet, t)?;
    let mut layers: Vec<Box<dyn Layer>> = Vec::new();
    let mut in_ch = 1;
    for &f in &RESNET_FILTERS {
        layers.push(Box::new(resnet_block(in_ch, f, rng)));
        in_ch = f;
    }
    layers.extend(head(in_ch, rng));
    Ok(Sequential::new(layers))
}

/// One InceptionTime member: three Inception modules, each wrapped in a
/// residual connection.
pub fn build_inception_network(t: usize, rng: &mut impl Rng) -> Result<Sequential> {
    check_len(Arch::InceptionTime, t)?;
    let out = Inception::out_channels();
    let mut layers: Vec<Box<dyn Layer>> = Vec::new();
    let mut in_ch = 1;
    for _ in 0..INCEPTION_MODULES {
        let module = Sequential::new(vec![Box::new(Inception::new(in_ch, rng))]);
        let shortcut = (in_ch != out).then(|| Sequential::new(conv_bn(in_ch, out, 1, false, rng)));
        layers.push(Box::new(Residual::new(module, shortcut)));
        in_ch = out;
    }
    layers.extend(head(in_ch, rng));
    Ok(Sequential::new(layers))
}

/// One freshly initialised member network of `arch`.
pub fn build_network(arch: Arch, t: usize, rng: &mut impl Rng) -> Result<Sequential> {
    match arch {
        Arch::ConvNet => build_convnet(t, rng),
        Arch::ResNet => build_resnet(t, rng),
        Arch::InceptionTime => build_inception_network(t, rng),
    }
}

fn check_len(arch: Arch, t: usize) -> Result<()> {
    if t < arch.min_len() {
        return Err(Error::validation(format!("{arch} needs series of at least {} samples, got {t}", arch.min_len())));
    }
    Ok(())
}
