//! Cascade specification and evaluation.

use super::ops::{apply_nonlinearity, conv3d, global_sum_pool, local_pool};
use super::{FilterBank, LocalPoolKind, Nonlinearity, Padding, Volume};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// One layer of a convolution-pooling cascade.
#[derive(Debug, Clone)]
pub enum Layer {
    Conv {
        bank: FilterBank,
        nonlinearity: Nonlinearity,
        padding: Padding,
    },
    Pool {
        kind: LocalPoolKind,
        size: (usize, usize, usize),
    },
    GlobalSumPool,
}

/// Ordered sequence of layers. A global sum pool may appear at most once
/// and only as the final layer; consecutive conv layers must be
/// channel-compatible.
#[derive(Debug, Clone, Default)]
pub struct CascadeSpec {
    layers: Vec<Layer>,
}

/// Result of running a cascade: a volume, or a per-channel vector when the
/// final layer is a global sum pool.
#[derive(Debug, Clone, PartialEq)]
pub enum CascadeOutput {
    Volume(Volume),
    Vector(Vec<f32>),
}

impl CascadeOutput {
    pub fn into_volume(self) -> Result<Volume> {
        match self {
            CascadeOutput::Volume(v) => Ok(v),
            CascadeOutput::Vector(_) => Err(Error::ShapeMismatch {
                expected: "volume output".into(),
                got: "vector output".into(),
            }),
        }
    }

    pub fn into_vector(self) -> Result<Vec<f32>> {
        match self {
            CascadeOutput::Vector(v) => Ok(v),
            CascadeOutput::Volume(_) => Err(Error::ShapeMismatch {
                expected: "vector output".into(),
                got: "volume output".into(),
            }),
        }
    }
}

impl CascadeSpec {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for (i, layer) in layers.iter().enumerate() {
            if matches!(layer, Layer::GlobalSumPool) && i + 1 != layers.len() {
                return Err(Error::invalid(
                    "layers",
                    format!("global sum pool at layer {i} must be the final layer"),
                ));
            }
        }
        Ok(CascadeSpec { layers })
    }

    pub fn empty() -> Self {
        CascadeSpec { layers: Vec::new() }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Checks channel compatibility of every conv layer against the channel
    /// count produced upstream of it, starting from `input_channels`.
    pub fn validate(&self, input_channels: usize) -> Result<()> {
        let mut channels = input_channels;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv { bank, .. } => {
                    if bank.c_in() != channels {
                        return Err(Error::ChannelMismatch {
                            input: channels,
                            expected: bank.c_in(),
                        }
                        .at_layer(i));
                    }
                    channels = bank.num_filters();
                }
                Layer::Pool { .. } | Layer::GlobalSumPool => {}
            }
        }
        Ok(())
    }
}

/// Applies the layers in order. Errors carry the index of the failing layer.
pub fn cascade_eval(spec: &CascadeSpec, input: &Volume) -> Result<CascadeOutput> {
    let mut current = input.clone();
    for (i, layer) in spec.layers().iter().enumerate() {
        match layer {
            Layer::Conv {
                bank,
                nonlinearity,
                padding,
            } => {
                let conv = conv3d(&current, bank, *padding).map_err(|e| e.at_layer(i))?;
                current = apply_nonlinearity(&conv, *nonlinearity).map_err(|e| e.at_layer(i))?;
            }
            Layer::Pool { kind, size } => {
                current = local_pool(&current, *kind, *size).map_err(|e| e.at_layer(i))?;
            }
            Layer::GlobalSumPool => {
                return Ok(CascadeOutput::Vector(global_sum_pool(&current)));
            }
        }
    }
    Ok(CascadeOutput::Volume(current))
}

/// Evaluates one cascade over many independent volumes. Outputs are ordered
/// identically to inputs regardless of scheduling.
pub fn cascade_eval_batch(spec: &CascadeSpec, inputs: &[Volume]) -> Result<Vec<CascadeOutput>> {
    inputs
        .par_iter()
        .map(|v| cascade_eval(spec, v))
        .collect::<Result<Vec<_>>>()
}
