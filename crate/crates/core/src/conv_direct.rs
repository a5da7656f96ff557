//! Sliding-window reference convolution layer.
//!
//! This is the oracle the fast engine is checked against. Each output
//! element is `f(b_k + sum_m sum_p g[k,m][p] * x_m[v + p])`, summed with the
//! channel index outermost and kernel offsets in row-major order, in the
//! tensor's own precision.

use rayon::prelude::*;
use thiserror::Error;

use crate::synth::SynthError;
use crate::tensor::{increment, strides, DenseTensor, Scalar, TensorError};

#[derive(Debug, Error)]
pub enum ConvError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("channel mismatch: layer expects {expected} input channels, feature map has {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("transform/kernel size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid execution plan: {0}")]
    InvalidPlan(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    None,
    /// `max(z, 0)`
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::None => z,
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// `M` channels of identical spatial shape.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    channels: Vec<DenseTensor<T>>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: Vec<DenseTensor<T>>) -> Result<Self, ConvError> {
        let Some(first) = channels.first() else {
            return Err(ConvError::InvalidLayer("feature map needs at least one channel".into()));
        };
        if let Some((m, c)) = channels.iter().enumerate().find(|(_, c)| c.shape() != first.shape()) {
            return Err(TensorError::DimensionMismatch(format!(
                "channel {m} has shape {:?}, channel 0 has {:?}",
                c.shape(),
                first.shape()
            ))
            .into());
        }
        Ok(FeatureMap { channels })
    }

    /// Splits a `(M, I_1, ..., I_N)` tensor into channels.
    pub fn from_tensor(t: &DenseTensor<T>) -> Result<Self, ConvError> {
        if t.ndim() < 2 {
            return Err(ConvError::InvalidLayer(format!(
                "feature map tensor needs a channel axis plus spatial axes, got shape {:?}",
                t.shape()
            )));
        }
        let spatial = t.shape()[1..].to_vec();
        let n: usize = spatial.iter().product();
        let channels = t
            .as_slice()
            .chunks_exact(n)
            .map(|c| DenseTensor::new(spatial.clone(), c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        FeatureMap::new(channels)
    }

    /// Stacks channels into a `(M, I_1, ..., I_N)` tensor.
    pub fn to_tensor(&self) -> DenseTensor<T> {
        let mut shape = vec![self.channels.len()];
        shape.extend_from_slice(self.spatial_shape());
        let data = self
            .channels
            .iter()
            .flat_map(|c| c.as_slice().iter().copied())
            .collect();
        DenseTensor::new(shape, data).expect("consistent channels")
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn spatial_shape(&self) -> &[usize] {
        self.channels[0].shape()
    }

    pub fn channel(&self, m: usize) -> &DenseTensor<T> {
        &self.channels[m]
    }

    pub fn channels(&self) -> &[DenseTensor<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<DenseTensor<T>> {
        self.channels
    }

    /// Largest element-wise relative error against `reference`, measured
    /// against `max(|reference|, 1)`.
    pub fn max_rel_error(&self, reference: &Self) -> Result<f64, ConvError> {
        if self.num_channels() != reference.num_channels() {
            return Err(ConvError::ChannelMismatch {
                expected: reference.num_channels(),
                found: self.num_channels(),
            });
        }
        let mut worst = 0.0f64;
        for (a, b) in self.channels.iter().zip(&reference.channels) {
            worst = worst.max(a.max_rel_error(b)?);
        }
        Ok(worst)
    }
}

/// One convolutional layer: `K` kernels over `M` channels, each a `G^N`
/// spatial tensor, plus a bias per kernel and an activation.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayerSpec<T> {
    ndim: usize,
    channels: usize,
    kernels: usize,
    kernel_size: usize,
    /// `weights[k * M + m]` is `g^(k,m)`.
    weights: Vec<DenseTensor<T>>,
    bias: Vec<T>,
    activation: Activation,
}

impl<T: Scalar> ConvLayerSpec<T> {
    /// Builds a layer from a `(K, M, G, ..., G)` weight tensor.
    pub fn new(weights: &DenseTensor<T>, bias: Vec<T>, activation: Activation) -> Result<Self, ConvError> {
        let shape = weights.shape();
        if shape.len() < 3 {
            return Err(ConvError::InvalidLayer(format!(
                "weights must have shape (K, M, G, ...), got {shape:?}"
            )));
        }
        let (k, m) = (shape[0], shape[1]);
        let kernel_shape = shape[2..].to_vec();
        let n: usize = kernel_shape.iter().product();
        let kernels = weights
            .as_slice()
            .chunks_exact(n)
            .map(|c| DenseTensor::new(kernel_shape.clone(), c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_kernels(m, k, kernels, bias, activation)
    }

    /// `kernels[k * M + m]` is the kernel applied to channel `m` for output `k`.
    pub fn from_kernels(
        channels: usize,
        kernels: usize,
        weights: Vec<DenseTensor<T>>,
        bias: Vec<T>,
        activation: Activation,
    ) -> Result<Self, ConvError> {
        if channels == 0 || kernels == 0 {
            return Err(ConvError::InvalidLayer("M and K must be positive".into()));
        }
        if weights.len() != channels * kernels {
            return Err(ConvError::InvalidLayer(format!(
                "expected {} kernels (K={kernels} x M={channels}), got {}",
                channels * kernels,
                weights.len()
            )));
        }
        if bias.len() != kernels {
            return Err(ConvError::InvalidLayer(format!(
                "bias has {} entries for K={kernels}",
                bias.len()
            )));
        }
        let shape = weights[0].shape().to_vec();
        let g = shape[0];
        if shape.iter().any(|&e| e != g) {
            return Err(ConvError::InvalidLayer(format!(
                "kernels must be cubic (G^N), got {shape:?}"
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.shape() != shape.as_slice()) {
            return Err(ConvError::InvalidLayer(format!(
                "kernel shapes differ: {:?} vs {shape:?}",
                w.shape()
            )));
        }
        Ok(ConvLayerSpec {
            ndim: shape.len(),
            channels,
            kernels,
            kernel_size: g,
            weights,
            bias,
            activation,
        })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn kernels(&self) -> usize {
        self.kernels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn kernel(&self, k: usize, m: usize) -> &DenseTensor<T> {
        &self.weights[k * self.channels + m]
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Weights as a `(K, M, G, ..., G)` tensor.
    pub fn weights_tensor(&self) -> DenseTensor<T> {
        let mut shape = vec![self.kernels, self.channels];
        shape.extend(std::iter::repeat_n(self.kernel_size, self.ndim));
        let data = self.weights.iter().flat_map(|w| w.as_slice().iter().copied()).collect();
        DenseTensor::new(shape, data).expect("consistent kernels")
    }

    pub(crate) fn check_input(&self, x: &FeatureMap<T>) -> Result<Vec<usize>, ConvError> {
        if x.num_channels() != self.channels {
            return Err(ConvError::ChannelMismatch {
                expected: self.channels,
                found: x.num_channels(),
            });
        }
        output_shape(x.spatial_shape(), self.weights[0].shape())
    }
}

fn output_shape(input: &[usize], kernel: &[usize]) -> Result<Vec<usize>, ConvError> {
    if input.len() != kernel.len() {
        return Err(TensorError::DimensionMismatch(format!(
            "input has {} spatial axes, kernel has {}",
            input.len(),
            kernel.len()
        ))
        .into());
    }
    let bad: Vec<String> = input
        .iter()
        .zip(kernel)
        .enumerate()
        .filter(|(_, (i, k))| k > i)
        .map(|(a, (i, k))| format!("axis {a}: input {i} < kernel {k}"))
        .collect();
    if !bad.is_empty() {
        return Err(TensorError::DimensionMismatch(format!("kernel larger than input ({})", bad.join(", "))).into());
    }
    Ok(input.iter().zip(kernel).map(|(i, k)| i - k + 1).collect())
}

/// `acc[v] += sum_p g[p] * x[v + p]`, offsets `p` in row-major order.
fn accumulate_xcorr<T: Scalar>(x: &DenseTensor<T>, g: &DenseTensor<T>, out_shape: &[usize], acc: &mut [T]) {
    let n = x.ndim();
    let xs = strides(x.shape());
    let run = out_shape[n - 1];
    let rows_shape = &out_shape[..n - 1];
    let rows: usize = rows_shape.iter().product();
    let src = x.as_slice();
    let mut p = vec![0usize; n];
    for &w in g.as_slice() {
        let mut v = vec![0usize; n - 1];
        for row in 0..rows {
            let mut base = p[n - 1];
            for a in 0..n - 1 {
                base += (v[a] + p[a]) * xs[a];
            }
            let s = &src[base..base + run];
            let d = &mut acc[row * run..(row + 1) * run];
            for (dv, &sv) in d.iter_mut().zip(s) {
                *dv += w * sv;
            }
            increment(&mut v, rows_shape);
        }
        increment(&mut p, g.shape());
    }
}

/// Valid N-dimensional cross-correlation of `x` by `g`.
pub fn direct_convolve_spatial<T: Scalar>(x: &DenseTensor<T>, g: &DenseTensor<T>) -> Result<DenseTensor<T>, ConvError> {
    let out_shape = output_shape(x.shape(), g.shape())?;
    let mut out = DenseTensor::zeros(out_shape.clone())?;
    accumulate_xcorr(x, g, &out_shape, out.as_mut_slice());
    Ok(out)
}

fn output_channel<T: Scalar>(
    x: &FeatureMap<T>,
    layer: &ConvLayerSpec<T>,
    k: usize,
    out_shape: &[usize],
) -> DenseTensor<T> {
    let mut acc = DenseTensor::zeros(out_shape.to_vec()).expect("valid shape");
    for m in 0..layer.channels {
        accumulate_xcorr(x.channel(m), layer.kernel(k, m), out_shape, acc.as_mut_slice());
    }
    let (b, f) = (layer.bias[k], layer.activation);
    for v in acc.as_mut_slice() {
        *v = f.apply(*v + b);
    }
    acc
}

/// Reference layer forward pass.
pub fn direct_layer_forward<T: Scalar>(
    x: &FeatureMap<T>,
    layer: &ConvLayerSpec<T>,
) -> Result<FeatureMap<T>, ConvError> {
    let out_shape = layer.check_input(x)?;
    let channels = (0..layer.kernels)
        .map(|k| output_channel(x, layer, k, &out_shape))
        .collect();
    FeatureMap::new(channels)
}

/// [`direct_layer_forward`] parallelised over output channels on `threads`
/// workers; results are identical to the sequential version.
pub fn direct_layer_forward_threaded<T: Scalar>(
    x: &FeatureMap<T>,
    layer: &ConvLayerSpec<T>,
    threads: usize,
) -> Result<FeatureMap<T>, ConvError> {
    let out_shape = layer.check_input(x)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ConvError::ThreadPool(e.to_string()))?;
    let channels = pool.install(|| {
        (0..layer.kernels)
            .into_par_iter()
            .map(|k| output_channel(x, layer, k, &out_shape))
            .collect()
    });
    FeatureMap::new(channels)
}
