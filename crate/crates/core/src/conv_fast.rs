//! Tiled transform-domain convolution engine.
//!
//! A layer forward pass runs, per block of `T` tiles:
//!
//! 1. gather each tile of each input channel and apply `B` along every axis;
//! 2. for each of the `D^N` transform coordinates `i`, multiply the
//!    `T x M` tile matrix by the cached `M x K` kernel matrix;
//! 3. apply `A` along every axis to every `(tile, kernel)` result, add the
//!    bias, apply the activation and write the `S^N` block into the output.
//!
//! Transform-domain buffers are blocked by coordinate: coordinates are
//! grouped in runs of `W` (the vector width) which sit innermost, so the
//! multiply-accumulate in step 2 always runs over `W` contiguous values. If
//! `D^N` is not a multiple of `W` the last run is zero-padded.
//!
//! Every output element is computed by the same sequence of floating-point
//! operations regardless of the block size or worker count, so results are
//! bit-identical across thread counts.

use rayon::prelude::*;

use crate::conv_direct::{Activation, ConvError, ConvLayerSpec, FeatureMap};
use crate::matrix::Matrix;
use crate::synth::TransformSet;
use crate::tensor::{mode_product_into, multi_mode_product, DenseTensor, Scalar, TilePlan};
use num_traits::ToPrimitive;

/// Work partitioning for [`FastConv`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecPlan {
    /// Tiles per work unit (`T`).
    pub tile_block_size: usize,
    pub workers: usize,
    /// Vector width `W` in elements.
    pub vector_width: usize,
}

pub const DEFAULT_VECTOR_WIDTH: usize = 8;

impl ExecPlan {
    pub fn new(tile_block_size: usize, workers: usize, vector_width: usize) -> Result<Self, ConvError> {
        if tile_block_size == 0 || workers == 0 || vector_width == 0 {
            return Err(ConvError::InvalidPlan(format!(
                "T={tile_block_size}, workers={workers}, W={vector_width}: all must be >= 1"
            )));
        }
        Ok(ExecPlan {
            tile_block_size,
            workers,
            vector_width,
        })
    }

    /// `T = K`, one worker per available core, `W = 8`.
    pub fn for_layer<T: Scalar>(layer: &ConvLayerSpec<T>) -> Self {
        ExecPlan {
            tile_block_size: layer.kernels(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            vector_width: DEFAULT_VECTOR_WIDTH,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_tile_block_size(mut self, t: usize) -> Self {
        self.tile_block_size = t.max(1);
        self
    }

    fn check(&self) -> Result<(), ConvError> {
        Self::new(self.tile_block_size, self.workers, self.vector_width).map(|_| ())
    }
}

/// A transform set converted to working precision.
#[derive(Clone, Debug, PartialEq)]
pub struct FastTransforms<T> {
    pub s: usize,
    pub g: usize,
    pub d: usize,
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Scalar> FastTransforms<T> {
    pub fn from_set(ts: &TransformSet) -> Result<Self, ConvError> {
        ts.check_dimensions()?;
        let conv = |m: &Matrix<crate::synth::Rational>| m.map(|v| T::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)));
        Ok(FastTransforms {
            s: ts.s,
            g: ts.g,
            d: ts.d,
            a: conv(&ts.a),
            b: conv(&ts.b),
            c: conv(&ts.c),
        })
    }
}

fn padded_len(len: usize, width: usize) -> usize {
    len.div_ceil(width) * width
}

/// Transformed kernels: for every coordinate `i`, an `M x K` matrix.
///
/// Stored as `[i / W][m][k][i % W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedKernelBank<T> {
    channels: usize,
    kernels: usize,
    tile_size: usize,
    ndim: usize,
    width: usize,
    coords: usize,
    padded: usize,
    data: Vec<T>,
}

impl<T: Scalar> TransformedKernelBank<T> {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn kernels(&self) -> usize {
        self.kernels
    }

    /// Number of transform coordinates, `D^N`.
    pub fn coords(&self) -> usize {
        self.coords
    }

    pub fn get(&self, i: usize, m: usize, k: usize) -> T {
        let (ib, lane) = (i / self.width, i % self.width);
        self.data[((ib * self.channels + m) * self.kernels + k) * self.width + lane]
    }

    /// The `M x K` matrix at coordinate `i`.
    pub fn matrix(&self, i: usize) -> Matrix<T> {
        Matrix::from_fn(self.channels, self.kernels, |m, k| self.get(i, m, k))
    }
}

/// Transformed input tiles: for every coordinate `i`, a `T x M` matrix.
///
/// Stored as `[i / W][t][m][i % W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedTileBatch<T> {
    tiles: usize,
    channels: usize,
    tile_size: usize,
    ndim: usize,
    width: usize,
    coords: usize,
    padded: usize,
    data: Vec<T>,
}

impl<T: Scalar> TransformedTileBatch<T> {
    pub fn tiles(&self) -> usize {
        self.tiles
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, i: usize, t: usize, m: usize) -> T {
        let (ib, lane) = (i / self.width, i % self.width);
        self.data[((ib * self.tiles + t) * self.channels + m) * self.width + lane]
    }

    pub fn matrix(&self, i: usize) -> Matrix<T> {
        Matrix::from_fn(self.tiles, self.channels, |t, m| self.get(i, t, m))
    }

    /// Unpacks the transformed tile `t`, channel `m` into a `D^N` tensor.
    pub fn tile(&self, t: usize, m: usize) -> DenseTensor<T> {
        let data = (0..self.coords).map(|i| self.get(i, t, m)).collect();
        DenseTensor::new(vec![self.tile_size; self.ndim], data).expect("tile shape")
    }
}

/// Transform-domain outputs: for every coordinate `i`, a `T x K` matrix.
///
/// Stored as `[i / W][t][k][i % W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedOutputs<T> {
    tiles: usize,
    kernels: usize,
    tile_size: usize,
    ndim: usize,
    width: usize,
    coords: usize,
    data: Vec<T>,
}

impl<T: Scalar> TransformedOutputs<T> {
    pub fn tiles(&self) -> usize {
        self.tiles
    }

    pub fn kernels(&self) -> usize {
        self.kernels
    }

    pub fn get(&self, i: usize, t: usize, k: usize) -> T {
        let (ib, lane) = (i / self.width, i % self.width);
        self.data[((ib * self.tiles + t) * self.kernels + k) * self.width + lane]
    }

    pub fn matrix(&self, i: usize) -> Matrix<T> {
        Matrix::from_fn(self.tiles, self.kernels, |t, k| self.get(i, t, k))
    }
}

/// Applies `u` along each of the first `ndim` axes of a buffer shaped
/// `[extent; ndim] ++ [batch]`, ping-ponging through `tmp`. The result is
/// left in `buf`.
fn transform_axes<T: Scalar>(
    buf: &mut Vec<T>,
    tmp: &mut Vec<T>,
    extent: usize,
    ndim: usize,
    batch: usize,
    u: &Matrix<T>,
) {
    let mut dims = vec![extent; ndim];
    dims.push(batch);
    for axis in 0..ndim {
        let len: usize = dims.iter().product();
        let mut next = dims.clone();
        next[axis] = u.rows();
        let next_len: usize = next.iter().product();
        tmp.resize(next_len, T::zero());
        mode_product_into(&buf[..len], &dims, axis, u, &mut tmp[..next_len]);
        std::mem::swap(buf, tmp);
        dims = next;
    }
    let len: usize = dims.iter().product();
    buf.truncate(len);
}

/// Writes `buf[i * batch + t]` (coordinate-major, tile-minor) into the
/// blocked layout `[i / W][t][c][i % W]` at column `c` of `cols`.
fn pack_blocked<T: Scalar>(buf: &[T], coords: usize, batch: usize, cols: usize, c: usize, width: usize, out: &mut [T]) {
    for i in 0..coords {
        let (ib, lane) = (i / width, i % width);
        let src = &buf[i * batch..(i + 1) * batch];
        for (t, &v) in src.iter().enumerate() {
            out[((ib * batch + t) * cols + c) * width + lane] = v;
        }
    }
}

fn unpack_blocked<T: Scalar>(
    src: &[T],
    coords: usize,
    batch: usize,
    cols: usize,
    c: usize,
    width: usize,
    buf: &mut [T],
) {
    for i in 0..coords {
        let (ib, lane) = (i / width, i % width);
        let dst = &mut buf[i * batch..(i + 1) * batch];
        for (t, v) in dst.iter_mut().enumerate() {
            *v = src[((ib * batch + t) * cols + c) * width + lane];
        }
    }
}

/// Maps every kernel `g^(k,m)` through `C` on every axis and packs the
/// results. Done once per layer; the bank is reused across forward passes.
pub fn transform_kernels<T: Scalar>(
    layer: &ConvLayerSpec<T>,
    ts: &FastTransforms<T>,
    vector_width: usize,
) -> Result<TransformedKernelBank<T>, ConvError> {
    if layer.kernel_size() != ts.g {
        return Err(ConvError::SizeMismatch(format!(
            "layer kernel size {} but transforms expect G={}",
            layer.kernel_size(),
            ts.g
        )));
    }
    if vector_width == 0 {
        return Err(ConvError::InvalidPlan("vector width must be >= 1".into()));
    }
    let (m_count, k_count, n) = (layer.channels(), layer.kernels(), layer.ndim());
    let coords = ts.d.pow(n as u32);
    let padded = padded_len(coords, vector_width);
    let mut data = vec![T::zero(); padded * m_count * k_count];
    let cs = vec![ts.c.clone(); n];
    for k in 0..k_count {
        for m in 0..m_count {
            let ghat = multi_mode_product(layer.kernel(k, m), &cs)?;
            for (i, &v) in ghat.as_slice().iter().enumerate() {
                let (ib, lane) = (i / vector_width, i % vector_width);
                data[((ib * m_count + m) * k_count + k) * vector_width + lane] = v;
            }
        }
    }
    Ok(TransformedKernelBank {
        channels: m_count,
        kernels: k_count,
        tile_size: ts.d,
        ndim: n,
        width: vector_width,
        coords,
        padded,
        data,
    })
}

/// Maps each `D^N` tile (all channels) through `B` on every axis and packs
/// the batch as `T x M` matrices per coordinate.
pub fn transform_tile_batch<T: Scalar>(
    tiles: &[FeatureMap<T>],
    ts: &FastTransforms<T>,
    vector_width: usize,
) -> Result<TransformedTileBatch<T>, ConvError> {
    let Some(first) = tiles.first() else {
        return Err(ConvError::SizeMismatch("empty tile batch".into()));
    };
    if vector_width == 0 {
        return Err(ConvError::InvalidPlan("vector width must be >= 1".into()));
    }
    let n = first.spatial_shape().len();
    let m_count = first.num_channels();
    let want = vec![ts.d; n];
    for (t, tile) in tiles.iter().enumerate() {
        if tile.spatial_shape() != want.as_slice() || tile.num_channels() != m_count {
            return Err(ConvError::SizeMismatch(format!(
                "tile {t} is {:?} x {} channels, expected {want:?} x {m_count}",
                tile.spatial_shape(),
                tile.num_channels()
            )));
        }
    }
    let batch = tiles.len();
    let coords = ts.d.pow(n as u32);
    let padded = padded_len(coords, vector_width);
    let mut data = vec![T::zero(); padded * batch * m_count];
    let mut buf = Vec::new();
    let mut tmp = Vec::new();
    for m in 0..m_count {
        buf.clear();
        buf.resize(coords * batch, T::zero());
        for (t, tile) in tiles.iter().enumerate() {
            for (i, &v) in tile.channel(m).as_slice().iter().enumerate() {
                buf[i * batch + t] = v;
            }
        }
        transform_axes(&mut buf, &mut tmp, ts.d, n, batch, &ts.b);
        pack_blocked(&buf, coords, batch, m_count, m, vector_width, &mut data);
    }
    Ok(TransformedTileBatch {
        tiles: batch,
        channels: m_count,
        tile_size: ts.d,
        ndim: n,
        width: vector_width,
        coords,
        padded,
        data,
    })
}

/// `out[ib][t][k][:] = sum_m dhat[ib][t][m][:] * ghat[ib][m][k][:]`, with
/// the channel sum in ascending order.
fn matmul_fixed<T: Scalar, const W: usize>(dhat: &[T], ghat: &[T], out: &mut [T], tiles: usize, m: usize, k: usize) {
    let blocks = out.len() / (tiles * k * W);
    for ib in 0..blocks {
        let d_blk = &dhat[ib * tiles * m * W..(ib + 1) * tiles * m * W];
        let g_blk = &ghat[ib * m * k * W..(ib + 1) * m * k * W];
        let o_blk = &mut out[ib * tiles * k * W..(ib + 1) * tiles * k * W];
        for t in 0..tiles {
            let d_row = &d_blk[t * m * W..(t + 1) * m * W];
            let o_row = &mut o_blk[t * k * W..(t + 1) * k * W];
            let mut kk = 0;
            while kk + 4 <= k {
                let mut acc = [[T::zero(); W]; 4];
                for mi in 0..m {
                    let dv: &[T; W] = d_row[mi * W..(mi + 1) * W].try_into().unwrap();
                    let base = (mi * k + kk) * W;
                    for (r, a) in acc.iter_mut().enumerate() {
                        let gv: &[T; W] = g_blk[base + r * W..base + (r + 1) * W].try_into().unwrap();
                        for l in 0..W {
                            a[l] += dv[l] * gv[l];
                        }
                    }
                }
                for (r, a) in acc.iter().enumerate() {
                    o_row[(kk + r) * W..(kk + r + 1) * W].copy_from_slice(a);
                }
                kk += 4;
            }
            for kr in kk..k {
                let mut acc = [T::zero(); W];
                for mi in 0..m {
                    let dv = &d_row[mi * W..(mi + 1) * W];
                    let gv = &g_blk[(mi * k + kr) * W..(mi * k + kr + 1) * W];
                    for l in 0..W {
                        acc[l] += dv[l] * gv[l];
                    }
                }
                o_row[kr * W..(kr + 1) * W].copy_from_slice(&acc);
            }
        }
    }
}

fn matmul_dyn<T: Scalar>(dhat: &[T], ghat: &[T], out: &mut [T], tiles: usize, m: usize, k: usize, w: usize) {
    let blocks = out.len() / (tiles * k * w);
    let mut acc = vec![T::zero(); w];
    for ib in 0..blocks {
        for t in 0..tiles {
            for kr in 0..k {
                acc.fill(T::zero());
                for mi in 0..m {
                    let dv = &dhat[((ib * tiles + t) * m + mi) * w..][..w];
                    let gv = &ghat[((ib * m + mi) * k + kr) * w..][..w];
                    for l in 0..w {
                        acc[l] += dv[l] * gv[l];
                    }
                }
                out[((ib * tiles + t) * k + kr) * w..][..w].copy_from_slice(&acc);
            }
        }
    }
}

fn matmul_blocked<T: Scalar>(dhat: &[T], ghat: &[T], out: &mut [T], tiles: usize, m: usize, k: usize, w: usize) {
    match w {
        4 => matmul_fixed::<T, 4>(dhat, ghat, out, tiles, m, k),
        8 => matmul_fixed::<T, 8>(dhat, ghat, out, tiles, m, k),
        16 => matmul_fixed::<T, 16>(dhat, ghat, out, tiles, m, k),
        _ => matmul_dyn(dhat, ghat, out, tiles, m, k, w),
    }
}

/// `S^(i) = D^(i) x G^(i)` for every transform coordinate `i`.
pub fn batched_pointwise_matmul<T: Scalar>(
    dhat: &TransformedTileBatch<T>,
    ghat: &TransformedKernelBank<T>,
    plan: &ExecPlan,
) -> Result<TransformedOutputs<T>, ConvError> {
    plan.check()?;
    if dhat.channels != ghat.channels {
        return Err(ConvError::SizeMismatch(format!(
            "tile batch has {} channels, kernel bank {}",
            dhat.channels, ghat.channels
        )));
    }
    if dhat.width != ghat.width || dhat.width != plan.vector_width {
        return Err(ConvError::InvalidPlan(format!(
            "layout widths differ: tiles W={}, kernels W={}, plan W={}",
            dhat.width, ghat.width, plan.vector_width
        )));
    }
    if dhat.coords != ghat.coords || dhat.padded != ghat.padded {
        return Err(ConvError::SizeMismatch(format!(
            "tile batch has {} coordinates, kernel bank {}",
            dhat.coords, ghat.coords
        )));
    }
    let mut data = vec![T::zero(); dhat.padded * dhat.tiles * ghat.kernels];
    matmul_blocked(
        &dhat.data,
        &ghat.data,
        &mut data,
        dhat.tiles,
        dhat.channels,
        ghat.kernels,
        dhat.width,
    );
    Ok(TransformedOutputs {
        tiles: dhat.tiles,
        kernels: ghat.kernels,
        tile_size: dhat.tile_size,
        ndim: dhat.ndim,
        width: dhat.width,
        coords: dhat.coords,
        data,
    })
}

/// Maps every `(tile, kernel)` slice back through `A` on every axis.
/// Returns one `K`-channel feature map of extent `S^N` per tile.
pub fn inverse_transform<T: Scalar>(
    shat: &TransformedOutputs<T>,
    ts: &FastTransforms<T>,
) -> Result<Vec<FeatureMap<T>>, ConvError> {
    if shat.tile_size != ts.d {
        return Err(ConvError::SizeMismatch(format!(
            "outputs have tile size {}, transforms D={}",
            shat.tile_size, ts.d
        )));
    }
    let (batch, n) = (shat.tiles, shat.ndim);
    let out_len = ts.s.pow(n as u32);
    let mut per_tile: Vec<Vec<DenseTensor<T>>> = vec![Vec::with_capacity(shat.kernels); batch];
    let mut buf = Vec::new();
    let mut tmp = Vec::new();
    for k in 0..shat.kernels {
        buf.clear();
        buf.resize(shat.coords * batch, T::zero());
        unpack_blocked(&shat.data, shat.coords, batch, shat.kernels, k, shat.width, &mut buf);
        transform_axes(&mut buf, &mut tmp, ts.d, n, batch, &ts.a);
        for (t, tile) in per_tile.iter_mut().enumerate() {
            let data = (0..out_len).map(|p| buf[p * batch + t]).collect();
            tile.push(DenseTensor::new(vec![ts.s; n], data)?);
        }
    }
    per_tile.into_iter().map(FeatureMap::new).collect()
}

#[derive(Default)]
struct Scratch<T> {
    buf: Vec<T>,
    tmp: Vec<T>,
    dhat: Vec<T>,
    shat: Vec<T>,
}

/// A layer bound to a transform set, with its kernel bank cached.
pub struct FastConv<T> {
    transforms: FastTransforms<T>,
    bank: TransformedKernelBank<T>,
    bias: Vec<T>,
    activation: Activation,
    channels: usize,
    kernels: usize,
    ndim: usize,
    plan: ExecPlan,
    pool: rayon::ThreadPool,
}

impl<T: Scalar> FastConv<T> {
    pub fn new(layer: &ConvLayerSpec<T>, ts: &TransformSet, plan: ExecPlan) -> Result<Self, ConvError> {
        Self::with_transforms(layer, FastTransforms::from_set(ts)?, plan)
    }

    pub fn with_transforms(
        layer: &ConvLayerSpec<T>,
        transforms: FastTransforms<T>,
        plan: ExecPlan,
    ) -> Result<Self, ConvError> {
        plan.check()?;
        let bank = transform_kernels(layer, &transforms, plan.vector_width)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .map_err(|e| ConvError::ThreadPool(e.to_string()))?;
        Ok(FastConv {
            transforms,
            bank,
            bias: layer.bias().to_vec(),
            activation: layer.activation(),
            channels: layer.channels(),
            kernels: layer.kernels(),
            ndim: layer.ndim(),
            plan,
            pool,
        })
    }

    pub fn plan(&self) -> &ExecPlan {
        &self.plan
    }

    pub fn kernel_bank(&self) -> &TransformedKernelBank<T> {
        &self.bank
    }

    pub fn transforms(&self) -> &FastTransforms<T> {
        &self.transforms
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>, ConvError> {
        if x.num_channels() != self.channels {
            return Err(ConvError::ChannelMismatch {
                expected: self.channels,
                found: x.num_channels(),
            });
        }
        if x.spatial_shape().len() != self.ndim {
            return Err(ConvError::SizeMismatch(format!(
                "input has {} spatial axes, layer has {}",
                x.spatial_shape().len(),
                self.ndim
            )));
        }
        let ts = &self.transforms;
        let tiles = TilePlan::new(x.spatial_shape(), ts.d, ts.s)?;
        let num_tiles = tiles.num_tiles();
        let block = self.plan.tile_block_size;
        let blocks = num_tiles.div_ceil(block);

        let results: Vec<Vec<T>> = self.pool.install(|| {
            (0..blocks)
                .into_par_iter()
                .with_min_len(1)
                .map_init(Scratch::default, |scratch, b| {
                    let first = b * block;
                    let count = block.min(num_tiles - first);
                    self.run_block(x, &tiles, first, count, scratch)
                })
                .collect()
        });

        let out_len = tiles.out_tile_len();
        let channels: Vec<DenseTensor<T>> = self.pool.install(|| {
            (0..self.kernels)
                .into_par_iter()
                .map(|k| {
                    let mut out = DenseTensor::zeros(tiles.output_shape.clone()).expect("valid shape");
                    let (bias, f) = (self.bias[k], self.activation);
                    for (b, res) in results.iter().enumerate() {
                        let first = b * block;
                        let count = block.min(num_tiles - first);
                        let plane = &res[k * out_len * count..(k + 1) * out_len * count];
                        for t in 0..count {
                            tiles
                                .scatter_tile(&plane[t..], count, first + t, out.as_mut_slice(), |v| f.apply(v + bias));
                        }
                    }
                    out
                })
                .collect()
        });
        FeatureMap::new(channels)
    }

    /// Runs tiles `first..first + count`; returns `[k][p][t]` spatial outputs.
    fn run_block(&self, x: &FeatureMap<T>, tiles: &TilePlan, first: usize, count: usize, s: &mut Scratch<T>) -> Vec<T> {
        let ts = &self.transforms;
        let (n, w) = (self.ndim, self.plan.vector_width);
        let (m_count, k_count) = (self.channels, self.kernels);
        let coords = self.bank.coords;
        let padded = self.bank.padded;

        s.dhat.clear();
        s.dhat.resize(padded * count * m_count, T::zero());
        for m in 0..m_count {
            s.buf.clear();
            s.buf.resize(coords * count, T::zero());
            let src = x.channel(m).as_slice();
            for t in 0..count {
                tiles.gather_tile(src, first + t, &mut s.buf[t..], count);
            }
            transform_axes(&mut s.buf, &mut s.tmp, ts.d, n, count, &ts.b);
            pack_blocked(&s.buf, coords, count, m_count, m, w, &mut s.dhat);
        }

        s.shat.clear();
        s.shat.resize(padded * count * k_count, T::zero());
        matmul_blocked(&s.dhat, &self.bank.data, &mut s.shat, count, m_count, k_count, w);

        let out_len = tiles.out_tile_len();
        let mut result = Vec::with_capacity(k_count * out_len * count);
        for k in 0..k_count {
            s.buf.clear();
            s.buf.resize(coords * count, T::zero());
            unpack_blocked(&s.shat, coords, count, k_count, k, w, &mut s.buf);
            transform_axes(&mut s.buf, &mut s.tmp, ts.d, n, count, &ts.a);
            result.extend_from_slice(&s.buf[..out_len * count]);
        }
        result
    }
}

/// One-shot fast forward pass. Prefer [`FastConv`] when the same layer runs
/// more than once, so the kernel bank is transformed only once.
pub fn fast_layer_forward<T: Scalar>(
    x: &FeatureMap<T>,
    layer: &ConvLayerSpec<T>,
    ts: &TransformSet,
    plan: &ExecPlan,
) -> Result<FeatureMap<T>, ConvError> {
    if layer.kernel_size() != ts.g {
        return Err(ConvError::SizeMismatch(format!(
            "layer kernel size {} but transforms expect G={}",
            layer.kernel_size(),
            ts.g
        )));
    }
    layer.check_input(x)?;
    FastConv::new(layer, ts, *plan)?.forward(x)
}
