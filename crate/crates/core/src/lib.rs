//! N-dimensional Winograd-class fast convolution for multicore CPUs.
//!
//! The crate is organised bottom-up:
//!
//! - [`synth`]: exact rational polynomial algebra, CRT-based fast vector
//!   convolution and Cook-Toom synthesis of the `(A, B, C)` transform triple.
//! - [`tensor`]: dense N-dimensional tensors, n-mode products, unfoldings,
//!   overlapping tile extraction/stitching and the `NTSR` binary format.
//! - [`conv_direct`]: the sliding-window reference layer used as oracle.
//! - [`conv_fast`]: the tiled, batched transform-domain engine.
//! - [`cost`]: analytical multiplication counts and speed-up model.
//!
//! All convolutions are *valid cross-correlations*: the kernel is not
//! flipped, `out[v] = sum_p g[p] * x[v + p]`, and every output extent is
//! `input - kernel + 1`.

pub mod conv_direct;
pub mod conv_fast;
pub mod cost;
pub mod matrix;
pub mod synth;
pub mod tensor;

pub use conv_direct::{
    direct_convolve_spatial, direct_layer_forward, direct_layer_forward_threaded, Activation, ConvError, ConvLayerSpec,
    FeatureMap,
};
pub use conv_fast::{
    batched_pointwise_matmul, fast_layer_forward, inverse_transform, transform_kernels, transform_tile_batch, ExecPlan,
    FastConv, FastTransforms, TransformedKernelBank, TransformedOutputs, TransformedTileBatch,
};
pub use cost::{
    arithmetic_intensity, cost_report, format_ratio_2dp, layer_mul_count_direct, layer_mul_count_fast,
    modeled_speedup_curve, theoretical_speedup, write_cost_csv, CostReport, Counting, COST_CSV_HEADER,
};
pub use matrix::Matrix;
pub use synth::{
    avx_aware_size, crt_basis, default_points, fast_vector_convolve_crt, matrix_sparsity, synthesize_transforms,
    validate_transforms, CrtBasis, InterpolationPoint, RationalPoly, SynthError, TransformSet, ValidationReport,
};
pub use tensor::{
    extract_tiles, multi_mode_product, nmode_product, stitch_outputs, unfold, AnyTensor, DType, DenseTensor, Scalar,
    TensorError, TilePlan,
};
