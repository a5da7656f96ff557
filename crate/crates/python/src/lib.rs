//! Python bindings. Tensors cross the boundary as flat lists of floats plus
//! a shape tuple; computation runs in double precision.

use num_traits::ToPrimitive;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tw::{
    avx_aware_size as avx_size, cost_report as report, default_points, direct_layer_forward, format_ratio_2dp,
    synthesize_transforms, theoretical_speedup as speedup, validate_transforms, Activation, ConvLayerSpec, Counting,
    DenseTensor, ExecPlan, FeatureMap, InterpolationPoint,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Exact transform matrices `A` (S x D), `B` (D x D) and `C` (D x G).
#[pyclass(name = "TransformSet", frozen, module = "tensorwino")]
struct PyTransformSet {
    inner: tw::TransformSet,
}

fn exact_rows(m: &tw::Matrix<tw::synth::Rational>) -> Vec<Vec<String>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(ToString::to_string).collect())
        .collect()
}

fn to_f64(v: &tw::synth::Rational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn float_rows(m: &tw::Matrix<tw::synth::Rational>) -> Vec<Vec<f64>> {
    m.to_rows().iter().map(|r| r.iter().map(to_f64).collect()).collect()
}

#[pymethods]
impl PyTransformSet {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        tw::TransformSet::from_document(text)
            .map(|inner| PyTransformSet { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_document()
    }

    #[getter]
    fn s(&self) -> usize {
        self.inner.s
    }

    #[getter]
    fn g(&self) -> usize {
        self.inner.g
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn points(&self) -> Vec<String> {
        self.inner.points.iter().map(ToString::to_string).collect()
    }

    /// Rows of exact rationals as strings, e.g. `"-1/2"`.
    fn exact(&self, name: &str) -> PyResult<Vec<Vec<String>>> {
        Ok(exact_rows(self.matrix(name)?))
    }

    fn matrix_f64(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(float_rows(self.matrix(name)?))
    }

    /// `(passed, report)` from exact symbolic validation.
    fn validate(&self) -> PyResult<(bool, String)> {
        let r = validate_transforms(&self.inner).map_err(value_err)?;
        Ok((r.passed(), r.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "TransformSet(S={}, G={}, D={})",
            self.inner.s, self.inner.g, self.inner.d
        )
    }
}

impl PyTransformSet {
    fn matrix(&self, name: &str) -> PyResult<&tw::Matrix<tw::synth::Rational>> {
        match name {
            "A" | "a" => Ok(&self.inner.a),
            "B" | "b" => Ok(&self.inner.b),
            "C" | "c" => Ok(&self.inner.c),
            _ => Err(PyValueError::new_err(format!(
                "unknown matrix '{name}', expected A, B or C"
            ))),
        }
    }
}

/// Synthesizes F(S, G); `points` defaults to 0, 1, -1, 2, -2, 1/2, ... and infinity.
#[pyfunction]
#[pyo3(signature = (s, g, points=None))]
fn synthesize(s: usize, g: usize, points: Option<Vec<String>>) -> PyResult<PyTransformSet> {
    let points = match points {
        Some(list) => list
            .iter()
            .map(|p| p.parse::<InterpolationPoint>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?,
        None => default_points((s + g).saturating_sub(1)),
    };
    synthesize_transforms(s, g, &points)
        .map(|inner| PyTransformSet { inner })
        .map_err(value_err)
}

/// `(D, S)`: the smallest tile with `D**ndim % width == 0` that still saves work.
#[pyfunction]
fn avx_aware_size(g: usize, ndim: usize, width: usize) -> PyResult<(usize, usize)> {
    avx_size(g, ndim, width).map_err(value_err)
}

/// `(S*G/D)**N` as `(float, two-decimal string)`.
#[pyfunction]
fn theoretical_speedup(s: usize, g: usize, n: usize) -> PyResult<(f64, String)> {
    let r = speedup(s, g, n).map_err(value_err)?;
    let text = format_ratio_2dp(&r);
    Ok((to_f64(&r), text))
}

/// Per-tile multiplication counts for an M-channel, K-kernel layer:
/// `(direct, fast_dense, fast_nonzero)`.
#[pyfunction]
fn multiplication_counts(m: usize, k: usize, transform: &PyTransformSet, ndim: usize) -> PyResult<(u128, u128, u128)> {
    let r = report(m, k, &transform.inner, ndim).map_err(value_err)?;
    Ok((r.direct_muls, r.fast_muls_dense, r.fast_muls_sparse))
}

/// Direct-over-fast ratio for one M with K = M.
#[pyfunction]
#[pyo3(signature = (m, transform, ndim, counting="dense"))]
fn modeled_speedup(m: usize, transform: &PyTransformSet, ndim: usize, counting: &str) -> PyResult<f64> {
    let counting: Counting = counting.parse().map_err(PyValueError::new_err)?;
    let curve = tw::modeled_speedup_curve(&transform.inner, ndim, [m], counting).map_err(value_err)?;
    Ok(curve[0].1)
}

fn tensor(data: Vec<f64>, shape: Vec<usize>) -> PyResult<DenseTensor<f64>> {
    DenseTensor::new(shape, data).map_err(value_err)
}

fn layer(
    weights: Vec<f64>,
    weights_shape: Vec<usize>,
    bias: Option<Vec<f64>>,
    relu: bool,
) -> PyResult<ConvLayerSpec<f64>> {
    let k = weights_shape.first().copied().unwrap_or(0);
    let bias = bias.unwrap_or_else(|| vec![0.0; k]);
    let act = if relu { Activation::Relu } else { Activation::None };
    ConvLayerSpec::new(&tensor(weights, weights_shape)?, bias, act).map_err(value_err)
}

fn flatten(fm: FeatureMap<f64>) -> (Vec<f64>, Vec<usize>) {
    let t = fm.to_tensor();
    let shape = t.shape().to_vec();
    (t.into_vec(), shape)
}

/// Reference valid cross-correlation layer. Input is `(M, spatial...)`,
/// weights `(K, M, G, ..., G)`. Returns `(data, shape)`.
#[pyfunction]
#[pyo3(signature = (x, x_shape, weights, weights_shape, bias=None, relu=false))]
fn conv_direct(
    x: Vec<f64>,
    x_shape: Vec<usize>,
    weights: Vec<f64>,
    weights_shape: Vec<usize>,
    bias: Option<Vec<f64>>,
    relu: bool,
) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let l = layer(weights, weights_shape, bias, relu)?;
    let fm = FeatureMap::from_tensor(&tensor(x, x_shape)?).map_err(value_err)?;
    direct_layer_forward(&fm, &l).map(flatten).map_err(value_err)
}

/// A layer with its kernels transformed once, for repeated forward passes.
#[pyclass(name = "FastConv", frozen, module = "tensorwino")]
struct PyFastConv {
    inner: tw::FastConv<f64>,
}

#[pymethods]
impl PyFastConv {
    #[new]
    #[pyo3(signature = (weights, weights_shape, bias=None, transform=None, threads=1, tile_block=None, relu=false))]
    fn new(
        weights: Vec<f64>,
        weights_shape: Vec<usize>,
        bias: Option<Vec<f64>>,
        transform: Option<&PyTransformSet>,
        threads: usize,
        tile_block: Option<usize>,
        relu: bool,
    ) -> PyResult<Self> {
        let l = layer(weights, weights_shape, bias, relu)?;
        let ts = match transform {
            Some(t) => t.inner.clone(),
            None => {
                let (g, n) = (l.kernel_size(), l.ndim());
                let s = avx_size(g, n, 8).map(|(_, s)| s).unwrap_or(if g == 1 { 1 } else { 2 });
                synthesize_transforms(s, g, &default_points(s + g - 1)).map_err(value_err)?
            }
        };
        let plan = ExecPlan::new(tile_block.unwrap_or(l.kernels()), threads.max(1), 8).map_err(value_err)?;
        tw::FastConv::new(&l, &ts, plan)
            .map(|inner| PyFastConv { inner })
            .map_err(value_err)
    }

    fn forward(&self, x: Vec<f64>, x_shape: Vec<usize>) -> PyResult<(Vec<f64>, Vec<usize>)> {
        let fm = FeatureMap::from_tensor(&tensor(x, x_shape)?).map_err(value_err)?;
        self.inner.forward(&fm).map(flatten).map_err(value_err)
    }

    #[getter]
    fn tile(&self) -> (usize, usize) {
        let t = self.inner.transforms();
        (t.d, t.s)
    }
}

/// One-shot fast layer; see `FastConv` for the arguments.
#[pyfunction]
#[pyo3(signature = (x, x_shape, weights, weights_shape, bias=None, transform=None, threads=1, relu=false))]
#[allow(clippy::too_many_arguments)]
fn conv_fast(
    x: Vec<f64>,
    x_shape: Vec<usize>,
    weights: Vec<f64>,
    weights_shape: Vec<usize>,
    bias: Option<Vec<f64>>,
    transform: Option<&PyTransformSet>,
    threads: usize,
    relu: bool,
) -> PyResult<(Vec<f64>, Vec<usize>)> {
    PyFastConv::new(weights, weights_shape, bias, transform, threads, None, relu)?.forward(x, x_shape)
}

#[pymodule]
fn tensorwino(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTransformSet>()?;
    m.add_class::<PyFastConv>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(avx_aware_size, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(multiplication_counts, m)?)?;
    m.add_function(wrap_pyfunction!(modeled_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(conv_direct, m)?)?;
    m.add_function(wrap_pyfunction!(conv_fast, m)?)?;
    Ok(())
}
