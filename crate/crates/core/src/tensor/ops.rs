use super::{DenseTensor, Scalar, TensorError};
use crate::matrix::Matrix;

/// Raw n-mode product on a row-major buffer of shape `dims`.
///
/// Writes `dst = src x_axis u`, where `dst` has `dims[axis]` replaced by
/// `u.rows()`. The sparse matrix is walked in the two outermost loops and zero
/// entries are skipped; the innermost loop runs over the contiguous trailing
/// extent. Every output element accumulates its terms in ascending column
/// order of `u`, independent of `dims`.
pub fn mode_product_into<T: Scalar>(src: &[T], dims: &[usize], axis: usize, u: &Matrix<T>, dst: &mut [T]) {
    let rows = u.rows();
    let cols = dims[axis];
    assert_eq!(u.cols(), cols, "mode product: matrix columns vs axis extent");
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    assert_eq!(src.len(), outer * cols * inner);
    assert_eq!(dst.len(), outer * rows * inner);

    dst.fill(T::zero());
    for j in 0..rows {
        for (i, &w) in u.row(j).iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for o in 0..outer {
                let s = &src[(o * cols + i) * inner..][..inner];
                let d = &mut dst[(o * rows + j) * inner..][..inner];
                for (dv, &sv) in d.iter_mut().zip(s) {
                    *dv += w * sv;
                }
            }
        }
    }
}

/// `X x_n U`: contracts axis `axis` (0-based) of `x` with the columns of `u`.
pub fn nmode_product<T: Scalar>(x: &DenseTensor<T>, u: &Matrix<T>, axis: usize) -> Result<DenseTensor<T>, TensorError> {
    if axis >= x.ndim() {
        return Err(TensorError::AxisOutOfRange { axis, ndim: x.ndim() });
    }
    if u.cols() != x.shape()[axis] {
        return Err(TensorError::DimensionMismatch(format!(
            "matrix has {} columns but axis {axis} has extent {}",
            u.cols(),
            x.shape()[axis]
        )));
    }
    let mut shape = x.shape().to_vec();
    shape[axis] = u.rows();
    let mut out = DenseTensor::zeros(shape)?;
    mode_product_into(x.as_slice(), x.shape(), axis, u, out.as_mut_slice());
    Ok(out)
}

/// `X x_1 U_1 x_2 ... x_N U_N`, applied left to right.
pub fn multi_mode_product<T: Scalar>(x: &DenseTensor<T>, us: &[Matrix<T>]) -> Result<DenseTensor<T>, TensorError> {
    if us.len() != x.ndim() {
        return Err(TensorError::DimensionMismatch(format!(
            "{} matrices for a {}-dimensional tensor",
            us.len(),
            x.ndim()
        )));
    }
    us.iter()
        .enumerate()
        .try_fold(x.clone(), |acc, (axis, u)| nmode_product(&acc, u, axis))
}

/// Mode-`axis` unfolding: row `i` lists every element whose `axis` index is
/// `i`, remaining indices in row-major order.
pub fn unfold<T: Scalar>(x: &DenseTensor<T>, axis: usize) -> Result<Matrix<T>, TensorError> {
    if axis >= x.ndim() {
        return Err(TensorError::AxisOutOfRange { axis, ndim: x.ndim() });
    }
    let dims = x.shape();
    let rows = dims[axis];
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let src = x.as_slice();
    Ok(Matrix::from_fn(rows, outer * inner, |r, c| {
        let (o, i) = (c / inner, c % inner);
        src[(o * rows + r) * inner + i]
    }))
}
