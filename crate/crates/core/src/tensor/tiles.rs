use super::{check_shape, increment, strides, DenseTensor, Scalar, TensorError};

/// Geometry of overlapping `D^N` tiles stepped by `S` per axis.
///
/// Tile `c` (a grid coordinate) reads input range `[c*S, c*S + D)` per axis
/// and produces output range `[c*S, c*S + S)`. The grid is just large enough
/// to cover the valid output `input - G + 1` with `G = D - S + 1`; reads
/// past the trailing edge see zeros and the matching output overhang is
/// discarded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilePlan {
    pub ndim: usize,
    pub tile_size: usize,
    pub stride: usize,
    pub kernel_size: usize,
    pub grid: Vec<usize>,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    /// Zeros appended on the trailing edge of each axis.
    pub pad: Vec<usize>,
}

impl TilePlan {
    pub fn new(input_shape: &[usize], tile_size: usize, stride: usize) -> Result<Self, TensorError> {
        check_shape(input_shape)?;
        if stride == 0 || stride > tile_size {
            return Err(TensorError::InvalidTiling(format!(
                "stride S={stride} with tile size D={tile_size} gives kernel size G = D - S + 1 < 1"
            )));
        }
        let g = tile_size - stride + 1;
        let mut grid = Vec::with_capacity(input_shape.len());
        let mut output_shape = Vec::with_capacity(input_shape.len());
        let mut pad = Vec::with_capacity(input_shape.len());
        for (axis, &extent) in input_shape.iter().enumerate() {
            if extent < g {
                return Err(TensorError::InvalidTiling(format!(
                    "axis {axis} has extent {extent}, smaller than kernel size {g}"
                )));
            }
            let out = extent - g + 1;
            let tiles = out.div_ceil(stride);
            grid.push(tiles);
            output_shape.push(out);
            pad.push((tiles - 1) * stride + tile_size - extent);
        }
        Ok(TilePlan {
            ndim: input_shape.len(),
            tile_size,
            stride,
            kernel_size: g,
            grid,
            input_shape: input_shape.to_vec(),
            output_shape,
            pad,
        })
    }

    pub fn num_tiles(&self) -> usize {
        self.grid.iter().product()
    }

    /// Elements in one input tile, `D^N`.
    pub fn tile_len(&self) -> usize {
        self.tile_size.pow(self.ndim as u32)
    }

    /// Elements in one output tile, `S^N`.
    pub fn out_tile_len(&self) -> usize {
        self.stride.pow(self.ndim as u32)
    }

    /// Grid coordinate of tile `t` (row-major grid order).
    pub fn tile_coord(&self, mut t: usize) -> Vec<usize> {
        let mut coord = vec![0; self.ndim];
        for a in (0..self.ndim).rev() {
            coord[a] = t % self.grid[a];
            t /= self.grid[a];
        }
        coord
    }

    /// Copies tile `t` of `src` (shaped `input_shape`) into `dst`, element
    /// `p` (row-major within the tile) landing at `dst[p * dst_stride]`.
    pub fn gather_tile<T: Scalar>(&self, src: &[T], t: usize, dst: &mut [T], dst_stride: usize) {
        let d = self.tile_size;
        let n = self.ndim;
        let origin: Vec<usize> = self.tile_coord(t).iter().map(|c| c * self.stride).collect();
        let in_strides = strides(&self.input_shape);
        let last_extent = self.input_shape[n - 1];
        let run = d.min(last_extent.saturating_sub(origin[n - 1]));
        let row_shape = vec![d; n - 1];
        let rows = d.pow(n as u32 - 1);
        let mut idx = vec![0usize; n - 1];
        for row in 0..rows {
            let dst_base = row * d;
            let mut inside = true;
            let mut base = origin[n - 1];
            for a in 0..n - 1 {
                let pos = origin[a] + idx[a];
                if pos >= self.input_shape[a] {
                    inside = false;
                    break;
                }
                base += pos * in_strides[a];
            }
            for k in 0..d {
                dst[(dst_base + k) * dst_stride] = if inside && k < run { src[base + k] } else { T::zero() };
            }
            increment(&mut idx, &row_shape);
        }
    }

    /// Writes output tile `t` (element `p` read from `tile[p * tile_stride]`)
    /// into `out` (shaped `output_shape`), dropping overhang past the edge.
    pub fn scatter_tile<T: Scalar>(
        &self,
        tile: &[T],
        tile_stride: usize,
        t: usize,
        out: &mut [T],
        mut f: impl FnMut(T) -> T,
    ) {
        let s = self.stride;
        let n = self.ndim;
        let origin: Vec<usize> = self.tile_coord(t).iter().map(|c| c * s).collect();
        let out_strides = strides(&self.output_shape);
        let run = s.min(self.output_shape[n - 1] - origin[n - 1]);
        let row_shape = vec![s; n - 1];
        let rows = s.pow(n as u32 - 1);
        let mut idx = vec![0usize; n - 1];
        for row in 0..rows {
            let mut inside = true;
            let mut base = origin[n - 1];
            for a in 0..n - 1 {
                let pos = origin[a] + idx[a];
                if pos >= self.output_shape[a] {
                    inside = false;
                    break;
                }
                base += pos * out_strides[a];
            }
            if inside {
                for k in 0..run {
                    out[base + k] = f(tile[(row * s + k) * tile_stride]);
                }
            }
            increment(&mut idx, &row_shape);
        }
    }
}

/// Splits `x` into overlapping `D^N` tiles stepped by `S`, in row-major grid
/// order, zero-padding the trailing edges.
pub fn extract_tiles<T: Scalar>(
    x: &DenseTensor<T>,
    tile_size: usize,
    stride: usize,
) -> Result<(Vec<DenseTensor<T>>, TilePlan), TensorError> {
    let plan = TilePlan::new(x.shape(), tile_size, stride)?;
    let tile_shape = vec![tile_size; plan.ndim];
    let tiles = (0..plan.num_tiles())
        .map(|t| {
            let mut buf = vec![T::zero(); plan.tile_len()];
            plan.gather_tile(x.as_slice(), t, &mut buf, 1);
            DenseTensor::new(tile_shape.clone(), buf)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((tiles, plan))
}

/// Reassembles `S^N` output tiles into the valid-convolution output.
pub fn stitch_outputs<T: Scalar>(tiles: &[DenseTensor<T>], plan: &TilePlan) -> Result<DenseTensor<T>, TensorError> {
    if tiles.len() != plan.num_tiles() {
        return Err(TensorError::DimensionMismatch(format!(
            "{} tiles for a plan of {}",
            tiles.len(),
            plan.num_tiles()
        )));
    }
    let tile_shape = vec![plan.stride; plan.ndim];
    let mut out = DenseTensor::zeros(plan.output_shape.clone())?;
    for (t, tile) in tiles.iter().enumerate() {
        if tile.shape() != tile_shape.as_slice() {
            return Err(TensorError::DimensionMismatch(format!(
                "output tile {t} has shape {:?}, expected {tile_shape:?}",
                tile.shape()
            )));
        }
        plan.scatter_tile(tile.as_slice(), 1, t, out.as_mut_slice(), |v| v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv_direct::direct_convolve_spatial;
    use proptest::prelude::*;

    fn vector(v: &[f64]) -> DenseTensor<f64> {
        DenseTensor::new(vec![v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn single_tile() {
        let x = vector(&[1.0, 2.0, 3.0, 4.0]);
        let (tiles, plan) = extract_tiles(&x, 4, 2).unwrap();
        assert_eq!(tiles, vec![x]);
        assert_eq!(plan.pad, vec![0]);
        assert_eq!(plan.output_shape, vec![2]);
    }

    #[test]
    fn two_windows() {
        let x = vector(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (tiles, plan) = extract_tiles(&x, 4, 2).unwrap();
        assert_eq!(plan.grid, vec![2]);
        assert_eq!(tiles[0].as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(tiles[1].as_slice(), &[3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn padded_last_window() {
        let x = vector(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let (tiles, plan) = extract_tiles(&x, 4, 2).unwrap();
        assert_eq!(plan.grid, vec![3]);
        assert_eq!(plan.pad, vec![1]);
        assert_eq!(tiles[2].as_slice(), &[5.0, 6.0, 7.0, 0.0]);
    }

    #[test]
    fn input_shorter_than_tile() {
        let x = vector(&[1.0, 2.0, 3.0]);
        let (tiles, plan) = extract_tiles(&x, 4, 2).unwrap();
        assert_eq!(plan.output_shape, vec![1]);
        assert_eq!(tiles[0].as_slice(), &[1.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn bad_tilings() {
        let x = vector(&[1.0; 8]);
        assert!(matches!(extract_tiles(&x, 2, 3), Err(TensorError::InvalidTiling(_))));
        assert!(matches!(extract_tiles(&x, 2, 0), Err(TensorError::InvalidTiling(_))));
        assert!(matches!(
            extract_tiles(&vector(&[1.0, 2.0]), 6, 2),
            Err(TensorError::InvalidTiling(_))
        ));
    }

    #[test]
    fn stitch_single_and_pair() {
        let plan = TilePlan::new(&[4], 4, 2).unwrap();
        let t = vector(&[7.0, 8.0]);
        assert_eq!(stitch_outputs(std::slice::from_ref(&t), &plan).unwrap(), t);

        let plan = TilePlan::new(&[6], 4, 2).unwrap();
        let out = stitch_outputs(&[vector(&[1.0, 2.0]), vector(&[3.0, 4.0])], &plan).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(stitch_outputs(&[vector(&[1.0, 2.0])], &plan).is_err());
    }

    #[test]
    fn every_output_written_once() {
        let plan = TilePlan::new(&[7, 9, 5], 5, 3).unwrap();
        let mut hits = vec![0u32; plan.output_shape.iter().product()];
        let tile = vec![1.0f64; plan.out_tile_len()];
        for t in 0..plan.num_tiles() {
            let mut once = vec![0.0f64; hits.len()];
            plan.scatter_tile(&tile, 1, t, &mut once, |v| v);
            for (h, v) in hits.iter_mut().zip(&once) {
                *h += *v as u32;
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
    }

    fn tiling_case() -> impl Strategy<Value = (DenseTensor<f64>, DenseTensor<f64>, usize)> {
        (1usize..=3, 1usize..=4, 1usize..=4).prop_flat_map(|(ndim, g, s)| {
            let shape = prop::collection::vec(g..g + 9, ndim);
            shape.prop_flat_map(move |shape| {
                let n: usize = shape.iter().product();
                let kn = g.pow(ndim as u32);
                (
                    prop::collection::vec(-1.0f64..1.0, n),
                    prop::collection::vec(-1.0f64..1.0, kn),
                )
                    .prop_map(move |(xd, kd)| {
                        (
                            DenseTensor::new(shape.clone(), xd).unwrap(),
                            DenseTensor::new(vec![g; ndim], kd).unwrap(),
                            s,
                        )
                    })
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tiled_direct_matches_whole((x, g, s) in tiling_case()) {
            let d = s + g.shape()[0] - 1;
            let (tiles, plan) = extract_tiles(&x, d, s).unwrap();
            let outs: Vec<_> = tiles.iter().map(|t| direct_convolve_spatial(t, &g).unwrap()).collect();
            let stitched = stitch_outputs(&outs, &plan).unwrap();
            prop_assert_eq!(stitched, direct_convolve_spatial(&x, &g).unwrap());
        }
    }
}
