//! Single-precision accuracy of the fast path by transform size and rank.
//!
//! Errors are measured element-wise against an f64 direct evaluation,
//! relative to `max(|reference|, 1)`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tensorwino::{
    default_points, direct_layer_forward, fast_layer_forward, synthesize_transforms, Activation, ConvLayerSpec,
    DenseTensor, ExecPlan, FeatureMap, InterpolationPoint, TransformSet,
};

const TOL_F32: f64 = 1e-4;
const TRIALS: usize = 6;

fn layer_pair(rng: &mut StdRng, m: usize, k: usize, g: usize, n: usize) -> (ConvLayerSpec<f32>, ConvLayerSpec<f64>) {
    let mut shape = vec![k, m];
    shape.extend(std::iter::repeat_n(g, n));
    let len: usize = shape.iter().product();
    let w: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w32: Vec<f32> = w.iter().map(|&v| v as f32).collect();
    let w64: Vec<f64> = w32.iter().map(|&v| v as f64).collect();
    (
        ConvLayerSpec::new(
            &DenseTensor::new(shape.clone(), w32).unwrap(),
            vec![0.0; k],
            Activation::None,
        )
        .unwrap(),
        ConvLayerSpec::new(&DenseTensor::new(shape, w64).unwrap(), vec![0.0; k], Activation::None).unwrap(),
    )
}

fn input_pair(rng: &mut StdRng, m: usize, extent: usize, n: usize) -> (FeatureMap<f32>, FeatureMap<f64>) {
    let mut shape = vec![m];
    shape.extend(std::iter::repeat_n(extent, n));
    let len: usize = shape.iter().product();
    let x32: Vec<f32> = (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let x64: Vec<f64> = x32.iter().map(|&v| v as f64).collect();
    (
        FeatureMap::from_tensor(&DenseTensor::new(shape.clone(), x32).unwrap()).unwrap(),
        FeatureMap::from_tensor(&DenseTensor::new(shape, x64).unwrap()).unwrap(),
    )
}

/// Worst f32 error over random 8-channel, 8-kernel layers.
fn worst_f32_error(ts: &TransformSet, n: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let plan = ExecPlan::new(8, 1, 8).unwrap();
    let extent = match n {
        1 => 24,
        2 => 20,
        _ => 12,
    };
    (0..TRIALS)
        .map(|_| {
            let (l32, l64) = layer_pair(&mut rng, 8, 8, ts.g, n);
            let (x32, x64) = input_pair(&mut rng, 8, extent, n);
            let fast = fast_layer_forward(&x32, &l32, ts, &plan).unwrap();
            let oracle = direct_layer_forward(&x64, &l64).unwrap();
            let widened = FeatureMap::new(
                fast.channels()
                    .iter()
                    .map(|c| {
                        DenseTensor::new(c.shape().to_vec(), c.as_slice().iter().map(|&v| v as f64).collect()).unwrap()
                    })
                    .collect(),
            )
            .unwrap();
            widened.max_rel_error(&oracle).unwrap()
        })
        .fold(0.0, f64::max)
}

const SIZES: [(usize, usize); 8] = [(2, 3), (3, 2), (4, 3), (3, 4), (5, 4), (4, 5), (3, 6), (2, 5)];

#[test]
fn default_points_meet_single_precision_tolerance_up_to_two_dims() {
    for (s, g) in SIZES {
        let ts = synthesize_transforms(s, g, &default_points(s + g - 1)).unwrap();
        for n in 1..=2 {
            let err = worst_f32_error(&ts, n, (s * 10 + g + n * 100) as u64);
            println!("F({s},{g}) N={n}: {err:.2e}");
            assert!(err <= TOL_F32, "F({s},{g}) N={n}: {err:.2e}");
        }
    }
}

#[test]
fn three_dim_single_precision_error_by_size() {
    for (s, g) in SIZES {
        let ts = synthesize_transforms(s, g, &default_points(s + g - 1)).unwrap();
        let err = worst_f32_error(&ts, 3, (s * 10 + g) as u64);
        println!("F({s},{g}) N=3: {err:.2e}");
        if s + g - 1 <= 4 {
            assert!(err <= TOL_F32, "F({s},{g}) N=3: {err:.2e}");
        }
    }
}

#[test]
fn balanced_points_bring_six_point_transform_under_tolerance() {
    let q = InterpolationPoint::frac;
    let points = [
        q(0, 1),
        q(3, 2),
        q(-3, 2),
        q(2, 3),
        q(-2, 3),
        InterpolationPoint::Infinity,
    ];
    let ts = synthesize_transforms(4, 3, &points).unwrap();
    let err = worst_f32_error(&ts, 3, 43);
    println!("F(4,3) N=3, points 0, ±3/2, ±2/3, inf: {err:.2e}");
    assert!(err <= TOL_F32, "{err:.2e}");
}
