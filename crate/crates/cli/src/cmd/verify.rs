use std::path::PathBuf;

use anyhow::Result;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tensorwino::{
    direct_layer_forward, fast_layer_forward, validate_transforms, Activation, ConvLayerSpec, DenseTensor, ExecPlan,
    FeatureMap, Scalar, TransformSet,
};

use crate::common::{load_transform, CheckFailed, Precision};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    transform: PathBuf,
    /// Random fast-versus-direct trials (1-D and 2-D).
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Maximum relative error; 1e-4 for f32 and 1e-10 for f64 by default.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn random_tensor<T: Scalar>(rng: &mut StdRng, shape: Vec<usize>) -> DenseTensor<T> {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| T::from_f64_lossy(rng.random_range(-1.0..1.0)))
        .collect();
    DenseTensor::new(shape, data).expect("consistent shape")
}

/// Worst relative error of the fast path against the direct path.
fn trials<T: Scalar>(ts: &TransformSet, count: usize, seed: u64) -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for trial in 0..count {
        let n = 1 + trial % 2;
        let m = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let mut xshape = vec![m];
        xshape.extend((0..n).map(|_| ts.g + rng.random_range(0..3 * ts.s + 2)));
        let mut wshape = vec![k, m];
        wshape.extend(std::iter::repeat_n(ts.g, n));
        let x = FeatureMap::from_tensor(&random_tensor::<T>(&mut rng, xshape))?;
        let bias = (0..k).map(|_| T::from_f64_lossy(rng.random_range(-1.0..1.0))).collect();
        let layer = ConvLayerSpec::new(&random_tensor::<T>(&mut rng, wshape), bias, Activation::None)?;
        let plan = ExecPlan::new(k, 1, 8)?;
        let fast = fast_layer_forward(&x, &layer, ts, &plan)?;
        let direct = direct_layer_forward(&x, &layer)?;
        worst = worst.max(fast.max_rel_error(&direct)?);
    }
    Ok(worst)
}

pub fn run(args: Args) -> Result<()> {
    let ts = load_transform(&args.transform)?;
    let report = validate_transforms(&ts)?;
    println!("{report}");
    if !report.passed() {
        return Err(CheckFailed(format!("symbolic validation failed: {report}")).into());
    }
    let tol = args.tol.unwrap_or(args.precision.default_tolerance());
    let err = match args.precision {
        Precision::F32 => trials::<f32>(&ts, args.trials, args.seed)?,
        Precision::F64 => trials::<f64>(&ts, args.trials, args.seed)?,
    };
    println!(
        "{} trials at {}: max rel err {err:.3e} (tol {tol:.1e})",
        args.trials, args.precision
    );
    if err > tol {
        return Err(CheckFailed(format!("max rel err {err:.3e} exceeds {tol:.1e}")).into());
    }
    Ok(())
}
