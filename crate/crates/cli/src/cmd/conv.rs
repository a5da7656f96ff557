use std::path::PathBuf;

use anyhow::{bail, Result};
use tensorwino::tensor::{read_ntsr_file, write_ntsr_file};
use tensorwino::{
    direct_layer_forward_threaded, Activation, AnyTensor, ConvLayerSpec, DenseTensor, ExecPlan, FastConv, FeatureMap,
    Scalar,
};

use crate::common::{auto_transform, load_transform, CheckFailed, Mode};

#[derive(clap::Args)]
pub struct Args {
    /// Input feature map, shaped (M, spatial...) or (batch, M, spatial...).
    #[arg(long)]
    input: PathBuf,
    /// Weights shaped (K, M, G, ..., G).
    #[arg(long)]
    weights: PathBuf,
    /// Bias shaped (K); zero when omitted.
    #[arg(long)]
    bias: Option<PathBuf>,
    /// Transform document; sized for 8-wide vectors when omitted.
    #[arg(long)]
    transform: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Fast)]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Tiles per work unit; defaults to K.
    #[arg(long)]
    tile_block: Option<usize>,
    /// Apply ReLU after the bias.
    #[arg(long)]
    relu: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also run the other mode and fail if the outputs disagree.
    #[arg(long)]
    check: bool,
    /// Tolerance for --check; 1e-4 for f32 and 1e-10 for f64 by default.
    #[arg(long)]
    tol: Option<f64>,
}

pub fn run(args: Args) -> Result<()> {
    let input = read_ntsr_file(&args.input)?;
    let weights = read_ntsr_file(&args.weights)?;
    let bias = args.bias.as_ref().map(read_ntsr_file).transpose()?;
    if input.dtype() != weights.dtype() || bias.as_ref().is_some_and(|b| b.dtype() != input.dtype()) {
        bail!(
            "mixed precision: input {:?}, weights {:?}, bias {:?}",
            input.dtype(),
            weights.dtype(),
            bias.as_ref().map(AnyTensor::dtype)
        );
    }
    match input {
        AnyTensor::F32(x) => run_typed(
            x,
            weights.into_f32()?,
            bias.map(AnyTensor::into_f32).transpose()?,
            &args,
            1e-4,
        ),
        AnyTensor::F64(x) => run_typed(
            x,
            weights.into_f64()?,
            bias.map(AnyTensor::into_f64).transpose()?,
            &args,
            1e-10,
        ),
    }
}

fn split_batch<T: Scalar>(x: &DenseTensor<T>) -> Result<Vec<DenseTensor<T>>> {
    let inner: Vec<usize> = x.shape()[1..].to_vec();
    let len: usize = inner.iter().product();
    x.as_slice()
        .chunks(len)
        .map(|c| Ok(DenseTensor::new(inner.clone(), c.to_vec())?))
        .collect()
}

fn run_typed<T: Scalar>(
    x: DenseTensor<T>,
    w: DenseTensor<T>,
    bias: Option<DenseTensor<T>>,
    args: &Args,
    default_tol: f64,
) -> Result<()> {
    if w.ndim() < 3 {
        bail!("weights must be (K, M, G...), got shape {:?}", w.shape());
    }
    let n = w.ndim() - 2;
    let (k, m, g) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let bias = match bias {
        Some(b) if b.shape() != [k] => bail!("bias shape {:?} does not match K={k} (weights axis 0)", b.shape()),
        Some(b) => b.into_vec(),
        None => vec![T::zero(); k],
    };
    let batched = match x.ndim() {
        d if d == n + 1 => false,
        d if d == n + 2 => true,
        d => bail!(
            "input has {d} axes; weights with {n} spatial axes need {} (M, spatial) or {} (batch, M, spatial)",
            n + 1,
            n + 2
        ),
    };
    let items = if batched { split_batch(&x)? } else { vec![x] };
    let channel_axis = usize::from(batched);
    if items[0].shape()[0] != m {
        bail!(
            "input axis {channel_axis} has {} channels but weights axis 1 has M={m}",
            items[0].shape()[0]
        );
    }
    for (axis, &extent) in items[0].shape()[1..].iter().enumerate() {
        if extent < g {
            bail!(
                "input axis {} has extent {extent}, smaller than kernel extent {g} (weights axis {})",
                axis + 1 + channel_axis,
                axis + 2
            );
        }
    }
    let activation = if args.relu { Activation::Relu } else { Activation::None };
    let layer = ConvLayerSpec::new(&w, bias, activation)?;

    let needs_fast = args.mode == Mode::Fast || args.check;
    let engine = if needs_fast {
        let ts = match &args.transform {
            Some(p) => load_transform(p)?,
            None => auto_transform(g, n)?,
        };
        if ts.g != g {
            bail!("transform kernel size G={} but weights axes 2.. have extent {g}", ts.g);
        }
        let plan = ExecPlan::new(args.tile_block.unwrap_or(k), args.threads.max(1), 8)?;
        eprintln!("fast path uses F({},{}), D={}", ts.s, ts.g, ts.d);
        Some(FastConv::new(&layer, &ts, plan)?)
    } else {
        None
    };
    let forward = |mode: Mode, fm: &FeatureMap<T>| -> Result<FeatureMap<T>> {
        Ok(match (mode, &engine) {
            (Mode::Fast, Some(e)) => e.forward(fm)?,
            _ => direct_layer_forward_threaded(fm, &layer, args.threads)?,
        })
    };

    let mut outputs = Vec::with_capacity(items.len());
    let mut worst = 0.0f64;
    for item in &items {
        let fm = FeatureMap::from_tensor(item)?;
        let y = forward(args.mode, &fm)?;
        if args.check {
            let err = match args.mode {
                Mode::Fast => y.max_rel_error(&forward(Mode::Direct, &fm)?)?,
                Mode::Direct => forward(Mode::Fast, &fm)?.max_rel_error(&y)?,
            };
            worst = worst.max(err);
        }
        outputs.push(y.to_tensor());
    }

    let out = if batched {
        let mut shape = vec![outputs.len()];
        shape.extend_from_slice(outputs[0].shape());
        let data = outputs.iter().flat_map(|t| t.as_slice().iter().copied()).collect();
        DenseTensor::new(shape, data)?
    } else {
        outputs.pop().expect("one item")
    };
    write_ntsr_file(&args.out, &out)?;
    eprintln!("{} mode, output {:?} -> {}", args.mode, out.shape(), args.out.display());
    if args.check {
        let tol = args.tol.unwrap_or(default_tol);
        println!("fast vs direct max rel err {worst:.3e} (tol {tol:.1e})");
        if worst > tol {
            return Err(CheckFailed(format!("fast and direct differ by {worst:.3e} > {tol:.1e}")).into());
        }
    }
    Ok(())
}
