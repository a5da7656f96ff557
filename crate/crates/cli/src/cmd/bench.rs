use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use tensorwino::{
    direct_layer_forward_threaded, Activation, ConvLayerSpec, DenseTensor, ExecPlan, FastConv, FeatureMap, Scalar,
    TransformSet,
};

use crate::common::{auto_transform, checksum, load_transform, parse_dims, parse_list, write_output, Mode, Precision};

#[derive(clap::Args)]
pub struct Args {
    /// Spatial extents, e.g. 1024x1024 or 32x32x32.
    #[arg(long)]
    dims: String,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 32)]
    kernels: usize,
    #[arg(long, default_value_t = 4)]
    kernel_size: usize,
    /// Transform document; sized for 8-wide vectors when omitted.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Comma-separated worker counts.
    #[arg(long, default_value = "1")]
    threads: String,
    /// Timed repetitions per cell, after one warm-up run.
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    /// Stacked layers; every layer after the first maps K channels to K.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [Mode::Fast, Mode::Direct])]
    modes: Vec<Mode>,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct BenchRecord {
    mode: String,
    threads: usize,
    input_shape: String,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "D")]
    d: Option<usize>,
    #[serde(rename = "S")]
    s: Option<usize>,
    layers: usize,
    wall_seconds: f64,
    throughput_mvox_s: f64,
    checksum: String,
}

fn random_tensor<T: Scalar>(rng: &mut StdRng, shape: Vec<usize>, scale: f64) -> DenseTensor<T> {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| T::from_f64_lossy(rng.random_range(-scale..scale)))
        .collect();
    DenseTensor::new(shape, data).expect("consistent shape")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

pub fn run(args: Args) -> Result<()> {
    let dims = parse_dims(&args.dims)?;
    let threads = parse_list(&args.threads)?;
    let (g, layers) = (args.kernel_size, args.layers);
    if args.channels == 0 || args.kernels == 0 || g == 0 || layers == 0 || args.repeat == 0 {
        bail!("channels, kernels, kernel size, layers and repeat must be positive");
    }
    if let Some(&e) = dims.iter().find(|&&e| e < layers * (g - 1) + 1) {
        bail!("extent {e} is too small for {layers} layer(s) of kernel size {g}");
    }
    let ts = match &args.transform {
        Some(p) => load_transform(p)?,
        None => auto_transform(g, dims.len())?,
    };
    if ts.g != g {
        bail!("transform kernel size G={} but --kernel-size is {g}", ts.g);
    }
    let records = match args.precision {
        Precision::F32 => bench::<f32>(&args, &dims, &threads, &ts)?,
        Precision::F64 => bench::<f64>(&args, &dims, &threads, &ts)?,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &records {
        w.serialize(r)?;
        eprintln!(
            "{:>6} threads={:<3} {:>9.4}s {:>9.2} MVox/s {}",
            r.mode, r.threads, r.wall_seconds, r.throughput_mvox_s, r.checksum
        );
    }
    write_output(args.csv.as_ref(), &w.into_inner()?)
}

fn bench<T: Scalar>(args: &Args, dims: &[usize], threads: &[usize], ts: &TransformSet) -> Result<Vec<BenchRecord>> {
    let mut rng = StdRng::seed_from_u64(args.seed);
    let (m, k, g) = (args.channels, args.kernels, args.kernel_size);
    let mut xshape = vec![m];
    xshape.extend_from_slice(dims);
    let x = FeatureMap::from_tensor(&random_tensor::<T>(&mut rng, xshape, 1.0))?;
    let layers: Vec<ConvLayerSpec<T>> = (0..args.layers)
        .map(|l| {
            let inputs = if l == 0 { m } else { k };
            let mut wshape = vec![k, inputs];
            wshape.extend(std::iter::repeat_n(g, dims.len()));
            let scale = 1.0 / ((inputs * g.pow(dims.len() as u32)) as f64).sqrt();
            let w = random_tensor::<T>(&mut rng, wshape, scale);
            let bias = (0..k).map(|_| T::from_f64_lossy(rng.random_range(-0.1..0.1))).collect();
            ConvLayerSpec::new(&w, bias, Activation::Relu)
        })
        .collect::<Result<_, _>>()?;
    let out_voxels: usize = dims.iter().map(|&e| e - args.layers * (g - 1)).product();
    let input_shape = dims.iter().map(ToString::to_string).collect::<Vec<_>>().join("x");

    let mut records = Vec::new();
    for &mode in &args.modes {
        for &p in threads {
            let engines = match mode {
                Mode::Fast => layers
                    .iter()
                    .map(|l| FastConv::new(l, ts, ExecPlan::new(k, p, 8)?))
                    .collect::<Result<Vec<_>, _>>()?,
                Mode::Direct => Vec::new(),
            };
            let pass = || -> Result<FeatureMap<T>> {
                let mut cur = x.clone();
                for (i, layer) in layers.iter().enumerate() {
                    cur = match mode {
                        Mode::Fast => engines[i].forward(&cur)?,
                        Mode::Direct => direct_layer_forward_threaded(&cur, layer, p)?,
                    };
                }
                Ok(cur)
            };
            let mut out = pass()?;
            let mut times = Vec::with_capacity(args.repeat);
            for _ in 0..args.repeat {
                let start = Instant::now();
                out = pass()?;
                times.push(start.elapsed().as_secs_f64());
            }
            let wall = median(times);
            let fast = mode == Mode::Fast;
            records.push(BenchRecord {
                mode: mode.to_string(),
                threads: p,
                input_shape: input_shape.clone(),
                m,
                k,
                d: fast.then_some(ts.d),
                s: fast.then_some(ts.s),
                layers: args.layers,
                wall_seconds: wall,
                throughput_mvox_s: (out_voxels * k) as f64 / wall / 1e6,
                checksum: checksum(out.channels()),
            });
        }
    }
    Ok(records)
}
