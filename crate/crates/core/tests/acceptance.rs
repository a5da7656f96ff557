//! End-to-end acceptance checks.
//!
//! Run with `cargo test -p tensorwino --test acceptance -- --nocapture` to see
//! one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tensorwino::{
    avx_aware_size, default_points, direct_convolve_spatial, direct_layer_forward, extract_tiles, fast_layer_forward,
    format_ratio_2dp, layer_mul_count_fast, modeled_speedup_curve, stitch_outputs, synthesize_transforms,
    theoretical_speedup, validate_transforms, Activation, ConvLayerSpec, Counting, DenseTensor, ExecPlan, FastConv,
    FeatureMap, Matrix, Scalar, TransformSet,
};

const TOL_F32: f64 = 1e-4;
const TOL_F64: f64 = 1e-10;
const RANDOM_CONFIGS: usize = 200;
const SEED: u64 = 0x5eed_2024;
const PERF_RATIO_LIMIT: f64 = 0.5;

const SYNTH_SIZES: [(usize, usize); 8] = [(2, 3), (3, 2), (4, 3), (3, 4), (5, 4), (4, 5), (3, 6), (2, 5)];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn rat_matrix(rows: &[&[(i64, i64)]]) -> Matrix<BigRational> {
    Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&(n, d)| q(n, d)).collect()).collect()).unwrap()
}

fn int_rows(rows: &[&[i64]]) -> Vec<Vec<(i64, i64)>> {
    rows.iter().map(|r| r.iter().map(|&v| (v, 1)).collect()).collect()
}

fn from_pairs(rows: Vec<Vec<(i64, i64)>>) -> Matrix<BigRational> {
    let refs: Vec<&[(i64, i64)]> = rows.iter().map(|r| r.as_slice()).collect();
    rat_matrix(&refs)
}

fn golden_f23() -> TransformSet {
    let a = from_pairs(int_rows(&[&[1, 1, 1, 0], &[0, 1, -1, -1]]));
    let b = from_pairs(int_rows(&[
        &[1, 0, -1, 0],
        &[0, 1, 1, 0],
        &[0, -1, 1, 0],
        &[0, 1, 0, -1],
    ]));
    let c = rat_matrix(&[
        &[(1, 1), (0, 1), (0, 1)],
        &[(1, 2), (1, 2), (1, 2)],
        &[(1, 2), (-1, 2), (1, 2)],
        &[(0, 1), (0, 1), (1, 1)],
    ]);
    TransformSet::from_matrices(a, b, c).unwrap()
}

/// Hand-written F(4,3) matrices for a 6x6x6 element-wise product. The
/// kernel matrix is written as its transpose and flipped back here.
fn reference_f43_matrices() -> TransformSet {
    let a = rat_matrix(&[
        &[(1, 1), (1, 1), (1, 1), (1, 1), (1, 1), (0, 1)],
        &[(0, 1), (1, 1), (-1, 1), (1, 3), (-1, 3), (0, 1)],
        &[(0, 1), (1, 1), (1, 1), (1, 9), (1, 9), (0, 1)],
        &[(0, 1), (1, 1), (-1, 1), (1, 27), (-1, 27), (1, 1)],
    ]);
    let b = rat_matrix(&[
        &[(1, 9), (0, 1), (-10, 9), (0, 1), (1, 1), (0, 1)],
        &[(0, 1), (-1, 9), (-1, 9), (1, 1), (1, 1), (0, 1)],
        &[(0, 1), (1, 9), (-1, 9), (-1, 1), (1, 1), (0, 1)],
        &[(0, 1), (-1, 3), (-1, 1), (1, 3), (1, 1), (0, 1)],
        &[(0, 1), (1, 3), (-1, 1), (-1, 3), (1, 1), (0, 1)],
        &[(0, 1), (1, 9), (0, 1), (-10, 9), (0, 1), (1, 1)],
    ]);
    let ct = rat_matrix(&[
        &[(9, 1), (9, 16), (9, 16), (-81, 16), (-81, 16), (0, 1)],
        &[(0, 1), (9, 16), (-9, 16), (-27, 16), (27, 16), (0, 1)],
        &[(0, 1), (9, 16), (9, 16), (-9, 16), (-9, 16), (1, 1)],
    ]);
    TransformSet::from_matrices(a, b, ct.transpose()).unwrap()
}

/// Plain nested-loop valid cross-correlation of two 1-D sequences.
fn naive_xcorr_1d(g: &[f64], x: &[f64]) -> Vec<f64> {
    (0..=x.len() - g.len())
        .map(|v| g.iter().enumerate().map(|(p, gp)| gp * x[v + p]).sum())
        .collect()
}

fn criterion_1() -> Outcome {
    let ts = golden_f23();
    let report = validate_transforms(&ts).unwrap();
    let layer = ConvLayerSpec::from_kernels(
        1,
        1,
        vec![DenseTensor::new(vec![3], vec![1.0f64, 1.0, 1.0]).unwrap()],
        vec![0.0],
        Activation::None,
    )
    .unwrap();
    let x = FeatureMap::new(vec![DenseTensor::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap()]).unwrap();
    let fast = fast_layer_forward(&x, &layer, &ts, &ExecPlan::new(1, 1, 8).unwrap()).unwrap();
    let oracle = naive_xcorr_1d(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0, 4.0]);
    let exact = ts.apply(&[q(1, 1), q(1, 1), q(1, 1)], &[q(1, 1), q(2, 1), q(3, 1), q(4, 1)]);
    let pass = report.passed()
        && fast.channel(0).as_slice() == oracle.as_slice()
        && oracle == [6.0, 9.0]
        && exact == [q(6, 1), q(9, 1)];
    Outcome::new(
        pass,
        format!(
            "golden F(2,3) validation {}; pipeline {:?}, oracle {:?}",
            if report.passed() { "exact" } else { "failed" },
            fast.channel(0).as_slice(),
            oracle
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut failed = Vec::new();
    for &(s, g) in &SYNTH_SIZES {
        let ts = synthesize_transforms(s, g, &default_points(s + g - 1)).unwrap();
        if !validate_transforms(&ts).unwrap().passed() {
            failed.push(format!("F({s},{g})"));
        }
    }
    Outcome::new(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} sizes validate exactly", SYNTH_SIZES.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn criterion_3() -> Outcome {
    let ts = reference_f43_matrices();
    let report = validate_transforms(&ts).unwrap();
    // Diagnostic only: success means a report with located discrepancies.
    let located = report.passed() || report.first_violation.is_some();
    let detail = if report.passed() {
        format!("reference 6x6x6 matrices validate ({} identities)", report.checked)
    } else {
        let first = report.first_violation.as_ref().unwrap();
        format!(
            "reference 6x6x6 matrices fail {}/{} identities; first at kernel {}, data {}, output {} (expected {}, got {})",
            report.violations,
            report.checked,
            first.kernel_index,
            first.data_index,
            first.output_index,
            first.expected,
            first.actual
        )
    };
    Outcome::new(located, detail)
}

fn random_case<T: Scalar>(
    rng: &mut StdRng,
    g: usize,
    n: usize,
) -> (FeatureMap<T>, ConvLayerSpec<T>, FeatureMap<f64>, ConvLayerSpec<f64>) {
    let m = rng.random_range(1..=8);
    let k = rng.random_range(1..=8);
    let lo = 4.max(g);
    let max_extent = match n {
        1 => 24,
        2 => 24,
        _ => 14,
    };
    let shape: Vec<usize> = (0..n).map(|_| rng.random_range(lo..=max_extent)).collect();
    let xlen: usize = shape.iter().product::<usize>() * m;
    let xs: Vec<f64> = (0..xlen).map(|_| rng.random_range(-1.0..1.0)).collect();
    let wlen = k * m * g.pow(n as u32);
    let ws: Vec<f64> = (0..wlen).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bias: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let act = if rng.random_bool(0.5) {
        Activation::Relu
    } else {
        Activation::None
    };

    let mut xshape = vec![m];
    xshape.extend(&shape);
    let mut wshape = vec![k, m];
    wshape.extend(std::iter::repeat_n(g, n));
    let x64 = FeatureMap::from_tensor(&DenseTensor::new(xshape.clone(), xs.clone()).unwrap()).unwrap();
    let l64 = ConvLayerSpec::new(
        &DenseTensor::new(wshape.clone(), ws.clone()).unwrap(),
        bias.clone(),
        act,
    )
    .unwrap();
    let cast = |v: &[f64]| v.iter().map(|&a| T::from_f64_lossy(a)).collect::<Vec<T>>();
    let x = FeatureMap::from_tensor(&DenseTensor::new(xshape, cast(&xs)).unwrap()).unwrap();
    let l = ConvLayerSpec::new(&DenseTensor::new(wshape, cast(&ws)).unwrap(), cast(&bias), act).unwrap();
    (x, l, x64, l64)
}

fn widen<T: Scalar>(fm: &FeatureMap<T>) -> FeatureMap<f64> {
    FeatureMap::new(
        fm.channels()
            .iter()
            .map(|c| {
                DenseTensor::new(
                    c.shape().to_vec(),
                    c.as_slice().iter().map(|v| v.to_f64().unwrap()).collect(),
                )
                .unwrap()
            })
            .collect(),
    )
    .unwrap()
}

fn criterion_4() -> Outcome {
    let sets: Vec<TransformSet> = SYNTH_SIZES
        .iter()
        .map(|&(s, g)| synthesize_transforms(s, g, &default_points(s + g - 1)).unwrap())
        .collect();
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst32: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut worst64 = 0.0f64;
    for case in 0..RANDOM_CONFIGS {
        let ts = &sets[case % sets.len()];
        let n = 1 + (case / sets.len()) % 3;
        let workers = rng.random_range(1..=4);
        let block = rng.random_range(1..=16);
        let plan = ExecPlan::new(block, workers, 8).unwrap();

        let (x32, l32, x64, l64) = random_case::<f32>(&mut rng, ts.g, n);
        let oracle = direct_layer_forward(&x64, &l64).unwrap();
        let fast64 = fast_layer_forward(&x64, &l64, ts, &plan).unwrap();
        let fast32 = fast_layer_forward(&x32, &l32, ts, &plan).unwrap();
        worst64 = worst64.max(fast64.max_rel_error(&oracle).unwrap());
        let e32 = widen(&fast32).max_rel_error(&oracle).unwrap();
        let slot = worst32.entry((ts.s, ts.g, n)).or_insert(0.0);
        *slot = slot.max(e32);
    }
    let max32 = worst32.values().copied().fold(0.0, f64::max);
    let over: Vec<String> = worst32
        .iter()
        .filter(|(_, &e)| e > TOL_F32)
        .map(|((s, g, n), e)| format!("F({s},{g}) N={n}: {e:.1e}"))
        .collect();
    Outcome::new(
        max32 <= TOL_F32 && worst64 <= TOL_F64,
        format!(
            "{RANDOM_CONFIGS} configs; worst rel err f32 {max32:.2e} (limit {TOL_F32:.0e}), f64 {worst64:.2e} (limit {TOL_F64:.0e}); f32 over limit: [{}]",
            over.join("; ")
        ),
    )
}

fn criterion_5() -> Outcome {
    let table = [
        ((3, 2), "2.25", "3.38"),
        ((2, 3), "2.25", "3.38"),
        ((5, 4), "6.25", "15.63"),
        ((4, 5), "6.25", "15.63"),
        ((3, 6), "5.06", "11.39"),
    ];
    let mut bad = Vec::new();
    for ((s, g), two, three) in table {
        let got2 = format_ratio_2dp(&theoretical_speedup(s, g, 2).unwrap());
        let got3 = format_ratio_2dp(&theoretical_speedup(s, g, 3).unwrap());
        if got2 != two || got3 != three {
            bad.push(format!("({s},{g}) -> {got2}/{got3}"));
        }
    }
    Outcome::new(
        bad.is_empty(),
        if bad.is_empty() {
            "5 rows match to 2 decimals".into()
        } else {
            bad.join(", ")
        },
    )
}

fn criterion_6() -> Outcome {
    let expected = [(2, 4), (3, 4), (4, 8), (5, 8), (6, 8)];
    let got: Vec<(usize, usize)> = expected
        .iter()
        .map(|&(g, _)| (g, avx_aware_size(g, 2, 8).unwrap().0))
        .collect();
    Outcome::new(got == expected, format!("(G, D) = {got:?}"))
}

fn criterion_7() -> Outcome {
    let f23 = synthesize_transforms(2, 3, &default_points(4)).unwrap();
    let mut ok = layer_mul_count_fast(1, 1, &f23, 1, Counting::Dense).unwrap() == 28;
    for m in [1u128, 10, 100] {
        let got = layer_mul_count_fast(m as usize, m as usize, &f23, 1, Counting::Dense).unwrap();
        ok &= got == 4 * m * m + 24 * m;
    }
    let f43 = synthesize_transforms(4, 3, &default_points(6)).unwrap();
    let ceiling = theoretical_speedup(4, 3, 3).unwrap().to_f64().unwrap();
    let curve = modeled_speedup_curve(&f43, 3, 1..=4096, Counting::Dense).unwrap();
    let r100 = curve[99].1;
    let r10 = curve[9].1;
    let sup = curve.iter().map(|p| p.1).fold(0.0, f64::max);
    let margin = r100 / r10;
    ok &= r100 > 6.0 && sup < ceiling && ceiling == 8.0 && (margin - 3.0).abs() <= 0.75;
    Outcome::new(
        ok,
        format!(
            "4M^2+24M exact; F(4,3) N=3 ratio(10) {r10:.3}, ratio(100) {r100:.3} (x{margin:.2}), ratio(4096) {sup:.3} < {ceiling}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 8);
    let cases: [(Vec<usize>, usize, usize); 4] = [
        (vec![7], 4, 2),
        (vec![11, 9], 6, 4),
        (vec![10, 7, 5], 5, 3),
        (vec![13], 8, 5),
    ];
    let mut ok = true;
    for (shape, d, s) in &cases {
        let g = d - s + 1;
        let len: usize = shape.iter().product();
        let x = DenseTensor::new(
            shape.clone(),
            (0..len).map(|_| rng.random_range(-1.0f64..1.0)).collect(),
        )
        .unwrap();
        let kernel = DenseTensor::new(
            vec![g; shape.len()],
            (0..g.pow(shape.len() as u32))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let whole = direct_convolve_spatial(&x, &kernel).unwrap();
        let (tiles, plan) = extract_tiles(&x, *d, *s).unwrap();
        let outs: Vec<_> = tiles
            .iter()
            .map(|t| direct_convolve_spatial(t, &kernel).unwrap())
            .collect();
        let stitched = stitch_outputs(&outs, &plan).unwrap();
        ok &= stitched == whole;
    }
    Outcome::new(
        ok,
        format!("{} shapes including length 7, D=4, S=2 are bit-exact", cases.len()),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 9);
    let (m, k, g) = (8, 8, 3);
    let xs: Vec<f32> = (0..m * 32 * 32 * 32).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ws: Vec<f32> = (0..k * m * g * g * g).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = FeatureMap::from_tensor(&DenseTensor::new(vec![m, 32, 32, 32], xs).unwrap()).unwrap();
    let layer = ConvLayerSpec::new(
        &DenseTensor::new(vec![k, m, g, g, g], ws).unwrap(),
        vec![0.1; k],
        Activation::Relu,
    )
    .unwrap();
    let (d, s) = avx_aware_size(g, 3, 8).unwrap();
    let ts = synthesize_transforms(s, g, &default_points(d)).unwrap();
    let max = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut threads = vec![1, 2, 4, max];
    threads.sort_unstable();
    threads.dedup();
    let base = FastConv::new(&layer, &ts, ExecPlan::new(k, 1, 8).unwrap())
        .unwrap()
        .forward(&x)
        .unwrap();
    let mut identical = true;
    for &t in &threads[1..] {
        for block in [k, 3] {
            let out = FastConv::new(&layer, &ts, ExecPlan::new(block, t, 8).unwrap())
                .unwrap()
                .forward(&x)
                .unwrap();
            identical &= out == base;
        }
    }
    Outcome::new(
        identical,
        format!("F({s},{g}) 32^3, M=K=8: bit-identical for threads {threads:?}"),
    )
}

fn time_best<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_10() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 10);
    let (m, k, g, side) = (32, 32, 4, 1024);
    let xs: Vec<f32> = (0..m * side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ws: Vec<f32> = (0..k * m * g * g).map(|_| rng.random_range(-0.2..0.2)).collect();
    let x = FeatureMap::from_tensor(&DenseTensor::new(vec![m, side, side], xs).unwrap()).unwrap();
    let layer = ConvLayerSpec::new(
        &DenseTensor::new(vec![k, m, g, g], ws).unwrap(),
        vec![0.0; k],
        Activation::None,
    )
    .unwrap();
    let (d, s) = avx_aware_size(g, 2, 8).unwrap();
    let ts = synthesize_transforms(s, g, &default_points(d)).unwrap();

    let mut direct_out = None;
    let direct = time_best(1, || direct_out = Some(direct_layer_forward(&x, &layer).unwrap()));
    let engine = FastConv::new(&layer, &ts, ExecPlan::new(k, 1, 8).unwrap()).unwrap();
    let mut fast_out = None;
    let fast = time_best(2, || fast_out = Some(engine.forward(&x).unwrap()));
    let err = widen(&fast_out.unwrap())
        .max_rel_error(&widen(&direct_out.unwrap()))
        .unwrap();
    let ratio = fast / direct;

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let mut counts = vec![1];
    let mut t = 2;
    while t <= cores {
        counts.push(t);
        t *= 2;
    }
    if *counts.last().unwrap() != cores {
        counts.push(cores);
    }
    let voxels = (k * (side - g + 1) * (side - g + 1)) as f64;
    let mut throughput = Vec::new();
    for &threads in &counts {
        let engine = FastConv::new(&layer, &ts, ExecPlan::new(k, threads, 8).unwrap()).unwrap();
        let secs = if threads == 1 {
            fast
        } else {
            time_best(2, || drop(engine.forward(&x).unwrap()))
        };
        throughput.push(voxels / secs / 1e6);
    }
    let monotonic = throughput.windows(2).all(|w| w[1] >= w[0]);
    Outcome::new(
        ratio <= PERF_RATIO_LIMIT && monotonic && err <= TOL_F32,
        format!(
            "F({s},{g}) 1024^2 M=K=32: fast {fast:.3}s vs direct {direct:.3}s (ratio {ratio:.3}, limit {PERF_RATIO_LIMIT}); rel err {err:.1e}; MVox/s at threads {counts:?}: {:?}",
            throughput.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>()
        ),
    )
}

type Criterion = (u32, fn() -> Outcome, Duration);

#[test]
fn acceptance_suite() {
    let criteria: [Criterion; 10] = [
        (1, criterion_1, Duration::from_secs(1)),
        (2, criterion_2, Duration::from_secs(10)),
        (3, criterion_3, Duration::from_secs(10)),
        (4, criterion_4, Duration::from_secs(300)),
        (5, criterion_5, Duration::from_secs(1)),
        (6, criterion_6, Duration::from_secs(1)),
        (7, criterion_7, Duration::from_secs(1)),
        (8, criterion_8, Duration::from_secs(1)),
        (9, criterion_9, Duration::from_secs(60)),
        (10, criterion_10, Duration::from_secs(300)),
    ];
    let mut failures = Vec::new();
    for (id, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = outcome.pass && in_budget;
        println!(
            "criterion {id:>2}: {} ({:.2}s, budget {}s) {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            outcome.detail
        );
        if !pass {
            failures.push(id);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
