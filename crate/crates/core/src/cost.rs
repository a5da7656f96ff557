//! Multiplication counts and arithmetic intensity.
//!
//! A fused multiply-accumulate counts as one multiplication and additions
//! are free. Transform costs for `N > 1` are computed by applying the 1-D
//! matrix along axes `0..N` in order on the progressively transformed tile:
//! applying `B` along any axis touches `D^(N-1)` fibres, while applying `A`
//! along axis `a` touches `S^a * D^(N-1-a)` fibres.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::matrix::Matrix;
use crate::synth::{Rational, SynthError, TransformSet};

/// How transform-matrix applications are charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Counting {
    /// Every matrix entry is one multiplication.
    Dense,
    /// Only nonzero entries cost a multiplication.
    Nonzero,
}

impl std::str::FromStr for Counting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dense" => Ok(Counting::Dense),
            "nonzero" | "sparse" => Ok(Counting::Nonzero),
            other => Err(format!("unknown counting mode '{other}' (expected dense or nonzero)")),
        }
    }
}

fn check_sizes(s: usize, g: usize) -> Result<usize, SynthError> {
    if s == 0 || g == 0 {
        return Err(SynthError::InvalidSize { s, g });
    }
    Ok(s + g - 1)
}

/// `(S*G/D)^N` as an exact rational.
pub fn theoretical_speedup(s: usize, g: usize, n: usize) -> Result<BigRational, SynthError> {
    let d = check_sizes(s, g)?;
    let base = BigRational::new(BigInt::from(s * g), BigInt::from(d));
    Ok((0..n).fold(BigRational::one(), |acc, _| acc * &base))
}

/// Renders a rational with two decimals, rounding halves away from zero.
pub fn format_ratio_2dp(r: &BigRational) -> String {
    let scaled = r * BigRational::from_integer(BigInt::from(100));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let rounded = if scaled.is_negative() {
        -((-scaled) + half).floor()
    } else {
        (scaled + half).floor()
    }
    .to_integer();
    let neg = rounded.is_negative();
    let abs = rounded.abs();
    let hundred = BigInt::from(100);
    let (whole, frac): (BigInt, BigInt) = (&abs / &hundred, &abs % &hundred);
    format!(
        "{}{}.{:02}",
        if neg { "-" } else { "" },
        whole,
        frac.to_u32().unwrap_or(0)
    )
}

fn entry_cost(m: &Matrix<Rational>, counting: Counting) -> u128 {
    match counting {
        Counting::Dense => (m.rows() * m.cols()) as u128,
        Counting::Nonzero => m.as_slice().iter().filter(|v| !v.is_zero()).count() as u128,
    }
}

fn pow(base: usize, exp: usize) -> u128 {
    (base as u128).pow(exp as u32)
}

/// Multiplications for one output tile of an `M`-channel, `K`-kernel layer.
/// Kernel transforms are excluded (cached).
pub fn layer_mul_count_fast(
    m: usize,
    k: usize,
    ts: &TransformSet,
    n: usize,
    counting: Counting,
) -> Result<u128, SynthError> {
    ts.check_dimensions()?;
    let (s, d) = (ts.s, ts.d);
    let n_eff = n.max(1);
    let b_cost = n_eff as u128 * entry_cost(&ts.b, counting) * pow(d, n_eff - 1);
    let a_cost: u128 = (0..n_eff)
        .map(|axis| entry_cost(&ts.a, counting) * pow(s, axis) * pow(d, n_eff - 1 - axis))
        .sum();
    if n == 0 {
        return Ok((m * k) as u128);
    }
    Ok(pow(d, n) * (m * k) as u128 + m as u128 * b_cost + k as u128 * a_cost)
}

/// `M*K*S^N*G^N` multiplications for one output tile computed directly.
pub fn layer_mul_count_direct(m: usize, k: usize, s: usize, g: usize, n: usize) -> u128 {
    (m * k) as u128 * pow(s, n) * pow(g, n)
}

/// `(M, direct / fast)` with `K = M` for every `M` in the range.
pub fn modeled_speedup_curve(
    ts: &TransformSet,
    n: usize,
    m_range: impl IntoIterator<Item = usize>,
    counting: Counting,
) -> Result<Vec<(usize, f64)>, SynthError> {
    m_range
        .into_iter()
        .map(|m| {
            let fast = layer_mul_count_fast(m, m, ts, n, counting)?;
            let direct = layer_mul_count_direct(m, m, ts.s, ts.g, n);
            Ok((m, direct as f64 / fast as f64))
        })
        .collect()
}

/// Compute-to-memory ratio of the element-wise stage for a block of `T`
/// tiles. Unfused the ratio is 1; fused it is `2TK / (T + K)`.
/// The channel count cancels out of both forms.
pub fn arithmetic_intensity(t: usize, _m: usize, k: usize, fused: bool) -> f64 {
    if !fused {
        return 1.0;
    }
    2.0 * (t * k) as f64 / (t + k) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostReport {
    pub m: usize,
    pub k: usize,
    pub direct_muls: u128,
    pub fast_muls_dense: u128,
    pub fast_muls_sparse: u128,
    pub speedup_theoretical: BigRational,
    /// Direct over dense fast count.
    pub speedup_modeled: f64,
    /// Fused intensity with `T = K`.
    pub arithmetic_intensity: f64,
}

impl CostReport {
    pub fn ratio_dense(&self) -> f64 {
        self.direct_muls as f64 / self.fast_muls_dense as f64
    }

    pub fn ratio_sparse(&self) -> f64 {
        self.direct_muls as f64 / self.fast_muls_sparse as f64
    }
}

pub fn cost_report(m: usize, k: usize, ts: &TransformSet, n: usize) -> Result<CostReport, SynthError> {
    let direct = layer_mul_count_direct(m, k, ts.s, ts.g, n);
    let dense = layer_mul_count_fast(m, k, ts, n, Counting::Dense)?;
    let sparse = layer_mul_count_fast(m, k, ts, n, Counting::Nonzero)?;
    Ok(CostReport {
        m,
        k,
        direct_muls: direct,
        fast_muls_dense: dense,
        fast_muls_sparse: sparse,
        speedup_theoretical: theoretical_speedup(ts.s, ts.g, n)?,
        speedup_modeled: direct as f64 / dense as f64,
        arithmetic_intensity: arithmetic_intensity(k, m, k, true),
    })
}

pub const COST_CSV_HEADER: [&str; 8] = [
    "M",
    "K",
    "direct_muls",
    "fast_muls_dense",
    "fast_muls_sparse",
    "ratio_dense",
    "ratio_sparse",
    "ceiling",
];

/// Writes reports as CSV with a header row.
pub fn write_cost_csv<W: Write>(out: W, reports: &[CostReport]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COST_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.m.to_string(),
            r.k.to_string(),
            r.direct_muls.to_string(),
            r.fast_muls_dense.to_string(),
            r.fast_muls_sparse.to_string(),
            format!("{:.6}", r.ratio_dense()),
            format!("{:.6}", r.ratio_sparse()),
            format!("{:.6}", r.speedup_theoretical.to_f64().unwrap_or(f64::NAN)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{default_points, synthesize_transforms};
    use proptest::prelude::*;

    fn f23() -> TransformSet {
        synthesize_transforms(2, 3, &default_points(4)).unwrap()
    }

    #[test]
    fn speedup_rendering() {
        let r = |s, g, n| format_ratio_2dp(&theoretical_speedup(s, g, n).unwrap());
        assert_eq!(r(3, 2, 2), "2.25");
        assert_eq!(r(3, 2, 3), "3.38");
        assert_eq!(r(5, 4, 3), "15.63");
        assert_eq!(r(4, 3, 3), "8.00");
        assert_eq!(
            theoretical_speedup(4, 3, 3).unwrap(),
            BigRational::from_integer(8.into())
        );
        assert_eq!(format_ratio_2dp(&BigRational::new((-1).into(), 8.into())), "-0.13");
    }

    #[test]
    fn f23_counts() {
        let ts = f23();
        assert_eq!(layer_mul_count_fast(1, 1, &ts, 1, Counting::Dense).unwrap(), 28);
        assert_eq!(layer_mul_count_fast(1, 1, &ts, 1, Counting::Nonzero).unwrap(), 18);
        for m in 1..20u128 {
            let got = layer_mul_count_fast(m as usize, m as usize, &ts, 1, Counting::Dense).unwrap();
            assert_eq!(got, 4 * m * m + 24 * m);
        }
        assert_eq!(layer_mul_count_direct(1, 1, 2, 3, 1), 6);
        assert_eq!(layer_mul_count_direct(100, 100, 4, 3, 3), 17_280_000);
        assert_eq!(layer_mul_count_direct(7, 5, 1, 1, 3), 35);
    }

    #[test]
    fn two_dimensional_count_by_hand() {
        // B on both axes: 2 * 16 * 4; A on axis 0 of 4x4: 8 * 4, axis 1 of 2x4: 8 * 2.
        let ts = f23();
        assert_eq!(
            layer_mul_count_fast(1, 1, &ts, 2, Counting::Dense).unwrap(),
            16 + 128 + 48
        );
    }

    #[test]
    fn intensity() {
        assert_eq!(arithmetic_intensity(32, 3, 32, true), 32.0);
        assert_eq!(arithmetic_intensity(1, 1, 1, true), 1.0);
        assert_eq!(arithmetic_intensity(7, 2, 9, false), 1.0);
    }

    #[test]
    fn csv_output() {
        let reports = vec![cost_report(1, 1, &f23(), 1).unwrap()];
        let mut buf = Vec::new();
        write_cost_csv(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "M,K,direct_muls,fast_muls_dense,fast_muls_sparse,ratio_dense,ratio_sparse,ceiling"
        );
        assert_eq!(lines.next().unwrap(), "1,1,6,28,18,0.214286,0.333333,1.500000");
    }

    #[test]
    fn counting_parse() {
        assert_eq!("dense".parse::<Counting>().unwrap(), Counting::Dense);
        assert_eq!("Nonzero".parse::<Counting>().unwrap(), Counting::Nonzero);
        assert!("both".parse::<Counting>().is_err());
    }

    proptest! {
        #[test]
        fn speedup_symmetric(s in 1usize..8, g in 1usize..8, n in 1usize..4) {
            prop_assert_eq!(theoretical_speedup(s, g, n).unwrap(), theoretical_speedup(g, s, n).unwrap());
        }

        #[test]
        fn curve_increasing_and_bounded(s in 1usize..5, g in 2usize..4, n in 1usize..4) {
            let ts = synthesize_transforms(s, g, &default_points(s + g - 1)).unwrap();
            let ceiling = theoretical_speedup(s, g, n).unwrap().to_f64().unwrap();
            for counting in [Counting::Dense, Counting::Nonzero] {
                let curve = modeled_speedup_curve(&ts, n, 1..40, counting).unwrap();
                for w in curve.windows(2) {
                    prop_assert!(w[1].1 > w[0].1);
                }
                prop_assert!(curve.iter().all(|&(_, r)| r < ceiling));
            }
        }

        #[test]
        fn nonzero_never_exceeds_dense(m in 1usize..50, k in 1usize..50, s in 1usize..5, g in 1usize..4, n in 1usize..4) {
            let ts = synthesize_transforms(s, g, &default_points(s + g - 1)).unwrap();
            prop_assert!(
                layer_mul_count_fast(m, k, &ts, n, Counting::Nonzero).unwrap()
                    <= layer_mul_count_fast(m, k, &ts, n, Counting::Dense).unwrap()
            );
        }

        #[test]
        fn fused_intensity_bound(t in 1usize..200, k in 1usize..200) {
            let v = arithmetic_intensity(t, 1, k, true);
            prop_assert!(v <= 2.0 * t.min(k) as f64 + 1e-12);
            prop_assert_eq!(arithmetic_intensity(k, 1, k, true), k as f64);
        }
    }
}
