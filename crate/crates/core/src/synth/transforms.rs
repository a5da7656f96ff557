use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use super::document::parse_rational;
use super::{crt_basis, Rational, RationalPoly, SynthError};
use crate::matrix::Matrix;

/// Evaluation point of a Cook-Toom construction.
///
/// The point at infinity evaluates a polynomial to its leading coefficient
/// (homogeneous coordinates).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum InterpolationPoint {
    Finite(Rational),
    Infinity,
}

impl InterpolationPoint {
    pub fn int(v: i64) -> Self {
        InterpolationPoint::Finite(Rational::from_integer(v.into()))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        InterpolationPoint::Finite(Rational::new(n.into(), d.into()))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, InterpolationPoint::Infinity)
    }

    /// Row `(p^0, p^1, ..., p^(len-1))`, or `e_(len-1)` at infinity.
    pub fn power_row(&self, len: usize) -> Vec<Rational> {
        match self {
            InterpolationPoint::Finite(p) => {
                let mut out = Vec::with_capacity(len);
                let mut acc = Rational::one();
                for _ in 0..len {
                    out.push(acc.clone());
                    acc *= p;
                }
                out
            }
            InterpolationPoint::Infinity => (0..len)
                .map(|i| {
                    if i + 1 == len {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect(),
        }
    }
}

impl fmt::Display for InterpolationPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterpolationPoint::Finite(p) => write!(f, "{p}"),
            InterpolationPoint::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for InterpolationPoint {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(InterpolationPoint::Infinity);
        }
        parse_rational(t)
            .map(InterpolationPoint::Finite)
            .map_err(|_| SynthError::InvalidPoint(s.to_string()))
    }
}

/// Default point sequence: `0, 1, -1, 2, -2, 1/2, -1/2, 3, -3, 1/3, -1/3, ...`
/// for the first `D - 1` points, with infinity as the last one.
pub fn default_points(d: usize) -> Vec<InterpolationPoint> {
    if d == 0 {
        return Vec::new();
    }
    let mut finite = vec![Rational::zero()];
    let mut n: i64 = 1;
    while finite.len() < d - 1 {
        let mut cands = vec![Rational::from_integer(n.into()), Rational::from_integer((-n).into())];
        if n > 1 {
            cands.push(Rational::new(1.into(), n.into()));
            cands.push(Rational::new((-1).into(), n.into()));
        }
        finite.extend(cands);
        n += 1;
    }
    finite.truncate(d - 1);
    let mut points: Vec<_> = finite.into_iter().map(InterpolationPoint::Finite).collect();
    points.push(InterpolationPoint::Infinity);
    points
}

/// One 1-D fast algorithm `F(S, G)`: `s = A [(C g) . (B d)]` computes the
/// valid cross-correlation of a length-`D` data vector by a length-`G`
/// kernel, `D = S + G - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformSet {
    pub s: usize,
    pub g: usize,
    pub d: usize,
    /// Inverse transform, `S x D`.
    pub a: Matrix<Rational>,
    /// Data transform, `D x D`.
    pub b: Matrix<Rational>,
    /// Kernel transform, `D x G`.
    pub c: Matrix<Rational>,
    /// Points the set was synthesized from; empty for hand-supplied matrices.
    pub points: Vec<InterpolationPoint>,
}

impl TransformSet {
    /// Wraps externally supplied matrices after checking their shapes.
    pub fn from_matrices(a: Matrix<Rational>, b: Matrix<Rational>, c: Matrix<Rational>) -> Result<Self, SynthError> {
        let ts = TransformSet {
            s: a.rows(),
            g: c.cols(),
            d: b.rows(),
            a,
            b,
            c,
            points: Vec::new(),
        };
        ts.check_dimensions()?;
        Ok(ts)
    }

    pub fn check_dimensions(&self) -> Result<(), SynthError> {
        let (s, g, d) = (self.s, self.g, self.d);
        let mut problems = Vec::new();
        if s == 0 || g == 0 || d != s + g - 1 {
            problems.push(format!("D={d} but S+G-1={}", (s + g).saturating_sub(1)));
        }
        if (self.a.rows(), self.a.cols()) != (s, d) {
            problems.push(format!("A is {}x{}, expected {s}x{d}", self.a.rows(), self.a.cols()));
        }
        if (self.b.rows(), self.b.cols()) != (d, d) {
            problems.push(format!("B is {}x{}, expected {d}x{d}", self.b.rows(), self.b.cols()));
        }
        if (self.c.rows(), self.c.cols()) != (d, g) {
            problems.push(format!("C is {}x{}, expected {d}x{g}", self.c.rows(), self.c.cols()));
        }
        if !self.points.is_empty() && self.points.len() != d {
            problems.push(format!("{} points for D={d}", self.points.len()));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SynthError::DimensionMismatch(problems.join("; ")))
        }
    }

    /// Applies the set to exact vectors: `A [(C g) . (B d)]`.
    pub fn apply(&self, g: &[Rational], d: &[Rational]) -> Vec<Rational> {
        let cg = mat_vec(&self.c, g);
        let bd = mat_vec(&self.b, d);
        let prod: Vec<Rational> = cg.iter().zip(&bd).map(|(x, y)| x * y).collect();
        mat_vec(&self.a, &prod)
    }
}

fn mat_vec(m: &Matrix<Rational>, v: &[Rational]) -> Vec<Rational> {
    (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .zip(v)
                .filter(|(a, _)| !a.is_zero())
                .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
        })
        .collect()
}

/// Cook-Toom synthesis of `F(S, G)` from `D = S + G - 1` distinct points.
///
/// With `V` the `D x D` evaluation matrix of degree-`D-1` polynomials at the
/// points, linear convolution is `c = V^-1 [(V_G g) . (V_S h)]`. Valid
/// cross-correlation is its transpose in the data argument, which gives
/// `C = V_G`, `A = V_S^T` and `B = V^-T`. The columns of `V^-1` come from the
/// CRT basis of the finite linear factors `(x - p)`: the recombinators for
/// finite points and, when infinity is present, the product `m(x)` itself
/// (since `c = sum_k c(p_k) a_k + c_(D-1) m(x)`).
pub fn synthesize_transforms(s: usize, g: usize, points: &[InterpolationPoint]) -> Result<TransformSet, SynthError> {
    if s == 0 || g == 0 {
        return Err(SynthError::InvalidSize { s, g });
    }
    let d = s + g - 1;
    if points.len() != d {
        return Err(SynthError::PointCount {
            expected: d,
            actual: points.len(),
        });
    }
    for (i, p) in points.iter().enumerate() {
        if points[..i].contains(p) {
            return Err(SynthError::DuplicatePoint(p.to_string()));
        }
    }

    let moduli: Vec<RationalPoly> = points
        .iter()
        .filter_map(|p| match p {
            InterpolationPoint::Finite(v) => Some(RationalPoly::linear_factor(v)),
            InterpolationPoint::Infinity => None,
        })
        .collect();
    let basis = crt_basis(&moduli)?;

    let mut b_rows = Vec::with_capacity(d);
    let mut finite_index = 0;
    for p in points {
        let column = match p {
            InterpolationPoint::Finite(_) => {
                let a = &basis.recombinators()[finite_index];
                finite_index += 1;
                a
            }
            InterpolationPoint::Infinity => basis.modulus_product(),
        };
        b_rows.push(column.padded(d));
    }
    let b = Matrix::from_rows(b_rows).expect("square");
    let c = Matrix::from_rows(points.iter().map(|p| p.power_row(g)).collect()).expect("rect");
    let a = Matrix::from_rows(points.iter().map(|p| p.power_row(s)).collect())
        .expect("rect")
        .transpose();

    Ok(TransformSet {
        s,
        g,
        d,
        a,
        b,
        c,
        points: points.to_vec(),
    })
}

/// First failing `(kernel basis, data basis, output)` entry of the bilinear
/// identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kernel_index: usize,
    pub data_index: usize,
    pub output_index: usize,
    pub expected: Rational,
    pub actual: Rational,
}

impl Violation {
    pub fn discrepancy(&self) -> Rational {
        &self.actual - &self.expected
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kernel e_{} x data e_{} -> output {}: expected {}, got {} (discrepancy {})",
            self.kernel_index,
            self.data_index,
            self.output_index,
            self.expected,
            self.actual,
            self.discrepancy()
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub s: usize,
    pub g: usize,
    pub d: usize,
    /// Number of `(i, j, output)` entries checked.
    pub checked: usize,
    /// Number of entries that disagree with cross-correlation.
    pub violations: usize,
    pub first_violation: Option<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.first_violation {
            None => write!(
                f,
                "F({},{}) D={}: pass ({} entries exact)",
                self.s, self.g, self.d, self.checked
            ),
            Some(v) => write!(
                f,
                "F({},{}) D={}: FAIL ({} of {} entries wrong); first: {v}",
                self.s, self.g, self.d, self.violations, self.checked
            ),
        }
    }
}

/// Exact symbolic check of `A [(C e_i) . (B e_j)] = xcorr(e_j, e_i)` for
/// every kernel basis vector `e_i` and data basis vector `e_j`.
///
/// Cross-correlation of `e_j` by `e_i` has a single one at output `j - i`.
pub fn validate_transforms(ts: &TransformSet) -> Result<ValidationReport, SynthError> {
    let (s, g, d) = (ts.a.rows(), ts.c.cols(), ts.b.rows());
    if ts.a.cols() != d || ts.b.cols() != d || ts.c.rows() != d {
        return Err(SynthError::DimensionMismatch(format!(
            "A {}x{}, B {}x{}, C {}x{}",
            ts.a.rows(),
            ts.a.cols(),
            ts.b.rows(),
            ts.b.cols(),
            ts.c.rows(),
            ts.c.cols()
        )));
    }
    let mut report = ValidationReport {
        s,
        g,
        d,
        checked: 0,
        violations: 0,
        first_violation: None,
    };
    for i in 0..g {
        for j in 0..d {
            for o in 0..s {
                let actual = (0..d).fold(Rational::zero(), |acc, r| {
                    let (a, c, b) = (&ts.a[(o, r)], &ts.c[(r, i)], &ts.b[(r, j)]);
                    if a.is_zero() || c.is_zero() || b.is_zero() {
                        acc
                    } else {
                        acc + a * c * b
                    }
                });
                let expected = if j == o + i { Rational::one() } else { Rational::zero() };
                report.checked += 1;
                if actual != expected {
                    report.violations += 1;
                    if report.first_violation.is_none() {
                        report.first_violation = Some(Violation {
                            kernel_index: i,
                            data_index: j,
                            output_index: o,
                            expected,
                            actual,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

const AVX_SEARCH_LIMIT: usize = 64;

/// Smallest tile size `D > G` with `D^N mod W == 0` and `S G / D > 1`,
/// returned as `(D, S)`.
pub fn avx_aware_size(g: usize, ndim: usize, width: usize) -> Result<(usize, usize), SynthError> {
    if width == 0 || g < 2 || ndim == 0 {
        return Err(SynthError::InvalidArgument(format!(
            "need W >= 1, G >= 2, N >= 1 (got W={width}, G={g}, N={ndim})"
        )));
    }
    for d in g + 1..=AVX_SEARCH_LIMIT {
        let s = d - g + 1;
        // D^N mod W, without overflow
        let rem = (0..ndim).fold(1 % width, |acc, _| acc * (d % width) % width);
        if rem == 0 && s * g > d {
            return Ok((d, s));
        }
    }
    Err(SynthError::NoAvxSize {
        g,
        ndim,
        width,
        limit: AVX_SEARCH_LIMIT,
    })
}

/// Fraction of entries exactly equal to zero.
pub fn matrix_sparsity<E: Zero>(m: &Matrix<E>) -> Result<f64, SynthError> {
    let n = m.as_slice().len();
    if n == 0 {
        return Err(SynthError::InvalidArgument("empty matrix".into()));
    }
    let zeros = m.as_slice().iter().filter(|e| e.is_zero()).count();
    Ok(zeros as f64 / n as f64)
}
