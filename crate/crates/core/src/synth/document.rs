//! Text export of a [`TransformSet`].
//!
//! The document is JSON with fields `S`, `G`, `D`, `points`, the exact
//! matrices `A`, `B`, `C` as row-major nested arrays of reduced rational
//! strings (`"p"` or `"p/q"`), and their double-precision images
//! `A_f64`, `B_f64`, `C_f64`. Only the rational strings are authoritative.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{InterpolationPoint, Rational, SynthError, TransformSet};
use crate::matrix::Matrix;

/// Parses `"p"`, `"p/q"` or a plain decimal such as `"-0.25"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational, SynthError> {
    let t = text.trim();
    let bad = || SynthError::InvalidArgument(format!("not a rational number: {text:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let digits = format!("{int_digits}{frac}");
        let mut n: BigInt = digits.parse().map_err(|_| bad())?;
        if negative {
            n = -n;
        }
        let d = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(n, d));
    }
    t.parse::<BigInt>().map(Rational::from_integer).map_err(|_| bad())
}

#[derive(Serialize, Deserialize)]
struct TransformDocument {
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "G")]
    g: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(default)]
    points: Vec<String>,
    #[serde(rename = "A")]
    a: Vec<Vec<String>>,
    #[serde(rename = "B")]
    b: Vec<Vec<String>>,
    #[serde(rename = "C")]
    c: Vec<Vec<String>>,
    #[serde(rename = "A_f64", default, skip_serializing_if = "Option::is_none")]
    a_f64: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B_f64", default, skip_serializing_if = "Option::is_none")]
    b_f64: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C_f64", default, skip_serializing_if = "Option::is_none")]
    c_f64: Option<Vec<Vec<f64>>>,
}

fn exact_rows(m: &Matrix<Rational>) -> Vec<Vec<String>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.iter().map(ToString::to_string).collect())
        .collect()
}

fn float_rows(m: &Matrix<Rational>) -> Vec<Vec<f64>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn parse_matrix(name: &str, rows: &[Vec<String>]) -> Result<Matrix<Rational>, SynthError> {
    let parsed = rows
        .iter()
        .map(|r| r.iter().map(|v| parse_rational(v)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Matrix::from_rows(parsed).ok_or_else(|| SynthError::Document(format!("matrix {name} has ragged rows")))
}

impl TransformSet {
    pub fn to_document(&self) -> String {
        let doc = TransformDocument {
            s: self.s,
            g: self.g,
            d: self.d,
            points: self.points.iter().map(ToString::to_string).collect(),
            a: exact_rows(&self.a),
            b: exact_rows(&self.b),
            c: exact_rows(&self.c),
            a_f64: Some(float_rows(&self.a)),
            b_f64: Some(float_rows(&self.b)),
            c_f64: Some(float_rows(&self.c)),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
        text.push('\n');
        text
    }

    /// Parses a document; the floating-point arrays, if present, are ignored.
    pub fn from_document(text: &str) -> Result<Self, SynthError> {
        let doc: TransformDocument = serde_json::from_str(text).map_err(|e| SynthError::Document(e.to_string()))?;
        let points = doc
            .points
            .iter()
            .map(|p| p.parse())
            .collect::<Result<Vec<InterpolationPoint>, _>>()?;
        let ts = TransformSet {
            s: doc.s,
            g: doc.g,
            d: doc.d,
            a: parse_matrix("A", &doc.a)?,
            b: parse_matrix("B", &doc.b)?,
            c: parse_matrix("C", &doc.c)?,
            points,
        };
        ts.check_dimensions()?;
        Ok(ts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{default_points, synthesize_transforms};

    #[test]
    fn rational_strings() {
        assert_eq!(parse_rational("3").unwrap(), Rational::from_integer(3.into()));
        assert_eq!(parse_rational("-6/4").unwrap(), Rational::new((-3).into(), 2.into()));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational::new((-1).into(), 4.into()));
        assert_eq!(parse_rational("1.5").unwrap(), Rational::new(3.into(), 2.into()));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn document_fields() {
        let ts = synthesize_transforms(2, 3, &default_points(4)).unwrap();
        let text = ts.to_document();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["S"], 2);
        assert_eq!(json["D"], 4);
        assert_eq!(json["points"], serde_json::json!(["0", "1", "-1", "inf"]));
        assert_eq!(json["B"][1], serde_json::json!(["0", "1/2", "1/2", "0"]));
        assert_eq!(json["B_f64"][1][1], 0.5);
        assert_eq!(TransformSet::from_document(&text).unwrap(), ts);
    }

    #[test]
    fn document_errors() {
        assert!(matches!(TransformSet::from_document("{"), Err(SynthError::Document(_))));
        let bad = r#"{"S":2,"G":3,"D":4,"A":[["1"]],"B":[["1"]],"C":[["1"]]}"#;
        assert!(matches!(
            TransformSet::from_document(bad),
            Err(SynthError::DimensionMismatch(_))
        ));
    }
}
