use super::{RationalPoly, SynthError};

/// Pairwise-coprime moduli `m_k` with their CRT recombinators `a_k`.
///
/// `a_k = 1 (mod m_k)` and `a_k = 0 (mod m_j)` for `j != k`, so any residue
/// system `b_k` recombines as `sum_k b_k a_k mod m`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrtBasis {
    moduli: Vec<RationalPoly>,
    recombinators: Vec<RationalPoly>,
    modulus_product: RationalPoly,
}

impl CrtBasis {
    pub fn moduli(&self) -> &[RationalPoly] {
        &self.moduli
    }

    pub fn recombinators(&self) -> &[RationalPoly] {
        &self.recombinators
    }

    pub fn modulus_product(&self) -> &RationalPoly {
        &self.modulus_product
    }

    /// Recombines residues `b_k` (one per modulus) into the unique
    /// polynomial of degree below `deg m`.
    pub fn recombine(&self, residues: &[RationalPoly]) -> Result<RationalPoly, SynthError> {
        if residues.len() != self.moduli.len() {
            return Err(SynthError::DimensionMismatch(format!(
                "{} residues for {} moduli",
                residues.len(),
                self.moduli.len()
            )));
        }
        let sum = residues
            .iter()
            .zip(&self.recombinators)
            .fold(RationalPoly::zero(), |acc, (b, a)| &acc + &(b * a));
        sum.rem(&self.modulus_product)
    }
}

/// Builds CRT recombinators for pairwise-coprime moduli via extended gcd.
///
/// An empty modulus list yields the trivial basis with `m(x) = 1`.
pub fn crt_basis(moduli: &[RationalPoly]) -> Result<CrtBasis, SynthError> {
    for (index, m) in moduli.iter().enumerate() {
        match m.degree() {
            None => return Err(SynthError::DivisionByZero),
            Some(0) => return Err(SynthError::ConstantModulus { index, degree: 0 }),
            Some(_) => {}
        }
    }
    for first in 0..moduli.len() {
        for second in first + 1..moduli.len() {
            let (g, _, _) = RationalPoly::ext_gcd(&moduli[first], &moduli[second]);
            if !g.is_constant() {
                return Err(SynthError::NotCoprime {
                    first,
                    second,
                    gcd: g.to_string(),
                });
            }
        }
    }

    let modulus_product = moduli.iter().fold(RationalPoly::one(), |acc, m| &acc * m);

    let mut recombinators = Vec::with_capacity(moduli.len());
    for (k, mk) in moduli.iter().enumerate() {
        let others = moduli
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .fold(RationalPoly::one(), |acc, (_, m)| &acc * m);
        // u * others + v * m_k = 1  =>  u * others = 1 (mod m_k), 0 (mod m_j)
        let (g, u, _) = RationalPoly::ext_gcd(&others, mk);
        debug_assert_eq!(g, RationalPoly::one());
        recombinators.push((&u * &others).rem(&modulus_product)?);
    }

    Ok(CrtBasis {
        moduli: moduli.to_vec(),
        recombinators,
        modulus_product,
    })
}

/// Fast vector convolution by residues: `s(x) = g(x) d(x)` computed as
/// `sum_k [(g mod m_k)(d mod m_k) mod m_k] a_k mod m`.
///
/// Requires `deg m > deg g + deg d` so the final reduction is lossless.
pub fn fast_vector_convolve_crt(
    g: &RationalPoly,
    d: &RationalPoly,
    basis: &CrtBasis,
) -> Result<RationalPoly, SynthError> {
    let (Some(dg), Some(dd)) = (g.degree(), d.degree()) else {
        return Ok(RationalPoly::zero());
    };
    let dm = basis.modulus_product.degree().unwrap_or(0);
    if dm <= dg + dd {
        return Err(SynthError::ModulusDegreeTooSmall {
            modulus_degree: dm,
            product_degree: dg + dd,
        });
    }
    let residues = basis
        .moduli
        .iter()
        .map(|mk| {
            let gk = g.rem(mk)?;
            let dk = d.rem(mk)?;
            (&gk * &dk).rem(mk)
        })
        .collect::<Result<Vec<_>, _>>()?;
    basis.recombine(&residues)
}
