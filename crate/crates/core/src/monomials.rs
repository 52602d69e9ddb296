//! Canonical monomial basis of n-variate polynomials of degree at most d.
//!
//! Exponents are listed in graded lexicographic order: by total degree
//! ascending, then lexicographically descending within a degree block. For
//! n = 2, d = 2 this is `[1, x1, x2, x1², x1·x2, x2²]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordering tag written into serialized models.
pub const GRADED_LEX: &str = "graded-lex";

/// Number of monomials of degree ≤ `degree` in `dimension` variables,
/// i.e. the binomial coefficient C(n+d, n).
pub fn basis_size(dimension: usize, degree: usize) -> Result<usize> {
    if dimension == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let overflow = || Error::BasisTooLarge { dimension, degree };
    // C(n+d, k) built up as C(n+k, k) for k = 1..=d; every prefix is an integer.
    let k_max = degree.min(dimension);
    let top = dimension + degree;
    let mut acc: u128 = 1;
    for k in 1..=k_max {
        let factor = (top - k_max + k) as u128;
        acc = acc.checked_mul(factor).ok_or_else(overflow)? / k as u128;
    }
    usize::try_from(acc).map_err(|_| overflow())
}

/// Exponent multi-indices for the monomial basis of ℝ[x]_d in n variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    dimension: usize,
    degree: usize,
    exponents: Vec<Vec<u32>>,
}

impl MonomialBasis {
    pub fn new(dimension: usize, degree: usize) -> Result<Self> {
        let size = basis_size(dimension, degree)?;
        let mut exponents = Vec::with_capacity(size);
        let mut current = vec![0u32; dimension];
        for total in 0..=degree {
            push_compositions(total as u32, 0, &mut current, &mut exponents);
        }
        debug_assert_eq!(exponents.len(), size);
        Ok(Self {
            dimension,
            degree,
            exponents,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// s(d), the number of basis monomials.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor {
            dimension: self.dimension,
            degree: self.degree,
            ordering: GRADED_LEX.to_string(),
        }
    }

    /// Evaluate every monomial at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    /// Evaluate into a caller-provided buffer of length `self.len()`.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        if out.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: out.len(),
            });
        }
        // powers[k * (d+1) + e] = x_k^e
        let stride = self.degree + 1;
        let mut powers = vec![1.0; self.dimension * stride];
        for (k, &xk) in x.iter().enumerate() {
            let row = &mut powers[k * stride..(k + 1) * stride];
            for e in 1..stride {
                row[e] = row[e - 1] * xk;
            }
        }
        for (slot, alpha) in out.iter_mut().zip(&self.exponents) {
            let mut value = 1.0;
            for (k, &a) in alpha.iter().enumerate() {
                if a != 0 {
                    value *= powers[k * stride + a as usize];
                }
            }
            *slot = value;
        }
        Ok(())
    }
}

/// Appends all exponent vectors of `current[pos..]` summing to `remaining`,
/// lexicographically descending.
fn push_compositions(remaining: u32, pos: usize, current: &mut [u32], out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.to_vec());
        current[pos] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        push_compositions(remaining - a, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Serializable identification of a basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub dimension: usize,
    pub degree: usize,
    pub ordering: String,
}

impl BasisDescriptor {
    pub fn build(&self) -> Result<MonomialBasis> {
        if self.ordering != GRADED_LEX {
            return Err(Error::Malformed(format!(
                "unsupported basis ordering `{}`",
                self.ordering
            )));
        }
        MonomialBasis::new(self.dimension, self.degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binomial_naive(n: u64, k: u64) -> u64 {
        (1..=k).fold(1u64, |acc, i| acc * (n - k + i) / i)
    }

    #[test]
    fn basis_size_examples() {
        assert_eq!(basis_size(2, 2).unwrap(), 6);
        assert_eq!(basis_size(5, 0).unwrap(), 1);
        assert_eq!(basis_size(2, 3).unwrap(), 10);
        assert_eq!(basis_size(2, 15).unwrap(), 136);
    }

    #[test]
    fn basis_size_rejects_zero_dimension() {
        assert!(basis_size(0, 3).is_err());
    }

    #[test]
    fn basis_size_overflow_names_arguments() {
        let err = basis_size(200, 200).unwrap_err();
        match err {
            Error::BasisTooLarge { dimension, degree } => {
                assert_eq!((dimension, degree), (200, 200));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn enumeration_matches_size_for_small_grid() {
        for n in 1..=6 {
            for d in 0..=20 {
                let basis = MonomialBasis::new(n, d).unwrap();
                assert_eq!(basis.len(), basis_size(n, d).unwrap());
                assert_eq!(
                    basis.len() as u64,
                    binomial_naive((n + d) as u64, n as u64)
                );
            }
        }
    }

    #[test]
    fn graded_lex_order() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(basis.exponents(), expected.as_slice());
    }

    #[test]
    fn exponents_unique_and_sorted() {
        let basis = MonomialBasis::new(3, 5).unwrap();
        let ex = basis.exponents();
        for pair in ex.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
            assert!(da < db || (da == db && a > b), "{a:?} then {b:?}");
        }
        assert!(ex.iter().all(|e| e.iter().sum::<u32>() <= 5));
    }

    #[test]
    fn evaluate_examples() {
        let b1 = MonomialBasis::new(2, 1).unwrap();
        assert_eq!(b1.evaluate(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let b2 = MonomialBasis::new(2, 2).unwrap();
        assert_eq!(
            b2.evaluate(&[0.0, 0.0]).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            b2.evaluate(&[2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
        );
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        assert!(matches!(
            basis.evaluate(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn descriptor_round_trip() {
        let basis = MonomialBasis::new(3, 4).unwrap();
        assert_eq!(basis.descriptor().build().unwrap(), basis);
        let mut bad = basis.descriptor();
        bad.ordering = "revlex".into();
        assert!(bad.build().is_err());
    }

    proptest! {
        #[test]
        fn all_ones_maps_to_all_ones(n in 1usize..5, d in 0usize..8) {
            let basis = MonomialBasis::new(n, d).unwrap();
            let v = basis.evaluate(&vec![1.0; n]).unwrap();
            prop_assert!(v.iter().all(|&e| e == 1.0));
        }

        #[test]
        fn coordinate_scaling_is_multiplicative(
            x in proptest::collection::vec(-2.0f64..2.0, 3),
            k in 0usize..3,
            c in 0.25f64..3.0,
            d in 0usize..7,
        ) {
            let basis = MonomialBasis::new(3, d).unwrap();
            let base = basis.evaluate(&x).unwrap();
            let mut scaled_x = x.clone();
            scaled_x[k] *= c;
            let scaled = basis.evaluate(&scaled_x).unwrap();
            for (j, alpha) in basis.exponents().iter().enumerate() {
                let expected = base[j] * c.powi(alpha[k] as i32);
                prop_assert!((scaled[j] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }
}
