//! Finite truncations of the `d`-adic integers.
//!
//! A [`DadicWord`] is a finite digit string, least significant digit first,
//! standing for the nonnegative integer `sum digits[i] * d^i`. Depth is
//! explicit so that a word addresses a cylinder at a fixed partition level.

use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DadicWord {
    degree: u32,
    digits: Vec<u32>,
}

/// How far two words agree, reading from the least significant digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Agreement {
    /// Digit 0 already differs.
    Disjoint,
    /// Digits `0..=n` coincide and digit `n + 1` differs.
    Prefix(usize),
    /// All digits coincide up to the common (padded) depth.
    Identical(usize),
}

fn check_degree(degree: u32) -> Result<()> {
    if degree < 2 {
        Err(Error::InvalidDegree(degree))
    } else {
        Ok(())
    }
}

impl DadicWord {
    pub fn new(degree: u32, digits: Vec<u32>) -> Result<Self> {
        check_degree(degree)?;
        if let Some(&digit) = digits.iter().find(|&&a| a >= degree) {
            return Err(Error::InvalidDigit { digit, degree });
        }
        Ok(Self { degree, digits })
    }

    /// Encodes `value` in exactly `depth` digits, zero-padded.
    pub fn from_integer(value: u64, degree: u32, depth: usize) -> Result<Self> {
        check_degree(degree)?;
        let mut digits = Vec::with_capacity(depth);
        let mut rest = value;
        for _ in 0..depth {
            digits.push((rest % u64::from(degree)) as u32);
            rest /= u64::from(degree);
        }
        if rest != 0 {
            return Err(Error::Overflow { value, degree, depth });
        }
        Ok(Self { degree, digits })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    /// `sum digits[i] * d^i`, or `None` if it does not fit in a `u64`.
    pub fn integer_value(&self) -> Option<u64> {
        let d = u64::from(self.degree);
        self.digits
            .iter()
            .rev()
            .try_fold(0u64, |acc, &a| acc.checked_mul(d)?.checked_add(u64::from(a)))
    }

    /// Successor with carry propagation; the word grows by one digit when the
    /// carry leaves the top.
    pub fn add_one(&self) -> Self {
        let mut digits = self.digits.clone();
        let top = self.degree - 1;
        for a in digits.iter_mut() {
            if *a == top {
                *a = 0;
            } else {
                *a += 1;
                return Self { degree: self.degree, digits };
            }
        }
        digits.push(1);
        Self { degree: self.degree, digits }
    }

    /// The first `depth` digits (or the whole word if it is shorter).
    pub fn truncated(&self, depth: usize) -> Self {
        let n = depth.min(self.digits.len());
        Self { degree: self.degree, digits: self.digits[..n].to_vec() }
    }

    /// Zero-padded to at least `depth` digits.
    pub fn padded(&self, depth: usize) -> Self {
        let mut digits = self.digits.clone();
        if digits.len() < depth {
            digits.resize(depth, 0);
        }
        Self { degree: self.degree, digits }
    }

    /// Position (0-based, counterclockwise from the base point) of the
    /// partition interval addressed by this word at level `depth`.
    ///
    /// The interval `I_{a_{n-1} ... a_0}` is obtained by applying the inverse
    /// branch `a_{n-1}` first and `a_0` last, so `a_0` selects the coarsest
    /// position: the index is `sum a_m d^{n-1-m}`.
    pub fn cylinder_position(&self) -> Option<u64> {
        let d = u64::from(self.degree);
        self.digits
            .iter()
            .try_fold(0u64, |acc, &a| acc.checked_mul(d)?.checked_add(u64::from(a)))
    }
}

/// Largest `n` such that the digits `0..=n` of `a` and `b` coincide; the
/// shorter word is zero-padded.
pub fn agreement_depth(a: &DadicWord, b: &DadicWord) -> Result<Agreement> {
    if a.degree != b.degree {
        return Err(Error::DegreeMismatch(a.degree, b.degree));
    }
    let depth = a.depth().max(b.depth());
    let digit = |w: &DadicWord, i: usize| w.digits.get(i).copied().unwrap_or(0);
    match (0..depth).find(|&i| digit(a, i) != digit(b, i)) {
        Some(0) => Ok(Agreement::Disjoint),
        Some(i) => Ok(Agreement::Prefix(i - 1)),
        None => Ok(Agreement::Identical(depth)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn word(d: u32, digits: &[u32]) -> DadicWord {
        DadicWord::new(d, digits.to_vec()).unwrap()
    }

    #[test]
    fn from_integer_examples() {
        assert_eq!(DadicWord::from_integer(5, 2, 4).unwrap().digits(), &[1, 0, 1, 0]);
        assert_eq!(DadicWord::from_integer(0, 3, 2).unwrap().digits(), &[0, 0]);
        assert!(matches!(DadicWord::from_integer(7, 2, 2), Err(Error::Overflow { .. })));
    }

    #[test]
    fn invalid_words_rejected() {
        assert_eq!(DadicWord::new(1, vec![0]), Err(Error::InvalidDegree(1)));
        assert_eq!(DadicWord::new(3, vec![0, 3]), Err(Error::InvalidDigit { digit: 3, degree: 3 }));
    }

    #[test]
    fn add_one_examples() {
        assert_eq!(word(2, &[1, 1]).add_one().digits(), &[0, 0, 1]);
        assert_eq!(word(3, &[2, 0]).add_one().digits(), &[0, 1]);
        assert_eq!(word(2, &[0, 1]).add_one().digits(), &[1, 1]);
    }

    #[test]
    fn add_one_exhaustive() {
        for d in 2..=4u32 {
            let mut w = DadicWord::from_integer(0, d, 1).unwrap();
            for k in 0..(1u64 << 16) {
                assert_eq!(w.integer_value(), Some(k));
                w = w.add_one();
            }
        }
    }

    #[test]
    fn agreement_examples() {
        let w = |k| DadicWord::from_integer(k, 2, 3).unwrap();
        assert_eq!(agreement_depth(&w(3), &w(7)), Ok(Agreement::Prefix(1)));
        assert_eq!(agreement_depth(&w(0), &w(4)), Ok(Agreement::Prefix(1)));
        assert_eq!(agreement_depth(&w(0), &w(1)), Ok(Agreement::Disjoint));
        assert_eq!(agreement_depth(&w(5), &w(5)), Ok(Agreement::Identical(3)));
        let short = DadicWord::from_integer(1, 2, 1).unwrap();
        assert_eq!(agreement_depth(&short, &w(1)), Ok(Agreement::Identical(3)));
        let ternary = DadicWord::from_integer(1, 3, 3).unwrap();
        assert_eq!(agreement_depth(&w(1), &ternary), Err(Error::DegreeMismatch(2, 3)));
    }

    #[test]
    fn cylinder_position_reverses_digits() {
        // (a_0, a_1) = (1, 0) at depth 2 is the third quarter.
        assert_eq!(word(2, &[1, 0]).cylinder_position(), Some(2));
        assert_eq!(word(3, &[2, 1, 0]).cylinder_position(), Some(2 * 9 + 3));
    }

    proptest! {
        #[test]
        fn integer_round_trip(d in 2u32..7, k in 0u64..100_000) {
            let w = DadicWord::from_integer(k, d, 20).unwrap();
            prop_assert_eq!(w.integer_value(), Some(k));
            let again = DadicWord::from_integer(w.integer_value().unwrap(), d, w.depth()).unwrap();
            prop_assert_eq!(again, w);
        }

        #[test]
        fn agreement_is_symmetric(d in 2u32..5, a in 0u64..5000, b in 0u64..5000) {
            let wa = DadicWord::from_integer(a, d, 16).unwrap();
            let wb = DadicWord::from_integer(b, d, 16).unwrap();
            prop_assert_eq!(agreement_depth(&wa, &wb), agreement_depth(&wb, &wa));
            prop_assert_eq!(agreement_depth(&wa, &wa.padded(20)), Ok(Agreement::Identical(20)));
        }
    }
}
