use super::Bitstream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A permutation of `0..N` driving a comparator SNG.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NumberSequence(Vec<usize>);

impl NumberSequence {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Config("number sequence must be non-empty".into()));
        }
        let mut seen = vec![false; n];
        for (j, &v) in values.iter().enumerate() {
            if v >= n {
                return Err(Error::Config(format!(
                    "sequence value {v} at position {j} outside [0, {n})"
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Config(format!("sequence value {v} repeated at position {j}")));
            }
        }
        Ok(NumberSequence(values))
    }

    pub(crate) fn new_unchecked(values: Vec<usize>) -> Self {
        debug_assert!(NumberSequence::new(values.clone()).is_ok());
        NumberSequence(values)
    }

    /// `0, 1, …, n-1`.
    pub fn ramp(n: usize) -> Self {
        NumberSequence((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn into_values(self) -> Vec<usize> {
        self.0
    }

    /// Positions rotated left by `k`: output `j` is input `(j + k) mod N`.
    pub fn rotated(&self, k: usize) -> Self {
        let n = self.len();
        NumberSequence((0..n).map(|j| self.0[(j + k) % n]).collect())
    }

    /// Output position `j` holds input position `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        NumberSequence(perm.iter().map(|&p| self.0[p]).collect())
    }
}

impl fmt::Debug for NumberSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for NumberSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl<'de> Deserialize<'de> for NumberSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<usize>::deserialize(d)?;
        NumberSequence::new(values).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<usize>> for NumberSequence {
    type Error = Error;

    fn try_from(values: Vec<usize>) -> Result<Self> {
        NumberSequence::new(values)
    }
}

/// Comparator D/S conversion: bit `j` is one iff `seq[j] < target`.
pub fn generate(seq: &NumberSequence, target: usize) -> Result<Bitstream> {
    let n = seq.len();
    if target > n {
        return Err(Error::Range {
            value: target as i64,
            max: n,
        });
    }
    Ok(Bitstream::from_fn(n, |j| seq.0[j] < target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[usize]) -> NumberSequence {
        NumberSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn generate_examples() {
        assert_eq!(generate(&seq(&[0, 1, 2, 3]), 2).unwrap().to_string(), "1100");
        assert_eq!(generate(&seq(&[0, 2, 1, 3]), 2).unwrap().to_string(), "1010");
        let s = seq(&[3, 0, 2, 1]);
        assert_eq!(generate(&s, 0).unwrap().to_string(), "0000");
        assert_eq!(generate(&s, 4).unwrap().to_string(), "1111");
    }

    #[test]
    fn generate_rejects_out_of_range_target() {
        assert!(matches!(
            generate(&NumberSequence::ramp(4), 5),
            Err(Error::Range { value: 5, max: 4 })
        ));
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(NumberSequence::new(vec![0, 1, 1]).is_err());
        assert!(NumberSequence::new(vec![0, 3, 1]).is_err());
        assert!(NumberSequence::new(vec![]).is_err());
        assert!(serde_json::from_str::<NumberSequence>("[2,0,2]").is_err());
        let s: NumberSequence = serde_json::from_str("[2,0,1]").unwrap();
        assert_eq!(s.values(), &[2, 0, 1]);
    }

    #[test]
    fn rotation_matches_manual() {
        let s = seq(&[0, 3, 1, 2]);
        assert_eq!(s.rotated(1).values(), &[3, 1, 2, 0]);
        assert_eq!(s.permuted(&[3, 2, 1, 0]).values(), &[2, 1, 3, 0]);
    }
}
