use std::fmt;

use crate::error::{Error, Result};

/// Upper bound on the number of retained indices of a truncation.
pub const MAX_BASIS_SIZE: usize = 4_000_000;

/// Element of the non-negative integer lattice `Z^d_+`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::ZeroDimension);
        }
        Ok(Self(entries))
    }

    pub fn zero(dimension: usize) -> Self {
        Self(vec![0; dimension.max(1)])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// `|n| = n_1 + ... + n_d`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl From<&[u32]> for MultiIndex {
    fn from(entries: &[u32]) -> Self {
        Self(entries.to_vec())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// The graded index set `{n : |n| <= N}`.
///
/// Storage order is graded by `|n|`; within one order indices are sorted in
/// descending lexicographic order, so for `d = 2` the sequence starts
/// `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`. A smaller truncation of the
/// same dimension is therefore always a prefix of a larger one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisTruncation {
    dimension: usize,
    max_order: usize,
    flat: Vec<u32>,
    orders: Vec<u32>,
}

impl BasisTruncation {
    pub fn new(dimension: usize, max_order: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::ZeroDimension);
        }
        let size = binomial(max_order + dimension, dimension)
            .filter(|s| *s <= MAX_BASIS_SIZE)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "truncation d={dimension}, N={max_order} exceeds {MAX_BASIS_SIZE} indices"
                ))
            })?;
        let mut flat = Vec::with_capacity(size * dimension);
        let mut orders = Vec::with_capacity(size);
        let mut scratch = vec![0u32; dimension];
        for k in 0..=max_order {
            push_order(&mut scratch, 0, k as u32, &mut flat);
            let added = flat.len() / dimension - orders.len();
            orders.extend(std::iter::repeat_n(k as u32, added));
        }
        debug_assert_eq!(orders.len(), size);
        Ok(Self {
            dimension,
            max_order,
            flat,
            orders,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of retained indices, `binomial(N + d, d)`.
    pub fn size(&self) -> usize {
        self.orders.len()
    }

    /// Entries of the index stored at `offset`.
    pub fn entries(&self, offset: usize) -> &[u32] {
        &self.flat[offset * self.dimension..(offset + 1) * self.dimension]
    }

    pub fn index(&self, offset: usize) -> MultiIndex {
        MultiIndex(self.entries(offset).to_vec())
    }

    pub fn order(&self, offset: usize) -> u32 {
        self.orders[offset]
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    /// Number of indices with `|n| <= k`.
    pub fn count_up_to(&self, k: usize) -> usize {
        binomial(k + self.dimension, self.dimension).unwrap_or(usize::MAX)
    }

    /// Storage offset of `entries`, or `None` when the index lies outside the
    /// truncation or has the wrong dimension.
    pub fn offset(&self, entries: &[u32]) -> Option<usize> {
        if entries.len() != self.dimension {
            return None;
        }
        let k: usize = entries.iter().map(|e| *e as usize).sum();
        if k > self.max_order {
            return None;
        }
        let d = self.dimension;
        let mut off = if k == 0 { 0 } else { self.count_up_to(k - 1) };
        let mut rem = k;
        for (i, &e) in entries.iter().enumerate().take(d - 1) {
            let e = e as usize;
            let r = d - i - 1;
            if rem > e {
                // hockey stick: sum_{s < rem - e} C(s + r - 1, r - 1)
                off += binomial(rem - e - 1 + r, r)?;
            }
            rem -= e;
        }
        Some(off)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.flat.chunks_exact(self.dimension)
    }
}

fn push_order(scratch: &mut [u32], pos: usize, remaining: u32, flat: &mut Vec<u32>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        flat.extend_from_slice(scratch);
        return;
    }
    for first in (0..=remaining).rev() {
        scratch[pos] = first;
        push_order(scratch, pos + 1, remaining - first, flat);
    }
}

/// All `n` with `|n| <= max_order` in graded storage order.
pub fn enumerate_indices(dimension: usize, max_order: usize) -> Result<Vec<MultiIndex>> {
    let t = BasisTruncation::new(dimension, max_order)?;
    Ok(t.iter().map(MultiIndex::from).collect())
}

/// Signed-argument front end that rejects negative orders explicitly.
pub fn enumerate_indices_checked(dimension: i64, max_order: i64) -> Result<Vec<MultiIndex>> {
    if dimension < 1 {
        return Err(Error::ZeroDimension);
    }
    if max_order < 0 {
        return Err(Error::InvalidArgument(format!(
            "maximum order must be non-negative, got {max_order}"
        )));
    }
    enumerate_indices(dimension as usize, max_order as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn small_enumerations() {
        assert_eq!(
            enumerate_indices(1, 2).unwrap(),
            vec![idx(&[0]), idx(&[1]), idx(&[2])]
        );
        assert_eq!(
            enumerate_indices(2, 1).unwrap(),
            vec![idx(&[0, 0]), idx(&[1, 0]), idx(&[0, 1])]
        );
    }

    #[test]
    fn count_matches_brute_force() {
        let mut brute = 0;
        for a in 0..=4u32 {
            for b in 0..=4u32 {
                for c in 0..=4u32 {
                    if a + b + c <= 4 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(brute, 35);
        assert_eq!(enumerate_indices(3, 4).unwrap().len(), brute);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(enumerate_indices(0, 3), Err(Error::ZeroDimension)));
        assert!(enumerate_indices_checked(2, -1).is_err());
        assert!(enumerate_indices_checked(-1, 2).is_err());
    }

    #[test]
    fn offsets_round_trip_for_small_dimensions() {
        for d in 1..=4 {
            for n in 0..=12 {
                let t = BasisTruncation::new(d, n).unwrap();
                assert_eq!(t.size(), binomial(n + d, d).unwrap());
                for k in 0..t.size() {
                    assert_eq!(t.offset(t.entries(k)), Some(k), "d={d} N={n} k={k}");
                    assert_eq!(t.order(k), t.index(k).order());
                }
            }
        }
    }

    #[test]
    fn graded_then_descending_lexicographic() {
        let t = BasisTruncation::new(3, 5).unwrap();
        for k in 1..t.size() {
            let (a, b) = (t.entries(k - 1), t.entries(k));
            let (oa, ob) = (t.order(k - 1), t.order(k));
            assert!(oa < ob || (oa == ob && a > b));
        }
    }

    #[test]
    fn smaller_truncation_is_prefix() {
        let small = BasisTruncation::new(2, 4).unwrap();
        let big = BasisTruncation::new(2, 9).unwrap();
        for k in 0..small.size() {
            assert_eq!(small.entries(k), big.entries(k));
        }
        assert_eq!(big.offset(&[5, 5]), None);
        assert_eq!(big.offset(&[1, 2, 3]), None);
    }
}
