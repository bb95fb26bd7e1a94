//! Dimension profiles, party subsets and multi-index arithmetic.
//!
//! Parties are numbered 1..n externally. Flat indices are row-major with
//! party 1 as the most significant digit, so the Kronecker product of
//! per-party objects lines up with flat-index arithmetic.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordered list of local dimensions defining a multipartite Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DimProfile {
    dims: Vec<usize>,
}

impl DimProfile {
    /// Build a profile, checking every local dimension is at least 2 and the
    /// total dimension stays under the configured cap.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (i, &d) in dims.iter().enumerate() {
            if d < 2 {
                return Err(Error::LocalDimTooSmall {
                    party: i + 1,
                    dim: d,
                });
            }
        }
        let mut total: usize = 1;
        for &d in &dims {
            total = total
                .checked_mul(d)
                .ok_or_else(|| Error::BadParameter("total dimension overflows".into()))?;
        }
        let cap = crate::max_total_dim();
        if total > cap {
            return Err(Error::DimensionCap { total, cap });
        }
        Ok(Self { dims })
    }

    /// Profile used internally where parties of local dimension one can occur
    /// (factor bookkeeping). Not reachable through `new`.
    pub(crate) fn new_unchecked(dims: Vec<usize>) -> Self {
        Self { dims }
    }

    pub fn n_qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    /// Number of parties.
    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Local dimension of a party, 1-based.
    pub fn local_dim(&self, party: usize) -> usize {
        self.dims[party - 1]
    }

    /// Total dimension D = prod d_i.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major strides, party 1 most significant.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.dims.len();
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Flat index of a digit tuple (0-based digits, one per party).
    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.dims.len());
        let mut flat = 0usize;
        for (i, &d) in digits.iter().enumerate() {
            debug_assert!(d < self.dims[i]);
            flat = flat * self.dims[i] + d;
        }
        flat
    }

    /// Digit tuple of a flat index.
    pub fn decode(&self, mut flat: usize) -> Vec<usize> {
        let n = self.dims.len();
        let mut digits = vec![0usize; n];
        for i in (0..n).rev() {
            digits[i] = flat % self.dims[i];
            flat /= self.dims[i];
        }
        digits
    }

    /// Profile restricted to the given subset of parties.
    pub fn restrict(&self, subset: &SubsetSpec) -> DimProfile {
        let dims = subset.zero_based().iter().map(|&i| self.dims[i]).collect();
        DimProfile { dims }
    }

    /// Concatenation (this profile's parties first).
    pub fn concat(&self, other: &DimProfile) -> Result<DimProfile> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DimProfile::new(dims)
    }
}

/// Strictly increasing 1-based party indices selecting a subsystem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsetSpec {
    indices: Vec<usize>,
}

impl SubsetSpec {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSubset("subset must be nonempty".into()));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidSubset(format!(
                    "indices must be strictly increasing, got {:?}",
                    indices
                )));
            }
        }
        if indices[0] == 0 {
            return Err(Error::InvalidSubset("party indices are 1-based".into()));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn zero_based(&self) -> Vec<usize> {
        self.indices.iter().map(|&i| i - 1).collect()
    }

    /// Check all indices fall within 1..=n.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last > n => Err(Error::InvalidSubset(format!(
                "party index {} out of range for {} parties",
                last, n
            ))),
            _ => Ok(()),
        }
    }

    /// Complement within 1..=n as a plain index list (may be empty).
    pub fn complement_indices(&self, n: usize) -> Vec<usize> {
        (1..=n).filter(|i| !self.indices.contains(i)).collect()
    }

    /// Complement within 1..=n as a SubsetSpec; errors when the subset is all
    /// of 1..=n.
    pub fn complement(&self, n: usize) -> Result<SubsetSpec> {
        SubsetSpec::new(self.complement_indices(n))
    }
}

/// All k-subsets of 1..=n in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<SubsetSpec> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut cur: Vec<usize> = (1..=k).collect();
    loop {
        out.push(SubsetSpec {
            indices: cur.clone(),
        });
        // advance to the next combination
        let mut i = k;
        while i > 0 && cur[i - 1] == n - (k - i) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_rejects_bad_dims() {
        assert!(matches!(DimProfile::new(vec![]), Err(Error::EmptyProfile)));
        assert!(matches!(
            DimProfile::new(vec![2, 1]),
            Err(Error::LocalDimTooSmall { party: 2, dim: 1 })
        ));
    }

    #[test]
    fn profile_encode_decode_roundtrip() {
        let p = DimProfile::new(vec![2, 3, 2]).unwrap();
        assert_eq!(p.total_dim(), 12);
        assert_eq!(p.strides(), vec![6, 2, 1]);
        for flat in 0..12 {
            assert_eq!(p.encode(&p.decode(flat)), flat);
        }
        // party 1 most significant
        assert_eq!(p.encode(&[1, 0, 0]), 6);
        assert_eq!(p.encode(&[0, 2, 1]), 5);
    }

    #[test]
    fn subset_validation() {
        assert!(SubsetSpec::new(vec![]).is_err());
        assert!(SubsetSpec::new(vec![2, 2]).is_err());
        assert!(SubsetSpec::new(vec![3, 2]).is_err());
        assert!(SubsetSpec::new(vec![0, 1]).is_err());
        let s = SubsetSpec::new(vec![1, 3]).unwrap();
        assert!(s.validate_for(3).is_ok());
        assert!(s.validate_for(2).is_err());
        assert_eq!(s.complement_indices(4), vec![2, 4]);
    }

    #[test]
    fn combinations_lexicographic() {
        let combos = combinations(4, 2);
        let got: Vec<Vec<usize>> = combos.iter().map(|c| c.indices().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![1, 2],
                vec![1, 3],
                vec![1, 4],
                vec![2, 3],
                vec![2, 4],
                vec![3, 4]
            ]
        );
        assert_eq!(combinations(5, 3).len(), 10);
    }

    #[test]
    fn dimension_cap_applies() {
        let r = DimProfile::new(vec![2; 13]); // 8192 > 4096 default cap
        assert!(matches!(r, Err(Error::DimensionCap { .. })));
    }
}
