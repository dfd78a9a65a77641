// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary adjacency snapshots stored as packed upper triangles.
//!
//! Bit `k` of a snapshot corresponds to the k-th pair `(i, j)`, `i < j`, in
//! row-major order; bits are packed least-significant first. This is the same
//! layout the packed-binary file format uses for each block.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Number of unordered node pairs for `n` nodes.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Bytes needed to store one packed snapshot of `n` nodes.
pub fn packed_len(n: usize) -> usize {
    pair_count(n).div_ceil(8)
}

/// Row-major index of pair `(i, j)` with `i < j < n`.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// One symmetric, binary, zero-diagonal adjacency matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    n: usize,
    bits: Vec<u8>,
}

impl Snapshot {
    pub fn empty(n: usize) -> Self {
        Snapshot {
            n,
            bits: vec![0; packed_len(n)],
        }
    }

    /// Wraps packed upper-triangle bytes. Padding bits past the last pair must be zero.
    pub fn from_packed(n: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != packed_len(n) {
            return Err(Error::invalid(format!(
                "packed snapshot for n = {n} needs {} bytes, got {}",
                packed_len(n),
                bits.len()
            )));
        }
        let used = pair_count(n) % 8;
        if used != 0 {
            let last = *bits.last().expect("non-empty when used != 0");
            if last >> used != 0 {
                return Err(Error::invalid("non-zero padding bits in packed snapshot"));
            }
        }
        Ok(Snapshot { n, bits })
    }

    /// Builds a snapshot from a dense 0/1 matrix, checking symmetry and the diagonal.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut snap = Snapshot::empty(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!("row {} has length {}, expected {n}", i + 1, row.len())));
            }
            if row[i] != 0 {
                return Err(Error::invalid(format!("non-zero diagonal at node {}", i + 1)));
            }
            for j in (i + 1)..n {
                let (a, b) = (row[j], rows[j][i]);
                if a > 1 || b > 1 {
                    return Err(Error::invalid(format!("non-binary entry at ({}, {})", i + 1, j + 1)));
                }
                if a != b {
                    return Err(Error::invalid(format!("asymmetric entry at ({}, {})", i + 1, j + 1)));
                }
                if a == 1 {
                    snap.set(i, j, true);
                }
            }
        }
        Ok(snap)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn packed(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let k = pair_index(self.n, a, b);
        self.bits[k / 8] >> (k % 8) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i != j, "diagonal entries are always zero");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let k = pair_index(self.n, a, b);
        if value {
            self.bits[k / 8] |= 1 << (k % 8);
        } else {
            self.bits[k / 8] &= !(1 << (k % 8));
        }
    }

    /// Pair-indexed bit, in row-major upper-triangle order.
    #[inline]
    pub fn bit(&self, k: usize) -> bool {
        self.bits[k / 8] >> (k % 8) & 1 == 1
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Edges as 0-based `(i, j)` with `i < j`, row-major.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut k = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.bit(k) {
                    out.push((i, j));
                }
                k += 1;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.bit(k) {
                    m[(i, j)] = 1.0;
                    m[(j, i)] = 1.0;
                }
                k += 1;
            }
        }
        m
    }

    /// Keeps only the listed nodes, in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Snapshot {
        let mut out = Snapshot::empty(nodes.len());
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate().skip(a + 1) {
                if self.get(i, j) {
                    out.set(a, b, true);
                }
            }
        }
        out
    }
}

/// `T` adjacency snapshots over a fixed node set of size `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencySeries {
    n: usize,
    snapshots: Vec<Snapshot>,
}

impl AdjacencySeries {
    pub fn new(n: usize, snapshots: Vec<Snapshot>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("series needs at least one node"));
        }
        if snapshots.is_empty() {
            return Err(Error::invalid("series needs at least one snapshot"));
        }
        if let Some((t, s)) = snapshots.iter().enumerate().find(|(_, s)| s.n() != n) {
            return Err(Error::invalid(format!(
                "snapshot t = {} has {} nodes, expected {n}",
                t + 1,
                s.n()
            )));
        }
        Ok(AdjacencySeries { n, snapshots })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    /// 0-based access.
    pub fn get(&self, t: usize) -> &Snapshot {
        &self.snapshots[t]
    }

    pub fn induced(&self, nodes: &[usize]) -> AdjacencySeries {
        AdjacencySeries {
            n: nodes.len(),
            snapshots: self.snapshots.iter().map(|s| s.induced(nodes)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_is_row_major() {
        let n = 5;
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                assert_eq!(pair_index(n, i, j), k);
                k += 1;
            }
        }
        assert_eq!(k, pair_count(n));
    }

    #[test]
    fn set_get_symmetric() {
        let mut s = Snapshot::empty(4);
        s.set(2, 0, true);
        assert!(s.get(0, 2) && s.get(2, 0));
        assert!(!s.get(1, 1));
        assert_eq!(s.edges(), vec![(0, 2)]);
        s.set(0, 2, false);
        assert_eq!(s.edge_count(), 0);
    }

    #[test]
    fn dense_rejects_asymmetry_and_diagonal() {
        assert!(Snapshot::from_dense(&[vec![0, 1], vec![0, 0]]).is_err());
        assert!(Snapshot::from_dense(&[vec![1, 0], vec![0, 0]]).is_err());
        let s = Snapshot::from_dense(&[vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(s.packed(), &[0x01]);
    }

    #[test]
    fn padding_bits_must_be_zero() {
        assert!(Snapshot::from_packed(3, vec![0b0000_0111]).is_ok());
        assert!(Snapshot::from_packed(3, vec![0b0000_1000]).is_err());
    }
}
