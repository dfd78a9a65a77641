// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pair scores and the Kolmogorov-Smirnov CUSUM statistic.
//!
//! Time indices follow the usual convention for segment sums: a triple
//! `(s, t, e)` with `0 <= s < t < e <= T` contrasts snapshots `s+1..=t`
//! against `t+1..=e` (1-based snapshot numbers).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::LatentSeries;

/// Disjoint node pairs `(i, i + n_eff / 2)`, stored 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSet {
    n_effective: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn n_effective(&self) -> usize {
        self.n_effective
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Pair set for `n` nodes; for odd `n` the last node is left out.
pub fn pair_set(n: usize) -> Result<PairSet> {
    if n < 2 {
        return Err(Error::invalid(format!("pair set needs n >= 2, got {n}")));
    }
    let n_effective = n - n % 2;
    let half = n_effective / 2;
    Ok(PairSet {
        n_effective,
        pairs: (0..half).map(|i| (i, i + half)).collect(),
    })
}

/// `T x m` matrix of inner-product scores, row `k` holding snapshot `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSeries {
    t_len: usize,
    m: usize,
    scores: Vec<f64>,
}

impl PairSeries {
    /// Row-major scores.
    pub fn new(t_len: usize, m: usize, scores: Vec<f64>) -> Result<Self> {
        if t_len == 0 || m == 0 {
            return Err(Error::InvalidDimension(format!("pair series of shape {t_len}x{m}")));
        }
        if scores.len() != t_len * m {
            return Err(Error::InvalidDimension(format!(
                "expected {} scores, got {}",
                t_len * m,
                scores.len()
            )));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite pair score"));
        }
        Ok(PairSeries { t_len, m, scores })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidDimension("ragged pair score rows".into()));
        }
        Self::new(rows.len(), m, rows.concat())
    }

    /// Number of snapshots `T`.
    pub fn len(&self) -> usize {
        self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.t_len == 0
    }

    /// Number of pairs per snapshot.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Effective node count `2 m`.
    pub fn n_effective(&self) -> usize {
        2 * self.m
    }

    /// Scores of snapshot `k` (0-based row).
    pub fn row(&self, k: usize) -> &[f64] {
        &self.scores[k * self.m..(k + 1) * self.m]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.t_len).map(|k| self.scores[k * self.m + j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }
}

/// `sup_z` of the CUSUM at one split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CusumValue {
    pub s: usize,
    pub t: usize,
    pub e: usize,
    pub value: f64,
    pub argmax_z: f64,
}

/// Inner products of the paired rows of every snapshot.
pub fn pair_scores(latents: &LatentSeries, pairs: &PairSet) -> Result<PairSeries> {
    let n = latents.n();
    if let Some(&(i, j)) = pairs.pairs().iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(Error::invalid(format!(
            "pair ({}, {}) out of bounds for n = {n}",
            i + 1,
            j + 1
        )));
    }
    let m = pairs.len();
    let mut scores = Vec::with_capacity(latents.len() * m);
    for x in latents.positions() {
        scores.extend(pairs.pairs().iter().map(|&(i, j)| row_dot(x, i, j)));
    }
    PairSeries::new(latents.len(), m, scores)
}

fn row_dot(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..x.ncols()).map(|c| x[(i, c)] * x[(j, c)]).sum()
}

fn check_triple(y: &PairSeries, s: usize, t: usize, e: usize) -> Result<()> {
    if !(s < t && t < e && e <= y.len()) {
        return Err(Error::invalid(format!(
            "need 0 <= s < t < e <= T, got (s, t, e) = ({s}, {t}, {e}) with T = {}",
            y.len()
        )));
    }
    Ok(())
}

/// Left and right CUSUM weights for split `t` of `(s, e)` with `m` pairs.
#[inline]
pub fn weights(m: usize, s: usize, t: usize, e: usize) -> (f64, f64) {
    let n = (2 * m) as f64;
    let (ts, et, es) = ((t - s) as f64, (e - t) as f64, (e - s) as f64);
    (
        (2.0 * et / (n * es * ts)).sqrt(),
        (2.0 * ts / (n * es * et)).sqrt(),
    )
}

/// `w_L * left - w_R * right` written as a scaled difference of segment
/// means, so that equal empirical CDFs cancel exactly.
#[derive(Clone, Copy)]
struct Contrast {
    scale: f64,
    ts: f64,
    et: f64,
}

impl Contrast {
    fn new(m: usize, s: usize, t: usize, e: usize) -> Self {
        let (ts, et, es) = ((t - s) as f64, (e - t) as f64, (e - s) as f64);
        Contrast {
            scale: (2.0 * ts * et / ((2 * m) as f64 * es)).sqrt(),
            ts,
            et,
        }
    }

    #[inline]
    fn value(self, left: usize, right: usize) -> f64 {
        self.scale * (left as f64 / self.ts - right as f64 / self.et).abs()
    }
}

/// CUSUM of the indicators `1{score <= z}` at split `t` of `(s, e)`.
pub fn cusum_at(y: &PairSeries, s: usize, t: usize, e: usize, z: f64) -> Result<f64> {
    check_triple(y, s, t, e)?;
    let count = |from: usize, to: usize| -> usize {
        (from..to)
            .map(|k| y.row(k).iter().filter(|&&v| v <= z).count())
            .sum()
    };
    Ok(Contrast::new(y.m(), s, t, e).value(count(s, t), count(t, e)))
}

/// Samples of snapshots `s+1..=e` sorted by value, with distinct-value groups.
struct SortedSegment {
    /// `(value, 0-based row)` ascending by value then row.
    samples: Vec<(f64, u32)>,
    /// End offsets (exclusive) of each run of equal values.
    group_ends: Vec<usize>,
}

impl SortedSegment {
    fn new(y: &PairSeries, s: usize, e: usize) -> Self {
        let mut samples = Vec::with_capacity((e - s) * y.m());
        for k in s..e {
            samples.extend(y.row(k).iter().map(|&v| (v, k as u32)));
        }
        samples.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut group_ends = Vec::new();
        for i in 1..samples.len() {
            if samples[i].0 != samples[i - 1].0 {
                group_ends.push(i);
            }
        }
        group_ends.push(samples.len());
        SortedSegment {
            samples,
            group_ends,
        }
    }

    /// Exact sup over z at split `t`, with the smallest attaining sample value.
    fn sup_at(&self, m: usize, s: usize, t: usize, e: usize) -> (f64, f64) {
        let contrast = Contrast::new(m, s, t, e);
        let mut best = 0.0;
        let mut best_z = self.samples[0].0;
        let mut left = 0usize;
        let mut start = 0usize;
        for &end in &self.group_ends {
            left += self.samples[start..end]
                .iter()
                .filter(|&&(_, k)| (k as usize) < t)
                .count();
            let value = contrast.value(left, end - left);
            if value > best {
                best = value;
                best_z = self.samples[start].0;
            }
            start = end;
        }
        (best, best_z)
    }
}

/// `sup_z` of [`cusum_at`], attained on the distinct sample values in `(s, e]`.
pub fn cusum_sup(y: &PairSeries, s: usize, t: usize, e: usize) -> Result<CusumValue> {
    check_triple(y, s, t, e)?;
    let seg = SortedSegment::new(y, s, e);
    let (value, argmax_z) = seg.sup_at(y.m(), s, t, e);
    Ok(CusumValue {
        s,
        t,
        e,
        value,
        argmax_z,
    })
}

/// Best split of `(s, e)` over `t = s+1..=e-1`; the smallest `t` wins ties.
pub fn max_cusum(y: &PairSeries, s: usize, e: usize) -> Result<(usize, f64)> {
    if e < s + 2 {
        return Err(Error::InvalidInterval { s, e });
    }
    if e > y.len() {
        return Err(Error::invalid(format!("interval end {e} beyond T = {}", y.len())));
    }
    let seg = SortedSegment::new(y, s, e);
    let mut best = (s + 1, f64::NEG_INFINITY);
    for t in (s + 1)..e {
        let (value, _) = seg.sup_at(y.m(), s, t, e);
        if value > best.1 {
            best = (t, value);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_set_examples() {
        let p = pair_set(4).unwrap();
        assert_eq!(p.pairs(), &[(0, 2), (1, 3)]);
        let p = pair_set(5).unwrap();
        assert_eq!(p.n_effective(), 4);
        assert_eq!(p.pairs(), &[(0, 2), (1, 3)]);
        assert_eq!(pair_set(2).unwrap().pairs(), &[(0, 1)]);
        assert!(pair_set(1).is_err());
    }

    #[test]
    fn pair_scores_by_hand() {
        let x = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.8, 0.6]);
        let lat = LatentSeries::new(vec![x]).unwrap();
        let y = pair_scores(&lat, &pair_set(2).unwrap()).unwrap();
        assert!((y.row(0)[0] - 0.96).abs() < 1e-15);

        let ones = DMatrix::from_fn(4, 3, |_, c| if c == 0 { 1.0 } else { 0.0 });
        let lat = LatentSeries::new(vec![ones.clone(), ones]).unwrap();
        let y = pair_scores(&lat, &pair_set(4).unwrap()).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pair_scores_reject_out_of_bounds() {
        let lat = LatentSeries::new(vec![DMatrix::zeros(2, 1)]).unwrap();
        assert!(pair_scores(&lat, &pair_set(4).unwrap()).is_err());
    }

    #[test]
    fn single_pair_example() {
        let y = PairSeries::from_rows(&[vec![0.2], vec![0.8]]).unwrap();
        let v = cusum_at(&y, 0, 1, 2, 0.5).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(cusum_at(&y, 0, 1, 2, 0.1).unwrap(), 0.0);
        let sup = cusum_sup(&y, 0, 1, 2).unwrap();
        assert!((sup.value - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((0.2..0.8).contains(&sup.argmax_z));
    }

    #[test]
    fn constant_series_is_flat() {
        let y = PairSeries::from_rows(&vec![vec![0.3, 0.7, 0.5]; 6]).unwrap();
        for t in 1..6 {
            assert_eq!(cusum_sup(&y, 0, t, 6).unwrap().value, 0.0);
        }
        assert_eq!(max_cusum(&y, 0, 6).unwrap(), (1, 0.0));
    }

    #[test]
    fn triple_and_interval_errors() {
        let y = PairSeries::from_rows(&[vec![0.1], vec![0.2], vec![0.3]]).unwrap();
        assert!(cusum_at(&y, 1, 1, 2, 0.0).is_err());
        assert!(cusum_sup(&y, 0, 2, 4).is_err());
        assert!(matches!(max_cusum(&y, 1, 2), Err(Error::InvalidInterval { .. })));
        assert_eq!(max_cusum(&y, 0, 2).unwrap().0, 1);
    }

    #[test]
    fn sharp_shift_is_located() {
        let mut rows = vec![vec![0.2, 0.25, 0.3]; 7];
        rows.extend(vec![vec![0.7, 0.75, 0.8]; 5]);
        let y = PairSeries::from_rows(&rows).unwrap();
        assert_eq!(max_cusum(&y, 0, 12).unwrap().0, 7);
        assert_eq!(max_cusum(&y, 3, 10).unwrap().0, 7);
    }
}
