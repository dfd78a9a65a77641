// SPDX-License-Identifier: MIT OR Apache-2.0

//! Threshold selection by a BIC-type criterion.
//!
//! Each candidate threshold on a geometric grid yields a segmentation; every
//! distinct segmentation is scored column by column on the pair-score matrix
//! with a nonparametric likelihood built from segment empirical CDFs, and the
//! lowest total score wins.
//!
//! Two penalties are available. [`Penalty::Uniform`] charges `xi` per change
//! point in every column. [`Penalty::Adaptive`], the default, charges
//! `xi * sqrt(G_j) * v_j` in column `j`, where `G_j` is the number of distinct
//! values the column's likelihood is evaluated on and `v_j` estimates the
//! long-run variance inflation of the column from its rank variogram. The
//! likelihood is an unnormalized sum over `G_j` points, so its spurious gains
//! grow with `G_j`, and serial dependence inflates them further by roughly
//! `v_j`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::cusum::PairSeries;
use crate::error::{Error, Result};
use crate::segmentation::{
    nonpar_rdpg_cpd_cached, strongest_split, ChangePointSet, IntervalSet, SplitCache,
};

pub const DEFAULT_GRID_SIZE: usize = 32;

/// `log(n)^2.1 / 5`.
pub fn default_xi(n: usize) -> f64 {
    (n as f64).ln().powf(2.1) / 5.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct TauGrid {
    pub values: Vec<f64>,
    /// Set when every CUSUM is zero; the grid then holds one value.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCandidate {
    pub tau: f64,
    pub points: ChangePointSet,
    pub score: f64,
}

/// Geometric grid from `1e-3 * a_max` to `a_max`, where `a_max` is the largest
/// top-level CUSUM over the interval set.
pub fn tau_grid(y: &PairSeries, intervals: &IntervalSet, size: usize) -> Result<TauGrid> {
    tau_grid_cached(y, intervals, size, &mut SplitCache::new())
}

fn tau_grid_cached(
    y: &PairSeries,
    intervals: &IntervalSet,
    size: usize,
    cache: &mut SplitCache,
) -> Result<TauGrid> {
    if size < 2 {
        return Err(Error::invalid(format!("grid size must be >= 2, got {size}")));
    }
    let a_max = strongest_split(y, intervals, 0, y.len(), cache)?
        .and_then(|cp| cp.score)
        .unwrap_or(0.0);
    if !(a_max > 0.0) {
        return Ok(TauGrid {
            values: vec![1.0],
            degenerate: true,
        });
    }
    let lo = 1e-3 * a_max;
    let ratio = (a_max / lo).ln() / (size - 1) as f64;
    let mut values: Vec<f64> = (0..size).map(|i| lo * (ratio * i as f64).exp()).collect();
    values[0] = lo;
    values[size - 1] = a_max;
    Ok(TauGrid {
        values,
        degenerate: false,
    })
}

/// Largest lag-one dependence the variance factor will account for.
const MAX_PHI: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    Uniform { xi: f64 },
    Adaptive { xi: f64 },
}

impl Penalty {
    /// Adaptive penalty with [`default_xi`] for `n` effective nodes.
    pub fn default_for(n: usize) -> Self {
        Penalty::Adaptive { xi: default_xi(n) }
    }

    pub fn xi(&self) -> f64 {
        match *self {
            Penalty::Uniform { xi } | Penalty::Adaptive { xi } => xi,
        }
    }

    /// Per-column charge for one change point.
    pub fn column_weights(&self, y: &PairSeries) -> Result<Vec<f64>> {
        let xi = self.xi();
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::invalid(format!("penalty weight must be positive, got {xi}")));
        }
        Ok(match self {
            Penalty::Uniform { .. } => vec![xi; y.m()],
            Penalty::Adaptive { .. } => (0..y.m())
                .map(|j| {
                    let column = y.column(j);
                    xi * (distinct_count(&column) as f64).sqrt() * dependence_factor(&column)
                })
                .collect(),
        })
    }
}

fn distinct_count(column: &[f64]) -> usize {
    let mut v = column.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Mid-ranks scaled to `(0, 1)`.
fn scaled_ranks(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        let mid = (start + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid / n as f64;
        }
        start = end;
    }
    ranks
}

/// `(1 + phi) / (1 - phi)` with `phi = gamma(2) / gamma(1) - 1` from the
/// variogram `gamma` of the column's ranks, clamped to `[0, 0.95]`. The
/// variogram at short lags is barely moved by a few level shifts, so this
/// stays near 1 for independent scores with change points.
pub fn dependence_factor(column: &[f64]) -> f64 {
    let n = column.len();
    if n < 4 {
        return 1.0;
    }
    let r = scaled_ranks(column);
    let gamma = |h: usize| -> f64 {
        (h..n).map(|i| (r[i] - r[i - h]).powi(2)).sum::<f64>() / (2 * (n - h)) as f64
    };
    let g1 = gamma(1);
    if !(g1 > 0.0) {
        return 1.0;
    }
    let phi = (gamma(2) / g1 - 1.0).clamp(0.0, MAX_PHI);
    (1.0 + phi) / (1.0 - phi)
}

/// `sum_k L_k sum_u [F_k log F_k + (1 - F_k) log(1 - F_k)](u)` over the
/// column's distinct values `u`, with `F_k` the empirical CDF of segment `k`
/// (length `L_k`) clamped to `[1/(2 L_k), 1 - 1/(2 L_k)]`.
fn column_log_likelihood(column: &[f64], bounds: &[usize]) -> f64 {
    let mut grid = column.to_vec();
    grid.sort_unstable_by(f64::total_cmp);
    grid.dedup();
    let mut total = 0.0;
    for w in bounds.windows(2) {
        let mut seg = column[w[0]..w[1]].to_vec();
        seg.sort_unstable_by(f64::total_cmp);
        let len = seg.len() as f64;
        let (lo, hi) = (0.5 / len, 1.0 - 0.5 / len);
        let mut below = 0usize;
        let mut acc = 0.0;
        for &u in &grid {
            while below < seg.len() && seg[below] <= u {
                below += 1;
            }
            let f = (below as f64 / len).clamp(lo, hi);
            acc += f * f.ln() + (1.0 - f) * (1.0 - f).ln();
        }
        total += len * acc;
    }
    total
}

/// Segment boundaries `[0, p1 - 1, ..., T]` as 0-based row offsets.
fn segment_bounds(points: &ChangePointSet, t_len: usize) -> Vec<usize> {
    let mut bounds = vec![0];
    bounds.extend(points.points().iter().map(|p| p.location - 1));
    bounds.push(t_len);
    bounds
}

/// `sum_j (-log L_j + xi * K)`; lower is better.
pub fn bic_score(y: &PairSeries, points: &ChangePointSet, xi: f64) -> Result<f64> {
    bic_score_weighted(y, points, &Penalty::Uniform { xi }.column_weights(y)?)
}

/// `sum_j (-log L_j + weights[j] * K)`.
pub fn bic_score_weighted(y: &PairSeries, points: &ChangePointSet, weights: &[f64]) -> Result<f64> {
    points.validate_for(y.len())?;
    if weights.len() != y.m() {
        return Err(Error::InvalidDimension(format!(
            "{} penalty weights for {} columns",
            weights.len(),
            y.m()
        )));
    }
    let bounds = segment_bounds(points, y.len());
    let k = points.len() as f64;
    Ok((0..y.m())
        .map(|j| -column_log_likelihood(&y.column(j), &bounds) + weights[j] * k)
        .sum())
}

/// Runs the segmentation for every grid threshold and keeps the best-scoring
/// distinct model; ties go to the smaller threshold.
pub fn select_tau(
    y: &PairSeries,
    intervals: &IntervalSet,
    penalty: &Penalty,
    grid_size: usize,
) -> Result<ModelCandidate> {
    Ok(select_tau_all(y, intervals, penalty, grid_size)?.0)
}

/// [`select_tau`] plus every distinct candidate in ascending threshold order.
pub fn select_tau_all(
    y: &PairSeries,
    intervals: &IntervalSet,
    penalty: &Penalty,
    grid_size: usize,
) -> Result<(ModelCandidate, Vec<ModelCandidate>)> {
    let weights = penalty.column_weights(y)?;
    let mut cache = SplitCache::new();
    let grid = tau_grid_cached(y, intervals, grid_size, &mut cache)?;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut candidates: Vec<ModelCandidate> = Vec::new();
    for &tau in &grid.values {
        let points = nonpar_rdpg_cpd_cached(y, intervals, tau, 0, y.len(), &mut cache)?;
        if !seen.insert(points.locations()) {
            continue;
        }
        let score = bic_score_weighted(y, &points, &weights)?;
        candidates.push(ModelCandidate { tau, points, score });
    }
    let best = candidates
        .iter()
        .fold(None::<&ModelCandidate>, |best, c| match best {
            Some(b) if b.score <= c.score => Some(b),
            _ => Some(c),
        })
        .cloned()
        .expect("grid is never empty");
    Ok((best, candidates))
}
