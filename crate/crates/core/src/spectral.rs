// SPDX-License-Identifier: MIT OR Apache-2.0

//! Adjacency spectral embedding.
//!
//! [`scaled_pca`] returns the `d` eigenvectors of a symmetric matrix with the
//! largest absolute eigenvalues, each scaled by `sqrt(|lambda|)`. Ordering and
//! sign are canonical:
//!
//! * eigenpairs are ordered by `|lambda|` descending; values whose magnitudes
//!   agree to a relative `1e-12` are ordered by signed value descending, then by
//!   solver index;
//! * each eigenvector is flipped so its largest-magnitude coordinate (first one
//!   on ties) is positive.
//!
//! Large inputs use a Lanczos iteration with full reorthogonalization that
//! stops once every selected Ritz pair has a relative residual below
//! [`RESIDUAL_TOL`]; small inputs, or Lanczos runs that fail to converge within
//! `n / 2` steps, use a dense symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::AdjacencySeries;

/// Relative residual `||A v - theta v|| / ||A||` accepted for a Ritz pair.
pub const RESIDUAL_TOL: f64 = 1e-11;

const DENSE_CUTOFF: usize = 96;
const TIE_TOL: f64 = 1e-12;

/// A real symmetric `n x n` matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Validates symmetry and finiteness. Entries that differ from their
    /// transpose by at most `1e-12` (relative to the largest entry) are averaged.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let n = data.nrows();
        if n == 0 || data.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "expected a non-empty square matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos % n + 1,
                pos / n + 1
            )));
        }
        let scale = data.amax().max(f64::MIN_POSITIVE);
        let mut data = data;
        for j in 0..n {
            for i in (j + 1)..n {
                let (a, b) = (data[(i, j)], data[(j, i)]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({}, {}): {a} vs {b}",
                        i + 1,
                        j + 1
                    )));
                }
                let m = 0.5 * (a + b);
                data[(i, j)] = m;
                data[(j, i)] = m;
            }
        }
        Ok(SymmetricMatrix { data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

/// Estimated latent positions for every snapshot of a series.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSeries {
    n: usize,
    d: usize,
    positions: Vec<DMatrix<f64>>,
}

impl LatentSeries {
    pub fn new(positions: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = positions
            .first()
            .ok_or_else(|| Error::invalid("latent series needs at least one snapshot"))?;
        let (n, d) = first.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidDimension(format!("latent positions of shape {n}x{d}")));
        }
        for (t, x) in positions.iter().enumerate() {
            if x.shape() != (n, d) {
                return Err(Error::InvalidDimension(format!(
                    "snapshot t = {} has shape {:?}, expected ({n}, {d})",
                    t + 1,
                    x.shape()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite latent position at t = {}", t + 1)));
            }
        }
        Ok(LatentSeries { n, d, positions })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[DMatrix<f64>] {
        &self.positions
    }
}

/// Top-`d` adjacency spectral embedding, `n x d`.
pub fn scaled_pca(a: &SymmetricMatrix, d: usize) -> Result<DMatrix<f64>> {
    let n = a.n();
    if d == 0 || d > n {
        return Err(Error::InvalidDimension(format!("need 1 <= d <= n, got d = {d}, n = {n}")));
    }
    let (values, vectors) = top_abs_eigenpairs(a.as_matrix(), d);
    let mut x = DMatrix::zeros(n, d);
    for (c, (lambda, v)) in values.iter().zip(vectors.iter()).enumerate() {
        let scale = lambda.abs().sqrt();
        let flip = if leading_sign_negative(v) { -scale } else { scale };
        for r in 0..n {
            x[(r, c)] = v[r] * flip;
        }
    }
    Ok(x)
}

/// Embeds every snapshot; snapshots are processed in parallel with results
/// identical to a serial run.
pub fn embed_series(series: &AdjacencySeries, d: usize) -> Result<LatentSeries> {
    let positions = series
        .snapshots()
        .par_iter()
        .enumerate()
        .map(|(t, snap)| {
            let a = SymmetricMatrix {
                data: snap.to_dense(),
            };
            scaled_pca(&a, d).map_err(|e| Error::AtSnapshot {
                t: t + 1,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LatentSeries::new(positions)
}

fn leading_sign_negative(v: &DVector<f64>) -> bool {
    let mut best = 0.0f64;
    let mut neg = false;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            neg = x < 0.0;
        }
    }
    neg
}

/// Picks `d` eigenpairs by the canonical ordering, from candidates given in
/// solver order.
fn select_canonical(values: &[f64], d: usize) -> Vec<usize> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = TIE_TOL * scale.max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    // Near-equal magnitudes are ties: prefer the larger signed value, then the
    // lower solver index.
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 {
            let (p, q) = (order[j - 1], order[j]);
            let tied = (values[p].abs() - values[q].abs()).abs() <= tol;
            let better = values[q] > values[p] + tol
                || ((values[q] - values[p]).abs() <= tol && q < p);
            if tied && better {
                order.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    order.truncate(d);
    order
}

fn top_abs_eigenpairs(a: &DMatrix<f64>, d: usize) -> (Vec<f64>, Vec<DVector<f64>>) {
    let n = a.nrows();
    if n > DENSE_CUTOFF && 4 * d < n {
        if let Some(found) = lanczos_top_abs(a, d) {
            return found;
        }
    }
    dense_top_abs(a, d)
}

fn dense_top_abs(a: &DMatrix<f64>, d: usize) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(a.clone());
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let picked = select_canonical(&values, d);
    let vals = picked.iter().map(|&i| values[i]).collect();
    let vecs = picked
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (vals, vecs)
}

/// Lanczos with full reorthogonalization; `None` when it does not converge in
/// `n / 2` steps.
fn lanczos_top_abs(a: &DMatrix<f64>, d: usize) -> Option<(Vec<f64>, Vec<DVector<f64>>)> {
    let n = a.nrows();
    let max_steps = n / 2;
    let norm_est = a.norm().max(f64::MIN_POSITIVE);
    let breakdown_tol = 1e-12 * norm_est;

    // Fixed seed: the start vectors only need to be generic, and the result
    // must be reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c_705f_u64);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_steps + 1);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);

    let first = fresh_direction(&mut rng, n, &basis)?;
    basis.push(first);

    let mut next_check = (2 * d + 20).min(max_steps);
    let mut k = 0;
    while k < max_steps {
        let q = &basis[k];
        let mut w = a * q;
        let ak = q.dot(&w);
        w.axpy(-ak, q, 1.0);
        if k > 0 {
            w.axpy(-beta[k - 1], &basis[k - 1], 1.0);
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        alpha.push(ak);
        let bk = w.norm();
        k += 1;

        let broke = bk <= breakdown_tol;
        if k >= next_check || broke || k == max_steps {
            let bk_eff = if broke { 0.0 } else { bk };
            if let Some(found) = ritz_if_converged(&basis, &alpha, &beta, bk_eff, d, norm_est) {
                return Some(found);
            }
            next_check = k + (k / 4).max(10);
        }
        if k == max_steps {
            break;
        }
        if broke {
            // Invariant subspace found; continue in its orthogonal complement.
            beta.push(0.0);
            basis.push(fresh_direction(&mut rng, n, &basis)?);
        } else {
            beta.push(bk);
            basis.push(w / bk);
        }
    }
    None
}

fn fresh_direction(rng: &mut ChaCha8Rng, n: usize, basis: &[DVector<f64>]) -> Option<DVector<f64>> {
    for _ in 0..8 {
        let mut v = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
        for _ in 0..2 {
            for b in basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            return Some(v / norm);
        }
    }
    None
}

fn ritz_if_converged(
    basis: &[DVector<f64>],
    alpha: &[f64],
    beta: &[f64],
    last_beta: f64,
    d: usize,
    norm_est: f64,
) -> Option<(Vec<f64>, Vec<DVector<f64>>)> {
    let k = alpha.len();
    if k < d {
        return None;
    }
    let mut tri = DMatrix::zeros(k, k);
    for i in 0..k {
        tri[(i, i)] = alpha[i];
        if i + 1 < k {
            tri[(i, i + 1)] = beta[i];
            tri[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(tri);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let picked = select_canonical(&values, d);
    let tol = RESIDUAL_TOL * norm_est;
    for &i in &picked {
        let residual = (last_beta * eig.eigenvectors[(k - 1, i)]).abs();
        if residual > tol {
            return None;
        }
    }
    // The Ritz value just past the selection must also be resolved, otherwise
    // the cut between the d-th and (d+1)-th magnitude is not trustworthy.
    if let Some(&next) = select_canonical(&values, d + 1).get(d) {
        let residual = (last_beta * eig.eigenvectors[(k - 1, next)]).abs();
        if residual > tol.max(1e-8 * norm_est) {
            return None;
        }
    }
    let n = basis[0].len();
    let vals = picked.iter().map(|&i| values[i]).collect();
    let vecs = picked
        .iter()
        .map(|&i| {
            let mut v = DVector::zeros(n);
            for (j, b) in basis.iter().take(k).enumerate() {
                v.axpy(eig.eigenvectors[(j, i)], b, 1.0);
            }
            let norm = v.norm();
            v / norm
        })
        .collect();
    Some((vals, vecs))
}
