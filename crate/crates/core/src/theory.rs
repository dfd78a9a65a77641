// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact computations on finite-support latent laws.
//!
//! These are small-scale oracles: the joint law of a whole graph by
//! enumeration, inner-product CDFs, the population CUSUM, and a two-network
//! distinguishability test built from the sample pair scores.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cusum::{pair_set, weights};
use crate::error::{Error, Result};
use crate::spectral::{scaled_pca, SymmetricMatrix};

const PROB_TOL: f64 = 1e-12;
const RANGE_TOL: f64 = 1e-12;
pub const MAX_GRAPH_NODES: usize = 5;
pub const MAX_ASSIGNMENTS: usize = 1_000_000;

/// Latent law with finitely many atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaw", into = "RawLaw")]
pub struct DiscreteLatentLaw {
    d: usize,
    atoms: Vec<(Vec<f64>, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawLaw {
    atoms: Vec<(Vec<f64>, f64)>,
}

impl TryFrom<RawLaw> for DiscreteLatentLaw {
    type Error = Error;

    fn try_from(raw: RawLaw) -> Result<Self> {
        DiscreteLatentLaw::new(raw.atoms)
    }
}

impl From<DiscreteLatentLaw> for RawLaw {
    fn from(law: DiscreteLatentLaw) -> Self {
        RawLaw { atoms: law.atoms }
    }
}

impl DiscreteLatentLaw {
    /// Atoms are `(point, probability)`. Probabilities must be positive and sum
    /// to one, and all pairwise inner products of support points (including a
    /// point with itself) must lie in `[0, 1]`.
    pub fn new(atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let d = atoms
            .first()
            .map(|a| a.0.len())
            .ok_or_else(|| Error::invalid("law needs at least one atom"))?;
        if d == 0 || atoms.iter().any(|a| a.0.len() != d) {
            return Err(Error::InvalidDimension("atoms must share a positive dimension".into()));
        }
        if atoms.iter().any(|a| !(a.1 > 0.0) || a.0.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("atom probabilities must be positive and points finite"));
        }
        let total = neumaier_sum(atoms.iter().map(|a| a.1));
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(format!("atom probabilities sum to {total}, not 1")));
        }
        for (a, (x, _)) in atoms.iter().enumerate() {
            for (y, _) in &atoms[a..] {
                let v = dot(x, y);
                if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                    return Err(Error::invalid(format!(
                        "support inner product {v} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(DiscreteLatentLaw { d, atoms })
    }

    /// One-dimensional law from `(value, probability)` pairs.
    pub fn scalar(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(atoms.iter().map(|&(x, p)| (vec![x], p)).collect())
    }

    pub fn point_mass(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![(point, 1.0)])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> &[f64] {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (x, p) in &self.atoms {
            acc += p;
            if u < acc {
                return x;
            }
        }
        &self.atoms.last().expect("non-empty").0
    }

    /// Law of `X^T Y` for independent `X, Y` drawn from this law.
    pub fn inner_product_law(&self) -> InnerProductLaw {
        let mut mass: Vec<(f64, f64)> = Vec::with_capacity(self.atoms.len().pow(2));
        for (x, px) in &self.atoms {
            for (y, py) in &self.atoms {
                mass.push((dot(x, y), px * py));
            }
        }
        InnerProductLaw::from_masses(mass)
    }
}

/// Finite distribution on the real line, held as sorted distinct support
/// values with their cumulative probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerProductLaw {
    support: Vec<f64>,
    cdf: Vec<f64>,
}

impl InnerProductLaw {
    pub fn from_masses(mut mass: Vec<(f64, f64)>) -> Self {
        mass.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (v, p) in mass {
            if support.last() == Some(&v) {
                *probs.last_mut().expect("paired") += p;
            } else {
                support.push(v);
                probs.push(p);
            }
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = Neumaier::default();
        for p in probs {
            acc.add(p);
            cdf.push(acc.value());
        }
        InnerProductLaw { support, cdf }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    /// `P(Y <= z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        let idx = self.support.partition_point(|&v| v <= z);
        if idx == 0 {
            0.0
        } else {
            self.cdf[idx - 1]
        }
    }
}

/// Kolmogorov-Smirnov distance between the inner-product laws of `f` and `g`.
pub fn ks_distance(f: &DiscreteLatentLaw, g: &DiscreteLatentLaw) -> f64 {
    ks_between(&f.inner_product_law(), &g.inner_product_law())
}

pub fn ks_between(a: &InnerProductLaw, b: &InnerProductLaw) -> f64 {
    a.support()
        .iter()
        .chain(b.support())
        .map(|&z| (a.cdf(z) - b.cdf(z)).abs())
        .fold(0.0, f64::max)
}

/// `E[X^k]` for `k = 1..=k_max`; one-dimensional laws only.
pub fn moment_vector(f: &DiscreteLatentLaw, k_max: usize) -> Result<Vec<f64>> {
    if f.d() != 1 {
        return Err(Error::invalid(format!(
            "moment vectors are only supported for d = 1, got d = {}",
            f.d()
        )));
    }
    Ok((1..=k_max)
        .map(|k| neumaier_sum(f.atoms().iter().map(|(x, p)| p * x[0].powi(k as i32))))
        .collect())
}

/// Exact joint law of all edge indicators of a graph on `n` nodes.
///
/// Pattern `v` is a bit mask over the `n (n - 1) / 2` pairs in row-major
/// upper-triangle order.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphLaw {
    n: usize,
    probabilities: Vec<f64>,
}

impl GraphLaw {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, pattern: usize) -> f64 {
        self.probabilities[pattern]
    }

    pub fn total(&self) -> f64 {
        neumaier_sum(self.probabilities.iter().copied())
    }

    pub fn total_variation(&self, other: &GraphLaw) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::invalid("graph laws over different node counts"));
        }
        Ok(0.5
            * neumaier_sum(
                self.probabilities
                    .iter()
                    .zip(&other.probabilities)
                    .map(|(a, b)| (a - b).abs()),
            ))
    }

    pub fn max_abs_diff(&self, other: &GraphLaw) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Enumerates every assignment of atoms to the `n` nodes and accumulates
/// `prod p(x_i) * prod_{i<j} q_ij^{v_ij} (1 - q_ij)^{1 - v_ij}` with
/// `q_ij = x_i^T x_j`, for every edge pattern `v`.
pub fn brute_force_graph_law(f: &DiscreteLatentLaw, n: usize) -> Result<GraphLaw> {
    if !(2..=MAX_GRAPH_NODES).contains(&n) {
        return Err(Error::Resource(format!(
            "graph law enumeration supports 2 <= n <= {MAX_GRAPH_NODES}, got {n}"
        )));
    }
    let k = f.atoms().len();
    let assignments = (k as f64).powi(n as i32);
    if assignments > MAX_ASSIGNMENTS as f64 {
        return Err(Error::Resource(format!(
            "{k}^{n} atom assignments exceed the limit of {MAX_ASSIGNMENTS}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let patterns = 1usize << pairs.len();
    let mut acc = vec![Neumaier::default(); patterns];
    let mut choice = vec![0usize; n];
    let mut q = vec![0.0; pairs.len()];
    loop {
        let weight: f64 = choice.iter().map(|&c| f.atoms()[c].1).product();
        for (slot, &(i, j)) in pairs.iter().enumerate() {
            q[slot] = dot(&f.atoms()[choice[i]].0, &f.atoms()[choice[j]].0);
        }
        for (v, cell) in acc.iter_mut().enumerate() {
            let mut p = weight;
            for (slot, &qs) in q.iter().enumerate() {
                p *= if v >> slot & 1 == 1 { qs } else { 1.0 - qs };
            }
            cell.add(p);
        }
        // odometer over atom assignments
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(GraphLaw {
                    n,
                    probabilities: acc.iter().map(Neumaier::value).collect(),
                });
            }
            choice[pos] += 1;
            if choice[pos] < k {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Population CUSUM at `(s, t, e, z)` for snapshots whose inner-product laws
/// are `laws[k - 1]`, with `n` nodes (`n / 2` pairs).
pub fn population_cusum(
    laws: &[InnerProductLaw],
    s: usize,
    t: usize,
    e: usize,
    z: f64,
    n: usize,
) -> Result<f64> {
    check_population(laws, s, t, e, n)?;
    let m = n / 2;
    let (wl, wr) = weights(m, s, t, e);
    let left = neumaier_sum((s..t).map(|k| laws[k].cdf(z)));
    let right = neumaier_sum((t..e).map(|k| laws[k].cdf(z)));
    Ok((wl * m as f64 * left - wr * m as f64 * right).abs())
}

fn check_population(laws: &[InnerProductLaw], s: usize, t: usize, e: usize, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("population CUSUM needs n >= 2"));
    }
    if !(s < t && t < e && e <= laws.len()) {
        return Err(Error::invalid(format!(
            "need 0 <= s < t < e <= T, got ({s}, {t}, {e}) with T = {}",
            laws.len()
        )));
    }
    Ok(())
}

/// `sup_z` of [`population_cusum`], attained on the union of supports in `(s, e]`.
pub fn population_cusum_sup(laws: &[InnerProductLaw], s: usize, t: usize, e: usize, n: usize) -> Result<f64> {
    check_population(laws, s, t, e, n)?;
    let mut zs: Vec<f64> = laws[s..e].iter().flat_map(|l| l.support().iter().copied()).collect();
    zs.sort_unstable_by(f64::total_cmp);
    zs.dedup();
    zs.into_iter()
        .map(|z| population_cusum(laws, s, t, e, z, n))
        .try_fold(0.0f64, |best, v| v.map(|v| best.max(v)))
}

/// Best split of `(s, e)` for the population CUSUM; smallest `t` on ties.
pub fn population_argmax(laws: &[InnerProductLaw], s: usize, e: usize, n: usize) -> Result<(usize, f64)> {
    if e < s + 2 {
        return Err(Error::InvalidInterval { s, e });
    }
    let mut best = (s + 1, f64::NEG_INFINITY);
    for t in (s + 1)..e {
        let v = population_cusum_sup(laws, s, t, e, n)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Same,
    Different,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoNetworkOutcome {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
}

/// Compares the pair-score distributions of two networks on the same nodes:
/// `S = sup_z sqrt(2/n) |sum_pairs (1{Y <= z} - 1{Y' <= z})|`, declared
/// different when `S > 2 sqrt(log n)`.
pub fn two_network_test(a: &SymmetricMatrix, b: &SymmetricMatrix, d: usize) -> Result<TwoNetworkOutcome> {
    if a.n() != b.n() {
        return Err(Error::invalid(format!(
            "networks have different node counts: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    let pairs = pair_set(a.n())?;
    let n = pairs.n_effective();
    let scores = |m: &SymmetricMatrix| -> Result<Vec<f64>> {
        let x = scaled_pca(m, d)?;
        Ok(pairs.pairs().iter().map(|&(i, j)| row_dot(&x, i, j)).collect())
    };
    let ya = scores(a)?;
    let yb = scores(b)?;

    // +1 for samples of the first network, -1 for the second, swept in value order.
    let mut tagged: Vec<(f64, i64)> = ya.iter().map(|&v| (v, 1)).chain(yb.iter().map(|&v| (v, -1))).collect();
    tagged.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut running = 0i64;
    let mut sup = 0i64;
    for (idx, &(v, sign)) in tagged.iter().enumerate() {
        running += sign;
        let group_end = tagged.get(idx + 1).is_none_or(|next| next.0 != v);
        if group_end {
            sup = sup.max(running.abs());
        }
    }
    let statistic = (2.0 / n as f64).sqrt() * sup as f64;
    let threshold = 2.0 * (n as f64).ln().sqrt();
    Ok(TwoNetworkOutcome {
        decision: if statistic > threshold {
            Decision::Different
        } else {
            Decision::Same
        },
        statistic,
        threshold,
    })
}

fn row_dot(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..x.ncols()).map(|c| x[(i, c)] * x[(j, c)]).sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// True when `values` has no strict interior local maximum, i.e. it is
/// monotone or decreases then increases (up to `tol`).
pub fn no_interior_maximum(values: &[f64], tol: f64) -> bool {
    values
        .windows(3)
        .all(|w| !(w[1] > w[0] + tol && w[1] > w[2] + tol))
        && {
            // a plateau followed by a drop after a rise is also an interior max
            let mut rising = false;
            let mut ok = true;
            for w in values.windows(2) {
                if w[1] > w[0] + tol {
                    rising = true;
                } else if w[1] < w[0] - tol && rising {
                    ok = false;
                }
            }
            ok
        }
}
