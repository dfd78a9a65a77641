// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dynamic network generators with known change points.
//!
//! All four benchmark scenarios use `T = 150` with segments `[1, 50]`,
//! `[51, 100]` and `[101, 150]`, so their ground truth is `{51, 101}`
//! (locations are first snapshots of new segments).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Dirichlet, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::segmentation::ChangePointSet;
use crate::series::{AdjacencySeries, Snapshot};
use crate::spectral::LatentSeries;
use crate::theory::DiscreteLatentLaw;

pub const SCENARIO_T: usize = 150;
pub const SCENARIO_TRUTH: [usize; 2] = [51, 101];

const RANGE_TOL: f64 = 1e-12;
const SPOT_CHECK_DRAWS: usize = 256;

/// Latent position distribution for one segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LatentLaw {
    PointMass { point: Vec<f64> },
    Discrete { law: DiscreteLatentLaw },
    /// One-dimensional `Uniform[low, high]`.
    Uniform { low: f64, high: f64 },
    Dirichlet { alpha: Vec<f64> },
    /// Mixture of component laws with the given weights.
    Mixture { components: Vec<(f64, LatentLaw)> },
}

impl LatentLaw {
    pub fn dim(&self) -> usize {
        match self {
            LatentLaw::PointMass { point } => point.len(),
            LatentLaw::Discrete { law } => law.d(),
            LatentLaw::Uniform { .. } => 1,
            LatentLaw::Dirichlet { alpha } => alpha.len(),
            LatentLaw::Mixture { components } => components.first().map_or(0, |c| c.1.dim()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LatentLaw::PointMass { point } if point.is_empty() => {
                Err(Error::invalid("point mass needs a non-empty point"))
            }
            LatentLaw::Uniform { low, high } if !(low <= high) => {
                Err(Error::invalid(format!("uniform law needs low <= high, got [{low}, {high}]")))
            }
            LatentLaw::Dirichlet { alpha } if alpha.len() < 2 || alpha.iter().any(|a| !(*a > 0.0)) => {
                Err(Error::invalid("dirichlet law needs >= 2 positive concentrations"))
            }
            LatentLaw::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::invalid("mixture needs at least one component"));
                }
                let d = components[0].1.dim();
                let total: f64 = components.iter().map(|c| c.0).sum();
                if components.iter().any(|c| !(c.0 > 0.0) || c.1.dim() != d) || (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(
                        "mixture weights must be positive, sum to 1, and components share a dimension",
                    ));
                }
                components.iter().try_for_each(|c| c.1.validate())
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            LatentLaw::PointMass { point } => point.clone(),
            LatentLaw::Discrete { law } => law.sample(rng).to_vec(),
            LatentLaw::Uniform { low, high } => vec![low + (high - low) * rng.gen::<f64>()],
            LatentLaw::Dirichlet { alpha } => Dirichlet::new(alpha)
                .expect("validated concentrations")
                .sample(rng),
            LatentLaw::Mixture { components } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (w, law) in components {
                    acc += w;
                    if u < acc {
                        return law.sample(rng);
                    }
                }
                components.last().expect("non-empty").1.sample(rng)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// First snapshot (1-based) of the segment.
    pub start: usize,
    pub law: LatentLaw,
}

/// Dependent dynamic random dot product graph with piecewise-constant latent laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model1Config {
    #[serde(rename = "T")]
    pub t_len: usize,
    pub n: usize,
    pub d: usize,
    pub segments: Vec<SegmentSpec>,
    /// Probability a node keeps its latent position from one snapshot to the next.
    pub rho: f64,
    pub seed: u64,
}

impl Model1Config {
    /// Checks the segment layout and spot-checks that sampled inner products
    /// stay in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.t_len == 0 || self.n < 2 || self.d == 0 {
            return Err(Error::invalid("model needs T >= 1, n >= 2, d >= 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        let first = self
            .segments
            .first()
            .ok_or_else(|| Error::invalid("model needs at least one segment"))?;
        if first.start != 1 {
            return Err(Error::invalid("first segment must start at 1"));
        }
        if self.segments.windows(2).any(|w| w[0].start >= w[1].start) {
            return Err(Error::invalid("segment starts must be strictly increasing"));
        }
        if self.segments.last().is_some_and(|s| s.start > self.t_len) {
            return Err(Error::invalid("segment starts beyond T"));
        }
        let mut check_rng = rng::stream(self.seed ^ 0x9e37_79b9_7f4a_7c15, rng::STREAM_SIMULATION);
        for seg in &self.segments {
            seg.law.validate()?;
            if seg.law.dim() != self.d {
                return Err(Error::InvalidDimension(format!(
                    "segment starting at {} has dimension {}, expected {}",
                    seg.start,
                    seg.law.dim(),
                    self.d
                )));
            }
            let draws: Vec<Vec<f64>> = (0..SPOT_CHECK_DRAWS)
                .map(|_| seg.law.sample(&mut check_rng))
                .collect();
            for (a, x) in draws.iter().enumerate() {
                for y in &draws[a..] {
                    let v = dot(x, y);
                    if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                        return Err(Error::invalid(format!(
                            "segment starting at {} is not an inner product distribution: \
                             sampled inner product {v}",
                            seg.start
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LabeledSeries {
    pub series: AdjacencySeries,
    pub truth: ChangePointSet,
    pub latents: Option<LatentSeries>,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Independent Bernoulli edges with probabilities `prob(i, j)`, `i < j`.
fn bernoulli_snapshot(n: usize, rng: &mut ChaCha8Rng, mut prob: impl FnMut(usize, usize) -> f64) -> Snapshot {
    let mut snap = Snapshot::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < prob(i, j) {
                snap.set(i, j, true);
            }
        }
    }
    snap
}

/// Edges from latent positions, rejecting inner products outside `[0, 1]`.
fn rdpg_snapshot(t: usize, positions: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<Snapshot> {
    let n = positions.len();
    let mut snap = Snapshot::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = dot(&positions[i], &positions[j]);
            if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&p) {
                return Err(Error::ModelViolation {
                    t,
                    i: i + 1,
                    j: j + 1,
                    value: p,
                });
            }
            if rng.gen::<f64>() < p {
                snap.set(i, j, true);
            }
        }
    }
    Ok(snap)
}

fn to_latent_matrix(positions: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let d = positions[0].len();
    nalgebra::DMatrix::from_fn(positions.len(), d, |r, c| positions[r][c])
}

fn scenario_truth() -> ChangePointSet {
    ChangePointSet::from_locations(&SCENARIO_TRUTH).expect("valid constant truth")
}

/// Segment index (0, 1 or 2) of 1-based snapshot `t` in the scenario layout.
fn scenario_segment(t: usize) -> usize {
    match t {
        ..=50 => 0,
        51..=100 => 1,
        _ => 2,
    }
}

fn is_segment_start(t: usize) -> bool {
    t == 1 || SCENARIO_TRUTH.contains(&t)
}

/// Sticky latent resampling: fresh draws at segment starts, otherwise each
/// node keeps its position with probability `rho`.
pub fn gen_model1(cfg: &Model1Config) -> Result<LabeledSeries> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, rng::STREAM_SIMULATION);
    let mut snapshots = Vec::with_capacity(cfg.t_len);
    let mut latents = Vec::with_capacity(cfg.t_len);
    let mut positions: Vec<Vec<f64>> = Vec::new();
    let mut seg = 0;
    for t in 1..=cfg.t_len {
        if seg + 1 < cfg.segments.len() && cfg.segments[seg + 1].start == t {
            seg += 1;
        }
        let law = &cfg.segments[seg].law;
        if cfg.segments[seg].start == t {
            positions = (0..cfg.n).map(|_| law.sample(&mut rng)).collect();
        } else {
            for x in positions.iter_mut() {
                if rng.gen::<f64>() >= cfg.rho {
                    *x = law.sample(&mut rng);
                }
            }
        }
        snapshots.push(rdpg_snapshot(t, &positions, &mut rng)?);
        latents.push(to_latent_matrix(&positions));
    }
    let truth = ChangePointSet::from_locations(
        &cfg.segments.iter().skip(1).map(|s| s.start).collect::<Vec<_>>(),
    )?;
    Ok(LabeledSeries {
        series: AdjacencySeries::new(cfg.n, snapshots)?,
        truth,
        latents: Some(LatentSeries::new(latents)?),
    })
}

/// Community of node `i` among four near-equal blocks.
pub fn community(i: usize, n: usize) -> usize {
    i * 4 / n
}

/// Four-block stochastic block model with an edge-level Markov chain of
/// persistence `rho`. Each segment starts from independent edges.
pub fn gen_scenario1(n: usize, rho: f64, seed: u64) -> Result<LabeledSeries> {
    if n < 4 {
        return Err(Error::invalid("scenario 1 needs n >= 4"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SIMULATION);
    let block: Vec<usize> = (0..n).map(|i| community(i, n)).collect();
    let mean = |t: usize, i: usize, j: usize| -> f64 {
        let same = block[i] == block[j];
        match (scenario_segment(t) == 1, same) {
            (false, true) => 0.5,
            (false, false) => 0.3,
            (true, true) => 0.45,
            (true, false) => 0.2,
        }
    };
    let mut snapshots: Vec<Snapshot> = Vec::with_capacity(SCENARIO_T);
    for t in 1..=SCENARIO_T {
        let snap = if is_segment_start(t) {
            bernoulli_snapshot(n, &mut rng, |i, j| mean(t, i, j))
        } else {
            let prev = snapshots.last().expect("t > 1");
            bernoulli_snapshot(n, &mut rng, |i, j| {
                let e = mean(t, i, j);
                if prev.get(i, j) {
                    (1.0 - e) * rho + e
                } else {
                    e * (1.0 - rho)
                }
            })
        };
        snapshots.push(snap);
    }
    Ok(LabeledSeries {
        series: AdjacencySeries::new(n, snapshots)?,
        truth: scenario_truth(),
        latents: None,
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {eps}")));
    }
    Ok(())
}

/// Number of nodes whose law changes in the middle segment.
pub fn shifted_count(n: usize, eps: f64) -> usize {
    (n as f64 * eps).floor() as usize
}

/// One-dimensional positions redrawn from `Uniform[0.2, 0.8]` every snapshot;
/// in the middle segment the first `floor(n eps)` nodes are shifted by `0.2`.
pub fn gen_scenario2(n: usize, eps: f64, seed: u64) -> Result<LabeledSeries> {
    check_eps(eps)?;
    if n < 2 {
        return Err(Error::invalid("scenario 2 needs n >= 2"));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SIMULATION);
    let shifted = shifted_count(n, eps);
    let mut snapshots = Vec::with_capacity(SCENARIO_T);
    let mut latents = Vec::with_capacity(SCENARIO_T);
    for t in 1..=SCENARIO_T {
        let middle = scenario_segment(t) == 1;
        let positions: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let z = 0.2 + 0.6 * rng.gen::<f64>();
                vec![if middle && i < shifted { z + 0.2 } else { z }]
            })
            .collect();
        snapshots.push(rdpg_snapshot(t, &positions, &mut rng)?);
        latents.push(to_latent_matrix(&positions));
    }
    Ok(LabeledSeries {
        series: AdjacencySeries::new(n, snapshots)?,
        truth: scenario_truth(),
        latents: Some(LatentSeries::new(latents)?),
    })
}

/// Outer segments: logistic link of Gaussian positions in three dimensions,
/// each node redrawn with probability 0.9 per snapshot. Middle segment: edge
/// probabilities i.i.d. `Beta(100, 100)`, the whole matrix kept with
/// probability 0.9 per snapshot. Not a random dot product graph, so no latents.
pub fn gen_scenario3(n: usize, seed: u64) -> Result<LabeledSeries> {
    if n < 2 {
        return Err(Error::invalid("scenario 3 needs n >= 2"));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SIMULATION);
    let beta = Beta::new(100.0, 100.0).expect("valid parameters");
    let gaussian = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..3).map(|_| StandardNormal.sample(rng)).collect()
    };
    let pairs = n * (n - 1) / 2;
    let mut z: Vec<Vec<f64>> = Vec::new();
    let mut beta_probs: Vec<f64> = Vec::new();
    let mut snapshots = Vec::with_capacity(SCENARIO_T);
    for t in 1..=SCENARIO_T {
        let snap = if scenario_segment(t) == 1 {
            if t == 51 || rng.gen::<f64>() >= 0.9 {
                beta_probs = (0..pairs).map(|_| beta.sample(&mut rng)).collect();
            }
            let mut k = 0;
            bernoulli_snapshot(n, &mut rng, |_, _| {
                k += 1;
                beta_probs[k - 1]
            })
        } else {
            if is_segment_start(t) {
                z = (0..n).map(|_| gaussian(&mut rng)).collect();
            } else {
                for zi in z.iter_mut() {
                    if rng.gen::<f64>() < 0.9 {
                        *zi = gaussian(&mut rng);
                    }
                }
            }
            bernoulli_snapshot(n, &mut rng, |i, j| logistic(dot(&z[i], &z[j])))
        };
        snapshots.push(snap);
    }
    Ok(LabeledSeries {
        series: AdjacencySeries::new(n, snapshots)?,
        truth: scenario_truth(),
        latents: None,
    })
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Five-dimensional Dirichlet positions kept with probability 0.9 per node and
/// snapshot. In the middle segment the first `floor(n eps)` nodes draw from
/// `Dirichlet(500, ..., 500)` instead of `Dirichlet(1, ..., 1)`.
pub fn gen_scenario4(n: usize, eps: f64, seed: u64) -> Result<LabeledSeries> {
    check_eps(eps)?;
    if n < 2 {
        return Err(Error::invalid("scenario 4 needs n >= 2"));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SIMULATION);
    let flat = Dirichlet::new(&[1.0; 5]).expect("valid concentrations");
    let peaked = Dirichlet::new(&[500.0; 5]).expect("valid concentrations");
    let shifted = shifted_count(n, eps);
    let mut positions: Vec<Vec<f64>> = Vec::new();
    let mut snapshots = Vec::with_capacity(SCENARIO_T);
    let mut latents = Vec::with_capacity(SCENARIO_T);
    for t in 1..=SCENARIO_T {
        let middle = scenario_segment(t) == 1;
        let draw = |i: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            if middle && i < shifted {
                peaked.sample(rng)
            } else {
                flat.sample(rng)
            }
        };
        if is_segment_start(t) {
            positions = (0..n).map(|i| draw(i, &mut rng)).collect();
        } else {
            for i in 0..n {
                if rng.gen::<f64>() >= 0.9 {
                    positions[i] = draw(i, &mut rng);
                }
            }
        }
        snapshots.push(rdpg_snapshot(t, &positions, &mut rng)?);
        latents.push(to_latent_matrix(&positions));
    }
    Ok(LabeledSeries {
        series: AdjacencySeries::new(n, snapshots)?,
        truth: scenario_truth(),
        latents: Some(LatentSeries::new(latents)?),
    })
}

/// Named generator with its parameters, as used in benchmark plans and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Scenario {
    Scenario1 { n: usize, rho: f64 },
    Scenario2 { n: usize, eps: f64 },
    Scenario3 { n: usize },
    Scenario4 { n: usize, eps: f64 },
    /// Constant-law model, useful as a null case.
    Null { n: usize, t_len: usize, p: f64 },
    Model1 { config: Model1Config },
}

impl Scenario {
    pub fn generate(&self, seed: u64) -> Result<LabeledSeries> {
        match self {
            Scenario::Scenario1 { n, rho } => gen_scenario1(*n, *rho, seed),
            Scenario::Scenario2 { n, eps } => gen_scenario2(*n, *eps, seed),
            Scenario::Scenario3 { n } => gen_scenario3(*n, seed),
            Scenario::Scenario4 { n, eps } => gen_scenario4(*n, *eps, seed),
            Scenario::Null { n, t_len, p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid(format!("edge probability must lie in [0, 1], got {p}")));
                }
                gen_model1(&Model1Config {
                    t_len: *t_len,
                    n: *n,
                    d: 1,
                    segments: vec![SegmentSpec {
                        start: 1,
                        law: LatentLaw::PointMass {
                            point: vec![p.sqrt()],
                        },
                    }],
                    rho: 0.0,
                    seed,
                })
            }
            Scenario::Model1 { config } => gen_model1(&Model1Config {
                seed,
                ..config.clone()
            }),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Scenario::Scenario1 { n, rho } => format!("scenario1(n={n},rho={rho})"),
            Scenario::Scenario2 { n, eps } => format!("scenario2(n={n},eps={eps})"),
            Scenario::Scenario3 { n } => format!("scenario3(n={n})"),
            Scenario::Scenario4 { n, eps } => format!("scenario4(n={n},eps={eps})"),
            Scenario::Null { n, t_len, p } => format!("null(n={n},T={t_len},p={p})"),
            Scenario::Model1 { config } => format!(
                "model1(n={},T={},d={},rho={},K={})",
                config.n,
                config.t_len,
                config.d,
                config.rho,
                config.segments.len() - 1
            ),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Scenario::Scenario1 { n, .. }
            | Scenario::Scenario2 { n, .. }
            | Scenario::Scenario3 { n }
            | Scenario::Scenario4 { n, .. }
            | Scenario::Null { n, .. } => *n,
            Scenario::Model1 { config } => config.n,
        }
    }
}
