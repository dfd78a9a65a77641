// SPDX-License-Identifier: MIT OR Apache-2.0

//! Wild binary segmentation over the pair-score CUSUM.
//!
//! [`max_cusum`] returns the split `b` that separates snapshots `..=b` from
//! `b+1..`; reported change points are segment starts, so a split at `b` is
//! reported as location `b + 1` (always in `2..=T`).

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cusum::{max_cusum, pair_scores, pair_set, PairSeries};
use crate::error::{Error, Result};
use crate::rng;
use crate::selection::{select_tau, Penalty, DEFAULT_GRID_SIZE};
use crate::series::AdjacencySeries;
use crate::spectral::embed_series;

/// Random intervals `(alpha, beta)` with `beta - alpha >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub intervals: Vec<(usize, usize)>,
    pub seed: u64,
}

impl IntervalSet {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// Draws `m` intervals: `alpha ~ U{0..=T-2}`, then `beta ~ U{alpha+2..=T}`.
pub fn draw_intervals(t_len: usize, m: usize, seed: u64) -> Result<IntervalSet> {
    if t_len < 3 {
        return Err(Error::invalid(format!("interval draws need T >= 3, got {t_len}")));
    }
    if m == 0 {
        return Err(Error::invalid("need at least one interval"));
    }
    let mut rng = rng::stream(seed, rng::STREAM_INTERVALS);
    let intervals = (0..m)
        .map(|_| {
            let alpha = rng.gen_range(0..=t_len - 2);
            let beta = rng.gen_range(alpha + 2..=t_len);
            (alpha, beta)
        })
        .collect();
    Ok(IntervalSet { intervals, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// First snapshot (1-based) of the new segment.
    pub location: usize,
    /// CUSUM value that triggered the detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// Clipped interval `(s_m, e_m)` in which the split was found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(usize, usize)>,
}

/// Change points sorted by location.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChangePointSet {
    points: Vec<ChangePoint>,
}

impl ChangePointSet {
    pub fn new(mut points: Vec<ChangePoint>) -> Result<Self> {
        points.sort_by_key(|p| p.location);
        if points.windows(2).any(|w| w[0].location == w[1].location) {
            return Err(Error::invalid("duplicate change point location"));
        }
        if points.iter().any(|p| p.location < 2) {
            return Err(Error::invalid("change point locations start at 2"));
        }
        Ok(ChangePointSet { points })
    }

    /// Bare locations, e.g. ground truth.
    pub fn from_locations(locations: &[usize]) -> Result<Self> {
        Self::new(
            locations
                .iter()
                .map(|&location| ChangePoint {
                    location,
                    score: None,
                    interval: None,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[ChangePoint] {
        &self.points
    }

    pub fn locations(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.location).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks every location is within `2..=T`.
    pub fn validate_for(&self, t_len: usize) -> Result<()> {
        match self.points.iter().find(|p| p.location > t_len) {
            Some(p) => Err(Error::invalid(format!(
                "change point {} beyond T = {t_len}",
                p.location
            ))),
            None => Ok(()),
        }
    }
}

/// Memoized [`max_cusum`] results keyed by clipped interval.
///
/// The interval set is fixed across thresholds, so one cache serves a whole
/// threshold sweep over the same pair series.
#[derive(Default)]
pub struct SplitCache {
    best: HashMap<(usize, usize), (usize, f64)>,
}

impl SplitCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }

    pub(crate) fn get_or_compute(
        &mut self,
        s: usize,
        e: usize,
        compute: impl FnOnce() -> Result<(usize, f64)>,
    ) -> Result<(usize, f64)> {
        if let Some(&hit) = self.best.get(&(s, e)) {
            return Ok(hit);
        }
        let found = compute()?;
        self.best.insert((s, e), found);
        Ok(found)
    }
}

/// Statistic driving the segmentation: the best split of a clipped interval.
pub(crate) trait SplitStatistic {
    fn t_len(&self) -> usize;
    fn best_split(&self, s: usize, e: usize) -> Result<(usize, f64)>;
}

impl SplitStatistic for PairSeries {
    fn t_len(&self) -> usize {
        self.len()
    }

    fn best_split(&self, s: usize, e: usize) -> Result<(usize, f64)> {
        max_cusum(self, s, e)
    }
}

/// Largest CUSUM over the interval set clipped to `(s, e)`; `None` when no
/// clipped interval has room for a split.
pub(crate) fn strongest_split<S: SplitStatistic>(
    stat: &S,
    intervals: &IntervalSet,
    s: usize,
    e: usize,
    cache: &mut SplitCache,
) -> Result<Option<ChangePoint>> {
    let mut best: Option<(f64, usize, (usize, usize))> = None;
    for &(alpha, beta) in &intervals.intervals {
        let (sm, em) = (alpha.max(s), beta.min(e));
        if em <= sm + 1 {
            continue;
        }
        let (b, a) = cache.get_or_compute(sm, em, || stat.best_split(sm, em))?;
        if best.is_none_or(|(top, _, _)| a > top) {
            best = Some((a, b, (sm, em)));
        }
    }
    Ok(best.map(|(a, b, interval)| ChangePoint {
        location: b + 1,
        score: Some(a),
        interval: Some(interval),
    }))
}

pub(crate) fn segment<S: SplitStatistic>(
    stat: &S,
    intervals: &IntervalSet,
    tau: f64,
    s: usize,
    e: usize,
    cache: &mut SplitCache,
) -> Result<ChangePointSet> {
    if !(s < e && e <= stat.t_len()) {
        return Err(Error::invalid(format!(
            "need 0 <= s < e <= T, got ({s}, {e}) with T = {}",
            stat.t_len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {tau}")));
    }
    let mut found = Vec::new();
    let mut stack = vec![(s, e)];
    while let Some((s, e)) = stack.pop() {
        if e <= s + 1 {
            continue;
        }
        let Some(cp) = strongest_split(stat, intervals, s, e, cache)? else {
            continue;
        };
        if cp.score.is_some_and(|a| a > tau) {
            let b = cp.location - 1;
            stack.push((b + 1, e));
            stack.push((s, b));
            found.push(cp);
        }
    }
    ChangePointSet::new(found)
}

/// Wild binary segmentation on `(s, e)` with threshold `tau`.
pub fn nonpar_rdpg_cpd(
    y: &PairSeries,
    intervals: &IntervalSet,
    tau: f64,
    s: usize,
    e: usize,
) -> Result<ChangePointSet> {
    segment(y, intervals, tau, s, e, &mut SplitCache::new())
}

/// Same as [`nonpar_rdpg_cpd`], reusing split computations across calls.
pub fn nonpar_rdpg_cpd_cached(
    y: &PairSeries,
    intervals: &IntervalSet,
    tau: f64,
    s: usize,
    e: usize,
    cache: &mut SplitCache,
) -> Result<ChangePointSet> {
    segment(y, intervals, tau, s, e, cache)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauPolicy {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub d: usize,
    pub intervals: usize,
    pub seed: u64,
    pub tau: TauPolicy,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            d: 10,
            intervals: 120,
            seed: 0,
            tau: TauPolicy::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub points: ChangePointSet,
    /// Threshold actually used.
    pub tau: f64,
    pub tau_policy: TauPolicy,
    /// Model-selection penalty, when the threshold was selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<Penalty>,
    pub d: usize,
    #[serde(rename = "M")]
    pub intervals: usize,
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub stage_timings: BTreeMap<String, f64>,
    pub tool_version: String,
}

/// Embedding, pair scores, interval draw, optional threshold selection and
/// segmentation, end to end.
pub fn detect(series: &AdjacencySeries, params: &DetectParams) -> Result<DetectionResult> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let pairs = pair_set(series.n())?;
    if params.d > series.n() {
        return Err(Error::InvalidDimension(format!(
            "d = {} exceeds n = {}",
            params.d,
            series.n()
        )));
    }
    let latents = embed_series(series, params.d)?;
    lap("embed", &mut timings);
    let y = pair_scores(&latents, &pairs)?;
    lap("pair_scores", &mut timings);
    let intervals = draw_intervals(series.len(), params.intervals, params.seed)?;
    lap("intervals", &mut timings);

    let (points, tau, penalty) = match params.tau {
        TauPolicy::Fixed(tau) => {
            let points = nonpar_rdpg_cpd(&y, &intervals, tau, 0, y.len())?;
            lap("segmentation", &mut timings);
            (points, tau, None)
        }
        TauPolicy::Auto => {
            let penalty = Penalty::default_for(y.n_effective());
            let best = select_tau(&y, &intervals, &penalty, DEFAULT_GRID_SIZE)?;
            lap("selection", &mut timings);
            (best.points, best.tau, Some(penalty))
        }
    };

    Ok(DetectionResult {
        points,
        tau,
        tau_policy: params.tau,
        penalty,
        d: params.d,
        intervals: params.intervals,
        seed: params.seed,
        n: series.n(),
        t_len: series.len(),
        stage_timings: timings,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}
