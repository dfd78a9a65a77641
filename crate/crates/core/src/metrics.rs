// SPDX-License-Identifier: MIT OR Apache-2.0

//! Localization metrics, a mean-change baseline, and the Monte-Carlo harness.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng;
use crate::segmentation::{
    detect, draw_intervals, segment, ChangePointSet, DetectParams, IntervalSet, SplitCache,
    SplitStatistic, TauPolicy,
};
use crate::series::{pair_count, AdjacencySeries};
use crate::simulate::Scenario;

/// A real number or one of the two infinities. Serialized as a JSON number,
/// or as the strings `"inf"` / `"-inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ExtReal(pub f64);

impl ExtReal {
    pub const INF: ExtReal = ExtReal(f64::INFINITY);
    pub const NEG_INF: ExtReal = ExtReal(f64::NEG_INFINITY);

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else if let Some(p) = f.precision() {
            write!(f, "{:.*}", p, self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serializer.serialize_f64(self.0)
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(ExtReal(v)),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(ExtReal::INF),
                "-inf" => Ok(ExtReal::NEG_INF),
                other => Err(serde::de::Error::custom(format!("not an extended real: {other}"))),
            },
        }
    }
}

/// `d(a | b) = max_{eta in b} min_{x in a} |x - eta|`; `+inf` when `a` is empty
/// and `b` is not, `-inf` when `b` is empty.
pub fn hausdorff_one_sided(a: &[usize], b: &[usize]) -> ExtReal {
    if b.is_empty() {
        return ExtReal::NEG_INF;
    }
    if a.is_empty() {
        return ExtReal::INF;
    }
    let worst = b
        .iter()
        .map(|&eta| a.iter().map(|&x| x.abs_diff(eta)).min().expect("non-empty"))
        .max()
        .expect("non-empty");
    ExtReal(worst as f64)
}

pub fn abs_k_error(est: &ChangePointSet, truth: &ChangePointSet) -> usize {
    est.len().abs_diff(truth.len())
}

/// Median over the extended reals. With an even count the two middle values
/// are averaged when both are finite; otherwise the lower one is reported.
pub fn median_ext(values: &[ExtReal]) -> Option<ExtReal> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = sorted.len();
    if k % 2 == 1 {
        return Some(sorted[k / 2]);
    }
    let (lo, hi) = (sorted[k / 2 - 1], sorted[k / 2]);
    if lo.is_finite() && hi.is_finite() {
        Some(ExtReal(0.5 * (lo.0 + hi.0)))
    } else {
        Some(lo)
    }
}

/// Frobenius norm of the CUSUM of vectorized adjacency matrices, computed from
/// per-edge prefix counts.
pub struct MeanCusum {
    t_len: usize,
    edges: usize,
    /// `prefix[k * edges + p]` = number of snapshots among the first `k` with edge `p`.
    prefix: Vec<u32>,
}

impl MeanCusum {
    pub fn new(series: &AdjacencySeries) -> Self {
        let t_len = series.len();
        let edges = pair_count(series.n());
        let mut prefix = vec![0u32; (t_len + 1) * edges];
        for (k, snap) in series.snapshots().iter().enumerate() {
            let (done, rest) = prefix.split_at_mut((k + 1) * edges);
            let prev = &done[k * edges..];
            for (p, next) in rest[..edges].iter_mut().enumerate() {
                *next = prev[p] + u32::from(snap.bit(p));
            }
        }
        MeanCusum { t_len, edges, prefix }
    }

    fn counts(&self, k: usize) -> &[u32] {
        &self.prefix[k * self.edges..(k + 1) * self.edges]
    }

    pub fn value(&self, s: usize, t: usize, e: usize) -> f64 {
        let (ts, et, es) = ((t - s) as f64, (e - t) as f64, (e - s) as f64);
        let wl = (et / (es * ts)).sqrt();
        let wr = (ts / (es * et)).sqrt();
        let (cs, ct, ce) = (self.counts(s), self.counts(t), self.counts(e));
        let mut total = 0.0;
        for p in 0..self.edges {
            let left = f64::from(ct[p] - cs[p]);
            let right = f64::from(ce[p] - ct[p]);
            let c = wl * left - wr * right;
            total += c * c;
        }
        total.sqrt()
    }
}

impl SplitStatistic for MeanCusum {
    fn t_len(&self) -> usize {
        self.t_len
    }

    fn best_split(&self, s: usize, e: usize) -> Result<(usize, f64)> {
        if e < s + 2 {
            return Err(Error::InvalidInterval { s, e });
        }
        let mut best = (s + 1, f64::NEG_INFINITY);
        for t in (s + 1)..e {
            let v = self.value(s, t, e);
            if v > best.1 {
                best = (t, v);
            }
        }
        Ok(best)
    }
}

/// Wild binary segmentation driven by [`MeanCusum`].
pub fn mean_cusum_detect(series: &AdjacencySeries, intervals: &IntervalSet, tau: f64) -> Result<ChangePointSet> {
    let stat = MeanCusum::new(series);
    segment(&stat, intervals, tau, 0, series.len(), &mut SplitCache::new())
}

/// Margin of [`mean_cusum_default_tau`] over the noise floor, in units of
/// the noise norm's relative spread `1 / sqrt(n (n - 1))`.
pub const MEAN_CUSUM_MARGIN_SDS: f64 = 4.5;

/// Noise-floor threshold for [`mean_cusum_detect`].
///
/// Under independent snapshots with a common mean, the squared CUSUM norm has
/// expectation `sum_ij Var(A_ij)`, and so does half the number of edges that
/// flip between consecutive snapshots. The threshold is the square root of the
/// median flip estimate, inflated by [`MEAN_CUSUM_MARGIN_SDS`] times the
/// relative spread of a norm over `n (n - 1) / 2` roughly independent pairs.
pub fn mean_cusum_default_tau(series: &AdjacencySeries) -> f64 {
    let snaps = series.snapshots();
    if snaps.len() < 2 {
        return 1.0;
    }
    let mut flips: Vec<f64> = snaps
        .windows(2)
        .map(|w| {
            w[0].packed()
                .iter()
                .zip(w[1].packed())
                .map(|(a, b)| (a ^ b).count_ones() as f64)
                .sum::<f64>()
                / 2.0
        })
        .collect();
    flips.sort_by(f64::total_cmp);
    let mid = flips.len() / 2;
    let median = if flips.len() % 2 == 1 {
        flips[mid]
    } else {
        0.5 * (flips[mid - 1] + flips[mid])
    };
    let n = series.n() as f64;
    let spread = 1.0 / (n * (n - 1.0)).sqrt().max(1.0);
    (median.sqrt() * (1.0 + MEAN_CUSUM_MARGIN_SDS * spread)).max(f64::MIN_POSITIVE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NonparRdpgCpd,
    MeanCusum,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NonparRdpgCpd => "NonPar-RDPG-CPD",
            Method::MeanCusum => "mean-CUSUM",
        }
    }
}

/// Scenario grid, methods and trial count for [`benchmark`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_intervals", rename = "M")]
    pub intervals: usize,
}

fn default_trials() -> usize {
    25
}

fn default_d() -> usize {
    10
}

fn default_intervals() -> usize {
    120
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    /// Estimated locations; `None` when the trial failed.
    pub estimate: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: String,
    pub scenario: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_len: usize,
    pub trials: usize,
    pub failures: usize,
    pub mean_abs_k_error: f64,
    /// Median of `d(est | truth)`.
    pub median_d_est_given_true: ExtReal,
    /// Median of `d(truth | est)`.
    pub median_d_true_given_est: ExtReal,
    pub runtime_seconds: f64,
    pub per_trial: Vec<TrialOutcome>,
}

impl EvalRecord {
    /// Copy with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> EvalRecord {
        EvalRecord {
            runtime_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Per-trial estimates and truth reduced to the reported summary.
pub fn aggregate(
    method: &str,
    scenario: &str,
    n: usize,
    t_len: usize,
    truth: &[usize],
    per_trial: Vec<TrialOutcome>,
    runtime_seconds: f64,
) -> Result<EvalRecord> {
    if per_trial.is_empty() {
        return Err(Error::invalid("aggregation needs at least one trial"));
    }
    let ok: Vec<&Vec<usize>> = per_trial.iter().filter_map(|t| t.estimate.as_ref()).collect();
    let failures = per_trial.len() - ok.len();
    let (mean_abs_k_error, d1, d2) = if ok.is_empty() {
        (f64::NAN, ExtReal(f64::NAN), ExtReal(f64::NAN))
    } else {
        let k_err: f64 =
            ok.iter().map(|est| est.len().abs_diff(truth.len()) as f64).sum::<f64>() / ok.len() as f64;
        let d1: Vec<ExtReal> = ok.iter().map(|est| hausdorff_one_sided(est, truth)).collect();
        let d2: Vec<ExtReal> = ok.iter().map(|est| hausdorff_one_sided(truth, est)).collect();
        (
            k_err,
            median_ext(&d1).expect("non-empty"),
            median_ext(&d2).expect("non-empty"),
        )
    };
    Ok(EvalRecord {
        method: method.to_string(),
        scenario: scenario.to_string(),
        n,
        t_len,
        trials: per_trial.len(),
        failures,
        mean_abs_k_error,
        median_d_est_given_true: d1,
        median_d_true_given_est: d2,
        runtime_seconds,
        per_trial,
    })
}

/// Runs one method on one dataset.
pub fn run_method(
    method: Method,
    series: &AdjacencySeries,
    d: usize,
    intervals: usize,
    seed: u64,
) -> Result<ChangePointSet> {
    match method {
        Method::NonparRdpgCpd => {
            let params = DetectParams {
                d: d.min(series.n()),
                intervals,
                seed,
                tau: TauPolicy::Auto,
            };
            Ok(detect(series, &params)?.points)
        }
        Method::MeanCusum => {
            let set = draw_intervals(series.len(), intervals, seed)?;
            mean_cusum_detect(series, &set, mean_cusum_default_tau(series))
        }
    }
}

/// Seed of trial `trial` in scenario cell `cell`. Shared by all methods, so
/// methods are compared on identical data.
pub fn trial_seed(seed: u64, cell: usize, trial: usize) -> u64 {
    rng::split_seed(rng::split_seed(seed, cell as u64), trial as u64)
}

/// Every (scenario, method) cell for `plan.trials` trials. Trials run in
/// parallel; records come out in plan order.
pub fn benchmark(plan: &BenchmarkPlan, seed: u64) -> Result<Vec<EvalRecord>> {
    if plan.trials == 0 {
        return Err(Error::invalid("benchmark needs at least one trial"));
    }
    let mut records = Vec::new();
    for (cell, scenario) in plan.scenarios.iter().enumerate() {
        let outcomes: Vec<Vec<(TrialOutcome, f64)>> = (0..plan.trials)
            .into_par_iter()
            .map(|trial| {
                let data_seed = trial_seed(seed, cell, trial);
                let data = scenario.generate(data_seed);
                plan.methods
                    .iter()
                    .map(|&method| {
                        let started = Instant::now();
                        let estimate = data
                            .as_ref()
                            .map_err(|e| e.to_string())
                            .and_then(|d| {
                                run_method(method, &d.series, plan.d, plan.intervals, data_seed)
                                    .map_err(|e| e.to_string())
                            });
                        let outcome = match estimate {
                            Ok(points) => TrialOutcome {
                                seed: data_seed,
                                estimate: Some(points.locations()),
                                error: None,
                            },
                            Err(error) => TrialOutcome {
                                seed: data_seed,
                                estimate: None,
                                error: Some(error),
                            },
                        };
                        (outcome, started.elapsed().as_secs_f64())
                    })
                    .collect()
            })
            .collect();
        // Truth and T do not depend on the trial seed for a given scenario.
        let probe = scenario.generate(trial_seed(seed, cell, 0))?;
        let truth = probe.truth.locations();
        for (mi, method) in plan.methods.iter().enumerate() {
            let per_trial: Vec<TrialOutcome> = outcomes.iter().map(|o| o[mi].0.clone()).collect();
            let runtime: f64 = outcomes.iter().map(|o| o[mi].1).sum();
            records.push(aggregate(
                method.name(),
                &scenario.label(),
                scenario.n(),
                probe.series.len(),
                &truth,
                per_trial,
                runtime,
            )?);
        }
    }
    Ok(records)
}

/// Fixed-width text table of benchmark records.
pub fn format_table(records: &[EvalRecord]) -> String {
    let header = ["method", "scenario", "n", "trials", "|K-K^|", "d(C^|C)", "d(C|C^)", "seconds"];
    let rows: Vec<[String; 8]> = records
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.scenario.clone(),
                r.n.to_string(),
                r.trials.to_string(),
                format!("{:.2}", r.mean_abs_k_error),
                format!("{:.1}", r.median_d_est_given_true),
                format!("{:.1}", r.median_d_true_given_est),
                format!("{:.1}", r.runtime_seconds),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// Comma-separated benchmark records with a header row.
pub fn format_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(
        "method,scenario,n,T,trials,failures,mean_abs_k_error,median_d_est_given_true,median_d_true_given_est,runtime_seconds\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},\"{}\",{},{},{},{},{},{},{},{}\n",
            r.method,
            r.scenario,
            r.n,
            r.t_len,
            r.trials,
            r.failures,
            r.mean_abs_k_error,
            r.median_d_est_given_true,
            r.median_d_true_given_est,
            r.runtime_seconds
        ));
    }
    out
}
