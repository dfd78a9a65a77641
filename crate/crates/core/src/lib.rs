// SPDX-License-Identifier: MIT OR Apache-2.0

//! Nonparametric change point detection for sequences of networks.
//!
//! Each snapshot is embedded by adjacency spectral embedding, inner products
//! of estimated positions are taken on a fixed set of disjoint node pairs, and
//! a Kolmogorov-Smirnov CUSUM statistic drives wild binary segmentation over
//! those scores. The threshold is chosen by a penalized likelihood over a grid.
//!
//! ```no_run
//! use rdpg_cpd::{detect, gen_scenario1, DetectParams};
//!
//! let data = gen_scenario1(300, 0.0, 7).unwrap();
//! let result = detect(&data.series, &DetectParams::default()).unwrap();
//! println!("{:?}", result.points.locations());
//! ```

pub mod checks;
pub mod cli;
pub mod cusum;
pub mod error;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod segmentation;
pub mod selection;
pub mod series;
pub mod simulate;
pub mod spectral;
pub mod theory;

pub use cusum::{cusum_at, cusum_sup, max_cusum, pair_scores, pair_set, weights, CusumValue, PairSeries, PairSet};
pub use error::{Error, Result};
pub use metrics::{
    abs_k_error, benchmark, hausdorff_one_sided, mean_cusum_detect, BenchmarkPlan, EvalRecord, ExtReal, Method,
};
pub use segmentation::{
    detect, draw_intervals, nonpar_rdpg_cpd, ChangePoint, ChangePointSet, DetectParams, DetectionResult,
    IntervalSet, SplitCache, TauPolicy,
};
pub use selection::{bic_score, default_xi, select_tau, tau_grid, ModelCandidate, Penalty, TauGrid};
pub use series::{AdjacencySeries, Snapshot};
pub use simulate::{gen_model1, gen_scenario1, gen_scenario2, gen_scenario3, gen_scenario4, LabeledSeries, Scenario};
pub use spectral::{embed_series, scaled_pca, LatentSeries, SymmetricMatrix};
