// SPDX-License-Identifier: MIT OR Apache-2.0

//! The theory verification suite behind `rdpg-cpd check-theory`.
//!
//! Every check is an exact computation on finite-support laws, except the
//! two-network test rates, which are Monte-Carlo over seeded trials.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng;
use crate::spectral::SymmetricMatrix;
use crate::theory::{
    brute_force_graph_law, ks_between, ks_distance, moment_vector, population_argmax, population_cusum,
    population_cusum_sup, two_network_test, Decision, DiscreteLatentLaw, InnerProductLaw,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckReport {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub seed: u64,
    /// Constructed population instances.
    pub instances: usize,
    /// Monte-Carlo trials per hypothesis in the two-network test.
    pub trials: usize,
    pub test_nodes: usize,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            seed: 0,
            instances: 50,
            trials: 100,
            test_nodes: 400,
        }
    }
}

pub fn run_theory_checks(params: &SuiteParams) -> Result<Vec<CheckReport>> {
    let mut out = vec![
        graph_law_totals()?,
        identical_laws_check()?,
        matched_moments_check()?,
        third_moment_mismatch_check()?,
        ks_examples()?,
    ];
    let instances = population_instances(params.seed, params.instances)?;
    out.push(population_argmax_check(&instances)?);
    out.push(population_upper_bound(&instances)?);
    out.push(population_lower_bound(&instances)?);
    out.push(population_shape(&instances)?);
    out.extend(two_network_rates(params)?);
    Ok(out)
}

/// `F = {0.3: 1/2, 0.7: 1/2}`.
pub fn two_point_law() -> DiscreteLatentLaw {
    DiscreteLatentLaw::scalar(&[(0.3, 0.5), (0.7, 0.5)]).expect("valid law")
}

/// `G = {0.2: 2/9, 0.5: 5/9, 0.8: 2/9}`, same first two moments as [`two_point_law`].
pub fn three_point_law() -> DiscreteLatentLaw {
    DiscreteLatentLaw::scalar(&[(0.2, 2.0 / 9.0), (0.5, 5.0 / 9.0), (0.8, 2.0 / 9.0)]).expect("valid law")
}

/// `{0.1: 0.2, 0.6: 0.8}`: moments (0.5, 0.29, 0.173), so it agrees with
/// [`two_point_law`] on two moments and not on the third.
pub fn third_moment_mismatch_law() -> DiscreteLatentLaw {
    DiscreteLatentLaw::scalar(&[(0.1, 0.2), (0.6, 0.8)]).expect("valid law")
}

fn graph_law_totals() -> Result<CheckReport> {
    let laws = [two_point_law(), three_point_law(), third_moment_mismatch_law()];
    let mut worst = 0.0f64;
    for law in &laws {
        for n in 2..=5 {
            worst = worst.max((brute_force_graph_law(law, n)?.total() - 1.0).abs());
        }
    }
    Ok(CheckReport::new(
        "graph law totals",
        worst <= 1e-10,
        format!("max |sum - 1| = {worst:.3e}"),
    ))
}

fn identical_laws_check() -> Result<CheckReport> {
    let f = DiscreteLatentLaw::new(vec![(vec![0.3, 0.4], 0.25), (vec![0.6, 0.1], 0.75)])?;
    let g = f.clone();
    let ks = ks_distance(&f, &g);
    let diff = brute_force_graph_law(&f, 4)?.max_abs_diff(&brute_force_graph_law(&g, 4)?);
    Ok(CheckReport::new(
        "identical latent laws",
        ks == 0.0 && diff == 0.0,
        format!("ks = {ks}, max |P - P'| = {diff:.3e}"),
    ))
}

fn matched_moments_check() -> Result<CheckReport> {
    let (f, g) = (two_point_law(), three_point_law());
    let mf = moment_vector(&f, 2)?;
    let mg = moment_vector(&g, 2)?;
    let moment_gap = mf.iter().zip(&mg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let diff = brute_force_graph_law(&f, 3)?.max_abs_diff(&brute_force_graph_law(&g, 3)?);
    Ok(CheckReport::new(
        "two matched moments, n = 3",
        moment_gap <= 1e-15 && diff <= 1e-12,
        format!("moment gap = {moment_gap:.3e}, max |P - P'| = {diff:.3e}"),
    ))
}

fn third_moment_mismatch_check() -> Result<CheckReport> {
    let (f, g) = (two_point_law(), third_moment_mismatch_law());
    let mf = moment_vector(&f, 3)?;
    let mg = moment_vector(&g, 3)?;
    let matched = (mf[0] - mg[0]).abs() <= 1e-15 && (mf[1] - mg[1]).abs() <= 1e-15;
    let third = (mf[2] - mg[2]).abs();
    let tv = brute_force_graph_law(&f, 4)?.total_variation(&brute_force_graph_law(&g, 4)?)?;
    Ok(CheckReport::new(
        "third moment mismatch, n = 4",
        matched && third > 1e-3 && tv > 1e-6,
        format!("third moment gap = {third:.4}, total variation = {tv:.3e}"),
    ))
}

fn ks_examples() -> Result<CheckReport> {
    let half = DiscreteLatentLaw::point_mass(vec![0.5])?;
    let a = ks_distance(&two_point_law(), &half);
    let low = DiscreteLatentLaw::point_mass(vec![0.2f64.sqrt()])?;
    let high = DiscreteLatentLaw::point_mass(vec![0.8f64.sqrt()])?;
    let b = ks_distance(&low, &high);
    Ok(CheckReport::new(
        "ks distance examples",
        (a - 0.75).abs() <= 1e-12 && (b - 1.0).abs() <= 1e-12,
        format!("{a} (expected 0.75), {b} (expected 1)"),
    ))
}

/// One population instance: laws for `T` snapshots with a single change
/// after time `eta`, on the interval `(s, e)`.
#[derive(Clone, Debug)]
pub struct PopulationInstance {
    pub laws: Vec<InnerProductLaw>,
    pub s: usize,
    pub eta: usize,
    pub e: usize,
    pub n: usize,
    pub kappa: f64,
}

fn random_scalar_law(rng: &mut ChaCha8Rng) -> Result<DiscreteLatentLaw> {
    let k = rng.gen_range(1..=4);
    let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    // absorb rounding so the probabilities sum to one to the last bit
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    let atoms: Vec<(f64, f64)> = weights.into_iter().map(|w| (rng.gen_range(0.05..0.95), w)).collect();
    DiscreteLatentLaw::scalar(&atoms)
}

pub fn population_instances(seed: u64, count: usize) -> Result<Vec<PopulationInstance>> {
    let mut rng = rng::stream(rng::split_seed(seed, 0x7e0), rng::STREAM_SIMULATION);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let f = random_scalar_law(&mut rng)?;
        let g = random_scalar_law(&mut rng)?;
        let kappa = ks_distance(&f, &g);
        if kappa < 1e-3 {
            continue;
        }
        let t_len = rng.gen_range(6..=40);
        let s = rng.gen_range(0..=t_len - 4);
        let e = rng.gen_range(s + 4..=t_len);
        let eta = rng.gen_range(s + 1..e);
        let n = 2 * rng.gen_range(1..=200);
        let (lf, lg) = (f.inner_product_law(), g.inner_product_law());
        let laws = (0..t_len).map(|k| if k < eta { lf.clone() } else { lg.clone() }).collect();
        out.push(PopulationInstance {
            laws,
            s,
            eta,
            e,
            n,
            kappa,
        });
    }
    Ok(out)
}

fn population_argmax_check(instances: &[PopulationInstance]) -> Result<CheckReport> {
    let mut failures = 0;
    for inst in instances {
        let (t, _) = population_argmax(&inst.laws, inst.s, inst.e, inst.n)?;
        if t != inst.eta {
            failures += 1;
        }
    }
    Ok(CheckReport::new(
        "population argmax at the change point",
        failures == 0,
        format!("{failures} of {} instances missed", instances.len()),
    ))
}

fn population_upper_bound(instances: &[PopulationInstance]) -> Result<CheckReport> {
    let mut worst = f64::NEG_INFINITY;
    for inst in instances {
        let kappa = ks_between(&inst.laws[inst.eta - 1], &inst.laws[inst.eta]);
        let value = population_cusum_sup(&inst.laws, inst.s, inst.eta, inst.e, inst.n)?;
        let short = ((inst.eta - inst.s).min(inst.e - inst.eta) as f64).sqrt();
        let bound = kappa * (inst.n as f64 / 2.0).sqrt() * short;
        worst = worst.max(value - bound);
    }
    Ok(CheckReport::new(
        "population CUSUM upper bound",
        worst <= 1e-9,
        format!("max excess over bound = {worst:.3e}"),
    ))
}

fn population_lower_bound(instances: &[PopulationInstance]) -> Result<CheckReport> {
    let mut worst = f64::INFINITY;
    for inst in instances {
        let (_, best) = population_argmax(&inst.laws, inst.s, inst.e, inst.n)?;
        let spacing = (inst.eta - inst.s).min(inst.e - inst.eta) as f64;
        let bound = 2f64.powf(-1.5) * inst.kappa * spacing * (inst.n as f64).sqrt() / ((inst.e - inst.s) as f64).sqrt();
        worst = worst.min(best - bound);
    }
    Ok(CheckReport::new(
        "population CUSUM lower bound",
        worst >= 0.0,
        format!("min slack = {worst:.3e}"),
    ))
}

/// For each `z` in the support, `t -> D(t, z)` has no interior maximum on
/// either side of the change.
fn population_shape(instances: &[PopulationInstance]) -> Result<CheckReport> {
    let mut violations = 0;
    for inst in instances {
        let mut zs: Vec<f64> = inst.laws[inst.s..inst.e]
            .iter()
            .flat_map(|l| l.support().iter().copied())
            .collect();
        zs.sort_unstable_by(f64::total_cmp);
        zs.dedup();
        for z in zs {
            let curve = ((inst.s + 1)..inst.e)
                .map(|t| population_cusum(&inst.laws, inst.s, t, inst.e, z, inst.n))
                .collect::<Result<Vec<f64>>>()?;
            let split = inst.eta - inst.s - 1;
            if !crate::theory::no_interior_maximum(&curve[..=split], 1e-12)
                || !crate::theory::no_interior_maximum(&curve[split..], 1e-12)
            {
                violations += 1;
            }
        }
    }
    Ok(CheckReport::new(
        "population CUSUM has no interior maximum between changes",
        violations == 0,
        format!("{violations} violating (instance, z) curves"),
    ))
}

/// Null law: point mass at `sqrt(0.3)`. Alternative law: `sqrt(0.8)` with
/// probability `1 - sqrt(0.1)`, else `sqrt(0.3)`; its inner-product law puts
/// mass 0.1 at 0.3 and none below, so the KS distance is exactly 0.9.
pub fn separated_laws() -> (DiscreteLatentLaw, DiscreteLatentLaw) {
    let q = 1.0 - 0.1f64.sqrt();
    let null = DiscreteLatentLaw::point_mass(vec![0.3f64.sqrt()]).expect("valid law");
    let alt = DiscreteLatentLaw::new(vec![(vec![0.8f64.sqrt()], q), (vec![0.3f64.sqrt()], 1.0 - q)]).expect("valid law");
    (null, alt)
}

/// Adjacency matrix with independent latent positions drawn from `law`.
pub fn sample_rdpg(law: &DiscreteLatentLaw, n: usize, rng: &mut ChaCha8Rng) -> Result<SymmetricMatrix> {
    let x: Vec<Vec<f64>> = (0..n).map(|_| law.sample(rng).to_vec()).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p: f64 = x[i].iter().zip(&x[j]).map(|(u, v)| u * v).sum();
            if rng.gen::<f64>() < p {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    SymmetricMatrix::new(a)
}

/// Fraction of trials declared different, under the null and the alternative.
pub fn two_network_decision_rates(seed: u64, trials: usize, n: usize) -> Result<(f64, f64)> {
    let (null, alt) = separated_laws();
    let rate = |second: &DiscreteLatentLaw, tag: u64| -> Result<f64> {
        let different = (0..trials)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng::stream(rng::split_seed(seed, tag * 1_000_000 + k as u64), rng::STREAM_SIMULATION);
                let a = sample_rdpg(&null, n, &mut rng)?;
                let b = sample_rdpg(second, n, &mut rng)?;
                Ok(two_network_test(&a, &b, 1)?.decision == Decision::Different)
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(different.iter().filter(|&&d| d).count() as f64 / trials.max(1) as f64)
    };
    Ok((rate(&null, 1)?, rate(&alt, 2)?))
}

fn two_network_rates(params: &SuiteParams) -> Result<Vec<CheckReport>> {
    let n = params.test_nodes;
    let (null, alt) = separated_laws();
    let kappa = ks_distance(&null, &alt);
    let separated = kappa * (n as f64).sqrt() > 3.0 * (n as f64).ln().sqrt();
    let (null_rate, alt_rate) = two_network_decision_rates(params.seed, params.trials, n)?;
    Ok(vec![
        CheckReport::new(
            "two-network test, same law",
            null_rate <= 0.05,
            format!("declared different in {:.1}% of {} trials", 100.0 * null_rate, params.trials),
        ),
        CheckReport::new(
            "two-network test, separated laws",
            separated && alt_rate >= 0.95,
            format!(
                "kappa = {kappa:.3}, declared different in {:.1}% of {} trials",
                100.0 * alt_rate,
                params.trials
            ),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_alternative_has_exact_kappa() {
        let (null, alt) = separated_laws();
        assert!((ks_distance(&null, &alt) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn exact_checks_pass() {
        for report in [
            graph_law_totals().unwrap(),
            identical_laws_check().unwrap(),
            matched_moments_check().unwrap(),
            third_moment_mismatch_check().unwrap(),
            ks_examples().unwrap(),
        ] {
            assert!(report.passed, "{}: {}", report.name, report.detail);
        }
    }

    #[test]
    fn population_checks_pass_on_a_few_instances() {
        let inst = population_instances(3, 8).unwrap();
        for report in [
            population_argmax_check(&inst).unwrap(),
            population_upper_bound(&inst).unwrap(),
            population_lower_bound(&inst).unwrap(),
            population_shape(&inst).unwrap(),
        ] {
            assert!(report.passed, "{}: {}", report.name, report.detail);
        }
    }
}
