//! Limiting moments of `w_p` for odd `p` and the structural checks on them.
//!
//! For odd degrees and even `k`,
//!
//! ```text
//! lim E[w_{p_1} ⋯ w_{p_k}] = Σ_{π ∈ P₂(p_1+⋯+p_k)} 2^{-m(π)} h_k(π)
//! ```
//!
//! where `h_k` is the partition integral from [`crate::integrals`] and `m(π)`
//! the rank deficit of the partition graph. Odd `k` gives exactly zero.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::integrals::{estimate_f, IntegrandSpec};
use crate::partitions::{
    build_graph, enumerate_pair_partitions, pair_partition_count, sample_pair_partition,
    PairPartition, ENUMERATION_CAP,
};
use crate::rng::{substream, Domain};
use crate::{Error, EstimateMethod, MomentEstimate, Result};

/// How the partition integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Monte Carlo samples per partition integral.
    pub samples: u64,
    pub seed: u64,
    /// Opt-in: number of uniformly drawn partitions used when the ground set
    /// exceeds the enumeration cap.
    pub partition_samples: Option<u64>,
    /// Keep the per-partition terms in the result.
    pub breakdown: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            samples: 100_000,
            seed: 0,
            partition_samples: None,
            breakdown: false,
        }
    }
}

/// One partition's contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTerm {
    /// Enumeration index, or draw index in sampling mode.
    pub index: u64,
    /// 1-based block notation.
    pub partition: String,
    pub integral: f64,
    pub stderr: f64,
    pub m_pi: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SumMode {
    /// No partitions contribute (odd total degree or odd `k`).
    Vanishing,
    /// Every partition enumerated.
    Exhaustive,
    /// `|P₂| × mean` over uniformly drawn partitions.
    PartitionSampling { draws: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitMomentResult {
    pub degrees: Vec<usize>,
    pub k: usize,
    pub value: f64,
    /// Total standard error. In sampling mode this is the spread of the
    /// sampled terms, which already contains the integration noise.
    pub stderr: f64,
    /// Standard error due to the Monte Carlo integrals alone.
    pub integration_stderr: f64,
    pub partition_count: u128,
    pub mode: SumMode,
    pub breakdown: Vec<PartitionTerm>,
}

impl LimitMomentResult {
    fn vanishing(degrees: Vec<usize>) -> Self {
        let total: usize = degrees.iter().sum();
        LimitMomentResult {
            k: degrees.len(),
            degrees,
            value: 0.0,
            stderr: 0.0,
            integration_stderr: 0.0,
            partition_count: pair_partition_count(total),
            mode: SumMode::Vanishing,
            breakdown: Vec::new(),
        }
    }

    pub fn estimate(&self) -> MomentEstimate {
        MomentEstimate {
            value: self.value,
            stderr: self.stderr,
            method: match self.mode {
                SumMode::Vanishing => EstimateMethod::Exact,
                _ => EstimateMethod::MonteCarlo,
            },
            effort: match self.mode {
                SumMode::PartitionSampling { draws } => draws,
                _ => self.partition_count.min(u64::MAX as u128) as u64,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Weighting {
    /// `2^{-m(π)}`.
    Graph,
    /// A flat `½`.
    Half,
}

/// Stream index for a partition: degree signature in the high bits keeps
/// different moments on disjoint streams under one seed.
fn stream_index(degrees: &[usize], i: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &d in degrees {
        h ^= d as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    (h << 32) ^ i
}

struct Evaluated {
    index: u64,
    pi: PairPartition,
    estimate: MomentEstimate,
    m_pi: usize,
    weight: f64,
}

fn evaluate(
    index: u64,
    pi: PairPartition,
    degrees: &[usize],
    weighting: Weighting,
    cfg: &IntegratorConfig,
) -> Result<Evaluated> {
    let m_pi = build_graph(&pi, degrees)?.m_pi();
    let weight = match weighting {
        Weighting::Graph => 0.5f64.powi(m_pi as i32),
        Weighting::Half => 0.5,
    };
    let spec = IntegrandSpec::new(pi, degrees)?;
    let mut rng = substream(
        cfg.seed,
        Domain::PartitionIntegral,
        stream_index(degrees, index),
    );
    let estimate = estimate_f(&spec, cfg.samples, &mut rng)?;
    Ok(Evaluated {
        index,
        pi: spec.pi().clone(),
        estimate,
        m_pi,
        weight,
    })
}

fn term(e: &Evaluated) -> PartitionTerm {
    PartitionTerm {
        index: e.index,
        partition: e.pi.to_string(),
        integral: e.estimate.value,
        stderr: e.estimate.stderr,
        m_pi: e.m_pi,
        weight: e.weight,
    }
}

const CHUNK: usize = 4096;

fn weighted_sum(
    degrees: &[usize],
    weighting: Weighting,
    cfg: &IntegratorConfig,
) -> Result<LimitMomentResult> {
    let total: usize = degrees.iter().sum();
    let k = degrees.len();
    if total % 2 == 1 {
        return Ok(LimitMomentResult::vanishing(degrees.to_vec()));
    }
    let count = pair_partition_count(total);
    if total > ENUMERATION_CAP {
        return match cfg.partition_samples {
            Some(draws) => sampled_sum(degrees, weighting, cfg, draws, count),
            None => Err(Error::feasibility(format!(
                "{total} positions exceed the exhaustive cap of {ENUMERATION_CAP}; \
                 enable partition sampling to use the |P2| x mean estimator"
            ))),
        };
    }
    let mut value = 0.0;
    let mut variance = 0.0;
    let mut breakdown = Vec::new();
    let mut partitions = enumerate_pair_partitions(total)?.enumerate();
    loop {
        let chunk: Vec<(usize, PairPartition)> = partitions.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            break;
        }
        let evaluated = chunk
            .into_par_iter()
            .map(|(i, pi)| evaluate(i as u64, pi, degrees, weighting, cfg))
            .collect::<Result<Vec<_>>>()?;
        // Sequential reduction in enumeration order.
        for e in &evaluated {
            value += e.weight * e.estimate.value;
            variance += (e.weight * e.estimate.stderr).powi(2);
            if cfg.breakdown {
                breakdown.push(term(e));
            }
        }
    }
    Ok(LimitMomentResult {
        degrees: degrees.to_vec(),
        k,
        value,
        stderr: variance.sqrt(),
        integration_stderr: variance.sqrt(),
        partition_count: count,
        mode: SumMode::Exhaustive,
        breakdown,
    })
}

fn sampled_sum(
    degrees: &[usize],
    weighting: Weighting,
    cfg: &IntegratorConfig,
    draws: u64,
    count: u128,
) -> Result<LimitMomentResult> {
    if draws < 2 {
        return Err(Error::domain("partition sampling needs at least 2 draws"));
    }
    let total: usize = degrees.iter().sum();
    let evaluated = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = substream(cfg.seed, Domain::PartitionDraw, stream_index(degrees, d));
            let pi = sample_pair_partition(total, &mut rng)?;
            evaluate(d, pi, degrees, weighting, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = count as f64;
    let d = draws as f64;
    let terms: Vec<f64> = evaluated
        .iter()
        .map(|e| e.weight * e.estimate.value)
        .collect();
    let mean = terms.iter().sum::<f64>() / d;
    let spread = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (d - 1.0);
    let integration = evaluated
        .iter()
        .map(|e| (e.weight * e.estimate.stderr).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LimitMomentResult {
        degrees: degrees.to_vec(),
        k: degrees.len(),
        value: scale * mean,
        stderr: scale * (spread / d).sqrt(),
        integration_stderr: scale * integration / d,
        partition_count: count,
        mode: SumMode::PartitionSampling { draws },
        breakdown: if cfg.breakdown {
            evaluated.iter().map(term).collect()
        } else {
            Vec::new()
        },
    })
}

fn require_odd(p: usize, what: &str) -> Result<()> {
    if p.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "{what} = {p} is even; mixed moments with an even degree grow like sqrt(n) and have no finite limit"
        )));
    }
    Ok(())
}

/// `β_k = lim E[w_p^k]` for odd `p ≥ 3`.
pub fn limiting_moment(p: usize, k: usize, cfg: &IntegratorConfig) -> Result<LimitMomentResult> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(Error::domain(format!("p = {p} must be odd and at least 3")));
    }
    if k == 0 {
        return Err(Error::domain("k must be >= 1"));
    }
    weighted_sum(&vec![p; k], Weighting::Graph, cfg)
}

/// `lim Cov(w_{p1}, w_{p2}) = ½ Σ_{π ∈ P₂(p1+p2)} g_{p1,p2}(π)` for odd degrees.
pub fn limiting_covariance(
    p1: usize,
    p2: usize,
    cfg: &IntegratorConfig,
) -> Result<LimitMomentResult> {
    require_odd(p1, "p1")?;
    require_odd(p2, "p2")?;
    weighted_sum(&[p1, p2], Weighting::Half, cfg)
}

/// `Γ_{p_1..p_k} = lim E[w_{p_1} ⋯ w_{p_k}]` for odd degrees.
pub fn mixed_limiting_moment(
    degrees: &[usize],
    cfg: &IntegratorConfig,
) -> Result<LimitMomentResult> {
    if degrees.is_empty() {
        return Err(Error::domain("at least one degree is required"));
    }
    for &d in degrees {
        require_odd(d, "degree")?;
    }
    if degrees.len() % 2 == 1 {
        return Ok(LimitMomentResult::vanishing(degrees.to_vec()));
    }
    weighted_sum(degrees, Weighting::Graph, cfg)
}

/// One distinct degree multiset in a polynomial moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialTerm {
    /// Sorted degrees.
    pub degrees: Vec<usize>,
    /// Number of ordered tuples with these degrees.
    pub multiplicity: u64,
    /// Product of the coefficients.
    pub coefficient: f64,
    pub gamma: f64,
    pub gamma_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialMomentResult {
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
    pub terms: Vec<PolynomialTerm>,
}

/// Sorted multisets of size `k` drawn from `choices` (ascending).
fn multisets(choices: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &c) in choices.iter().enumerate() {
        for mut rest in multisets(&choices[i..], k - 1) {
            rest.insert(0, c);
            out.push(rest);
        }
    }
    out
}

fn multinomial(degrees: &[usize]) -> u64 {
    let fact = |n: usize| (1..=n as u64).product::<u64>();
    let mut denom = 1;
    let mut i = 0;
    while i < degrees.len() {
        let run = degrees[i..]
            .iter()
            .take_while(|&&d| d == degrees[i])
            .count();
        denom *= fact(run);
        i += run;
    }
    fact(degrees.len()) / denom
}

/// `β̃_k = lim E[(Tr Q(A_n))^k]` for `Q(x) = Σ_d coefficients[d] x^d`.
///
/// Every even index, including the constant term, must be zero. Ordered
/// degree tuples that are permutations of each other share one `Γ`, which is
/// symmetric in its arguments.
pub fn polynomial_moment(
    coefficients: &[f64],
    k: usize,
    cfg: &IntegratorConfig,
) -> Result<PolynomialMomentResult> {
    if k == 0 {
        return Err(Error::domain("k must be >= 1"));
    }
    if let Some((d, _)) = coefficients
        .iter()
        .enumerate()
        .find(|(d, &c)| d % 2 == 0 && c != 0.0)
    {
        return Err(Error::domain(format!(
            "coefficient of x^{d} is nonzero; even-degree terms make E[Tr Q(A_n)]^k diverge"
        )));
    }
    let degrees: Vec<usize> = coefficients
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(d, _)| d)
        .collect();
    let mut terms = Vec::new();
    let (mut value, mut variance) = (0.0, 0.0);
    for tuple in multisets(&degrees, k) {
        let gamma = mixed_limiting_moment(&tuple, cfg)?;
        let coefficient: f64 = tuple.iter().map(|&d| coefficients[d]).product();
        let multiplicity = multinomial(&tuple);
        let w = multiplicity as f64 * coefficient;
        value += w * gamma.value;
        variance += (w * gamma.stderr).powi(2);
        terms.push(PolynomialTerm {
            degrees: tuple,
            multiplicity,
            coefficient,
            gamma: gamma.value,
            gamma_stderr: gamma.stderr,
        });
    }
    Ok(PolynomialMomentResult {
        k,
        value,
        stderr: variance.sqrt(),
        terms,
    })
}

/// `ln γ_{2k}` with `γ_{2k} = (4p)^{-pk} 2^{-2k} (2pk)! / (2^{pk} (pk)!)`.
pub fn ln_gamma_lower_bound(p: usize, k: usize) -> f64 {
    assert!(p >= 1 && k >= 1, "p and k must be positive");
    let pk = (p * k) as f64;
    let ln2 = std::f64::consts::LN_2;
    -pk * (4.0 * p as f64).ln() - 2.0 * k as f64 * ln2 + ln_gamma(2.0 * pk + 1.0)
        - pk * ln2
        - ln_gamma(pk + 1.0)
}

/// The lower bound `γ_{2k} ≤ β_{2k}` from the small central cube.
pub fn gamma_lower_bound(p: usize, k: usize) -> f64 {
    ln_gamma_lower_bound(p, k).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanRow {
    pub k: usize,
    pub gamma: f64,
    /// `γ_{2k}^{-1/(2k)}`.
    pub term: f64,
    pub partial_sum: f64,
}

pub const CARLEMAN_MAX_K: usize = 50;

/// Partial sums of `Σ_k γ_{2k}^{-1/(2k)}`, which bound the Carleman series of
/// `β` from above.
pub fn carleman_report(p: usize, k_max: usize) -> Result<Vec<CarlemanRow>> {
    if k_max == 0 || k_max > CARLEMAN_MAX_K {
        return Err(Error::domain(format!(
            "k_max must be in 1..={CARLEMAN_MAX_K}"
        )));
    }
    if p == 0 {
        return Err(Error::domain("p must be positive"));
    }
    let mut partial = 0.0;
    Ok((1..=k_max)
        .map(|k| {
            let ln_g = ln_gamma_lower_bound(p, k);
            let term = (-ln_g / (2.0 * k as f64)).exp();
            partial += term;
            CarlemanRow {
                k,
                gamma: ln_g.exp(),
                term,
                partial_sum: partial,
            }
        })
        .collect())
}

/// `(2k)! / (k! 2^k) σ^{2k}`: the `2k`-th Gaussian moment at variance `σ²`.
pub fn gaussian_moment(variance: f64, k: usize) -> f64 {
    let double_factorial: f64 = (1..2 * k).step_by(2).map(|v| v as f64).product();
    double_factorial * variance.powi(k as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianityGap {
    pub beta2: MomentEstimate,
    pub beta4: MomentEstimate,
    /// `3 β_2²` with its delta-method error.
    pub gaussian_beta4: MomentEstimate,
    /// `β_4 - 3 β_2²`.
    pub gap: f64,
    pub stderr: f64,
}

/// The excess `β_4 - 3β_2²`, which vanishes for a centred Gaussian.
///
/// The two inputs are treated as independent; the error of `3β_2²` is
/// `6 β_2 se(β_2)` to first order.
pub fn gap_from_moments(beta2: MomentEstimate, beta4: MomentEstimate) -> GaussianityGap {
    let gaussian = MomentEstimate {
        value: 3.0 * beta2.value * beta2.value,
        stderr: 6.0 * beta2.value.abs() * beta2.stderr,
        method: beta2.method,
        effort: beta2.effort,
    };
    GaussianityGap {
        beta2,
        beta4,
        gaussian_beta4: gaussian,
        gap: beta4.value - gaussian.value,
        stderr: beta4.stderr.hypot(gaussian.stderr),
    }
}

pub fn gaussianity_gap(p: usize, cfg: &IntegratorConfig) -> Result<GaussianityGap> {
    let beta2 = limiting_moment(p, 2, cfg)?.estimate();
    let beta4 = limiting_moment(p, 4, cfg)?.estimate();
    Ok(gap_from_moments(beta2, beta4))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub p: usize,
    pub order: usize,
    /// `β_0, …, β_{2K}`.
    pub moments: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub min_eigenvalue: f64,
    /// Three times the Frobenius norm of the entrywise standard errors, which
    /// bounds how far Monte Carlo noise can move the smallest eigenvalue.
    pub tolerance: f64,
    pub passed: bool,
}

/// Smallest eigenvalue of the moment matrix `[β_{i+j}]_{i,j=0..K}`, `β_0 = 1`.
pub fn psd_check(p: usize, order: usize, cfg: &IntegratorConfig) -> Result<PsdReport> {
    let mut moments = vec![1.0];
    let mut stderrs = vec![0.0];
    for j in 1..=2 * order {
        let r = limiting_moment(p, j, cfg)?;
        moments.push(r.value);
        stderrs.push(r.stderr);
    }
    let size = order + 1;
    let matrix = DMatrix::from_fn(size, size, |i, j| moments[i + j]);
    let noise = DMatrix::from_fn(size, size, |i, j| stderrs[i + j]);
    let min_eigenvalue = matrix
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let scale = moments.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = 3.0 * noise.norm() + 1e-12 * scale;
    Ok(PsdReport {
        p,
        order,
        passed: min_eigenvalue >= -tolerance,
        moments,
        stderrs,
        min_eigenvalue,
        tolerance,
    })
}
