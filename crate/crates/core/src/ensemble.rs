//! Random Hankel matrices and their trace statistics.
//!
//! The input sequence `x_t` is indexed by offsets `t ∈ [-(n-1), n-1]` and the
//! matrix is `H = P_n T_n` with `T_n[a,b] = x_{a-b}` and `P_n` the backward
//! identity. With 1-based indices this gives `H[a,b] = x_{n+1-a-b}`; the Rust
//! API below uses 0-based indices, so `H[a,b] = x_{n-1-a-b}`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{substream, Domain, StreamRng};
use crate::{Error, Result};

/// Entry laws with mean 0, variance 1 and all moments finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDistribution {
    Gaussian,
    Rademacher,
    /// `√12 (u - 1/2)` for `u ~ U[0,1]`, supported on `[-√3, √3]`.
    UniformCentered,
}

impl EntryDistribution {
    pub const ALL: [EntryDistribution; 3] = [
        EntryDistribution::Gaussian,
        EntryDistribution::Rademacher,
        EntryDistribution::UniformCentered,
    ];

    /// Stable tag that separates the replicate streams of different laws.
    pub fn stream_tag(self) -> u64 {
        match self {
            EntryDistribution::Gaussian => 0,
            EntryDistribution::Rademacher => 1,
            EntryDistribution::UniformCentered => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntryDistribution::Gaussian => "gaussian",
            EntryDistribution::Rademacher => "rademacher",
            EntryDistribution::UniformCentered => "uniform_centered",
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EntryDistribution::Gaussian => StandardNormal.sample(rng),
            EntryDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDistribution::UniformCentered => {
                let u: f64 = rng.random();
                12f64.sqrt() * (u - 0.5)
            }
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntryDistribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown distribution '{s}' (expected gaussian, rademacher or uniform_centered)"
                ))
            })
    }
}

/// Draw the `2n-1` inputs `x_{-(n-1)}, …, x_{n-1}` in increasing-offset order.
pub fn sample_entries<R: Rng + ?Sized>(dist: EntryDistribution, n: usize, rng: &mut R) -> Vec<f64> {
    assert!(n >= 1, "matrix order must be positive");
    (0..2 * n - 1).map(|_| dist.sample(rng)).collect()
}

/// A Hankel matrix stored through its input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl HankelMatrix {
    pub fn new(entries: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::shape("matrix order must be positive"));
        }
        if entries.len() != 2 * n - 1 {
            return Err(Error::shape(format!(
                "order {n} needs {} entries, got {}",
                2 * n - 1,
                entries.len()
            )));
        }
        Ok(HankelMatrix { n, entries })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Inputs in increasing-offset order.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `x_t` for `|t| ≤ n-1`.
    pub fn input(&self, offset: i64) -> f64 {
        let idx = offset + self.n as i64 - 1;
        self.entries[usize::try_from(idx).expect("offset out of range")]
    }

    /// `H[a,b]` with 0-based indices.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[2 * (self.n - 1) - a - b]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.get(a, b))
    }

    /// `T[a,b] = x_{a-b}` built from the same inputs.
    pub fn toeplitz(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.input(a as i64 - b as i64))
    }

    fn check_finite(&self) -> Result<()> {
        if self.entries.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::numeric("matrix has non-finite entries"))
        }
    }
}

/// The anti-diagonal permutation matrix `P_n`.
pub fn backward_identity(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |a, b| if a + b == n - 1 { 1.0 } else { 0.0 })
}

pub fn build_hankel(entries: &[f64], n: usize) -> Result<HankelMatrix> {
    HankelMatrix::new(entries.to_vec(), n)
}

/// Relative agreement required between the matmul and spectral traces.
pub const TRACE_AGREEMENT: f64 = 1e-8;

/// `H / √n` as a dense matrix.
fn normalized(h: &HankelMatrix) -> DMatrix<f64> {
    h.to_dense() / (h.order() as f64).sqrt()
}

/// `Tr(A^p)` by repeated multiplication.
pub fn trace_power_matmul(a: &DMatrix<f64>, p: u32) -> f64 {
    assert!(p >= 1);
    if p == 1 {
        return a.trace();
    }
    // Tr(B A) = Σ B ∘ A for symmetric A, with B = A^{p-1}.
    let mut base = a.clone();
    let mut exp = p - 1;
    let mut acc: Option<DMatrix<f64>> = None;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(m) => &m * &base,
            });
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    acc.expect("p - 1 >= 1").component_mul(a).sum()
}

/// `Σ λ^p` for every `p` in `ps`, plus `Σ |λ|^p` as the scale for each.
fn spectral_sums(eigs: &[f64], ps: &[u32]) -> Vec<(f64, f64)> {
    ps.iter()
        .map(|&p| {
            eigs.iter().fold((0.0, 0.0), |(s, m), &l| {
                let v = l.powi(p as i32);
                (s + v, m + v.abs())
            })
        })
        .collect()
}

fn eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    a.clone().symmetric_eigenvalues().iter().copied().collect()
}

/// `w_p = Tr((H/√n)^p)` by matrix multiplication, cross-checked against the
/// eigenvalue sum.
///
/// Agreement is measured relative to `Σ |λ_i|^p`, because for odd `p` the
/// signed sum can cancel to far below the size of its terms.
pub fn trace_power_direct(h: &HankelMatrix, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::domain("trace power p must be >= 1"));
    }
    h.check_finite()?;
    let a = normalized(h);
    let by_matmul = trace_power_matmul(&a, p);
    let (by_spectrum, scale) = spectral_sums(&eigenvalues(&a), &[p])[0];
    if !by_matmul.is_finite() {
        return Err(Error::numeric(format!("Tr(A^{p}) overflowed")));
    }
    if (by_matmul - by_spectrum).abs() > TRACE_AGREEMENT * scale.max(1.0) {
        return Err(Error::numeric(format!(
            "matmul trace {by_matmul} and spectral trace {by_spectrum} disagree for p={p}"
        )));
    }
    Ok(by_matmul)
}

/// `w_p` for several `p` from one matrix.
///
/// Powers up to 3 use multiplication; anything larger is read off a single
/// eigendecomposition shared by all requested powers.
pub fn trace_powers(h: &HankelMatrix, ps: &[u32]) -> Result<Vec<f64>> {
    if ps.contains(&0) {
        return Err(Error::domain("trace power p must be >= 1"));
    }
    h.check_finite()?;
    let a = normalized(h);
    let spectral = if ps.iter().any(|&p| p > 3) {
        let eigs = eigenvalues(&a);
        let high: Vec<u32> = ps.iter().copied().filter(|&p| p > 3).collect();
        high.iter()
            .copied()
            .zip(spectral_sums(&eigs, &high))
            .collect::<Vec<_>>()
    } else {
        Vec::new()
    };
    let mut squared: Option<DMatrix<f64>> = None;
    let out: Vec<f64> = ps
        .iter()
        .map(|&p| match p {
            1 => a.trace(),
            2 => a.norm_squared(),
            3 => squared
                .get_or_insert_with(|| &a * &a)
                .component_mul(&a)
                .sum(),
            _ => spectral
                .iter()
                .find(|(q, _)| *q == p)
                .map(|(_, (s, _))| *s)
                .expect("spectral sum computed for every p > 3"),
        })
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("trace power overflowed"));
    }
    Ok(out)
}

/// Work cap for [`trace_formula`]: `n (2n+1)^{p-1}` index tuples.
pub const TRACE_FORMULA_CAP: f64 = 1e9;

struct FormulaWalk<'a> {
    entries: &'a [f64],
    n: i64,
    p: usize,
}

impl FormulaWalk<'_> {
    fn x(&self, j: i64) -> f64 {
        self.entries[(j + self.n - 1) as usize]
    }

    fn sign(q: usize) -> i64 {
        if q % 2 == 1 {
            -1
        } else {
            1
        }
    }

    /// Sum over `j_q, …, j_p` given the alternating partial sum of
    /// `j_1..j_{q-1}` and the product of their inputs.
    fn walk(&self, i: i64, target: i64, q: usize, partial: i64, prod: f64) -> f64 {
        let inside = |s: i64| (1..=self.n).contains(&(i - s));
        if q == self.p {
            // The delta constraint fixes the last index.
            let j = Self::sign(q) * (target - partial);
            if j.abs() > self.n - 1 || !inside(target) {
                return 0.0;
            }
            return prod * self.x(j);
        }
        // Two consecutive indicators force |j_q| ≤ n-1, so the ±n terms of
        // the index range contribute nothing and are skipped.
        let mut acc = 0.0;
        for j in -(self.n - 1)..=(self.n - 1) {
            let next = partial + Self::sign(q) * j;
            if inside(next) {
                acc += self.walk(i, target, q + 1, next, prod * self.x(j));
            }
        }
        acc
    }
}

/// `w_p` from the closed-form Hankel trace formula.
///
/// Sums over `i ∈ [1,n]` and `j_1..j_{p-1}`; `j_p` is solved from the delta
/// constraint `Σ (-1)^q j_q = 2i-1-n` (odd `p`) or `= 0` (even `p`).
pub fn trace_formula(entries: &[f64], n: usize, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::domain("trace power p must be >= 1"));
    }
    if n == 0 || entries.len() != 2 * n - 1 {
        return Err(Error::shape(format!(
            "order {n} needs {} entries, got {}",
            (2 * n).saturating_sub(1),
            entries.len()
        )));
    }
    let work = n as f64 * (2.0 * n as f64 + 1.0).powi(p as i32 - 1);
    if work > TRACE_FORMULA_CAP {
        return Err(Error::feasibility(format!(
            "trace formula needs n(2n+1)^(p-1) = {work:.3e} > {TRACE_FORMULA_CAP:e} index tuples"
        )));
    }
    if entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite entries"));
    }
    let walk = FormulaWalk {
        entries,
        n: n as i64,
        p: p as usize,
    };
    let odd = p % 2 == 1;
    let total: f64 = (1..=n as i64)
        .map(|i| {
            let target = if odd { 2 * i - 1 - n as i64 } else { 0 };
            walk.walk(i, target, 1, 0, 1.0)
        })
        .sum();
    Ok(total / (n as f64).powf(p as f64 / 2.0))
}

/// Statistics `w_p` for a set of powers, computed on the same matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub distribution: EntryDistribution,
    pub n: usize,
    pub p_values: Vec<u32>,
    pub reps: usize,
    pub seed: u64,
    /// `records[r][i]` is `w_{p_values[i]}` of replicate `r`.
    pub records: Vec<Vec<f64>>,
}

impl SampleBatch {
    fn position(&self, p: u32) -> Result<usize> {
        self.p_values.iter().position(|&q| q == p).ok_or_else(|| {
            Error::domain(format!("p={p} was not sampled (have {:?})", self.p_values))
        })
    }

    /// All replicates of `w_p`, in replicate order.
    pub fn column(&self, p: u32) -> Result<Vec<f64>> {
        let i = self.position(p)?;
        Ok(self.records.iter().map(|r| r[i]).collect())
    }

    /// Paired `(w_{p1}, w_{p2})` from the same matrices.
    pub fn paired(&self, p1: u32, p2: u32) -> Result<Vec<(f64, f64)>> {
        let (i, j) = (self.position(p1)?, self.position(p2)?);
        Ok(self.records.iter().map(|r| (r[i], r[j])).collect())
    }
}

/// Stream of replicate `r`; different laws never share a stream.
pub fn replicate_stream(dist: EntryDistribution, seed: u64, r: usize) -> StreamRng {
    substream(
        seed,
        Domain::Replicate,
        (dist.stream_tag() << 48) | r as u64,
    )
}

/// Simulate `reps` matrices and record `w_p` for every requested `p`.
///
/// Replicate `r` draws from [`replicate_stream`], and records are kept in
/// replicate order, so the batch is identical for any worker count.
pub fn sample_batch(
    dist: EntryDistribution,
    n: usize,
    p_values: &[u32],
    reps: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::domain("matrix order must be positive"));
    }
    if reps == 0 {
        return Err(Error::domain("reps must be >= 1"));
    }
    if p_values.is_empty() || p_values.contains(&0) {
        return Err(Error::domain("p values must be non-empty and >= 1"));
    }
    let records = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_stream(dist, seed, r);
            let h = HankelMatrix::new(sample_entries(dist, n, &mut rng), n)?;
            trace_powers(&h, p_values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch {
        distribution: dist,
        n,
        p_values: p_values.to_vec(),
        reps,
        seed,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn rng(i: u64) -> crate::rng::StreamRng {
        substream(99, Domain::Adhoc, i)
    }

    #[test]
    fn rademacher_single_entry() {
        let x = sample_entries(EntryDistribution::Rademacher, 1, &mut rng(0));
        assert_eq!(x.len(), 1);
        assert!(x[0] == 1.0 || x[0] == -1.0);
    }

    #[test]
    fn uniform_centered_range() {
        let x = sample_entries(EntryDistribution::UniformCentered, 300, &mut rng(1));
        let bound = 3f64.sqrt();
        assert!(x.iter().all(|v| (-bound..=bound).contains(v)));
    }

    #[test]
    fn entry_count() {
        assert_eq!(
            sample_entries(EntryDistribution::Gaussian, 200, &mut rng(2)).len(),
            399
        );
    }

    #[test]
    fn distribution_moments() {
        let draws = 1_000_000usize;
        for dist in EntryDistribution::ALL {
            let mut r = rng(10 + dist as u64);
            let xs: Vec<f64> = (0..draws).map(|_| dist.sample(&mut r)).collect();
            let mean = xs.iter().sum::<f64>() / draws as f64;
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let var = sq.iter().sum::<f64>() / draws as f64;
            let fourth = sq.iter().map(|s| s * s).sum::<f64>() / draws as f64;
            let mean_se = (1.0 / draws as f64).sqrt();
            let var_se = ((fourth - var * var) / draws as f64).sqrt();
            assert!(mean.abs() < 5.0 * mean_se, "{dist}: mean {mean}");
            // Rademacher has E x^2 = 1 exactly.
            assert!(
                (var - 1.0).abs() <= 5.0 * var_se + 1e-12,
                "{dist}: var {var}"
            );
        }
    }

    #[test]
    fn parses_names() {
        for d in EntryDistribution::ALL {
            assert_eq!(d.name().parse::<EntryDistribution>().unwrap(), d);
        }
        assert!("cauchy".parse::<EntryDistribution>().is_err());
    }

    #[test]
    fn small_matrices_by_hand() {
        let h = build_hankel(&[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(
            h.to_dense(),
            DMatrix::from_row_slice(2, 2, &[3.0, 2.0, 2.0, 1.0])
        );
        let h = build_hankel(&[5.0], 1).unwrap();
        assert_eq!(h.to_dense(), DMatrix::from_element(1, 1, 5.0));
        assert!(matches!(
            build_hankel(&[1.0, 2.0], 2),
            Err(Error::InputShape(_))
        ));
    }

    #[test]
    fn hankel_is_backward_identity_times_toeplitz() {
        for n in [3usize, 5, 8] {
            let x = sample_entries(EntryDistribution::Rademacher, n, &mut rng(n as u64));
            let h = build_hankel(&x, n).unwrap();
            let t = DMatrix::from_fn(n, n, |a, b| {
                x[(a as i64 - b as i64 + n as i64 - 1) as usize]
            });
            assert_eq!(h.to_dense(), backward_identity(n) * t);
            assert_eq!(
                h.toeplitz(),
                DMatrix::from_fn(n, n, |a, b| h.input(a as i64 - b as i64))
            );
        }
    }

    #[test]
    fn symmetric_with_constant_antidiagonals() {
        let n = 9;
        let h = HankelMatrix::new(
            sample_entries(EntryDistribution::Gaussian, n, &mut rng(3)),
            n,
        )
        .unwrap();
        let d = h.to_dense();
        for a in 0..n {
            for b in 0..n {
                assert_eq!(d[(a, b)], d[(b, a)]);
                if a + 1 < n && b > 0 {
                    assert_eq!(d[(a, b)], d[(a + 1, b - 1)]);
                }
            }
        }
    }

    #[test]
    fn trace_of_first_power() {
        let (a, b, c) = (0.3, -1.2, 2.5);
        let h = build_hankel(&[a, b, c], 2).unwrap();
        let w1 = trace_power_direct(&h, 1).unwrap();
        assert!(rel_close(w1, (a + c) / 2f64.sqrt(), 1e-14));
    }

    #[test]
    fn square_trace_is_frobenius() {
        let n = 7;
        let h = HankelMatrix::new(
            sample_entries(EntryDistribution::Gaussian, n, &mut rng(4)),
            n,
        )
        .unwrap();
        let w2 = trace_power_direct(&h, 2).unwrap();
        let frob = h.to_dense().norm_squared() / n as f64;
        assert!(w2 >= 0.0);
        assert!(rel_close(w2, frob, 1e-12));
    }

    #[test]
    fn matmul_and_spectral_agree_up_to_p9() {
        let n = 30;
        let h = HankelMatrix::new(
            sample_entries(EntryDistribution::Gaussian, n, &mut rng(5)),
            n,
        )
        .unwrap();
        for p in 1..=9 {
            trace_power_direct(&h, p).unwrap();
        }
        let all: Vec<u32> = (1..=9).collect();
        let batch = trace_powers(&h, &all).unwrap();
        for (p, w) in all.iter().zip(&batch) {
            let direct = trace_power_direct(&h, *p).unwrap();
            assert!((w - direct).abs() <= 1e-8 * (1.0 + direct.abs()), "p={p}");
        }
    }

    #[test]
    fn non_finite_is_numeric_error() {
        let h = build_hankel(&[1.0, f64::NAN, 0.0], 2).unwrap();
        assert!(matches!(trace_power_direct(&h, 3), Err(Error::Numeric(_))));
        assert!(matches!(
            trace_formula(&[1.0, f64::INFINITY, 0.0], 2, 1),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn formula_trivial_case() {
        assert_eq!(trace_formula(&[0.7], 1, 1).unwrap(), 0.7);
    }

    #[test]
    fn formula_matches_direct_at_n6_p3() {
        let n = 6;
        let x = sample_entries(EntryDistribution::Gaussian, n, &mut rng(6));
        let direct = trace_power_direct(&build_hankel(&x, n).unwrap(), 3).unwrap();
        assert!(rel_close(trace_formula(&x, n, 3).unwrap(), direct, 1e-9));
    }

    #[test]
    fn formula_even_branch() {
        for n in [2usize, 5, 9] {
            let x = sample_entries(EntryDistribution::Rademacher, n, &mut rng(20 + n as u64));
            let h = build_hankel(&x, n).unwrap();
            for p in [2, 4] {
                let direct = trace_power_direct(&h, p).unwrap();
                assert!(
                    rel_close(trace_formula(&x, n, p).unwrap(), direct, 1e-9),
                    "n={n} p={p}"
                );
            }
        }
    }

    #[test]
    fn formula_feasibility_guard() {
        let n = 200;
        let x = vec![0.0; 2 * n - 1];
        assert!(matches!(
            trace_formula(&x, n, 5),
            Err(Error::Feasibility(_))
        ));
        assert!(matches!(
            trace_formula(&x[1..], n, 1),
            Err(Error::InputShape(_))
        ));
    }

    #[test]
    fn batch_pairs_powers_from_one_matrix() {
        let b = sample_batch(EntryDistribution::Gaussian, 12, &[2, 3], 5, 1).unwrap();
        for (r, rec) in b.records.iter().enumerate() {
            let mut s = replicate_stream(EntryDistribution::Gaussian, 1, r);
            let h = HankelMatrix::new(sample_entries(EntryDistribution::Gaussian, 12, &mut s), 12)
                .unwrap();
            assert!(rel_close(rec[0], trace_power_direct(&h, 2).unwrap(), 1e-12));
            assert!(rel_close(rec[1], trace_power_direct(&h, 3).unwrap(), 1e-12));
        }
        assert_eq!(b.paired(2, 3).unwrap().len(), 5);
        assert!(b.column(4).is_err());
    }

    #[test]
    fn batch_rejects_zero_reps() {
        assert!(sample_batch(EntryDistribution::Gaussian, 4, &[1], 0, 0).is_err());
    }
}
