//! Partition integrals over `[-1,1]^d` and their finite-`n` grid sums.
//!
//! A pair partition `π` of `[Σ p_r]` assigns one coordinate `y_b` to each of
//! its blocks. Trace factor `r` owns the positions `o_r + 1, …, o_r + p_r`
//! (`o_r = Σ_{u<r} p_u`) and sees
//!
//! ```text
//! x_r = ½ (Σ_q (-1)^q y_{π(o_r+q)} + 1)
//! U_r = Π_{ℓ=1..p_r} χ_[0,1](x_r - Σ_{q≤ℓ} (-1)^q y_{π(o_r+q)})
//! ```
//!
//! and the integral of `Π_r U_r` is `f_k(π)` for equal degrees,
//! `g_{p1,p2}(π)` for two factors, and the mixed-degree `h_k(π)` in general.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::partitions::{vector_of_positions, PairPartition};
use crate::{Error, EstimateMethod, MomentEstimate, Result};

/// Minimum Monte Carlo sample count.
pub const MIN_SAMPLES: u64 = 1_000;

/// Coordinate index and sign `(-1)^q` of one position inside a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Term {
    coord: usize,
    negative: bool,
}

/// The integrand attached to a partition and a degree layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrandSpec {
    pi: PairPartition,
    degrees: Vec<usize>,
    factors: Vec<Vec<Term>>,
}

impl IntegrandSpec {
    pub fn new(pi: PairPartition, degrees: &[usize]) -> Result<Self> {
        let total: usize = degrees.iter().sum();
        if total != pi.m() {
            return Err(Error::shape(format!(
                "degrees sum to {total} but the partition is of [{}]",
                pi.m()
            )));
        }
        if degrees.contains(&0) {
            return Err(Error::shape("degrees must be positive"));
        }
        let labels = pi.labels();
        let owner = vector_of_positions(degrees);
        let mut factors: Vec<Vec<Term>> = degrees.iter().map(|&d| Vec::with_capacity(d)).collect();
        for (pos, &r) in owner.iter().enumerate() {
            // q is 1-based within the factor, so odd q carries a minus sign.
            let q = factors[r].len() + 1;
            factors[r].push(Term {
                coord: labels[pos],
                negative: q % 2 == 1,
            });
        }
        Ok(IntegrandSpec {
            pi,
            degrees: degrees.to_vec(),
            factors,
        })
    }

    /// `k` equal factors of degree `p`.
    pub fn uniform(pi: PairPartition, p: usize, k: usize) -> Result<Self> {
        Self::new(pi, &vec![p; k])
    }

    pub fn pi(&self) -> &PairPartition {
        &self.pi
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Integration dimension `Σ p_r / 2`.
    pub fn dim(&self) -> usize {
        self.pi.blocks().len()
    }

    /// Cube volume `2^dim`.
    pub fn volume(&self) -> f64 {
        2f64.powi(self.dim() as i32)
    }
}

/// `Π_r U_r` at a point of the cube.
pub fn indicator_product(spec: &IntegrandSpec, y: &[f64]) -> bool {
    debug_assert_eq!(y.len(), spec.dim());
    spec.factors.iter().all(|terms| {
        let signed = |t: &Term| if t.negative { -y[t.coord] } else { y[t.coord] };
        let x = 0.5 * (terms.iter().map(signed).sum::<f64>() + 1.0);
        let mut partial = 0.0;
        terms.iter().all(|t| {
            partial += signed(t);
            (0.0..=1.0).contains(&(x - partial))
        })
    })
}

/// Plain Monte Carlo estimate of the integral of `Π_r U_r` over `[-1,1]^dim`.
pub fn estimate_f<R: Rng + ?Sized>(
    spec: &IntegrandSpec,
    samples: u64,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::domain(format!(
            "at least {MIN_SAMPLES} Monte Carlo samples are required, got {samples}"
        )));
    }
    let mut y = vec![0.0; spec.dim()];
    let mut hits = 0u64;
    for _ in 0..samples {
        for v in y.iter_mut() {
            *v = 2.0 * rng.random::<f64>() - 1.0;
        }
        if indicator_product(spec, &y) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let rate = hits as f64 / n;
    // Sample standard deviation of a 0/1 variable.
    let sd = (rate * (1.0 - rate) * n / (n - 1.0)).sqrt();
    let volume = spec.volume();
    Ok(MomentEstimate {
        value: volume * rate,
        stderr: volume * sd / n.sqrt(),
        method: EstimateMethod::MonteCarlo,
        effort: samples,
    })
}

/// `g_{p1,p2}(π)`: the two-factor integral with degrees `p1` and `p2`.
pub fn estimate_g<R: Rng + ?Sized>(
    pi: &PairPartition,
    p1: usize,
    p2: usize,
    samples: u64,
    rng: &mut R,
) -> Result<MomentEstimate> {
    if (p1 + p2) % 2 == 1 {
        return Err(Error::domain(format!("p1 + p2 = {} must be even", p1 + p2)));
    }
    let spec = IntegrandSpec::new(pi.clone(), &[p1, p2])?;
    estimate_f(&spec, samples, rng)
}

/// Work limits for [`riemann_r_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannLimits {
    pub max_dim: usize,
    /// Upper bound on `(2n+1)^dim` grid points.
    pub max_points: f64,
}

impl Default for RiemannLimits {
    fn default() -> Self {
        RiemannLimits {
            max_dim: 3,
            max_points: 1e9,
        }
    }
}

/// The finite-`n` sum `R_n` with the default limits.
pub fn riemann_r(spec: &IntegrandSpec, n: u64) -> Result<MomentEstimate> {
    riemann_r_with(spec, n, RiemannLimits::default())
}

/// `R_n = n^{-dim} Σ_{j ∈ [-n,n]^dim} Π_r Π_ℓ χ_[1,n](i_r - Σ_{q≤ℓ} (-1)^q j_{π(o_r+q)})`
/// with `i_r = ½ (Σ_q (-1)^q j_{π(o_r+q)} + n + 1)`.
///
/// `i_r` is half-integral for some `j`; the indicator is then applied to the
/// half-integral argument. Everything is evaluated on doubled integers, so
/// the sum is exact.
pub fn riemann_r_with(
    spec: &IntegrandSpec,
    n: u64,
    limits: RiemannLimits,
) -> Result<MomentEstimate> {
    let dim = spec.dim();
    if n == 0 {
        return Err(Error::domain("grid parameter n must be positive"));
    }
    if dim > limits.max_dim {
        return Err(Error::feasibility(format!(
            "grid sums are limited to dimension {} (got {dim})",
            limits.max_dim
        )));
    }
    let points = (2.0 * n as f64 + 1.0).powi(dim as i32);
    if points > limits.max_points {
        return Err(Error::feasibility(format!(
            "(2n+1)^dim = {points:.3e} grid points exceed {:.3e}",
            limits.max_points
        )));
    }
    let n = n as i64;
    let mut j = vec![-n; dim];
    let mut count = 0u64;
    loop {
        let inside = spec.factors.iter().all(|terms| {
            let signed = |t: &Term| if t.negative { -j[t.coord] } else { j[t.coord] };
            // 2 i_r = Σ + n + 1; test 2 ≤ 2(i_r - partial) ≤ 2n.
            let twice_i = terms.iter().map(signed).sum::<i64>() + n + 1;
            let mut partial = 0i64;
            terms.iter().all(|t| {
                partial += signed(t);
                let v = twice_i - 2 * partial;
                (2..=2 * n).contains(&v)
            })
        });
        if inside {
            count += 1;
        }
        // Advance the odometer.
        let mut idx = 0;
        loop {
            if idx == dim {
                let value = count as f64 / (n as f64).powi(dim as i32);
                return Ok(MomentEstimate {
                    value,
                    stderr: 0.0,
                    method: EstimateMethod::Riemann,
                    effort: n as u64,
                });
            }
            j[idx] += 1;
            if j[idx] <= n {
                break;
            }
            j[idx] = -n;
            idx += 1;
        }
    }
}
