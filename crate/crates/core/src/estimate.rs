use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Plain Monte Carlo over a cube; `effort` is the sample count.
    MonteCarlo,
    /// Exact finite grid sum; `effort` is the grid parameter `n`.
    Riemann,
    /// Closed form or structural value; `stderr` is zero.
    Exact,
    /// Average over simulated matrices; `effort` is the replicate count.
    Simulation,
}

/// A value together with its standard error and what produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: EstimateMethod,
    pub effort: u64,
}

impl MomentEstimate {
    pub fn exact(value: f64) -> Self {
        MomentEstimate {
            value,
            stderr: 0.0,
            method: EstimateMethod::Exact,
            effort: 0,
        }
    }

    /// Whether `other` lies within `sigmas` combined standard errors plus
    /// `slack` of this estimate.
    pub fn agrees_with(&self, other: &MomentEstimate, sigmas: f64, slack: f64) -> bool {
        let combined = self.stderr.hypot(other.stderr);
        (self.value - other.value).abs() <= sigmas * combined + slack
    }
}
