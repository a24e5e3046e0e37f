//! Exponent algebra for `∂ₜu = Δuᵐ + uᵖ` in `N` space dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// `|p − p_m|` at or below this is treated as the critical case.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Validated `(N, m, p)` with `N ≥ 1`, `1 ≤ m < p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    n: usize,
    m: f64,
    p: f64,
}

/// Position of `p` relative to the Fujita exponent `p_m = m + 2/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        };
        f.write_str(s)
    }
}

impl ProblemParams {
    pub fn new(n: usize, m: f64, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidParams("N must be a positive integer".into()));
        }
        if !m.is_finite() || !p.is_finite() {
            return Err(LabError::InvalidParams(format!("non-finite exponents m={m}, p={p}")));
        }
        if m < 1.0 {
            return Err(LabError::InvalidParams(format!(
                "m = {m} violates m >= 1 (fast diffusion is not supported)"
            )));
        }
        if p <= m {
            return Err(LabError::InvalidParams(format!("p = {p} violates p > m = {m}")));
        }
        Ok(Self { n, m, p })
    }

    /// Parameters sitting exactly on the Fujita exponent, `p = m + 2/N`.
    pub fn critical(n: usize, m: f64) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidParams("N must be a positive integer".into()));
        }
        Self::new(n, m, m + 2.0 / n as f64)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Same `(N, m)` with a different source exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.n, self.m, p)
    }

    /// Fujita exponent `p_m = m + 2/N`.
    pub fn critical_exponent(&self) -> f64 {
        self.m + 2.0 / self.n as f64
    }

    /// `(θ, θ′)` with `θ = (p−m)/(2(p−1))` and `θ′ = 1/θ`.
    pub fn theta(&self) -> (f64, f64) {
        let theta = (self.p - self.m) / (2.0 * (self.p - 1.0));
        let theta_prime = 2.0 * (self.p - 1.0) / (self.p - self.m);
        (theta, theta_prime)
    }

    /// `κ_r = N(m−1) + 2r` for `r ≥ 1`.
    pub fn kappa(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(LabError::Domain(format!("kappa requires r >= 1, got {r}")));
        }
        Ok(self.n as f64 * (self.m - 1.0) + 2.0 * r)
    }

    /// Singularity exponent `2/(p−m)` of the scale-invariant data `|x|^{−2/(p−m)}`.
    pub fn scaling_exponent(&self) -> f64 {
        2.0 / (self.p - self.m)
    }

    /// `N − 2/(p−m)`: the power in the initial-trace envelope.
    pub fn trace_exponent(&self) -> f64 {
        self.n as f64 - self.scaling_exponent()
    }

    /// Morrey index `q = N(p−m)/2` of the scale-invariant functional.
    pub fn morrey_index(&self) -> f64 {
        self.n as f64 * (self.p - self.m) / 2.0
    }

    pub fn regime(&self) -> Regime {
        self.regime_with_tolerance(CRITICAL_TOLERANCE)
    }

    pub fn regime_with_tolerance(&self, tol: f64) -> Regime {
        let pm = self.critical_exponent();
        if (self.p - pm).abs() <= tol {
            Regime::Critical
        } else if self.p < pm {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }
}

impl std::fmt::Display for ProblemParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "N={},m={},p={}", self.n, self.m, self.p)
    }
}
