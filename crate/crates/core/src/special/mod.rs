//! Scalar functions of the problem: the Zygmund-type Orlicz function Ψ, the
//! weight η, the critical time-to-length scale γ, the singular data μ_c and
//! the initial-trace envelope.

mod gamma;
mod mu;

pub use gamma::{build_gamma, gamma_identity_check, GammaTable};
pub use mu::{mu_c, mu_c_cell_average, mu_c_field, mu_c_radial_integral};

use serde::{Deserialize, Serialize};
use std::f64::consts::E;

use crate::error::{LabError, Result};
use crate::numerics::roots::invert_increasing;
use crate::params::{ProblemParams, Regime};

const INVERSE_REL_TOL: f64 = 1e-14;

/// `Ψ(ξ) = ξ [log(e+ξ)]^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub alpha: f64,
}

impl PsiSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(LabError::InvalidParams(format!("Psi exponent must be positive, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    /// Unchecked evaluation for `ξ ≥ 0`.
    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            0.0
        } else {
            xi * (E + xi).ln().powf(self.alpha)
        }
    }

    /// `Ψ″(ξ)`, used by the energy monitor.
    pub fn second_derivative(&self, xi: f64) -> f64 {
        let l = (E + xi).ln();
        let a = self.alpha;
        let w = E + xi;
        // Ψ′ = L^α + αξ L^{α−1}/w
        let d_first = a * l.powf(a - 1.0) / w;
        let d_second = a * (l.powf(a - 1.0) / w)
            + a * xi * ((a - 1.0) * l.powf(a - 2.0) / (w * w) - l.powf(a - 1.0) / (w * w));
        d_first + d_second
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(LabError::Domain(format!("Psi inverse needs y >= 0, got {y}")));
        }
        let guess = y / (E + y).ln().powf(self.alpha);
        invert_increasing(|x| self.eval(x), y, guess.max(1e-300), INVERSE_REL_TOL)
    }
}

pub fn psi(xi: f64, spec: &PsiSpec) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(LabError::Domain(format!("Psi needs xi >= 0, got {xi}")));
    }
    Ok(spec.eval(xi))
}

pub fn psi_inv(y: f64, spec: &PsiSpec) -> Result<f64> {
    spec.inverse(y)
}

/// `η(ξ) = ξ^N [log(e + 1/ξ)]^{N/2}`, with `η(0) = 0`.
#[inline]
pub fn eta(xi: f64, n: usize) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    let nn = n as f64;
    // for tiny ξ, log(e+1/ξ) ≈ −log ξ without overflow in 1/ξ
    let l = if xi < 1e-300 { -xi.ln() } else { (E + 1.0 / xi).ln() };
    xi.powi(n as i32) * l.powf(0.5 * nn)
}

pub fn eta_inv(y: f64, n: usize) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(LabError::Domain(format!("eta inverse needs y >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let guess = y.powf(1.0 / n as f64) / (E + 1.0 / y).ln().sqrt();
    invert_increasing(|x| eta(x, n), y, guess, INVERSE_REL_TOL)
}

/// Right-hand side of the initial-trace bound on `sup_z ν(B(z, σ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub params: ProblemParams,
    pub horizon: f64,
    pub constant: f64,
}

impl EnvelopeSpec {
    pub fn new(params: ProblemParams, horizon: f64, constant: f64) -> Result<Self> {
        if !(horizon > 0.0) || !(constant >= 0.0) {
            return Err(LabError::InvalidParams(format!(
                "envelope needs T > 0 and C >= 0 (T={horizon}, C={constant})"
            )));
        }
        Ok(Self { params, horizon, constant })
    }

    /// Largest admissible radius `T^θ`.
    pub fn radius_limit(&self) -> f64 {
        self.horizon.powf(self.params.theta().0)
    }

    /// Envelope shape without the constant.
    pub fn shape(&self, sigma: f64) -> Result<f64> {
        let limit = self.radius_limit();
        if !(sigma > 0.0 && sigma <= limit * (1.0 + 1e-12)) {
            return Err(LabError::Domain(format!("sigma = {sigma} outside (0, T^theta = {limit}]")));
        }
        Ok(match self.params.regime() {
            Regime::Critical => (E + limit / sigma).ln().powf(-0.5 * self.params.dim() as f64),
            _ => sigma.powf(self.params.trace_exponent()),
        })
    }
}

pub fn trace_envelope(sigma: f64, spec: &EnvelopeSpec) -> Result<f64> {
    Ok(spec.constant * spec.shape(sigma)?)
}
