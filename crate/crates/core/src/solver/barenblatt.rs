//! Barenblatt (ZKB) source-type solution of `∂ₜu = Δuᵐ`, `m > 1`.

use statrs::function::beta::beta;

use crate::error::{LabError, Result};
use crate::numerics::unit_ball_volume;

/// Self-similar profile with total mass `M` in `R^N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barenblatt {
    pub n: usize,
    pub m: f64,
    pub mass: f64,
    /// `k = N/(N(m−1)+2)`.
    pub k: f64,
    /// `C_M` in `(C_M − κ|x|²/t^{2k/N})₊^{1/(m−1)}`.
    pub c: f64,
    kappa: f64,
}

impl Barenblatt {
    pub fn new(n: usize, m: f64, mass: f64) -> Result<Self> {
        if n == 0 || !(m > 1.0) || !(mass > 0.0) {
            return Err(LabError::InvalidParams(format!(
                "Barenblatt profile needs N >= 1, m > 1, M > 0 (N={n}, m={m}, M={mass})"
            )));
        }
        let nf = n as f64;
        let k = nf / (nf * (m - 1.0) + 2.0);
        let kappa = k * (m - 1.0) / (2.0 * m * nf);
        let b = 1.0 / (m - 1.0);
        // M = N ω_N κ^{−N/2} C^{N/2 + 1/(m−1)} ∫₀¹ (1−s²)^{1/(m−1)} s^{N−1} ds
        let shape = 0.5 * beta(0.5 * nf, b + 1.0);
        let base = nf * unit_ball_volume(n) * kappa.powf(-0.5 * nf) * shape;
        let c = (mass / base).powf(1.0 / (0.5 * nf + b));
        Ok(Self { n, m, mass, k, c, kappa })
    }

    /// `u(x, t)` at `r = |x|`.
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        let arg = self.c - self.kappa * r * r / t.powf(2.0 * self.k / self.n as f64);
        if arg <= 0.0 {
            0.0
        } else {
            t.powf(-self.k) * arg.powf(1.0 / (self.m - 1.0))
        }
    }

    /// Radius of the support at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.kappa).sqrt() * t.powf(self.k / self.n as f64)
    }
}

/// `u(x, t)` of the mass-`M` Barenblatt solution at `r = |x|`.
pub fn barenblatt(r: f64, t: f64, mass: f64, n: usize, m: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LabError::Domain(format!("Barenblatt profile needs t > 0, got {t}")));
    }
    Ok(Barenblatt::new(n, m, mass)?.eval(r, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::adaptive_simpson;

    #[test]
    fn reference_constant() {
        let b = Barenblatt::new(1, 2.0, 1.0).unwrap();
        // 2·√12·(2/3)·C^{3/2} = 1
        let want = (1.0 / (2.0 * 12f64.sqrt() * 2.0 / 3.0)).powf(2.0 / 3.0);
        assert!((b.c - want).abs() < 1e-14);
        assert!((b.support_radius(1.0) - 2.0799).abs() < 1e-3);
    }

    #[test]
    fn mass_is_conserved() {
        for (n, m) in [(1, 2.0), (2, 2.0), (3, 1.5), (1, 3.0)] {
            let b = Barenblatt::new(n, m, 0.7).unwrap();
            let area = n as f64 * unit_ball_volume(n);
            for t in [0.5, 1.0, 3.0] {
                let rs = b.support_radius(t);
                let q = adaptive_simpson(|r| area * r.powi(n as i32 - 1) * b.eval(r, t), 0.0, rs, 1e-12).unwrap();
                assert!((q.value - 0.7).abs() < 1e-6, "N={n} m={m} t={t}: {}", q.value);
            }
        }
    }

    #[test]
    fn support_exponent_fit() {
        let b = Barenblatt::new(2, 3.0, 1.0).unwrap();
        // locate the support edge by bisection on the profile itself
        let edge = |t: f64| {
            let (mut lo, mut hi) = (0.0, 100.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if b.eval(mid, t) > 0.0 {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            lo
        };
        let ts: Vec<f64> = (0..8).map(|k| 2f64.powi(k)).collect();
        let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| edge(t).ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 8.0, ys.iter().sum::<f64>() / 8.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let want = b.k / 2.0;
        assert!((slope - want).abs() < 0.01 * want);
    }

    #[test]
    fn rejects_linear_diffusion() {
        assert!(Barenblatt::new(1, 1.0, 1.0).is_err());
        assert!(barenblatt(0.0, 0.0, 1.0, 1, 2.0).is_err());
    }
}
