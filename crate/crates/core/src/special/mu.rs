//! Optimal-singularity data `μ_c` and its cell averages.

use std::f64::consts::{E, PI};

use crate::error::{LabError, Result};
use crate::field::{Geometry, GridField};
use crate::numerics::quad::{adaptive_simpson, gauss_kronrod};
use crate::params::{ProblemParams, Regime};

fn require_admissible(params: &ProblemParams) -> Result<()> {
    if params.regime() == Regime::Subcritical {
        return Err(LabError::RegimeMismatch(format!(
            "mu_c needs p >= p_m ({params}, p_m = {})",
            params.critical_exponent()
        )));
    }
    Ok(())
}

/// `μ_c` at distance `r = |x|` from the origin; `+∞` at `r = 0`.
///
/// `c r^{−2/(p−m)}` for `p > p_m` and `c r^{−N} [log(e + 1/r)]^{−N/2−1}` for `p = p_m`.
pub fn mu_c(r: f64, c: f64, params: &ProblemParams) -> Result<f64> {
    require_admissible(params)?;
    if !(r >= 0.0) {
        return Err(LabError::Domain(format!("|x| must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(c * profile(r, params))
}

fn profile(r: f64, params: &ProblemParams) -> f64 {
    let n = params.dim() as f64;
    match params.regime() {
        Regime::Critical => r.powf(-n) * (E + 1.0 / r).ln().powf(-0.5 * n - 1.0),
        _ => r.powf(-params.scaling_exponent()),
    }
}

/// `∫_a^b μ_c(r) r^{N−1} dr` for `0 ≤ a ≤ b`.
pub fn mu_c_radial_integral(a: f64, b: f64, c: f64, params: &ProblemParams) -> Result<f64> {
    require_admissible(params)?;
    if !(0.0 <= a && a <= b) {
        return Err(LabError::Domain(format!("radial integral needs 0 <= a <= b (a={a}, b={b})")));
    }
    if a == b {
        return Ok(0.0);
    }
    let n = params.dim() as f64;
    let value = match params.regime() {
        Regime::Critical => {
            if a > 0.0 {
                let f = |r: f64| profile(r, params) * r.powf(n - 1.0);
                let scale = (b - a) * f(b);
                adaptive_simpson(f, a, b, 1e-13 * scale)?.value
            } else {
                // r^{−1} L^{−N/2−1} = (2/N)(er+1) d/dr[L^{−N/2}], L = log(e + 1/r); integrate by parts
                let lp = |r: f64| if r == 0.0 { 0.0 } else { (E + 1.0 / r).ln().powf(-0.5 * n) };
                let boundary = (2.0 / n) * (E * b + 1.0) * lp(b);
                let rest = adaptive_simpson(lp, 0.0, b, 1e-14 * b * lp(b))?.value;
                boundary - (2.0 / n) * E * rest
            }
        }
        _ => {
            let e = n - params.scaling_exponent();
            (b.powf(e) - a.powf(e)) / e
        }
    };
    Ok(c * value)
}

/// Average of `μ_c` over cell `idx`.
///
/// Exact radial integrals are used on radial grids and in 1D; 2D cells use a
/// nested Gauss–Kronrod rule, except the cell holding the origin, which is
/// replaced by the disk of equal area.
pub fn mu_c_cell_average(geometry: &Geometry, idx: usize, c: f64, params: &ProblemParams) -> Result<f64> {
    if geometry.dim() != params.dim() {
        return Err(LabError::InvalidParams(format!(
            "grid dimension {} differs from N = {}",
            geometry.dim(),
            params.dim()
        )));
    }
    let h = geometry.h();
    match geometry {
        Geometry::Radial(g) => {
            let (a, b) = (idx as f64 * g.h, (idx + 1) as f64 * g.h);
            let n = g.dim as i32;
            Ok(n as f64 * mu_c_radial_integral(a, b, c, params)? / (b.powi(n) - a.powi(n)))
        }
        Geometry::Box(g) if g.dim == 1 => {
            let x = g.center(idx)[0];
            let (a, b) = (x - 0.5 * h, x + 0.5 * h);
            let total = if a >= 0.0 {
                mu_c_radial_integral(a, b, c, params)?
            } else if b <= 0.0 {
                mu_c_radial_integral(-b, -a, c, params)?
            } else {
                mu_c_radial_integral(0.0, -a, c, params)? + mu_c_radial_integral(0.0, b, c, params)?
            };
            Ok(total / h)
        }
        Geometry::Box(g) => {
            let [x, y] = g.center(idx);
            if x.abs() < 0.5 * h && y.abs() < 0.5 * h {
                let rho = h / PI.sqrt();
                return Ok(2.0 * mu_c_radial_integral(0.0, rho, c, params)? / (rho * rho));
            }
            let inner = |yy: f64| {
                gauss_kronrod(|xx: f64| profile(xx.hypot(yy), params), x - 0.5 * h, x + 0.5 * h, 0.0, 1e-11)
                    .map(|q| q.value)
                    .unwrap_or(f64::NAN)
            };
            let q = gauss_kronrod(inner, y - 0.5 * h, y + 0.5 * h, 0.0, 1e-10)?;
            if !q.value.is_finite() {
                return Err(LabError::Numerical(format!("cell average of mu_c failed at cell {idx}")));
            }
            Ok(c * q.value / (h * h))
        }
    }
}

/// Field of cell averages of `μ_c`.
pub fn mu_c_field(geometry: Geometry, c: f64, params: &ProblemParams) -> Result<GridField> {
    if !(c >= 0.0) {
        return Err(LabError::InvalidParams(format!("c must be nonnegative, got {c}")));
    }
    require_admissible(params)?;
    if c == 0.0 {
        return Ok(GridField::zeros(geometry));
    }
    // averages are linear in c: build once at c = 1
    let values = (0..geometry.len())
        .map(|k| mu_c_cell_average(&geometry, k, 1.0, params).map(|v| c * v))
        .collect::<Result<Vec<_>>>()?;
    GridField::new(geometry, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Boundary, BoxGrid, RadialGrid};

    #[test]
    fn point_values() {
        let sup = ProblemParams::new(1, 2.0, 5.0).unwrap();
        assert!((mu_c(8.0, 1.0, &sup).unwrap() - 0.25).abs() < 1e-15);
        let crit = ProblemParams::new(1, 2.0, 4.0).unwrap();
        assert!((mu_c(1.0, 1.0, &crit).unwrap() - 0.664_466_496_804_433_6).abs() < 1e-14);
        for r in [0.01, 0.3, 2.0] {
            for p in [&sup, &crit] {
                assert_eq!(mu_c(r, 2.0, p).unwrap(), 2.0 * mu_c(r, 1.0, p).unwrap());
            }
        }
        assert_eq!(mu_c(0.0, 1.0, &sup).unwrap(), f64::INFINITY);
        assert!(mu_c(1.0, 1.0, &ProblemParams::new(1, 2.0, 3.0).unwrap()).is_err());
    }

    #[test]
    fn radial_integral_matches_quadrature() {
        for (n, m, p) in [(1, 2.0, 4.0), (2, 2.0, 3.0), (3, 1.0, 5.0 / 3.0), (1, 2.0, 5.0)] {
            let prm = ProblemParams::new(n, m, p).unwrap();
            let f = |r: f64| profile(r, &prm) * r.powi(n as i32 - 1);
            for (a, b) in [(0.01, 0.02), (0.3, 1.7)] {
                let want = gauss_kronrod(f, a, b, 0.0, 1e-13).unwrap().value;
                let got = mu_c_radial_integral(a, b, 1.0, &prm).unwrap();
                assert!((got - want).abs() < 1e-11 * want, "{prm} [{a},{b}]");
            }
            // from the origin: compare against the sum of dyadic pieces
            let b = 0.5;
            let mut want = 0.0;
            let mut hi = b;
            for _ in 0..200 {
                let lo = 0.5 * hi;
                want += gauss_kronrod(f, lo, hi, 0.0, 1e-14).unwrap().value;
                hi = lo;
            }
            // below r₀ = 2^{−200} the critical integrand is ≈ r^{−1}(log 1/r)^{−N/2−1}
            if prm.regime() == Regime::Critical {
                want += (2.0 / n as f64) * (-hi.ln()).powf(-0.5 * n as f64);
            }
            let got = mu_c_radial_integral(0.0, b, 1.0, &prm).unwrap();
            assert!((got - want).abs() <= 1e-3 * got, "{prm}: {got} vs {want}");
        }
    }

    #[test]
    fn critical_origin_integral_against_substitution() {
        // ∫₀^b r^{−1} L^{−3/2} dr with r = e^{−t}: ∫_{−log b}^∞ log(e + e^t)^{−3/2} dt
        let prm = ProblemParams::new(1, 2.0, 4.0).unwrap();
        let b = 0.25f64;
        let g = |t: f64| (E + t.exp()).ln().powf(-1.5);
        let t0 = -b.ln();
        // tail beyond t1 handled in closed form using log(e+e^t) ≈ t
        let t1 = 700.0;
        let body = gauss_kronrod(g, t0, t1, 0.0, 1e-13).unwrap().value;
        let tail = 2.0 / t1.sqrt();
        let want = body + tail;
        let got = mu_c_radial_integral(0.0, b, 1.0, &prm).unwrap();
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn one_dimensional_cell_averages_sum_to_integral() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let g = Geometry::Box(BoxGrid::centered(1, 1.0, 0.01, Boundary::Neumann).unwrap());
        let f = mu_c_field(g, 1.0, &prm).unwrap();
        // ∫_{−1.005}^{1.005} |x|^{−2/3} dx = 6·1.005^{1/3}
        assert!((f.mass() - 6.0 * 1.005f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn radial_and_2d_averages() {
        let prm = ProblemParams::new(2, 1.0, 3.0).unwrap();
        let rg = Geometry::Radial(RadialGrid::new(2, 1.0, 0.05).unwrap());
        let f = mu_c_field(rg, 1.0, &prm).unwrap();
        // ∫_{B(0,1)} |x|^{−1} dx = 2π
        assert!((f.mass() - 2.0 * PI).abs() < 1e-10);
        let bg = Geometry::Box(BoxGrid::centered(2, 0.5, 0.1, Boundary::Neumann).unwrap());
        let f = mu_c_field(bg, 1.0, &prm).unwrap();
        let away = f.values()[0];
        let [x, y] = bg.point(0);
        assert!((away - 1.0 / x.hypot(y)).abs() < 0.01 * away);
        // equal-area disk of radius ρ = h/√π at the origin averages 1/r to 2/ρ
        let centre = f.values()[bg.len() / 2];
        assert!((centre - 2.0 * PI.sqrt() / 0.1).abs() < 1e-10 * centre);
    }
}
