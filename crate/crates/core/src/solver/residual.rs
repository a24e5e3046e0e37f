//! Weak-form residual of a computed solution against a space–time bump.
//!
//! For `φ = X(x)Θ(t)` vanishing at both ends of `(t_a, t_b)` the weak
//! formulation requires `∫∫ (−u ∂ₜφ − uᵐ Δφ − uᵖ φ) dx dt = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Boundary, Geometry};
use crate::numerics::Power;

use super::SolveReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpaceProfile {
    /// `(1 − |x−x₀|²/R²)⁴₊`.
    Bump { center: [f64; 2], radius: f64 },
    /// `X ≡ 1`; only meaningful on periodic boxes.
    Uniform,
}

/// `φ(x, t) = X(x) Θ(t)` with `Θ = (1 − s²)⁴`, `s` mapping `(t_a, t_b)` onto `(−1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub space: SpaceProfile,
    pub t_a: f64,
    pub t_b: f64,
}

impl TestFunction {
    fn theta(&self, t: f64) -> (f64, f64) {
        let w = self.t_b - self.t_a;
        let s = (2.0 * t - self.t_a - self.t_b) / w;
        if s.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        let q = 1.0 - s * s;
        (q.powi(4), -8.0 * s * q.powi(3) * 2.0 / w)
    }

    /// `(X, ΔX)` at `x` in `N` dimensions.
    fn space(&self, x: [f64; 2], n: usize) -> (f64, f64) {
        match self.space {
            SpaceProfile::Uniform => (1.0, 0.0),
            SpaceProfile::Bump { center, radius } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                let rho = d2 / (radius * radius);
                if rho >= 1.0 {
                    return (0.0, 0.0);
                }
                let q = 1.0 - rho;
                let lap = (48.0 * rho * q * q - 8.0 * n as f64 * q.powi(3)) / (radius * radius);
                (q.powi(4), lap)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    /// `|Σ terms| / max |term|`.
    pub relative: f64,
    pub time_term: f64,
    pub diffusion_term: f64,
    pub source_term: f64,
    pub snapshots_used: usize,
}

fn check_support(geometry: &Geometry, tf: &TestFunction) -> Result<()> {
    match (tf.space, geometry) {
        (SpaceProfile::Uniform, Geometry::Box(g)) if g.boundary == Boundary::Periodic => Ok(()),
        (SpaceProfile::Uniform, _) => Err(LabError::Domain("a spatially uniform test function needs a periodic box".into())),
        (SpaceProfile::Bump { center, radius }, Geometry::Radial(g)) => {
            if center != [0.0, 0.0] || radius > g.r_max() {
                Err(LabError::Domain("radial test functions must be centred at 0 inside the grid".into()))
            } else {
                Ok(())
            }
        }
        (SpaceProfile::Bump { center, radius }, Geometry::Box(g)) => {
            let ext = g.extent();
            for a in 0..g.dim {
                let (lo, hi) = (g.lower[a], g.lower[a] + ext[a]);
                if center[a] - radius < lo || center[a] + radius > hi {
                    return Err(LabError::Domain(format!(
                        "test-function support [{}, {}] leaves the domain [{lo}, {hi}]",
                        center[a] - radius,
                        center[a] + radius
                    )));
                }
            }
            Ok(())
        }
    }
}

/// Residual of the weak formulation by cell sums in space and the trapezoid rule over snapshots.
pub fn weak_residual(report: &SolveReport, tf: &TestFunction) -> Result<WeakResidual> {
    if !(tf.t_b > tf.t_a) {
        return Err(LabError::InvalidParams("test function needs t_a < t_b".into()));
    }
    let geometry = *report.initial().geometry();
    check_support(&geometry, tf)?;
    let n = geometry.dim();
    let pm = Power::new(report.params.m());
    let pp = Power::new(report.params.p());
    let weights: Vec<(f64, f64, f64)> = (0..geometry.len())
        .map(|k| {
            let (x, lap) = tf.space(geometry.point(k), n);
            let vol = geometry.cell_volume(k);
            (x * vol, lap * vol, vol)
        })
        .collect();
    let snaps: Vec<_> = report.snapshots.iter().filter(|s| s.t >= tf.t_a && s.t <= tf.t_b).collect();
    if snaps.len() < 3 {
        return Err(LabError::InvalidParams(format!(
            "only {} snapshots inside the test-function window",
            snaps.len()
        )));
    }
    // integrands in space at each snapshot time
    let rows: Vec<(f64, [f64; 3])> = snaps
        .iter()
        .map(|s| {
            let (th, dth) = tf.theta(s.t);
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for (&u, &(xw, lw, _)) in s.field.values().iter().zip(&weights) {
                a += u * xw;
                b += pm.apply(u) * lw;
                if report.source {
                    c += pp.apply(u) * xw;
                }
            }
            (s.t, [-a * dth, -b * th, -c * th])
        })
        .collect();
    let mut terms = [0.0; 3];
    for w in rows.windows(2) {
        let dt = w[1].0 - w[0].0;
        for i in 0..3 {
            terms[i] += 0.5 * dt * (w[0].1[i] + w[1].1[i]);
        }
    }
    let scale = terms.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let total: f64 = terms.iter().sum();
    Ok(WeakResidual {
        relative: if scale > 0.0 { total.abs() / scale } else { 0.0 },
        time_term: terms[0],
        diffusion_term: terms[1],
        source_term: terms[2],
        snapshots_used: snaps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BoxGrid;
    use crate::params::ProblemParams;
    use crate::solver::{solve, InitialSpec, SolverConfig};

    #[test]
    fn bump_laplacian_matches_differences() {
        let tf = TestFunction { space: SpaceProfile::Bump { center: [0.1, -0.2], radius: 0.7 }, t_a: 0.0, t_b: 1.0 };
        let h = 1e-4;
        for x in [[0.3, 0.1], [-0.2, -0.4], [0.1, -0.2]] {
            let f = |p: [f64; 2]| tf.space(p, 2).0;
            let fd = (f([x[0] + h, x[1]]) + f([x[0] - h, x[1]]) + f([x[0], x[1] + h]) + f([x[0], x[1] - h]) - 4.0 * f(x)) / (h * h);
            assert!((fd - tf.space(x, 2).1).abs() < 1e-5 * fd.abs().max(1.0));
        }
        let (_, d) = tf.theta(0.3);
        let fd = (tf.theta(0.3 + h).0 - tf.theta(0.3 - h).0) / (2.0 * h);
        assert!((fd - d).abs() < 1e-6);
    }

    #[test]
    fn zero_solution_has_zero_residual() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let g = Geometry::Box(BoxGrid::centered(1, 1.0, 0.05, Boundary::Neumann).unwrap());
        let r = solve(&SolverConfig::new(prm, g, InitialSpec::Constant { value: 0.0 }, 1.0).with_uniform_snapshots(10)).unwrap();
        let tf = TestFunction { space: SpaceProfile::Bump { center: [0.0, 0.0], radius: 0.5 }, t_a: 0.0, t_b: 1.0 };
        assert_eq!(weak_residual(&r, &tf).unwrap().relative, 0.0);
        let wide = TestFunction { space: SpaceProfile::Bump { center: [0.0, 0.0], radius: 2.0 }, ..tf };
        assert!(weak_residual(&r, &wide).is_err());
    }

    #[test]
    fn ode_residual_is_time_quadrature_error() {
        let prm = ProblemParams::new(1, 1.0, 2.0).unwrap();
        let g = Geometry::Box(BoxGrid::new(1, [4, 1], [0.0, 0.0], 0.25, Boundary::Periodic).unwrap());
        let tf = TestFunction { space: SpaceProfile::Uniform, t_a: 0.0, t_b: 0.5 };
        let run = |k: usize| {
            let mut cfg = SolverConfig::new(prm, g, InitialSpec::Constant { value: 1.0 }, 0.5).with_uniform_snapshots(k);
            cfg.reaction_safety = 1e-4;
            weak_residual(&solve(&cfg).unwrap(), &tf).unwrap().relative
        };
        // the exact ODE solution makes the residual vanish; Euler and trapezoid errors remain
        for k in [50, 100] {
            let r = run(k);
            assert!(r < 1e-3, "{k}: {r}");
        }
    }
}
