//! The critical time-to-length scale `γ`, defined by
//! `∫₀^{γ(ξ)} s η(s)^{m−1} ds = C_η ξ` with `C_η = ∫₀¹ s η(s)^{m−1} ds`.

use crate::error::{LabError, Result};
use crate::numerics::interp::Hermite;
use crate::numerics::quad::adaptive_simpson;
use crate::numerics::roots::{brent, invert_increasing};
use crate::numerics::Power;
use crate::params::{ProblemParams, Regime};

use super::eta;

/// Smallest tabulated `ξ` is `10^{−DECADES}`.
const DECADES: i32 = 24;
const NODES_PER_DECADE: i32 = 100;
/// Nodes below this only serve as the quadrature head of the identity check.
const CHECK_FLOOR: f64 = 1e-12;

/// Tabulated `γ` on geometric nodes in `(0, 1]`, interpolated in log–log
/// coordinates by a monotone cubic Hermite spline with exact slopes.
#[derive(Debug, Clone)]
pub struct GammaTable {
    params: ProblemParams,
    c_eta: f64,
    xi: Vec<f64>,
    gamma: Vec<f64>,
    node_residual: f64,
    spline: Hermite,
}

impl GammaTable {
    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn c_eta(&self) -> f64 {
        self.c_eta
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xi
    }

    pub fn node_values(&self) -> &[f64] {
        &self.gamma
    }

    /// Largest `|∫₀^{γ(ξ_k)} s η^{m−1} − C_η ξ_k|` seen while building.
    pub fn node_residual(&self) -> f64 {
        self.node_residual
    }

    /// `d log γ / d log ξ` at a tabulated point, from the defining relation.
    fn log_slope(&self, xi: f64, g: f64) -> f64 {
        log_slope(&self.params, self.c_eta, xi, g)
    }

    /// `γ(ξ)` for `ξ ≥ 0`; beyond the node range a local power law is used.
    pub fn eval(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        let first = self.xi[0];
        let last = *self.xi.last().expect("table has nodes");
        if xi < first {
            let g0 = self.gamma[0];
            return g0 * (xi / first).powf(self.log_slope(first, g0));
        }
        if xi > last {
            let g1 = *self.gamma.last().expect("table has nodes");
            return g1 * (xi / last).powf(self.log_slope(last, g1));
        }
        self.spline.eval(xi.ln()).exp()
    }
}

fn log_slope(params: &ProblemParams, c_eta: f64, xi: f64, g: f64) -> f64 {
    c_eta * xi / (g * g * eta(g, params.dim()).powf(params.m() - 1.0))
}

/// Build the table; only meaningful for `p = p_m`.
pub fn build_gamma(params: &ProblemParams) -> Result<GammaTable> {
    if params.regime() != Regime::Critical {
        return Err(LabError::RegimeMismatch(format!(
            "gamma is defined for p = p_m only ({params}, p_m = {})",
            params.critical_exponent()
        )));
    }
    let n = params.dim();
    let pw = Power::new(params.m() - 1.0);
    let weight = move |s: f64| s * pw.apply(eta(s, n));
    let c_eta = adaptive_simpson(weight, 0.0, 1.0, 1e-15)?.value;

    let count = (DECADES * NODES_PER_DECADE) as usize + 1;
    let xi: Vec<f64> = (0..count)
        .map(|k| 10f64.powf(-(DECADES as f64) + k as f64 / NODES_PER_DECADE as f64))
        .collect();
    let mut gamma = Vec::with_capacity(count);
    let mut residual = 0.0f64;

    let target0 = c_eta * xi[0];
    let cumulative0 = |g: f64| adaptive_simpson(weight, 0.0, g, 1e-14 * target0).map(|q| q.value).unwrap_or(f64::NAN);
    let g0 = invert_increasing(cumulative0, target0, xi[0].sqrt(), 1e-15)?;
    let mut acc = cumulative0(g0);
    residual = residual.max((acc - target0).abs());
    gamma.push(g0);

    for k in 1..count {
        let target = c_eta * xi[k];
        let g_prev = gamma[k - 1];
        let tol = 1e-15 * target;
        let segment = |g: f64| adaptive_simpson(weight, g_prev, g, tol).map(|q| q.value);
        let mut hi = g_prev * 1.05;
        while acc + segment(hi)? < target {
            hi *= 1.05;
        }
        let g = brent(|g| acc + segment(g).unwrap_or(f64::NAN) - target, g_prev, hi, 1e-15, 0.0)?;
        acc += segment(g)?;
        residual = residual.max((acc - target).abs());
        gamma.push(g);
    }
    // ξ = 1 forces γ = 1 exactly
    *gamma.last_mut().expect("nonempty") = 1.0;

    let lx: Vec<f64> = xi.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = gamma.iter().map(|g| g.ln()).collect();
    let slopes: Vec<f64> = xi.iter().zip(&gamma).map(|(&x, &g)| log_slope(params, c_eta, x, g)).collect();
    let spline = Hermite::monotone(lx, ly, slopes);
    Ok(GammaTable { params: *params, c_eta, xi, gamma, node_residual: residual, spline })
}

/// Relative defect of `γ(ξ)² = 2C_η ∫₀^ξ η(γ(s))^{−(m−1)} ds` over the nodes `ξ ≥ 1e−12`.
pub fn gamma_identity_check(table: &GammaTable) -> Result<f64> {
    let params = table.params;
    let n = params.dim();
    let m1 = params.m() - 1.0;
    let integrand = |s: f64| eta(table.eval(s), n).powf(-m1);

    // head on (0, ξ₀] with s = ξ₀ w^q, which removes the s^{−(m−1)/(p−1)} singularity
    let a = m1 / (params.p() - 1.0);
    let q = 2.0 / (1.0 - a);
    let x0 = table.xi[0];
    let head = |w: f64| {
        if w == 0.0 {
            0.0
        } else {
            integrand(x0 * w.powf(q)) * x0 * q * w.powf(q - 1.0)
        }
    };
    let head_scale = x0 * integrand(x0);
    let mut acc = adaptive_simpson(head, 0.0, 1.0, 1e-13 * head_scale)?.value;

    let mut worst = 0.0f64;
    for k in 1..table.xi.len() {
        let (xa, xb) = (table.xi[k - 1], table.xi[k]);
        let scale = (xb - xa) * integrand(xb);
        acc += adaptive_simpson(integrand, xa, xb, 1e-13 * scale)?.value;
        if xb >= CHECK_FLOOR {
            let g2 = table.gamma[k] * table.gamma[k];
            let r = (g2 - 2.0 * table.c_eta * acc).abs() / g2.max(1e-30);
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn crit(n: usize, m: f64) -> ProblemParams {
        ProblemParams::critical(n, m).unwrap()
    }

    #[test]
    fn rejects_noncritical() {
        let p = ProblemParams::new(1, 2.0, 5.0).unwrap();
        assert!(matches!(build_gamma(&p), Err(LabError::RegimeMismatch(_))));
    }

    #[test]
    fn linear_diffusion_gives_square_root() {
        let t = build_gamma(&crit(1, 1.0)).unwrap();
        assert!((t.c_eta() - 0.5).abs() < 1e-15);
        let mut worst = 0.0f64;
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            worst = worst.max((t.eval(x) - x.sqrt()).abs());
            let y = 10f64.powf(-12.0 * k as f64 / 1000.0);
            worst = worst.max((t.eval(y) - y.sqrt()).abs());
        }
        assert!(worst <= 1e-8, "{worst}");
    }

    #[test]
    fn endpoints() {
        for (n, m) in [(1, 1.0), (1, 2.0), (2, 2.0), (3, 1.5)] {
            let t = build_gamma(&crit(n, m)).unwrap();
            assert_eq!(t.eval(0.0), 0.0);
            assert_eq!(t.eval(1.0), 1.0);
            assert!(t.node_residual() <= 1e-9);
            assert!(t.node_values().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn nodes_solve_the_defining_equation() {
        let prm = crit(1, 2.0);
        let t = build_gamma(&prm).unwrap();
        let w = |s: f64| s * eta(s, 1);
        for k in (0..t.nodes().len()).step_by(97) {
            let lhs = adaptive_simpson(w, 0.0, t.node_values()[k], 1e-16).unwrap().value;
            assert!((lhs - t.c_eta() * t.nodes()[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn brute_force_trapezoid_oracle() {
        // N=1, m=2, p=4: cumulative trapezoid with 10⁶ panels on [0, 1]
        let t = build_gamma(&crit(1, 2.0)).unwrap();
        let panels = 1_000_000;
        let h = 1.0 / panels as f64;
        let f = |s: f64| s * s * (E + 1.0 / s).ln().sqrt();
        let mut cum = vec![0.0; panels + 1];
        let mut prev = 0.0;
        for k in 1..=panels {
            let v = f(k as f64 * h);
            cum[k] = cum[k - 1] + 0.5 * h * (prev + v);
            prev = v;
        }
        let target = 0.5 * cum[panels];
        let k = cum.partition_point(|&c| c < target);
        let frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
        let oracle = (k as f64 - 1.0 + frac) * h;
        assert!((t.eval(0.5) - oracle).abs() < 1e-7, "{} vs {}", t.eval(0.5), oracle);
    }

    #[test]
    fn identity_holds() {
        for (n, m) in [(1, 1.0), (1, 2.0), (2, 2.0), (1, 3.0), (3, 1.5), (2, 1.0)] {
            let r = gamma_identity_check(&build_gamma(&crit(n, m)).unwrap()).unwrap();
            assert!(r <= 1e-6, "N={n} m={m} residual {r}");
        }
    }

    #[test]
    fn doubling_and_growth_brackets() {
        let prm = crit(1, 2.0);
        let t = build_gamma(&prm).unwrap();
        let inv = 1.0 / (prm.p() - 1.0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut kmin = f64::INFINITY;
        for k in 0..=600 {
            let x = 10f64.powf(-6.0 + k as f64 / 100.0);
            let d = t.eval(x) / t.eval(0.5 * x);
            assert!((1.0..=20.0).contains(&d));
            let eg = eta(t.eval(x), 1);
            kmin = kmin.min(eg / x.powf(inv));
            let r = eg / (x.powf(inv) * (E + 1.0 / x).ln().powf(inv));
            lo = lo.min(r);
            hi = hi.max(r);
        }
        assert!(kmin > 0.0);
        assert!(hi / lo < 2.0, "bracket [{lo}, {hi}]");
    }
}
