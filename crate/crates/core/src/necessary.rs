//! Necessary conditions on initial traces.
//!
//! A solution on `(0, T)` forces its initial trace to satisfy
//! `sup_z ν(B(z, σ)) ≤ C σ^{N − 2/(p−m)}` (or the logarithmic envelope at
//! `p = p_m`). The proof tests the weak form against `ζ(F(|x−z|^{θ′} + at))`
//! with the logarithmic cut-off `F`; this module evaluates that family, makes
//! the resulting constant explicit, and measures discrete traces from solver
//! output.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::norms::{ball_sups, CenterSet};
use crate::numerics::quad::gauss_kronrod;
use crate::numerics::unit_ball_volume;
use crate::params::{ProblemParams, Regime};
use crate::solver::{SolveReport, DEFAULT_EARLY_STEPS};
use crate::special::EnvelopeSpec;

/// Relative tolerance for the envelope quadrature.
pub const ENVELOPE_REL_TOL: f64 = 1e-10;

/// `F(ξ) = (log(1 + d/ξ) − c)/b` together with the time speed `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CutoffSpec {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(LabError::InvalidParams(format!(
                "cut-off constants must be positive and finite (a={a}, b={b}, c={c}, d={d})"
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// `R₁ = d/(e^{b+c} − 1)`, where `F = 1`.
    pub fn r1(&self) -> f64 {
        self.d / (self.b + self.c).exp_m1()
    }

    /// `R₂ = d/(e^c − 1)`, where `F = 0`.
    pub fn r2(&self) -> f64 {
        self.d / self.c.exp_m1()
    }

    /// `aT/2 ≥ R₂`: the test function has left its support before `t = T`.
    pub fn admissible(&self, horizon: f64) -> bool {
        self.a * horizon / 2.0 >= self.r2()
    }

    pub fn f(&self, xi: f64) -> f64 {
        // at the two radii the value is pinned, so rounding never leaks into 0/1
        if xi == self.r1() {
            return 1.0;
        }
        if xi == self.r2() {
            return 0.0;
        }
        ((self.d / xi).ln_1p() - self.c) / self.b
    }

    /// `F′(ξ) = −d/(bξ(ξ+d))`.
    pub fn f_prime(&self, xi: f64) -> f64 {
        -self.d / (self.b * xi * (xi + self.d))
    }

    /// `F″(ξ) = d(2ξ+d)/(bξ²(ξ+d)²)`.
    pub fn f_second(&self, xi: f64) -> f64 {
        self.d * (2.0 * xi + self.d) / (self.b * xi * xi * (xi + self.d).powi(2))
    }
}

pub fn cutoff_f(xi: f64, spec: &CutoffSpec) -> f64 {
    spec.f(xi)
}

/// The additive pieces of `g`: the time part and the three spatial parts
/// inside the `p/(p−m)` power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTerms {
    /// `a^{p/(p−1)} |F′|^{p/(p−1)}`.
    pub time: f64,
    /// `F′² ξ^{2−2θ}`.
    pub gradient: f64,
    /// `|F″| ξ^{2−2θ}`.
    pub curvature: f64,
    /// `|F′| ξ^{1−2θ}`.
    pub slope: f64,
}

impl GTerms {
    pub fn total(&self, params: &ProblemParams) -> f64 {
        let q = params.p() / (params.p() - params.m());
        self.time + (self.gradient + self.curvature + self.slope).powf(q)
    }
}

pub fn g_terms(xi: f64, a: f64, spec: &CutoffSpec, params: &ProblemParams) -> GTerms {
    let p = params.p();
    let theta = params.theta().0;
    let fp = spec.f_prime(xi).abs();
    let fpp = spec.f_second(xi).abs();
    let w = xi.powf(2.0 - 2.0 * theta);
    GTerms {
        time: (a * fp).powf(p / (p - 1.0)),
        gradient: fp * fp * w,
        curvature: fpp * w,
        slope: fp * w / xi,
    }
}

pub fn g_integrand(xi: f64, a: f64, spec: &CutoffSpec, params: &ProblemParams) -> f64 {
    g_terms(xi, a, spec, params).total(params)
}

/// Explicit values of the proof's absorbed constants.
///
/// `ζ` is the quintic step `6s⁵ − 15s⁴ + 10s³`, so `|ζ′| ≤ 15/8` and
/// `|ζ″| ≤ 10/√3`. Young's inequality with weight ½ on both terms gives `K₁`, `K₂`;
/// `φ = ψ^k` with `k = ⌈2p/(p−m)⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofConstants {
    pub k: u32,
    pub young_time: f64,
    pub young_diffusion: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub spatial: f64,
    pub kmax: f64,
    /// `C_* = K_max ω_N`.
    pub c_star: f64,
}

pub fn proof_constants(params: &ProblemParams) -> ProofConstants {
    let (n, m, p) = (params.dim() as f64, params.m(), params.p());
    let tp = params.theta().1;
    let pp = p / (p - 1.0);
    let q = p / (p - m);
    let k = (2.0 * p / (p - m)).ceil().max(1.0);
    let young_time = (p / 2.0).powf(-1.0 / (p - 1.0)) / pp;
    let young_diffusion = (p / (2.0 * m)).powf(-m / (p - m)) / q;
    let zeta1 = 15.0 / 8.0;
    let zeta2 = 10.0 / 3f64.sqrt();
    let spatial = (tp * tp * (zeta2 + zeta1 * zeta1))
        .max(zeta1 * tp * tp)
        .max(zeta1 * tp * (tp + n - 2.0));
    let kmax = (young_time * (k * zeta1).powf(pp)).max(young_diffusion * (k * k * spatial).powf(q));
    ProofConstants {
        k: k as u32,
        young_time,
        young_diffusion,
        zeta1,
        zeta2,
        spatial,
        kmax,
        c_star: kmax * unit_ball_volume(params.dim()),
    }
}

/// `a^{−1}(a^{p/(p−1)} b^{−p/(p−1)} + (b^{−2} + 2b^{−1})^{p/(p−m)})`: the bracket
/// left after bounding `g` with `|F′| ≤ 1/(bξ)` and `|F″| ≤ 1/(bξ²)`.
fn bracket(a: f64, b: f64, params: &ProblemParams) -> f64 {
    let (m, p) = (params.m(), params.p());
    let pp = p / (p - 1.0);
    let q = p / (p - m);
    ((a / b).powf(pp) + (1.0 / (b * b) + 2.0 / b).powf(q)) / a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstant {
    pub constant: f64,
    /// Time speed and cut-off width; at `σ = T^θ` on the logarithmic branch.
    pub a: f64,
    pub b: f64,
    pub ell: Option<f64>,
    pub big_l: Option<f64>,
    pub quad_error: f64,
    pub envelope: EnvelopeSpec,
}

impl EnvelopeConstant {
    /// A concrete cut-off realising radius `σ` with the given `c` (the bound is the `c → ∞` limit).
    pub fn cutoff_for(&self, sigma: f64, c: f64) -> Result<CutoffSpec> {
        let tp = self.envelope.params.theta().1;
        CutoffSpec::new(self.a, self.b, c, sigma.powf(tp) * (self.b + c).exp_m1())
    }
}

pub fn envelope_constant(params: &ProblemParams, horizon: f64) -> Result<EnvelopeConstant> {
    envelope_constant_with_tol(params, horizon, ENVELOPE_REL_TOL)
}

/// As [`envelope_constant`] with an explicit quadrature tolerance. The
/// quadrature error estimate is added to the integral, so tightening the
/// tolerance never increases `C`.
pub fn envelope_constant_with_tol(params: &ProblemParams, horizon: f64, rel_tol: f64) -> Result<EnvelopeConstant> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(LabError::InvalidParams(format!("horizon must be positive, got {horizon}")));
    }
    let pc = proof_constants(params);
    match params.regime() {
        Regime::Critical => critical_constant(params, horizon, &pc, rel_tol),
        _ => {
            let (a, b) = (2.0 * E, 1.0f64);
            let (theta, _) = params.theta();
            let e = params.dim() as f64 * theta - params.p() / (params.p() - 1.0);
            let quad = gauss_kronrod(|x| x.powf(e), 1.0, b.exp(), 0.0, rel_tol)?;
            let constant = pc.c_star * bracket(a, b, params) * (quad.value + quad.error);
            Ok(EnvelopeConstant {
                constant,
                a,
                b,
                ell: None,
                big_l: None,
                quad_error: quad.error,
                envelope: EnvelopeSpec::new(*params, horizon, constant)?,
            })
        }
    }
}

/// Radii `σ = T^θ x` scanned on the logarithmic branch.
fn critical_grid() -> Vec<f64> {
    (0..=2000).map(|j| 10f64.powf(-(j as f64) / 10.0)).collect()
}

/// Width `b(σ) = log(Y (log Y)^{−N(m−1)/2})`, `Y = L + T/σ^{θ′} = L + x^{−θ′}`.
fn critical_b(x: f64, big_l: f64, params: &ProblemParams) -> f64 {
    let tp = params.theta().1;
    let cexp = params.dim() as f64 * (params.m() - 1.0) / 2.0;
    // log(L + x^{−θ′}) without overflow at tiny x
    let y = -tp * x.ln() + (big_l * x.powf(tp)).ln_1p();
    y - cexp * y.ln()
}

struct CriticalCandidate {
    constant: f64,
    ell: f64,
    big_l: f64,
}

fn critical_candidate(params: &ProblemParams, c_star: f64, ell: f64, big_l: f64, xs: &[f64], bs: &[f64]) -> Option<CriticalCandidate> {
    let (n, m, p) = (params.dim() as f64, params.m(), params.p());
    let tp = params.theta().1;
    let cexp = n * (m - 1.0) / 2.0;
    let mut sup = 0.0f64;
    for (&x, &b) in xs.iter().zip(bs) {
        // σ ≤ (aT/(2e^b))^θ with a = ℓ b^{−(m−1)/(p−m)}
        if (2.0f64).ln() + cexp * b.ln() + b + tp * x.ln() > ell.ln() {
            return None;
        }
        let a = ell * b.powf(-(m - 1.0) / (p - m));
        let bound = c_star * bracket(a, b, params) * b;
        let shape = (-x.ln() + (E * x).ln_1p()).powf(-n / 2.0);
        sup = sup.max(bound / shape);
    }
    if ell < 2.0 {
        return None;
    }
    let q = p / (p - m);
    let limit = c_star * (ell.powf(1.0 / (p - 1.0)) + 2f64.powf(q) / ell) * tp.powf(-n / 2.0);
    Some(CriticalCandidate { constant: sup.max(limit), ell, big_l })
}

fn critical_constant(params: &ProblemParams, horizon: f64, pc: &ProofConstants, rel_tol: f64) -> Result<EnvelopeConstant> {
    let xs = critical_grid();
    let ls: Vec<f64> = (0..=40).map(|j| E * 2f64.powf(j as f64 / 2.0)).collect();
    let ells: Vec<f64> = (0..=80).map(|j| 2f64.powf(j as f64 / 4.0)).collect();
    let best = ls
        .par_iter()
        .filter_map(|&big_l| {
            let bs: Vec<f64> = xs.iter().map(|&x| critical_b(x, big_l, params)).collect();
            if bs[0] < 1.0 {
                return None;
            }
            ells.iter()
                .filter_map(|&ell| critical_candidate(params, pc.c_star, ell, big_l, &xs, &bs))
                .min_by(|u, v| u.constant.total_cmp(&v.constant))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|u, v| u.constant.total_cmp(&v.constant).then(u.big_l.total_cmp(&v.big_l)))
        .ok_or_else(|| LabError::Numerical("no admissible (l, L) pair on the search grid".into()))?;
    let b = critical_b(1.0, best.big_l, params);
    let a = best.ell * b.powf(-(params.m() - 1.0) / (params.p() - params.m()));
    let quad = gauss_kronrod(|x| 1.0 / x, 1.0, b.exp(), 0.0, rel_tol)?;
    let quad_error = quad.error + (quad.value - b).abs();
    Ok(EnvelopeConstant {
        constant: best.constant,
        a,
        b,
        ell: Some(best.ell),
        big_l: Some(best.big_l),
        quad_error,
        envelope: EnvelopeSpec::new(*params, horizon, best.constant)?,
    })
}

/// Discrete initial trace: sup-ball masses at one early snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub params: ProblemParams,
    pub tau0: f64,
    pub step: usize,
    pub sigmas: Vec<f64>,
    pub masses: Vec<f64>,
    /// Least-squares slope and intercept of `log mass` against `log σ` over the
    /// middle half of the ladder; `None` when fewer than two masses there are positive.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub fit_range: (usize, usize),
}

/// Default `τ₀`: the first snapshot taken after the initial transient.
pub fn default_tau0(report: &SolveReport) -> f64 {
    report
        .snapshots
        .iter()
        .find(|s| s.step >= DEFAULT_EARLY_STEPS)
        .unwrap_or_else(|| report.last())
        .t
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn measure_trace(report: &SolveReport, sigmas: &[f64], tau0: Option<f64>) -> Result<TraceEstimate> {
    if sigmas.len() < 4 {
        return Err(LabError::InvalidParams(format!("trace fit needs at least 4 radii, got {}", sigmas.len())));
    }
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::InvalidParams("trace radii must be strictly increasing".into()));
    }
    let tau0 = tau0.unwrap_or_else(|| default_tau0(report));
    let snap = report
        .snapshot_near(tau0)
        .ok_or_else(|| LabError::InvalidParams("report has no snapshots".into()))?;
    let f = &snap.field;
    let w: Vec<f64> = f.values().to_vec();
    let sups = ball_sups(f.geometry(), &w, sigmas, CenterSet::AllCells)?;
    let masses: Vec<f64> = sups.iter().map(|s| s.raw_mass.max(0.0)).collect();
    let n = sigmas.len();
    let (lo, hi) = (n / 4, n - n / 4);
    let (lx, ly): (Vec<f64>, Vec<f64>) = (lo..hi)
        .filter(|&i| masses[i] > 0.0)
        .map(|i| (sigmas[i].ln(), masses[i].ln()))
        .unzip();
    let (slope, intercept) = if lx.len() >= 2 {
        let (s, c) = least_squares(&lx, &ly);
        (Some(s), Some(c))
    } else {
        (None, None)
    };
    Ok(TraceEstimate {
        params: report.params,
        tau0: snap.t,
        step: snap.step,
        sigmas: sigmas.to_vec(),
        masses,
        slope,
        intercept,
        fit_range: (lo, hi),
    })
}

/// Trace estimates at `τ₀`, `2τ₀` and `4τ₀`.
pub fn trace_sensitivity(report: &SolveReport, sigmas: &[f64], tau0: f64) -> Result<Vec<TraceEstimate>> {
    [1.0, 2.0, 4.0]
        .iter()
        .map(|k| measure_trace(report, sigmas, Some(k * tau0)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub pass: bool,
    /// `max mass(σ)/(C·shape(σ))` over the checked radii.
    pub margin: f64,
    pub worst_sigma: f64,
    pub checked: usize,
    /// Radii beyond `T^θ`, where the envelope says nothing.
    pub skipped: usize,
}

pub fn check_envelope(est: &TraceEstimate, spec: &EnvelopeSpec) -> Result<EnvelopeCheck> {
    let (a, b) = (est.params.regime(), spec.params.regime());
    if (a == Regime::Critical) != (b == Regime::Critical) {
        return Err(LabError::RegimeMismatch(format!("trace is {a} but the envelope is {b}")));
    }
    let limit = spec.radius_limit();
    let mut out = EnvelopeCheck { pass: true, margin: 0.0, worst_sigma: f64::NAN, checked: 0, skipped: 0 };
    for (&sigma, &mass) in est.sigmas.iter().zip(&est.masses) {
        if sigma > limit * (1.0 + 1e-12) {
            out.skipped += 1;
            continue;
        }
        out.checked += 1;
        let cap = spec.constant * spec.shape(sigma)?;
        let ratio = if mass == 0.0 { 0.0 } else if cap > 0.0 { mass / cap } else { f64::INFINITY };
        if ratio > out.margin || out.worst_sigma.is_nan() {
            out.margin = out.margin.max(ratio);
            out.worst_sigma = sigma;
        }
    }
    out.pass = out.margin <= 1.0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Boundary, BoxGrid, Geometry};
    use crate::norms::ladder;
    use crate::solver::{solve, InitialSpec, SolverConfig};
    use proptest::prelude::*;

    fn spec() -> CutoffSpec {
        CutoffSpec::new(2.0 * E, 1.3, 0.7, 0.4).unwrap()
    }

    #[test]
    fn cutoff_pins_radii() {
        let s = spec();
        assert_eq!(s.f(s.r1()), 1.0);
        assert_eq!(s.f(s.r2()), 0.0);
        assert!(s.r1() < s.r2());
        // the unpinned formula agrees to rounding
        assert!((((s.d / s.r1()).ln_1p() - s.c) / s.b - 1.0).abs() < 1e-14);
        assert!(CutoffSpec::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(s.admissible(2.0 * s.r2() / s.a));
        assert!(!s.admissible(1.9 * s.r2() / s.a));
    }

    #[test]
    fn derivatives_match_differences() {
        let s = spec();
        for i in 0..1000 {
            let xi = 10f64.powf(-3.0 + 5.0 * i as f64 / 999.0);
            let h = 1e-5 * xi;
            let d1 = (s.f(xi + h) - s.f(xi - h)) / (2.0 * h);
            let d2 = (s.f_prime(xi + h) - s.f_prime(xi - h)) / (2.0 * h);
            assert!((d1 - s.f_prime(xi)).abs() < 1e-7 * d1.abs(), "{xi}");
            assert!((d2 - s.f_second(xi)).abs() < 1e-7 * d2.abs(), "{xi}");
            assert!(d1.abs() <= 1.0 / (s.b * xi) * (1.0 + 1e-8));
            assert!(s.f_second(xi) <= 1.0 / (s.b * xi * xi));
        }
    }

    #[test]
    fn g_is_positive_and_dominated() {
        let s = spec();
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let (theta, _) = prm.theta();
        let q = prm.p() / (prm.p() - prm.m());
        let pp = prm.p() / (prm.p() - 1.0);
        for i in 1..200 {
            let xi = s.r1() + (s.r2() - s.r1()) * i as f64 / 200.0;
            let g = g_integrand(xi, s.a, &s, &prm);
            assert!(g > 0.0);
            let bx = s.b * xi;
            let major = (s.a / bx).powf(pp)
                + (xi.powf(2.0 - 2.0 * theta) / (bx * bx) + xi.powf(2.0 - 2.0 * theta) / (bx * xi) + xi.powf(1.0 - 2.0 * theta) / bx).powf(q);
            assert!(g <= major * (1.0 + 1e-12));
        }
    }

    #[test]
    fn g_terms_scale_with_b() {
        let prm = ProblemParams::new(2, 1.5, 4.0).unwrap();
        let s1 = spec();
        let s2 = CutoffSpec { b: 2.0 * s1.b, ..s1 };
        let pp = prm.p() / (prm.p() - 1.0);
        for xi in [0.05, 0.2, 0.6] {
            let (t1, t2) = (g_terms(xi, s1.a, &s1, &prm), g_terms(xi, s1.a, &s2, &prm));
            assert!((t1.time / t2.time - 2f64.powf(pp)).abs() < 1e-12);
            assert!((t1.gradient / t2.gradient - 4.0).abs() < 1e-12);
            assert!((t1.curvature / t2.curvature - 2.0).abs() < 1e-12);
            assert!((t1.slope / t2.slope - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_constant_is_finite_and_free_of_t() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let c = envelope_constant(&prm, 10.0).unwrap();
        assert!(c.constant.is_finite() && c.constant > 0.0);
        assert_eq!(envelope_constant(&prm, 20.0).unwrap().constant, c.constant);
        // oracle: ∫₁^e ξ^{Nθ−p/(p−1)} in closed form
        let e = 3.0 / 8.0 - 5.0 / 4.0;
        let exact = (E.powf(e + 1.0) - 1.0) / (e + 1.0);
        let pc = proof_constants(&prm);
        let want = pc.c_star * bracket(2.0 * E, 1.0, &prm) * exact;
        assert!((c.constant - want).abs() < 1e-9 * want);
        let sub = ProblemParams::new(1, 2.0, 3.0).unwrap();
        assert!(envelope_constant(&sub, 1.0).unwrap().constant > 0.0);
    }

    #[test]
    fn tolerance_tightening_never_raises_constant() {
        let prm = ProblemParams::new(2, 1.0, 3.5).unwrap();
        let mut last = f64::INFINITY;
        for tol in [1e-3, 1e-6, 1e-10, 1e-13] {
            let c = envelope_constant_with_tol(&prm, 1.0, tol).unwrap().constant;
            assert!(c <= last * (1.0 + 1e-14));
            last = c;
        }
    }

    #[test]
    fn critical_constant_and_identity() {
        for (n, m) in [(1, 2.0), (2, 1.0), (2, 1.5), (3, 2.0)] {
            let prm = ProblemParams::critical(n, m).unwrap();
            let (theta, _) = prm.theta();
            assert!((n as f64 * theta - prm.p() / (prm.p() - 1.0) + 1.0).abs() < 1e-12);
        }
        let prm = ProblemParams::critical(1, 2.0).unwrap();
        let c = envelope_constant(&prm, 10.0).unwrap();
        assert!(c.constant.is_finite() && c.constant > 0.0);
        let (ell, big_l) = (c.ell.unwrap(), c.big_l.unwrap());
        assert!(ell >= 2.0 && big_l >= E && c.b >= 1.0);
        assert!(c.quad_error < 1e-8);
        // the reported constant dominates the bound at every sampled radius
        let pc = proof_constants(&prm);
        for j in 0..300 {
            let x = 10f64.powf(-(j as f64) / 7.0);
            let b = critical_b(x, big_l, &prm);
            let a = ell * b.powf(-1.0 / (prm.p() - prm.m()));
            let bound = pc.c_star * bracket(a, b, &prm) * b;
            let sigma = c.envelope.radius_limit() * x;
            assert!(bound <= c.constant * c.envelope.shape(sigma).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cutoff_for_realises_the_radius() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let c = envelope_constant(&prm, 10.0).unwrap();
        let cut = c.cutoff_for(0.5, 3.0).unwrap();
        assert!((cut.r1().powf(prm.theta().0) - 0.5).abs() < 1e-12);
        assert!(cut.admissible(10.0));
    }

    fn report_for(f: InitialSpec, prm: ProblemParams, half: f64, h: f64) -> SolveReport {
        let g = Geometry::Box(BoxGrid::centered(1, half, h, Boundary::Neumann).unwrap());
        let mut cfg = SolverConfig::new(prm, g, f, 1e-6).with_uniform_snapshots(2);
        cfg.source = false;
        solve(&cfg).unwrap()
    }

    #[test]
    fn constant_trace_has_unit_slope() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let r = report_for(InitialSpec::Constant { value: 3.0 }, prm, 4.0, 0.01);
        let g = r.initial().geometry();
        // caps on the (k+½)h lattice keep every ball exactly resolved
        let sig = ladder(g, 2.005, 2f64.sqrt()).unwrap();
        let est = measure_trace(&r, &sig, Some(0.0)).unwrap();
        assert!((est.slope.unwrap() - 1.0).abs() < 1e-9);
        for (s, m) in est.sigmas.iter().zip(&est.masses) {
            assert!((m - 6.0 * s).abs() < 1e-9 * m);
        }
        assert!(measure_trace(&r, &sig[..3], None).is_err());
    }

    #[test]
    fn singular_trace_slope_and_mass() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let r = report_for(InitialSpec::MuC { c: 1.0 }, prm, 4.0, 0.001);
        let sig = ladder(r.initial().geometry(), 2.0005, 2f64.sqrt()).unwrap();
        let est = measure_trace(&r, &sig, Some(0.0)).unwrap();
        // cell averages make the centred mass exact: 6σ^{1/3}
        for (s, m) in est.sigmas.iter().zip(&est.masses) {
            assert!((m - 6.0 * s.cbrt()).abs() < 1e-6 * m, "{s} {m}");
        }
        assert!((est.slope.unwrap() - 1.0 / 3.0).abs() < 1e-6);
        assert!(est.masses.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn hot_cell_trace_is_flat() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let g = Geometry::Box(BoxGrid::centered(1, 4.0, 0.01, Boundary::Neumann).unwrap());
        let mut v = vec![0.0; g.len()];
        let mid = g.len() / 2;
        v[mid] = 100.0;
        let f = crate::GridField::new(g, v).unwrap();
        let r = report_for(InitialSpec::Custom(f), prm, 4.0, 0.01);
        let sig = ladder(&g, 2.0, 2f64.sqrt()).unwrap();
        let est = measure_trace(&r, &sig, Some(0.0)).unwrap();
        assert!(est.slope.unwrap().abs() < 1e-9);
    }

    #[test]
    fn envelope_check_controls() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let env = envelope_constant(&prm, 10.0).unwrap().envelope;
        let zero = report_for(InitialSpec::Constant { value: 0.0 }, prm, 4.0, 0.01);
        let sig = ladder(zero.initial().geometry(), 4.0, 2f64.sqrt()).unwrap();
        let z = check_envelope(&measure_trace(&zero, &sig, None).unwrap(), &env).unwrap();
        assert!(z.pass && z.margin == 0.0 && z.skipped > 0);

        let r = report_for(InitialSpec::MuC { c: 1.0 }, prm, 4.0, 0.01);
        let est = measure_trace(&r, &sig, Some(0.0)).unwrap();
        let ok = check_envelope(&est, &env).unwrap();
        assert!(ok.pass && ok.margin > 0.0);
        let tight = EnvelopeSpec { constant: env.constant * ok.margin / 2.0, ..env };
        let bad = check_envelope(&est, &tight).unwrap();
        assert!(!bad.pass && (bad.margin - 2.0).abs() < 1e-9);

        let crit = envelope_constant(&ProblemParams::critical(1, 2.0).unwrap(), 10.0).unwrap().envelope;
        assert!(check_envelope(&est, &crit).is_err());
    }

    proptest! {
        #[test]
        fn cutoff_is_decreasing(b in 0.2f64..5.0, c in 0.1f64..5.0, d in 0.01f64..10.0, u in 0.01f64..100.0) {
            let s = CutoffSpec::new(1.0, b, c, d).unwrap();
            let x = s.r1() * u;
            prop_assert!(s.f(x * 1.01) < s.f(x));
            prop_assert!(s.f_prime(x) < 0.0);
            if x >= s.r2() {
                prop_assert!(s.f(x) <= 1e-15);
            }
            prop_assert!(s.f_second(x) <= 1.0 / (b * x * x));
        }
    }
}
