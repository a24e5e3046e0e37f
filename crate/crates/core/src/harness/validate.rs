//! Built-in oracle suite: problems with exact answers.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{Boundary, BoxGrid, Geometry, GridField};
use crate::harness::experiments::run_scaling_check;
use crate::norms::{morrey_norm, NormSpec};
use crate::params::ProblemParams;
use crate::solver::{solve, weak_residual, Barenblatt, InitialSpec, SolverConfig, SpaceProfile, Status, TestFunction};
use crate::special::{build_gamma, gamma_identity_check, mu_c_field};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// `measured ≤ limit` passes unless `at_least` is set.
    pub limit: f64,
    pub at_least: bool,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), measured, limit, at_least: false, pass: measured <= limit }
    }

    fn at_least(name: &str, measured: f64, limit: f64) -> Self {
        Self { name: name.into(), measured, limit, at_least: true, pass: measured >= limit }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = if self.at_least { ">=" } else { "<=" };
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:e} {op} {:e}", self.name, self.measured, self.limit)
    }
}

/// Porous medium run (`N = 1`, `m = 2`, no source) from the Barenblatt profile
/// of unit mass at `t = 1` to `t = 2`.
pub fn barenblatt_config(h: f64) -> Result<SolverConfig> {
    let prm = ProblemParams::new(1, 2.0, 5.0)?;
    let g = Geometry::Box(BoxGrid::centered(1, 4.0, h, Boundary::Neumann)?);
    let mut cfg = SolverConfig::new(prm, g, InitialSpec::Barenblatt { mass: 1.0, t0: 1.0 }, 2.0).with_uniform_snapshots(20);
    cfg.start_time = 1.0;
    cfg.source = false;
    Ok(cfg)
}

/// Relative L¹ distance to the exact profile at `t = 2`.
pub fn barenblatt_error(h: f64) -> Result<f64> {
    let cfg = barenblatt_config(h)?;
    let r = solve(&cfg)?;
    let b = Barenblatt::new(1, 2.0, 1.0)?;
    let exact = GridField::from_fn(cfg.geometry, |x| b.eval(x[0].abs(), 2.0))?;
    Ok(r.last().field.l1_distance(&exact)? / exact.mass())
}

/// Relative weak-form residual of the Barenblatt run against a smooth bump over `[1, 2]`.
pub fn barenblatt_residual(h: f64) -> Result<f64> {
    let r = solve(&barenblatt_config(h)?)?;
    let tf = TestFunction { space: SpaceProfile::Bump { center: [0.0, 0.0], radius: 1.5 }, t_a: 1.0, t_b: 2.0 };
    Ok(weak_residual(&r, &tf)?.relative)
}

/// `u′ = u²`, `u(0) = 1` on a periodic box: blow-up at `t = 1`.
pub fn ode_blowup_time() -> Result<f64> {
    let prm = ProblemParams::new(1, 1.0, 2.0)?;
    let g = Geometry::Box(BoxGrid::centered(1, 1.0, 0.1, Boundary::Periodic)?);
    let r = solve(&SolverConfig::new(prm, g, InitialSpec::Constant { value: 1.0 }, 2.0))?;
    Ok(match r.status {
        Status::BlowUp { t_star, .. } => t_star,
        other => other.time() + f64::INFINITY,
    })
}

/// `max |γ(ξ) − √ξ|` for linear diffusion over 10³ uniform and 10³ log-spaced nodes in `[0, 1]`.
pub fn gamma_sqrt_error() -> Result<f64> {
    let t = build_gamma(&ProblemParams::critical(1, 1.0)?)?;
    let mut worst = 0.0f64;
    for k in 0..=1000 {
        let x = k as f64 / 1000.0;
        let y = 10f64.powf(-12.0 * k as f64 / 1000.0);
        worst = worst.max((t.eval(x) - x.sqrt()).abs()).max((t.eval(y) - y.sqrt()).abs());
    }
    Ok(worst)
}

pub fn gamma_identity(n: usize, m: f64) -> Result<f64> {
    gamma_identity_check(&build_gamma(&ProblemParams::critical(n, m)?)?)
}

/// `|||·|||_{3/2, 1; 1}` of `|x|^{−2/3}` in one dimension (exactly 3).
pub fn morrey_oracle(h: f64) -> Result<f64> {
    let prm = ProblemParams::new(1, 2.0, 5.0)?;
    let f = mu_c_field(Geometry::Box(BoxGrid::centered(1, 2.0, h, Boundary::Neumann)?), 1.0, &prm)?;
    Ok(morrey_norm(&f, &NormSpec::morrey(1.5, 1.0, 1.0))?.value)
}

/// Base run for the scaling checks: a Gaussian under `(1, 2, 5)`.
pub fn scaling_config() -> Result<SolverConfig> {
    let prm = ProblemParams::new(1, 2.0, 5.0)?;
    let g = Geometry::Box(BoxGrid::centered(1, 4.0, 0.02, Boundary::Neumann)?);
    Ok(SolverConfig::new(prm, g, InitialSpec::Gaussian { amplitude: 1.0, width: 1.0 }, 0.5).with_uniform_snapshots(5))
}

/// The quick exact-answer checks (a few seconds in release builds).
pub fn run_validation() -> Result<Vec<Check>> {
    let e_fine = barenblatt_error(0.005)?;
    let e_coarse = barenblatt_error(0.01)?;
    let t_star = ode_blowup_time()?;
    Ok(vec![
        Check::at_most("barenblatt_l1_error", e_fine, 0.02),
        Check::at_least("barenblatt_refinement_factor", e_coarse / e_fine, 1.5),
        Check::at_most("barenblatt_weak_residual", barenblatt_residual(0.005)?, 0.03),
        Check::at_most("ode_blowup_time_error", (t_star - 1.0).abs(), 0.02),
        Check::at_most("gamma_sqrt_error", gamma_sqrt_error()?, 1e-8),
        Check::at_most("gamma_identity_1_2_4", gamma_identity(1, 2.0)?, 1e-6),
        Check::at_most("gamma_identity_2_2_3", gamma_identity(2, 2.0)?, 1e-6),
        Check::at_most("morrey_oracle_error", (morrey_oracle(1e-3)? - 3.0).abs() / 3.0, 0.05),
        Check::at_most("scaling_lockstep_deviation", run_scaling_check(&scaling_config()?, 2.0, true)?.deviation, 1e-10),
        Check::at_most("scaling_adaptive_deviation", run_scaling_check(&scaling_config()?, 2.0, false)?.deviation, 0.02),
    ])
}
