//! Bisection in `c` for the existence / blow-up threshold of `μ_c` data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Geometry;
use crate::harness::refine;
use crate::necessary::{check_envelope, envelope_constant, measure_trace, EnvelopeCheck};
use crate::norms::{evaluate, ladder, NormSpec, NormValue};
use crate::params::{ProblemParams, Regime};
use crate::solver::{solve, InitialSpec, SolverConfig, Status};
use crate::special::{mu_c_field, EnvelopeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomySettings {
    pub c_lo: f64,
    pub c_hi: f64,
    pub steps: usize,
    /// `i = i_factor · max μ_c` on the grid.
    pub i_factor: f64,
    pub j: u32,
    /// Seeds that fail are moved outward by this factor.
    pub widen_factor: f64,
    pub max_widen: usize,
    /// Extra runs at `c_exist/4, c_exist/2, 2c_blow, 4c_blow`.
    pub validation: bool,
    /// Check each completed run's early trace against the envelope.
    pub envelope_check: bool,
}

impl Default for DichotomySettings {
    fn default() -> Self {
        Self {
            c_lo: 0.01,
            c_hi: 1000.0,
            steps: 14,
            i_factor: 10.0,
            j: 100,
            widen_factor: 10.0,
            max_widen: 4,
            validation: true,
            envelope_check: false,
        }
    }
}

impl DichotomySettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_lo > 0.0 && self.c_hi > self.c_lo && self.c_hi.is_finite()) {
            return Err(LabError::InvalidParams(format!(
                "bisection is geometric and needs 0 < c_lo < c_hi (got {}, {})",
                self.c_lo, self.c_hi
            )));
        }
        if !(self.i_factor > 0.0) || self.j == 0 {
            return Err(LabError::InvalidParams("regularization needs i_factor > 0 and j >= 1".into()));
        }
        if !(self.widen_factor > 1.0) {
            return Err(LabError::InvalidParams("widen_factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuFamily {
    /// `c|x|^{−2/(p−m)}`.
    Power,
    /// Logarithmically corrected profile at `p = p_m`.
    Critical,
}

impl std::fmt::Display for MuFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MuFamily::Power => "mu_c_power",
            MuFamily::Critical => "mu_c_critical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub c: f64,
    pub status: Status,
    pub steps: usize,
    /// Truncation level used for this run.
    pub i: f64,
    pub envelope: Option<EnvelopeCheck>,
}

impl Trial {
    pub fn blow_up(&self) -> bool {
        self.status.is_blow_up()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyMeta {
    pub geometry: Geometry,
    pub horizon: f64,
    pub steps: usize,
    pub i_factor: f64,
    pub j: u32,
    /// Seeds after widening.
    pub c_lo: f64,
    pub c_hi: f64,
    /// Widening moves applied to the seeds.
    pub widened: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyResult {
    pub params: ProblemParams,
    pub family: MuFamily,
    pub c_exist: f64,
    pub c_blow: f64,
    /// Every run, sorted by `c`.
    pub trials: Vec<Trial>,
    pub meta: DichotomyMeta,
    /// Scale-invariant norm of the untruncated data at `c_exist` and `c_blow`.
    pub bracket_norms: Option<(String, NormValue, NormValue)>,
    pub envelope: Option<EnvelopeSpec>,
}

impl DichotomyResult {
    /// Geometric midpoint of the bracket.
    pub fn midpoint(&self) -> f64 {
        (self.c_exist * self.c_blow).sqrt()
    }

    pub fn ratio(&self) -> f64 {
        self.c_blow / self.c_exist
    }
}

/// Truncation level `i_factor · max μ_c`, capped at `U_max/10`.
pub fn truncation_level(template: &SolverConfig, c: f64, i_factor: f64) -> Result<f64> {
    let mu = mu_c_field(template.geometry, c, &template.params)?;
    let top = mu.linf();
    let i = if top > 0.0 { i_factor * top } else { 1.0 };
    Ok(i.min(template.u_max / 10.0))
}

fn trial_config(template: &SolverConfig, c: f64, settings: &DichotomySettings) -> Result<(SolverConfig, f64)> {
    let i = truncation_level(template, c, settings.i_factor)?;
    let mut cfg = template.clone();
    cfg.initial = InitialSpec::MuC { c };
    cfg.regularization = Some((i, settings.j));
    Ok((cfg, i))
}

/// One regularised `μ_c` run; the envelope is checked when given and the run completes.
pub fn run_trial(
    template: &SolverConfig,
    c: f64,
    settings: &DichotomySettings,
    envelope: Option<(&EnvelopeSpec, &[f64])>,
) -> Result<Trial> {
    let (cfg, i) = trial_config(template, c, settings)?;
    let report = solve(&cfg)?;
    let envelope = match (envelope, report.status) {
        (Some((spec, sigmas)), Status::Completed { .. }) => Some(check_envelope(&measure_trace(&report, sigmas, None)?, spec)?),
        _ => None,
    };
    Ok(Trial { c, status: report.status, steps: report.stats.steps, i, envelope })
}

fn describe(trials: &[Trial]) -> String {
    trials
        .iter()
        .map(|t| format!("c={:e}:{}", t.c, t.status.label()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn check_monotone(trials: &[Trial]) -> Result<()> {
    let first_blow = trials.iter().position(|t| t.blow_up());
    if let Some(k) = first_blow {
        if trials[k..].iter().any(|t| !t.blow_up()) {
            return Err(LabError::NonMonotone(describe(trials)));
        }
    }
    Ok(())
}

struct Runner<'a> {
    template: &'a SolverConfig,
    settings: &'a DichotomySettings,
    envelope: Option<(EnvelopeSpec, Vec<f64>)>,
    trials: Vec<Trial>,
}

impl Runner<'_> {
    fn run_many(&mut self, cs: &[f64]) -> Result<Vec<bool>> {
        let env = self.envelope.as_ref().map(|(s, l)| (s, l.as_slice()));
        let fresh: Vec<f64> = cs.iter().copied().filter(|c| !self.trials.iter().any(|t| t.c == *c)).collect();
        let done = fresh
            .par_iter()
            .map(|&c| run_trial(self.template, c, self.settings, env))
            .collect::<Result<Vec<Trial>>>()?;
        self.trials.extend(done);
        Ok(cs.iter().map(|c| self.trials.iter().find(|t| t.c == *c).is_some_and(Trial::blow_up)).collect())
    }
}

/// Bisect on the blow-up outcome between `c_lo` (existence) and `c_hi` (blow-up).
///
/// Midpoints are geometric, so the bracket width in `log c` halves exactly at each step.
pub fn run_dichotomy(template: &SolverConfig, settings: &DichotomySettings) -> Result<DichotomyResult> {
    settings.validate()?;
    let params = template.params;
    let family = match params.regime() {
        Regime::Subcritical => {
            return Err(LabError::RegimeMismatch(format!("the dichotomy needs p >= p_m ({params})")));
        }
        Regime::Critical => MuFamily::Critical,
        Regime::Supercritical => MuFamily::Power,
    };
    let envelope = if settings.envelope_check {
        let spec = envelope_constant(&params, template.horizon)?.envelope;
        let sigmas = ladder(&template.geometry, spec.radius_limit(), std::f64::consts::SQRT_2)?;
        Some((spec, sigmas))
    } else {
        None
    };
    let mut runner = Runner { template, settings, envelope, trials: Vec::new() };

    let (mut lo, mut hi) = (settings.c_lo, settings.c_hi);
    let mut widened = 0;
    loop {
        let out = runner.run_many(&[lo, hi])?;
        match (out[0], out[1]) {
            (false, true) => break,
            (true, true) if widened < settings.max_widen => {
                hi = lo;
                lo /= settings.widen_factor;
            }
            (false, false) if widened < settings.max_widen => {
                lo = hi;
                hi *= settings.widen_factor;
            }
            (true, false) => {
                runner.trials.sort_by(|a, b| a.c.total_cmp(&b.c));
                return Err(LabError::NonMonotone(describe(&runner.trials)));
            }
            _ => {
                return Err(LabError::Numerical(format!(
                    "no existence/blow-up bracket after {widened} widenings: {}",
                    describe(&runner.trials)
                )))
            }
        }
        widened += 1;
    }
    let (seed_lo, seed_hi) = (lo, hi);
    for _ in 0..settings.steps {
        let mid = (lo * hi).sqrt();
        if runner.run_many(&[mid])?[0] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if settings.validation {
        runner.run_many(&[lo / 4.0, lo / 2.0, hi * 2.0, hi * 4.0])?;
    }
    let mut trials = runner.trials;
    trials.sort_by(|a, b| a.c.total_cmp(&b.c));
    check_monotone(&trials)?;
    let bracket_norms = bracket_norms(template, lo, hi)?;
    Ok(DichotomyResult {
        params,
        family,
        c_exist: lo,
        c_blow: hi,
        trials,
        meta: DichotomyMeta {
            geometry: template.geometry,
            horizon: template.horizon,
            steps: settings.steps,
            i_factor: settings.i_factor,
            j: settings.j,
            c_lo: seed_lo,
            c_hi: seed_hi,
            widened,
        },
        bracket_norms,
        envelope: runner.envelope.map(|(s, _)| s),
    })
}

/// The scale-invariant functional of the threshold problem: Orlicz–η at `p = p_m`,
/// Morrey `|||·|||_{q,β;T^θ}` with `q = N(p−m)/2`, `β = (1+q)/2` above it.
fn bracket_norms(template: &SolverConfig, lo: f64, hi: f64) -> Result<Option<(String, NormValue, NormValue)>> {
    let params = template.params;
    let spec = match params.regime() {
        Regime::Critical => NormSpec::orlicz_eta(1.0, template.horizon)?,
        _ => {
            let q = params.morrey_index();
            if q <= 1.0 {
                return Ok(None);
            }
            NormSpec::morrey(q, (1.0 + q) / 2.0, template.horizon.powf(params.theta().0))
        }
    };
    let at = |c| evaluate(&mu_c_field(template.geometry, c, &params)?, &spec, Some(&params));
    Ok(Some((spec.label(), at(lo)?, at(hi)?)))
}

/// Threshold shifts under `h → h/2` and `(i, j) → (2i, 2j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub base_mid: f64,
    pub refined: DichotomyResult,
    pub regularized: DichotomyResult,
    /// `|mid′ − mid| / mid`.
    pub shift_h: f64,
    pub shift_ij: f64,
}

/// Re-bisect around the base midpoint (bracket `mid·[1/1.25, 1.25]`, 9 steps) on
/// the refined grid and with doubled regularization; both run concurrently.
pub fn dichotomy_sensitivity(template: &SolverConfig, settings: &DichotomySettings, base: &DichotomyResult) -> Result<Sensitivity> {
    let mid = base.midpoint();
    let narrow = DichotomySettings {
        c_lo: mid / 1.25,
        c_hi: mid * 1.25,
        steps: 9,
        widen_factor: 1.25 * 1.25,
        max_widen: 8,
        validation: false,
        envelope_check: false,
        ..settings.clone()
    };
    let mut fine = template.clone();
    fine.geometry = refine(&template.geometry)?;
    let doubled = DichotomySettings { i_factor: 2.0 * settings.i_factor, j: 2 * settings.j, ..narrow.clone() };
    let (refined, regularized) = rayon::join(|| run_dichotomy(&fine, &narrow), || run_dichotomy(template, &doubled));
    let (refined, regularized) = (refined?, regularized?);
    let shift = |r: &DichotomyResult| (r.midpoint() - mid).abs() / mid;
    Ok(Sensitivity { base_mid: mid, shift_h: shift(&refined), shift_ij: shift(&regularized), refined, regularized })
}
