//! Scaling covariance, Fujita probe, decay check and trace check.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::harness::config::TraceSettings;
use crate::necessary::{check_envelope, default_tau0, envelope_constant, measure_trace, trace_sensitivity, EnvelopeCheck, TraceEstimate};
use crate::norms::ladder;
use crate::params::Regime;
use crate::solver::{solve, ForcedSchedule, InitialSpec, SolveReport, SolverConfig, Status};
use crate::special::EnvelopeSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub lambda: f64,
    pub lockstep: bool,
    /// `max |v − λ^{2/(p−m)} u| / max |λ^{2/(p−m)} u|` over compared snapshots.
    pub deviation: f64,
    pub compared: usize,
}

/// Solve the base problem and the problem for `λ^{2/(p−m)} μ(λx)` on the grid
/// shrunk by `λ`, then compare `v(x, t)` with `λ^{2/(p−m)} u(λx, λ^{θ′}t)`.
///
/// `lockstep` replays the base step sequence scaled by `λ^{−θ′}`; otherwise the
/// scaled run picks its own steps and snapshots are matched in time.
pub fn run_scaling_check(base: &SolverConfig, lambda: f64, lockstep: bool) -> Result<ScalingCheck> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(LabError::InvalidParams(format!("scaling needs a finite lambda >= 1, got {lambda}")));
    }
    let octaves = lambda.log2();
    if (octaves - octaves.round()).abs() > 1e-12 {
        return Err(LabError::InvalidParams(format!("lambda = {lambda} is not a power of 2, so the grids do not align")));
    }
    if base.forced.is_some() {
        return Err(LabError::InvalidParams("the base run must use adaptive steps".into()));
    }
    let params = base.params;
    let a = params.scaling_exponent();
    let (_, theta_prime) = params.theta();
    let amp = lambda.powf(a);
    let time = lambda.powf(theta_prime);

    let mut base_cfg = base.clone();
    base_cfg.record_dt = lockstep;
    let u = solve(&base_cfg)?;

    let mu = base.initial_field()?;
    let geometry = base.geometry.rescaled(1.0 / lambda);
    let scaled_mu = crate::field::GridField::new(geometry, mu.values().iter().map(|v| amp * v).collect())?;
    let mut cfg = base.clone();
    cfg.geometry = geometry;
    cfg.initial = InitialSpec::Custom(scaled_mu);
    cfg.regularization = None;
    cfg.start_time = base.start_time / time;
    cfg.horizon = base.horizon / time;
    cfg.u_max = base.u_max * amp;
    cfg.dt_min = base.dt_min / time;
    cfg.monitors.clear();
    cfg.record_dt = false;
    if lockstep {
        cfg.forced = Some(ForcedSchedule {
            dts: u.dt_history.iter().map(|d| d / time).collect(),
            snapshot_steps: u.snapshots.iter().map(|s| s.step).collect(),
        });
        cfg.early_snapshot_steps = None;
        cfg.snapshot_times.clear();
    } else {
        cfg.snapshot_times = base.snapshot_times.iter().map(|t| t / time).collect();
    }
    let v = solve(&cfg)?;

    let mut deviation: f64 = 0.0;
    let mut compared = 0;
    for s in &u.snapshots {
        let other = if lockstep {
            v.snapshots.iter().find(|o| o.step == s.step)
        } else {
            v.snapshots.iter().find(|o| (o.t * time - s.t).abs() <= 1e-9 * s.t.abs().max(1.0))
        };
        let Some(o) = other else { continue };
        let top = s.field.linf() * amp;
        let diff = s.field.values().iter().zip(o.field.values()).fold(0.0f64, |d, (x, y)| d.max((amp * x - y).abs()));
        deviation = deviation.max(if top > 0.0 { diff / top } else { diff });
        compared += 1;
    }
    if compared == 0 {
        return Err(LabError::Numerical("no common snapshots between the base and scaled runs".into()));
    }
    Ok(ScalingCheck { lambda, lockstep, deviation, compared })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FujitaOutcome {
    /// Blew up before the horizon, as every nontrivial solution must.
    BlowUp,
    /// Reached the horizon; a finite run cannot certify global existence.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FujitaProbe {
    pub outcome: FujitaOutcome,
    pub report: SolveReport,
}

/// Run nontrivial data with `m < p ≤ p_m` and report whether it blew up.
pub fn run_fujita_probe(config: &SolverConfig) -> Result<FujitaProbe> {
    let params = config.params;
    if params.regime() == Regime::Supercritical {
        return Err(LabError::RegimeMismatch(format!("the Fujita probe needs p <= p_m ({params})")));
    }
    if !config.source {
        return Err(LabError::InvalidParams("the Fujita probe needs the source term".into()));
    }
    if config.initial_field()?.linf() == 0.0 {
        return Err(LabError::InvalidParams("the Fujita probe needs nontrivial data".into()));
    }
    let report = solve(config)?;
    let outcome = if report.status.is_blow_up() { FujitaOutcome::BlowUp } else { FujitaOutcome::Inconclusive };
    Ok(FujitaProbe { outcome, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Increasing,
    Flat,
    Decreasing,
}

impl Trend {
    pub fn flat_or_decreasing(&self) -> bool {
        !matches!(self, Trend::Increasing)
    }
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trend::Increasing => "increasing",
            Trend::Flat => "flat",
            Trend::Decreasing => "decreasing",
        })
    }
}

/// Log-log slopes inside this band count as flat.
pub const DECAY_FLAT_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    /// `sup t^{1/(p−1)} ‖u(t)‖∞` over the last decade of `t`.
    pub tail_sup: f64,
    /// Log-log slope of the same quantity over the tail; `None` if fewer than two positive samples.
    pub slope: Option<f64>,
    pub trend: Trend,
    pub samples: usize,
}

/// Tail behaviour of `t^{1/(p−1)} ‖u(t)‖∞` over `[t_end/10, t_end]`.
pub fn run_decay_check(report: &SolveReport) -> Result<DecayCheck> {
    let t_end = match report.status {
        Status::Completed { t } => t,
        other => return Err(LabError::InvalidParams(format!("decay check needs a completed run, got {}", other.label()))),
    };
    let params = report.params;
    if report.source && params.regime() != Regime::Supercritical {
        return Err(LabError::RegimeMismatch(format!("decay check with the source needs p > p_m ({params})")));
    }
    if !(t_end > 0.0) {
        return Err(LabError::InvalidParams("decay check needs a positive end time".into()));
    }
    let k = 1.0 / (params.p() - 1.0);
    let tail: Vec<(f64, f64)> = report
        .series
        .iter()
        .filter(|s| s.t >= t_end / 10.0 * (1.0 - 1e-12) && s.t > 0.0)
        .map(|s| (s.t, s.t.powf(k) * s.linf))
        .collect();
    let tail_sup = tail.iter().fold(0.0f64, |a, &(_, q)| a.max(q));
    let pts: Vec<(f64, f64)> = tail.iter().filter(|(_, q)| *q > 0.0).map(|&(t, q)| (t.ln(), q.ln())).collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    let trend = match slope {
        Some(s) if s > DECAY_FLAT_BAND => Trend::Increasing,
        Some(s) if s < -DECAY_FLAT_BAND => Trend::Decreasing,
        _ => Trend::Flat,
    };
    Ok(DecayCheck { tail_sup, slope, trend, samples: tail.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub status: Status,
    pub estimate: TraceEstimate,
    /// Slopes at `τ₀`, `2τ₀`, `4τ₀`.
    pub slopes: Vec<Option<f64>>,
    pub envelope: Option<EnvelopeSpec>,
    pub check: Option<EnvelopeCheck>,
}

/// Solve, measure the sup-ball masses at `τ₀` and compare with the envelope
/// (for `p ≥ p_m`; the check is skipped below `p_m`).
pub fn run_trace_check(config: &SolverConfig, settings: &TraceSettings) -> Result<TraceCheck> {
    let params = config.params;
    let envelope = match params.regime() {
        Regime::Subcritical => None,
        _ => Some(envelope_constant(&params, config.horizon)?.envelope),
    };
    let limit = config.horizon.powf(params.theta().0);
    let top = settings.sigma_max.unwrap_or(limit);
    let sigmas: Vec<f64> = ladder(&config.geometry, top, settings.ratio)?
        .into_iter()
        .filter(|s| settings.sigma_min.map_or(true, |lo| *s >= lo))
        .collect();
    let report = solve(config)?;
    let tau0 = settings.tau0.unwrap_or_else(|| default_tau0(&report));
    let estimate = measure_trace(&report, &sigmas, Some(tau0))?;
    let slopes = trace_sensitivity(&report, &sigmas, tau0)?.into_iter().map(|e| e.slope).collect();
    let check = envelope.as_ref().map(|e| check_envelope(&estimate, e)).transpose()?;
    Ok(TraceCheck { status: report.status, estimate, slopes, envelope, check })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Boundary, BoxGrid, Geometry};
    use crate::params::ProblemParams;

    fn line(half: f64, h: f64) -> Geometry {
        Geometry::Box(BoxGrid::centered(1, half, h, Boundary::Neumann).unwrap())
    }

    fn bump(p: f64, amplitude: f64, horizon: f64) -> SolverConfig {
        let prm = ProblemParams::new(1, 2.0, p).unwrap();
        SolverConfig::new(prm, line(4.0, 0.05), InitialSpec::Gaussian { amplitude, width: 1.0 }, horizon)
            .with_uniform_snapshots(4)
    }

    #[test]
    fn scaling_identity_and_lockstep() {
        let cfg = bump(5.0, 1.0, 0.5);
        let one = run_scaling_check(&cfg, 1.0, false).unwrap();
        assert_eq!(one.deviation, 0.0);
        let lock = run_scaling_check(&cfg, 2.0, true).unwrap();
        assert!(lock.deviation <= 1e-10 && lock.compared >= 5, "{lock:?}");
        let free = run_scaling_check(&cfg, 2.0, false).unwrap();
        assert!(free.deviation <= 0.02, "{free:?}");
        assert!(run_scaling_check(&cfg, 3.0, true).is_err());
    }

    #[test]
    fn fujita_guards() {
        assert!(matches!(run_fujita_probe(&bump(5.0, 1.0, 1.0)), Err(LabError::RegimeMismatch(_))));
        assert!(run_fujita_probe(&bump(3.0, 0.0, 1.0)).is_err());
        let short = run_fujita_probe(&bump(3.0, 0.01, 0.1)).unwrap();
        assert_eq!(short.outcome, FujitaOutcome::Inconclusive);
    }

    #[test]
    fn decay_of_zero_and_pure_diffusion() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let zero = SolverConfig::new(prm, line(2.0, 0.1), InitialSpec::Constant { value: 0.0 }, 10.0).with_log_snapshots(0.1, 5);
        let d = run_decay_check(&solve(&zero).unwrap()).unwrap();
        assert_eq!(d.tail_sup, 0.0);
        assert_eq!(d.trend, Trend::Flat);

        // Barenblatt: ‖u‖∞ ~ t^{−1/3} beats t^{1/4}
        let mut cfg = SolverConfig::new(prm, line(8.0, 0.05), InitialSpec::Barenblatt { mass: 1.0, t0: 1.0 }, 20.0);
        cfg.start_time = 1.0;
        cfg.source = false;
        let cfg = cfg.with_log_snapshots(1.5, 10);
        let d = run_decay_check(&solve(&cfg).unwrap()).unwrap();
        let slope = d.slope.unwrap();
        assert!((slope - (0.25 - 1.0 / 3.0)).abs() < 0.02, "{slope}");
        assert_eq!(d.trend, Trend::Decreasing);
    }

    #[test]
    fn decay_rejects_blow_up() {
        let prm = ProblemParams::new(1, 1.0, 2.0).unwrap();
        let g = Geometry::Box(BoxGrid::centered(1, 1.0, 0.1, Boundary::Periodic).unwrap());
        let r = solve(&SolverConfig::new(prm, g, InitialSpec::Constant { value: 1.0 }, 2.0)).unwrap();
        assert!(run_decay_check(&r).is_err());
    }

    #[test]
    fn trace_check_runs() {
        let prm = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let mut cfg = SolverConfig::new(prm, line(4.0, 0.01), InitialSpec::MuC { c: 0.1 }, 0.01);
        cfg.regularization = Some((1e3, 100));
        let t = run_trace_check(&cfg, &TraceSettings::default()).unwrap();
        assert_eq!(t.slopes.len(), 3);
        let c = t.check.unwrap();
        assert!(c.pass && c.checked > 4);
    }
}
