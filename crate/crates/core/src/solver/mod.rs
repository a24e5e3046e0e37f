//! Explicit finite-difference integrator for `∂ₜu = Δuᵐ + uᵖ`.
//!
//! Forward Euler in time with the second-order porous-medium stencil in
//! space. The step is limited by the diffusion bound `h²/(2N m ‖u‖∞^{m−1})`
//! and the reaction bound `1/(p ‖u‖∞^{p−1})`, each with its own safety factor,
//! which keeps the scheme monotone. Blow-up is declared once `‖u‖∞ ≥ U_max`.

mod barenblatt;
mod initial;
mod operator;
mod residual;

pub use barenblatt::{barenblatt, Barenblatt};
pub use initial::{regularize_initial, InitialSpec};
pub use operator::{
    discrete_porous_laplacian, laplacian_into, step, step_in_place, step_limits, StepBuffers, StepLimits, StepOutcome,
    NEGATIVE_TOLERANCE,
};
pub use residual::{weak_residual, SpaceProfile, TestFunction, WeakResidual};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Geometry, GridField};
use crate::norms::{self, NormKind, NormSpec};
use crate::params::{ProblemParams, Regime};

pub const DEFAULT_SAFETY: f64 = 0.5;
pub const DEFAULT_REACTION_SAFETY: f64 = 0.02;
pub const DEFAULT_U_MAX: f64 = 1e8;
pub const DEFAULT_DT_MIN: f64 = 1e-10;
/// Accepted steps before the early snapshot used for trace measurements.
pub const DEFAULT_EARLY_STEPS: usize = 10;

/// Exact step sequence replayed instead of adaptive stepping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedSchedule {
    pub dts: Vec<f64>,
    /// Step counts after which a snapshot is taken.
    pub snapshot_steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: ProblemParams,
    pub geometry: Geometry,
    pub initial: InitialSpec,
    /// `(i, j)` of the truncation `min(μ, i) + 1/j`.
    pub regularization: Option<(f64, u32)>,
    pub start_time: f64,
    pub horizon: f64,
    /// Safety factor on the diffusion step bound.
    pub safety: f64,
    /// Safety factor on the reaction step bound.
    pub reaction_safety: f64,
    pub u_max: f64,
    pub dt_min: f64,
    pub snapshot_times: Vec<f64>,
    pub early_snapshot_steps: Option<usize>,
    pub monitors: Vec<NormSpec>,
    /// `false` drops the `uᵖ` term (pure porous medium flow).
    pub source: bool,
    pub record_dt: bool,
    pub forced: Option<ForcedSchedule>,
}

impl SolverConfig {
    pub fn new(params: ProblemParams, geometry: Geometry, initial: InitialSpec, horizon: f64) -> Self {
        Self {
            params,
            geometry,
            initial,
            regularization: None,
            start_time: 0.0,
            horizon,
            safety: DEFAULT_SAFETY,
            reaction_safety: DEFAULT_REACTION_SAFETY,
            u_max: DEFAULT_U_MAX,
            dt_min: DEFAULT_DT_MIN,
            snapshot_times: Vec::new(),
            early_snapshot_steps: Some(DEFAULT_EARLY_STEPS),
            monitors: Vec::new(),
            source: true,
            record_dt: false,
            forced: None,
        }
    }

    /// `count` equally spaced snapshot times in `(start, horizon]`.
    pub fn with_uniform_snapshots(mut self, count: usize) -> Self {
        let span = self.horizon - self.start_time;
        self.snapshot_times = (1..=count).map(|k| self.start_time + span * k as f64 / count as f64).collect();
        self
    }

    /// Snapshot times `first·10^{k/per_decade}` up to the horizon (which is always included).
    pub fn with_log_snapshots(mut self, first: f64, per_decade: usize) -> Self {
        let mut times = Vec::new();
        if first > self.start_time && per_decade > 0 {
            let mut k = 0;
            loop {
                let t = first * 10f64.powf(k as f64 / per_decade as f64);
                if t >= self.horizon {
                    break;
                }
                times.push(t);
                k += 1;
            }
        }
        times.push(self.horizon);
        self.snapshot_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidParams(msg));
        if self.geometry.dim() != self.params.dim() {
            return bad(format!("grid dimension {} differs from N = {}", self.geometry.dim(), self.params.dim()));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad(format!("safety must lie in (0, 1), got {}", self.safety));
        }
        if !(self.reaction_safety > 0.0 && self.reaction_safety < 1.0) {
            return bad(format!("reaction safety must lie in (0, 1), got {}", self.reaction_safety));
        }
        if !(self.u_max > 0.0) || !(self.dt_min > 0.0) {
            return bad(format!("need U_max > 0 and dt_min > 0 (got {}, {})", self.u_max, self.dt_min));
        }
        if !(self.start_time.is_finite() && self.horizon > self.start_time && self.horizon.is_finite()) {
            return bad(format!("horizon {} must exceed the start time {}", self.horizon, self.start_time));
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite()) {
            return bad("snapshot times must be finite".into());
        }
        for m in &self.monitors {
            if let NormKind::OrliczEta { .. } = m.kind {
                if self.params.regime() != Regime::Critical {
                    return Err(LabError::RegimeMismatch("Orlicz-eta monitor needs p = p_m".into()));
                }
            }
        }
        if let Some((i, j)) = self.regularization {
            if !(i > 0.0) || j == 0 {
                return bad(format!("regularization needs i > 0 and j >= 1 (i={i}, j={j})"));
            }
        }
        if let Some(f) = &self.forced {
            if f.dts.iter().any(|d| !(*d > 0.0)) {
                return bad("forced steps must be positive".into());
            }
        }
        Ok(())
    }

    /// Initial data after the optional truncation.
    pub fn initial_field(&self) -> Result<GridField> {
        let f = self.initial.build(self.geometry, &self.params)?;
        match self.regularization {
            Some((i, j)) => regularize_initial(&f, i, j),
            None => Ok(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Status {
    Completed { t: f64 },
    /// `‖u‖∞` reached `U_max` at `t_star`; the previous step ended at `last_stable`.
    BlowUp { t_star: f64, last_stable: f64 },
    /// The stable step fell below `dt_min` at `t`.
    StepUnderflow { t: f64 },
}

impl Status {
    /// Blow-up and step collapse both count as blow-up evidence.
    pub fn is_blow_up(&self) -> bool {
        !matches!(self, Status::Completed { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Completed { .. } => "completed",
            Status::BlowUp { .. } => "blowup",
            Status::StepUnderflow { .. } => "step_underflow",
        }
    }

    pub fn time(&self) -> f64 {
        match *self {
            Status::Completed { t } | Status::StepUnderflow { t } => t,
            Status::BlowUp { t_star, .. } => t_star,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub step: usize,
    pub linf: f64,
    pub mass: f64,
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub field: GridField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub dt_smallest: f64,
    pub dt_largest: f64,
    pub clamped_cells: usize,
    pub reaction_limited: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: ProblemParams,
    pub status: Status,
    pub source: bool,
    pub monitor_labels: Vec<String>,
    pub series: Vec<SeriesPoint>,
    pub snapshots: Vec<Snapshot>,
    pub stats: StepStats,
    pub dt_history: Vec<f64>,
}

impl SolveReport {
    /// Snapshot whose time is closest to `t`.
    pub fn snapshot_near(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    pub fn initial(&self) -> &GridField {
        &self.snapshots[0].field
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("reports always hold the initial snapshot")
    }
}

/// Per-step record passed to observers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub linf: f64,
    pub mass: f64,
}

pub fn solve(config: &SolverConfig) -> Result<SolveReport> {
    run(config, None::<fn(&StepEvent)>)
}

struct Recorder<'a> {
    config: &'a SolverConfig,
    volumes: Vec<f64>,
    last_step: Option<usize>,
    series: Vec<SeriesPoint>,
    snapshots: Vec<Snapshot>,
}

impl Recorder<'_> {
    fn mass(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.volumes).map(|(a, b)| a * b).sum()
    }

    fn record(&mut self, t: f64, step: usize, u: &[f64]) -> Result<()> {
        if self.last_step == Some(step) {
            return Ok(());
        }
        let field = GridField::new(self.config.geometry, u.to_vec())?;
        let norms = self
            .config
            .monitors
            .iter()
            .map(|spec| norms::evaluate(&field, spec, Some(&self.config.params)).map(|v| v.value))
            .collect::<Result<Vec<_>>>()?;
        self.series.push(SeriesPoint { t, step, linf: field.linf(), mass: self.mass(u), norms });
        self.snapshots.push(Snapshot { t, step, field });
        self.last_step = Some(step);
        Ok(())
    }
}

/// Integrate, calling `observer` after every accepted step.
pub fn solve_with_observer<F: FnMut(&StepEvent)>(config: &SolverConfig, observer: F) -> Result<SolveReport> {
    run(config, Some(observer))
}

fn run<F: FnMut(&StepEvent)>(config: &SolverConfig, observer: Option<F>) -> Result<SolveReport> {
    let observing = observer.is_some();
    let mut observer = observer;
    let mut observer = move |e: &StepEvent| {
        if let Some(f) = observer.as_mut() {
            f(e)
        }
    };
    config.validate()?;
    let init = config.initial_field()?;
    if init.linf() >= config.u_max {
        return Err(LabError::InvalidParams(format!(
            "initial maximum {} is not below U_max = {}",
            init.linf(),
            config.u_max
        )));
    }
    let geometry = config.geometry;
    let params = config.params;
    let h = geometry.h();
    let volumes: Vec<f64> = (0..geometry.len()).map(|k| geometry.cell_volume(k)).collect();
    let mut targets: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > config.start_time && t < config.horizon)
        .collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    targets.push(config.horizon);

    let mut rec = Recorder { config, volumes, last_step: None, series: Vec::new(), snapshots: Vec::new() };
    let mut u = init.into_values();
    let mut buf = StepBuffers::default();
    let mut t = config.start_time;
    let mut step = 0usize;
    let mut next = 0usize;
    let mut stats = StepStats { steps: 0, dt_smallest: f64::INFINITY, dt_largest: 0.0, clamped_cells: 0, reaction_limited: 0 };
    let mut dt_history = Vec::new();
    rec.record(t, 0, &u)?;

    let mut linf = u.iter().fold(0.0f64, |a, &b| a.max(b));
    let status = loop {
        let (dt, hit) = match &config.forced {
            Some(f) => {
                if step == f.dts.len() {
                    break Status::Completed { t };
                }
                (f.dts[step], false)
            }
            None => {
                if next == targets.len() {
                    break Status::Completed { t };
                }
                let limits = step_limits(linf, h, &params, config.safety, config.reaction_safety, config.source);
                let raw = limits.dt();
                if raw < config.dt_min {
                    break Status::StepUnderflow { t };
                }
                if limits.reaction < limits.diffusion {
                    stats.reaction_limited += 1;
                }
                let target = targets[next];
                if t + raw >= target - 1e-13 * target.abs().max(1.0) {
                    (target - t, true)
                } else {
                    (raw, false)
                }
            }
        };
        let out = step_in_place(&geometry, &mut u, &mut buf, dt, &params, config.source, t)?;
        stats.clamped_cells += out.clamped;
        let t_prev = t;
        t = if hit { targets[next] } else { t + dt };
        step += 1;
        stats.steps = step;
        stats.dt_smallest = stats.dt_smallest.min(dt);
        stats.dt_largest = stats.dt_largest.max(dt);
        if config.record_dt {
            dt_history.push(dt);
        }
        let new_linf = out.linf;
        linf = new_linf;
        if observing {
            observer(&StepEvent { step, t, dt, linf: new_linf, mass: rec.mass(&u) });
        }

        if hit {
            rec.record(t, step, &u)?;
            next += 1;
        }
        if let Some(f) = &config.forced {
            if f.snapshot_steps.contains(&step) {
                rec.record(t, step, &u)?;
            }
        }
        if config.early_snapshot_steps == Some(step) {
            rec.record(t, step, &u)?;
        }
        if !new_linf.is_finite() || new_linf >= config.u_max {
            rec.record(t, step, &u)?;
            break Status::BlowUp { t_star: t, last_stable: t_prev };
        }
    };
    if let Status::StepUnderflow { .. } = status {
        rec.record(t, step, &u)?;
    }
    Ok(SolveReport {
        params,
        status,
        source: config.source,
        monitor_labels: config.monitors.iter().map(|m| m.label()).collect(),
        series: rec.series,
        snapshots: rec.snapshots,
        stats,
        dt_history,
    })
}
