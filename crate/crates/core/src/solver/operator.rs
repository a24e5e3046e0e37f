//! Discrete porous-medium operator, stable step size and the explicit Euler step.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::field::{Boundary, BoxGrid, Geometry, GridField, RadialGrid};
use crate::numerics::Power;
use crate::params::ProblemParams;

/// Added to rate bounds so vanishing rates give a huge but finite step.
const TINY: f64 = 1e-300;
/// Cells above which the stencil is applied in parallel.
const PARALLEL_CELLS: usize = 16_384;
/// Negative values down to this fraction of `‖u‖∞` are treated as round-off.
pub const NEGATIVE_TOLERANCE: f64 = 1e-14;

/// Second-order Laplacian of `v` (values of `uᵐ`) on the grid, written into `out`.
pub fn laplacian_into(geometry: &Geometry, v: &[f64], out: &mut [f64]) {
    match geometry {
        Geometry::Box(g) if g.dim == 1 => lap_1d(g, v, out),
        Geometry::Box(g) => lap_2d(g, v, out),
        Geometry::Radial(g) => lap_radial(g, v, out),
    }
}

fn lap_1d(g: &BoxGrid, v: &[f64], out: &mut [f64]) {
    let n = g.cells[0];
    let ih2 = 1.0 / (g.h * g.h);
    if n == 1 {
        out[0] = 0.0;
        return;
    }
    let (first_left, last_right) = match g.boundary {
        Boundary::Neumann => (v[0], v[n - 1]),
        Boundary::Periodic => (v[n - 1], v[0]),
    };
    let body = |k: usize| {
        let left = if k == 0 { first_left } else { v[k - 1] };
        let right = if k + 1 == n { last_right } else { v[k + 1] };
        (right - 2.0 * v[k] + left) * ih2
    };
    if n >= PARALLEL_CELLS {
        out.par_iter_mut().enumerate().for_each(|(k, o)| *o = body(k));
    } else {
        out.iter_mut().enumerate().for_each(|(k, o)| *o = body(k));
    }
}

fn lap_2d(g: &BoxGrid, v: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.cells[0], g.cells[1]);
    let ih2 = 1.0 / (g.h * g.h);
    let periodic = g.boundary == Boundary::Periodic;
    let row = |j: usize, orow: &mut [f64]| {
        let up = if j + 1 < ny { j + 1 } else if periodic { 0 } else { j };
        let down = if j > 0 { j - 1 } else if periodic { ny - 1 } else { j };
        for i in 0..nx {
            let left = if i > 0 { i - 1 } else if periodic { nx - 1 } else { i };
            let right = if i + 1 < nx { i + 1 } else if periodic { 0 } else { i };
            let c = v[j * nx + i];
            orow[i] = (v[j * nx + left] + v[j * nx + right] + v[down * nx + i] + v[up * nx + i] - 4.0 * c) * ih2;
        }
    };
    if nx * ny >= PARALLEL_CELLS {
        out.par_chunks_mut(nx).enumerate().for_each(|(j, r)| row(j, r));
    } else {
        out.chunks_mut(nx).enumerate().for_each(|(j, r)| row(j, r));
    }
}

/// Conservative radial stencil: face areas `∝ k^{N−1}` over shell volumes `∝ (k+1)^N − k^N`.
fn lap_radial(g: &RadialGrid, v: &[f64], out: &mut [f64]) {
    let n = g.cells;
    let d = g.dim as i32;
    let ih2 = 1.0 / (g.h * g.h);
    for k in 0..n {
        let (kf, k1) = (k as f64, (k + 1) as f64);
        let vol = k1.powi(d) - kf.powi(d);
        let outer = if k + 1 < n { k1.powi(d - 1) * (v[k + 1] - v[k]) } else { 0.0 };
        let inner = if k > 0 { kf.powi(d - 1) * (v[k] - v[k - 1]) } else { 0.0 };
        out[k] = g.dim as f64 * (outer - inner) / vol * ih2;
    }
}

/// `Δ_h uᵐ` as a field of the same geometry (values may be negative, so returned raw).
pub fn discrete_porous_laplacian(u: &GridField, m: f64) -> Vec<f64> {
    let pw = Power::new(m);
    let v: Vec<f64> = u.values().iter().map(|&x| pw.apply(x)).collect();
    let mut out = vec![0.0; v.len()];
    laplacian_into(u.geometry(), &v, &mut out);
    out
}

/// Step-size limits for the current state, before clamping to output times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLimits {
    pub diffusion: f64,
    pub reaction: f64,
}

impl StepLimits {
    pub fn dt(&self) -> f64 {
        self.diffusion.min(self.reaction)
    }
}

/// `safety·h²/(2N m ‖u‖∞^{m−1})` and `reaction_safety/(p ‖u‖∞^{p−1})`.
pub fn step_limits(linf: f64, h: f64, params: &ProblemParams, safety: f64, reaction_safety: f64, source: bool) -> StepLimits {
    let n = params.dim() as f64;
    let (m, p) = (params.m(), params.p());
    let diffusion = safety * h * h / (2.0 * n * m * Power::new(m - 1.0).apply(linf) + TINY);
    let reaction = if source { reaction_safety / (p * linf.powf(p - 1.0) + TINY) } else { f64::INFINITY };
    StepLimits { diffusion, reaction }
}

/// Reusable buffers for [`step_in_place`].
#[derive(Debug, Clone, Default)]
pub struct StepBuffers {
    v: Vec<f64>,
    lap: Vec<f64>,
}

/// `u ← u + Δt(lap + r(u))` with four-lane max/min reductions.
#[inline(always)]
fn update_pass<R: Fn(f64) -> f64>(u: &mut [f64], lap: &[f64], dt: f64, r: R) -> ([f64; 4], [f64; 4]) {
    let mut hi = [0.0f64; 4];
    let mut lo = [0.0f64; 4];
    let mut update = |x: &mut f64, l: f64, lane: usize| {
        let next = *x + dt * (l + r(*x));
        *x = next;
        hi[lane] = if next > hi[lane] { next } else { hi[lane] };
        lo[lane] = if next < lo[lane] { next } else { lo[lane] };
    };
    let mut uc = u.chunks_exact_mut(4);
    let mut lc = lap.chunks_exact(4);
    for (xs, ls) in (&mut uc).zip(&mut lc) {
        for k in 0..4 {
            update(&mut xs[k], ls[k], k);
        }
    }
    for (x, &l) in uc.into_remainder().iter_mut().zip(lc.remainder()) {
        update(x, l, 0);
    }
    (hi, lo)
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Cells whose round-off negatives were clamped to zero.
    pub clamped: usize,
    /// Maximum after the update.
    pub linf: f64,
}

/// One explicit Euler step `u + Δt(Δ_h uᵐ + uᵖ)`.
///
/// Negatives within the round-off tolerance are clamped to zero; larger ones are an error.
pub fn step_in_place(
    geometry: &Geometry,
    u: &mut [f64],
    buf: &mut StepBuffers,
    dt: f64,
    params: &ProblemParams,
    source: bool,
    t: f64,
) -> Result<StepOutcome> {
    let pm = Power::new(params.m());
    let pp = Power::new(params.p());
    buf.v.clear();
    match pm.integer() {
        Some(1) => buf.v.extend_from_slice(u),
        Some(2) => buf.v.extend(u.iter().map(|&x| x * x)),
        _ => buf.v.extend(u.iter().map(|&x| pm.apply(x))),
    }
    buf.lap.resize(u.len(), 0.0);
    laplacian_into(geometry, &buf.v, &mut buf.lap);
    let (hi, lo) = match (source, pp.integer()) {
        (false, _) => update_pass(u, &buf.lap, dt, |_| 0.0),
        (true, Some(2)) => update_pass(u, &buf.lap, dt, |x| x * x),
        (true, Some(3)) => update_pass(u, &buf.lap, dt, |x| x * x * x),
        (true, Some(4)) => update_pass(u, &buf.lap, dt, |x| (x * x) * (x * x)),
        (true, Some(5)) => update_pass(u, &buf.lap, dt, |x| (x * x) * (x * x) * x),
        (true, _) => update_pass(u, &buf.lap, dt, |x| pp.apply(x)),
    };
    let mut top = hi.iter().fold(0.0f64, |a, &b| a.max(b));
    let bottom = lo.iter().fold(0.0f64, |a, &b| a.min(b));
    let mut clamped = 0usize;
    // NaN never enters the lane reductions
    if u.iter().any(|x| x.is_nan()) {
        return Err(LabError::Instability { t, message: "NaN produced by the update".into() });
    }
    // negatives are judged against the post-step maximum
    let linf = top;
    let floor = -NEGATIVE_TOLERANCE * linf;
    if bottom < floor {
        return Err(LabError::Instability {
            t,
            message: format!("negative value {bottom:e} beyond round-off (max {linf:e}); step size too large"),
        });
    }
    if bottom < 0.0 {
        for x in u.iter_mut().filter(|x| **x < 0.0) {
            *x = 0.0;
            clamped += 1;
        }
    }
    if !top.is_finite() {
        top = f64::INFINITY;
    }
    Ok(StepOutcome { clamped, linf: top })
}

/// Field-level wrapper of [`step_in_place`].
pub fn step(u: &GridField, dt: f64, params: &ProblemParams, source: bool) -> Result<GridField> {
    let mut values = u.values().to_vec();
    step_in_place(u.geometry(), &mut values, &mut StepBuffers::default(), dt, params, source, 0.0)?;
    GridField::new(*u.geometry(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn periodic_line(n: usize, len: f64) -> Geometry {
        Geometry::Box(BoxGrid::new(1, [n, 1], [0.0, 0.0], len / n as f64, Boundary::Periodic).unwrap())
    }

    #[test]
    fn constant_has_zero_laplacian() {
        for g in [
            periodic_line(32, 1.0),
            Geometry::Box(BoxGrid::centered(2, 1.0, 0.1, Boundary::Neumann).unwrap()),
            Geometry::Radial(RadialGrid::new(3, 1.0, 0.05).unwrap()),
        ] {
            let f = GridField::constant(g, 2.5).unwrap();
            assert!(discrete_porous_laplacian(&f, 2.0).iter().all(|x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn sine_converges_at_second_order() {
        let k = 3.0;
        let err = |n: usize| {
            let g = periodic_line(n, 2.0 * PI);
            // shift keeps the field nonnegative; m = 1 makes the operator linear
            let f = GridField::from_fn(g, |x| 2.0 + (k * x[0]).sin()).unwrap();
            let lap = discrete_porous_laplacian(&f, 1.0);
            (0..n).map(|i| (lap[i] + k * k * (k * g.point(i)[0]).sin()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn radial_quadratic_is_exact() {
        // v = r² in N = 3: (1/r²)(r²·2r)′ = 6 at every interior node
        let g = RadialGrid::new(3, 1.0, 0.01).unwrap();
        let v: Vec<f64> = (0..g.cells).map(|k| g.radius(k).powi(2)).collect();
        let mut out = vec![0.0; g.cells];
        laplacian_into(&Geometry::Radial(g), &v, &mut out);
        for x in &out[..g.cells - 1] {
            assert!((x - 6.0).abs() < 1e-9, "{x}");
        }
    }

    #[test]
    fn radial_operator_conserves_mass() {
        let g = RadialGrid::new(2, 2.0, 0.02).unwrap();
        let v: Vec<f64> = (0..g.cells).map(|k| (-g.radius(k).powi(2)).exp()).collect();
        let mut out = vec![0.0; g.cells];
        laplacian_into(&Geometry::Radial(g), &v, &mut out);
        let flux: f64 = out.iter().enumerate().map(|(k, x)| x * g.shell_volume(k)).sum();
        assert!(flux.abs() < 1e-12);
    }

    #[test]
    fn step_limit_examples() {
        let p1 = ProblemParams::new(1, 1.0, 2.0).unwrap();
        let l = step_limits(1.0, 0.1, &p1, 0.5, 0.5, true);
        assert!((l.diffusion - 0.5 * 0.01 / 2.0).abs() < 1e-15);
        let p2 = ProblemParams::new(1, 2.0, 5.0).unwrap();
        let a = step_limits(1.0, 0.1, &p2, 0.5, 0.02, true).diffusion;
        let b = step_limits(2.0, 0.1, &p2, 0.5, 0.02, true).diffusion;
        assert!((a / b - 2.0).abs() < 1e-12);
        let z = step_limits(0.0, 0.1, &p2, 0.5, 0.02, true);
        assert!(z.dt() > 1e250);
    }

    #[test]
    fn step_of_constant_is_ode_step() {
        let prm = ProblemParams::new(1, 2.0, 3.0).unwrap();
        let f = GridField::constant(periodic_line(16, 1.0), 1.5).unwrap();
        let g = step(&f, 0.01, &prm, true).unwrap();
        for v in g.values() {
            assert!((v - (1.5 + 0.01 * 1.5f64.powi(3))).abs() < 1e-14);
        }
        let z = step(&GridField::zeros(periodic_line(16, 1.0)), 0.1, &prm, true).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn euler_local_error_is_second_order() {
        let prm = ProblemParams::new(1, 1.0, 2.0).unwrap();
        let c0 = 1.0f64;
        let exact = |t: f64| (c0.powf(1.0 - prm.p()) - (prm.p() - 1.0) * t).powf(-1.0 / (prm.p() - 1.0));
        let err = |dt: f64| {
            let f = GridField::constant(periodic_line(4, 1.0), c0).unwrap();
            (step(&f, dt, &prm, true).unwrap().values()[0] - exact(dt)).abs()
        };
        let order = (err(1e-2) / err(5e-3)).log2();
        assert!((order - 2.0).abs() < 0.05, "{order}");
    }

    #[test]
    fn oversized_step_is_instability() {
        let prm = ProblemParams::new(1, 1.0, 2.0).unwrap();
        let g = Geometry::Box(BoxGrid::centered(1, 1.0, 0.1, Boundary::Neumann).unwrap());
        let f = GridField::from_fn(g, |x| if x[0].abs() < 0.01 { 1.0 } else { 0.0 }).unwrap();
        assert!(matches!(step(&f, 0.1, &prm, false), Err(LabError::Instability { .. })));
    }
}
