//! Uniformly local functionals on grid fields: ball averages, sup-ball
//! masses, Morrey and Orlicz–Morrey norms and the doubling constant.
//!
//! Balls contain the cells whose centres lie strictly inside them. Masses are
//! normalised by the discrete volume of the unclipped ball, so a constant
//! field `c` has mass exactly `c·ω_N σ^N`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Boundary, BoxGrid, Geometry, GridField, RadialGrid};
use crate::numerics::{unit_ball_volume, Power};
use crate::params::{ProblemParams, Regime};
use crate::special::{eta, PsiSpec};

/// Relative shrink of the ball used in the centre-inclusion test.
const INCLUSION_SLACK: f64 = 1e-10;
/// Default ladder ratio `2^{1/4}`.
pub const DEFAULT_LADDER_RATIO: f64 = 1.189_207_115_002_721;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    /// `sup σ^{N/q} (avg |f|^α)^{1/α}`.
    Morrey { q: f64, alpha: f64 },
    /// `sup η(σ/T^θ) Ψ⁻¹(avg Ψ(T^{1/(p−1)} f))` over `σ ≤ T^θ`.
    OrliczEta { psi: PsiSpec, horizon: f64 },
    /// `sup ∫_{B(z,σ)} f` over centres and radii.
    SupBallMass,
    Linfty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenterSet {
    AllCells,
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kind: NormKind,
    /// Largest radius; `f64::INFINITY` means the domain size.
    pub cap: f64,
    pub centers: CenterSet,
    pub ladder_ratio: f64,
}

impl NormSpec {
    pub fn new(kind: NormKind, cap: f64) -> Self {
        Self { kind, cap, centers: CenterSet::AllCells, ladder_ratio: DEFAULT_LADDER_RATIO }
    }

    pub fn morrey(q: f64, alpha: f64, cap: f64) -> Self {
        Self::new(NormKind::Morrey { q, alpha }, cap)
    }

    pub fn orlicz_eta(alpha: f64, horizon: f64) -> Result<Self> {
        Ok(Self::new(NormKind::OrliczEta { psi: PsiSpec::new(alpha)?, horizon }, f64::INFINITY))
    }

    pub fn with_centers(mut self, centers: CenterSet) -> Self {
        self.centers = centers;
        self
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ladder_ratio = ratio;
        self
    }

    pub fn label(&self) -> String {
        match self.kind {
            NormKind::Morrey { q, alpha } => format!("morrey(q={q},alpha={alpha},cap={})", self.cap),
            NormKind::OrliczEta { psi, horizon } => format!("orlicz_eta(alpha={},T={horizon})", psi.alpha),
            NormKind::SupBallMass => format!("sup_ball_mass(cap={})", self.cap),
            NormKind::Linfty => "linf".to_string(),
        }
    }
}

/// Evaluated functional with the maximising centre and radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub center: [f64; 2],
    pub sigma: f64,
    /// Radii actually scanned.
    pub ladder: Vec<f64>,
    /// The maximising ball was clipped by a Neumann boundary.
    pub clipped: bool,
}

/// Per-radius maxima over the centre set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSup {
    pub sigma: f64,
    /// Ball mass rescaled by `ω_N σ^N / |discrete ball|`.
    pub mass: f64,
    /// Unscaled sum over the cells whose centres lie in the ball; nondecreasing in `σ`.
    pub raw_mass: f64,
    pub mass_center: usize,
    pub avg: f64,
    pub avg_center: usize,
    pub clipped: bool,
}

/// Largest radius worth scanning on this geometry.
pub fn domain_radius(geometry: &Geometry) -> f64 {
    match geometry {
        Geometry::Box(g) => {
            let [a, b] = g.extent();
            a.hypot(b)
        }
        Geometry::Radial(g) => g.r_max(),
    }
}

fn smallest_radius(geometry: &Geometry) -> f64 {
    match geometry {
        Geometry::Box(g) => 0.5 * g.h,
        Geometry::Radial(g) => g.h,
    }
}

/// Geometric radius ladder from `h` up to `cap`.
///
/// Radii are snapped to `(k+½)h` on box grids and `kh` on radial grids, where
/// the discrete ball of a 1D or radial field has exactly the ball's measure.
/// A finite cap is appended unsnapped.
pub fn ladder(geometry: &Geometry, cap: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(ratio > 1.0 && ratio.is_finite()) {
        return Err(LabError::InvalidParams(format!("ladder ratio must exceed 1, got {ratio}")));
    }
    if !(cap > 0.0) {
        return Err(LabError::InvalidParams(format!("radius cap must be positive, got {cap}")));
    }
    let h = geometry.h();
    let top = cap.min(domain_radius(geometry));
    if top < smallest_radius(geometry) {
        return Err(LabError::UnderResolved { sigma: top, h });
    }
    let snap = |s: f64| match geometry {
        Geometry::Box(_) => ((s / h - 0.5).round().max(0.0) + 0.5) * h,
        Geometry::Radial(_) => (s / h).round().max(1.0) * h,
    };
    let mut out: Vec<f64> = Vec::new();
    let mut s = h;
    while s <= top * (1.0 + 1e-12) {
        let r = snap(s);
        if r <= top * (1.0 + 1e-12) && out.last().map_or(true, |&l| r > l * (1.0 + 1e-12)) {
            out.push(r);
        }
        s *= ratio;
    }
    if cap.is_finite() && cap <= domain_radius(geometry) && out.last().map_or(true, |&l| cap > l * (1.0 + 1e-12)) {
        out.push(cap);
    }
    if out.is_empty() {
        out.push(top);
    }
    Ok(out)
}

fn prefix(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut p = vec![0.0];
    let mut acc = 0.0;
    for v in values {
        acc += v;
        p.push(acc);
    }
    p
}

/// Sum of `count` consecutive entries starting at `start`, wrapping modulo `n`.
fn wrapped_sum(p: &[f64], n: usize, start: i64, count: usize) -> f64 {
    let total = p[n];
    let cycles = count / n;
    let rem = count % n;
    let s = start.rem_euclid(n as i64) as usize;
    let partial = if s + rem <= n { p[s + rem] - p[s] } else { (total - p[s]) + p[s + rem - n] };
    cycles as f64 * total + partial
}

/// Largest integer offset `k ≥ 0` with `k·h < σ'`, or `None` when even `k = 0` fails.
fn reach(sigma_eff: f64, h: f64, offset2: f64) -> Option<i64> {
    let r2 = (sigma_eff / h).powi(2) - offset2;
    if r2 <= 0.0 {
        return None;
    }
    Some(r2.sqrt().ceil() as i64 - 1)
}

struct Sums {
    s: f64,
    clipped: bool,
}

fn box_sums_1d(g: &BoxGrid, p: &[f64], i: usize, sigma_eff: f64) -> (Sums, f64) {
    let n = g.cells[0];
    let h = g.h;
    let k = reach(sigma_eff, h, 0.0).unwrap_or(-1);
    if k < 0 {
        return (Sums { s: 0.0, clipped: false }, 0.0);
    }
    let full = (2 * k + 1) as f64 * h;
    match g.boundary {
        Boundary::Neumann => {
            let lo = (i as i64 - k).max(0) as usize;
            let hi = ((i as i64 + k) as usize).min(n - 1);
            let clipped = (i as i64) < k || i as i64 + k > n as i64 - 1;
            (Sums { s: (p[hi + 1] - p[lo]) * h, clipped }, full)
        }
        Boundary::Periodic => {
            let count = (2 * k + 1) as usize;
            (Sums { s: wrapped_sum(p, n, i as i64 - k, count) * h, clipped: false }, full)
        }
    }
}

/// Row extents `(dy, dx_max)` of the discrete disk.
fn disk_rows(h: f64, sigma_eff: f64) -> Vec<(i64, i64)> {
    let ky = match reach(sigma_eff, h, 0.0) {
        Some(k) => k,
        None => return Vec::new(),
    };
    (-ky..=ky)
        .filter_map(|dy| reach(sigma_eff, h, (dy * dy) as f64).map(|dx| (dy, dx)))
        .collect()
}

fn box_sums_2d(g: &BoxGrid, rows: &[Vec<f64>], disk: &[(i64, i64)], idx: usize) -> Sums {
    let (nx, ny) = (g.cells[0], g.cells[1]);
    let i = (idx % nx) as i64;
    let j = (idx / nx) as i64;
    let a = g.h * g.h;
    let mut s = 0.0;
    let mut clipped = false;
    for &(dy, dx) in disk {
        match g.boundary {
            Boundary::Neumann => {
                let jj = j + dy;
                if jj < 0 || jj >= ny as i64 {
                    clipped = true;
                    continue;
                }
                let lo = (i - dx).max(0) as usize;
                let hi = ((i + dx) as usize).min(nx - 1);
                if i - dx < 0 || i + dx > nx as i64 - 1 {
                    clipped = true;
                }
                let p = &rows[jj as usize];
                s += p[hi + 1] - p[lo];
            }
            Boundary::Periodic => {
                let jj = (j + dy).rem_euclid(ny as i64) as usize;
                let c = (2 * dx + 1) as usize;
                s += wrapped_sum(&rows[jj], nx, i - dx, c);
            }
        }
    }
    Sums { s: s * a, clipped }
}

fn radial_sums(g: &RadialGrid, p: &[f64], sigma_eff: f64) -> (Sums, f64) {
    let shells = (sigma_eff / g.h - 0.5).ceil().max(0.0) as usize;
    let k = shells.min(g.cells);
    let full = unit_ball_volume(g.dim) * (shells as f64 * g.h).powi(g.dim as i32);
    (Sums { s: p[k], clipped: shells > g.cells }, full)
}

fn better(cand: f64, ci: usize, best: f64, bi: usize) -> bool {
    cand > best || (cand == best && ci < bi)
}

/// Sup over the centre set of the average and of the mass of `w` for each radius.
pub fn ball_sups(geometry: &Geometry, w: &[f64], sigmas: &[f64], centers: CenterSet) -> Result<Vec<BallSup>> {
    if w.len() != geometry.len() {
        return Err(LabError::InvalidParams("weights do not match the grid".into()));
    }
    let n_dim = geometry.dim();
    let omega = unit_ball_volume(n_dim);
    let h = geometry.h();
    if let Some(&s) = sigmas.iter().find(|&&s| !(s >= smallest_radius(geometry))) {
        return Err(LabError::UnderResolved { sigma: s, h });
    }
    match geometry {
        Geometry::Radial(g) => {
            let p = prefix(w.iter().enumerate().map(|(k, v)| v * g.shell_volume(k)));
            sigmas
                .iter()
                .map(|&sigma| {
                    let (sums, full) = radial_sums(g, &p, sigma * (1.0 - INCLUSION_SLACK));
                    if full == 0.0 {
                        return Err(LabError::UnderResolved { sigma, h });
                    }
                    let mass = sums.s * omega * sigma.powi(n_dim as i32) / full;
                    Ok(BallSup { sigma, mass, raw_mass: sums.s, mass_center: 0, avg: sums.s / full, avg_center: 0, clipped: sums.clipped })
                })
                .collect()
        }
        Geometry::Box(g) => {
            let center_list: Vec<usize> = match centers {
                CenterSet::AllCells => (0..g.len()).collect(),
                CenterSet::Origin => vec![g.nearest([0.0, 0.0])],
            };
            let (p1, rows) = if g.dim == 1 {
                (prefix(w.iter().copied()), Vec::new())
            } else {
                let nx = g.cells[0];
                (Vec::new(), (0..g.cells[1]).map(|j| prefix(w[j * nx..(j + 1) * nx].iter().copied())).collect())
            };
            sigmas
                .par_iter()
                .map(|&sigma| {
                    let se = sigma * (1.0 - INCLUSION_SLACK);
                    let disk = if g.dim == 2 { disk_rows(g.h, se) } else { Vec::new() };
                    let full = if g.dim == 1 {
                        reach(se, g.h, 0.0).map_or(0.0, |k| (2 * k + 1) as f64 * g.h)
                    } else {
                        disk.iter().map(|&(_, dx)| (2 * dx + 1) as f64).sum::<f64>() * g.h * g.h
                    };
                    if full == 0.0 {
                        return Err(LabError::UnderResolved { sigma, h });
                    }
                    let mut best = BallSup {
                        sigma,
                        mass: f64::NEG_INFINITY,
                        raw_mass: 0.0,
                        mass_center: 0,
                        avg: f64::NEG_INFINITY,
                        avg_center: 0,
                        clipped: false,
                    };
                    let mut avg_clipped = false;
                    for &c in &center_list {
                        let sums = if g.dim == 1 { box_sums_1d(g, &p1, c, se).0 } else { box_sums_2d(g, &rows, &disk, c) };
                        let avg = sums.s / full;
                        if better(sums.s, c, best.mass, best.mass_center) {
                            best.mass = sums.s;
                            best.mass_center = c;
                            best.clipped = sums.clipped;
                        }
                        if better(avg, c, best.avg, best.avg_center) {
                            best.avg = avg;
                            best.avg_center = c;
                            avg_clipped = sums.clipped;
                        }
                    }
                    best.raw_mass = best.mass;
                    best.mass *= omega * sigma.powi(n_dim as i32) / full;
                    best.clipped |= avg_clipped;
                    Ok(best)
                })
                .collect()
        }
    }
}

/// Average of `f` over the cells whose centres lie in `B(z, σ)`.
///
/// The lattice is extended past the domain: periodic boxes wrap, while on
/// Neumann boxes and radial grids the missing part of the ball counts as zero,
/// so clipped balls under-estimate. Radial fields accept only `z = 0`.
pub fn ball_average(f: &GridField, z: [f64; 2], sigma: f64) -> Result<f64> {
    let geometry = f.geometry();
    let h = geometry.h();
    if !(sigma >= 0.5 * h) {
        return Err(LabError::UnderResolved { sigma, h });
    }
    let se = sigma * (1.0 - INCLUSION_SLACK);
    let (mut s, mut v) = (0.0, 0.0);
    match geometry {
        Geometry::Radial(g) => {
            if z != [0.0, 0.0] {
                return Err(LabError::Domain("radial fields only admit balls centred at the origin".into()));
            }
            let mut k = 0;
            while g.radius(k) < se {
                if k < g.cells {
                    s += f.values()[k] * g.shell_volume(k);
                }
                v += g.shell_volume(k);
                k += 1;
            }
        }
        Geometry::Box(g) => {
            let span = |a: usize| {
                let lo = ((z[a] - se - g.lower[a]) / h).floor() as i64 - 1;
                let hi = ((z[a] + se - g.lower[a]) / h).ceil() as i64 + 1;
                (lo, hi)
            };
            let (ilo, ihi) = span(0);
            let (jlo, jhi) = if g.dim == 2 { span(1) } else { (0, 0) };
            let cell = g.cell_volume();
            for j in jlo..=jhi {
                for i in ilo..=ihi {
                    let x = g.lower[0] + (i as f64 + 0.5) * h - z[0];
                    let y = if g.dim == 2 { g.lower[1] + (j as f64 + 0.5) * h - z[1] } else { 0.0 };
                    if x.hypot(y) >= se {
                        continue;
                    }
                    v += cell;
                    let (nx, ny) = (g.cells[0] as i64, g.cells[1] as i64);
                    let idx = match g.boundary {
                        Boundary::Periodic => Some(g.index(i.rem_euclid(nx) as usize, j.rem_euclid(ny) as usize)),
                        Boundary::Neumann if (0..nx).contains(&i) && (0..ny).contains(&j) => {
                            Some(g.index(i as usize, j as usize))
                        }
                        Boundary::Neumann => None,
                    };
                    if let Some(k) = idx {
                        s += f.values()[k] * cell;
                    }
                }
            }
        }
    }
    if v == 0.0 {
        return Err(LabError::UnderResolved { sigma, h });
    }
    Ok(s / v)
}

/// `sup_z ∫_{B(z,σ)} f` with the maximising centre.
pub fn sup_ball_mass(f: &GridField, sigma: f64) -> Result<(f64, [f64; 2])> {
    let r = ball_sups(f.geometry(), f.values(), &[sigma], CenterSet::AllCells)?[0];
    Ok((r.mass, f.geometry().point(r.mass_center)))
}

fn finish(geometry: &Geometry, sups: &[BallSup], scores: &[f64], ladder: Vec<f64>) -> NormValue {
    let mut best = NormValue { value: f64::NEG_INFINITY, center: [0.0; 2], sigma: 0.0, ladder, clipped: false };
    for (s, &v) in sups.iter().zip(scores) {
        if v > best.value {
            best.value = v;
            best.center = geometry.point(s.avg_center);
            best.sigma = s.sigma;
            best.clipped = s.clipped;
        }
    }
    best
}

pub fn morrey_norm(f: &GridField, spec: &NormSpec) -> Result<NormValue> {
    let (q, alpha) = match spec.kind {
        NormKind::Morrey { q, alpha } => (q, alpha),
        _ => return Err(LabError::InvalidParams("morrey_norm needs a Morrey spec".into())),
    };
    if !(alpha >= 1.0) || !(q > 0.0) {
        return Err(LabError::InvalidParams(format!("Morrey norm needs q > 0 and alpha >= 1 (q={q}, alpha={alpha})")));
    }
    let radii = ladder(f.geometry(), spec.cap, spec.ladder_ratio)?;
    let pw = Power::new(alpha);
    let w: Vec<f64> = f.values().iter().map(|&v| pw.apply(v)).collect();
    let sups = ball_sups(f.geometry(), &w, &radii, spec.centers)?;
    let nq = f.dim() as f64 / q;
    let scores: Vec<f64> = sups.iter().map(|s| s.sigma.powf(nq) * s.avg.max(0.0).powf(1.0 / alpha)).collect();
    Ok(finish(f.geometry(), &sups, &scores, radii))
}

pub fn orlicz_eta_norm(f: &GridField, spec: &NormSpec, params: &ProblemParams) -> Result<NormValue> {
    let (psi, horizon) = match spec.kind {
        NormKind::OrliczEta { psi, horizon } => (psi, horizon),
        _ => return Err(LabError::InvalidParams("orlicz_eta_norm needs an OrliczEta spec".into())),
    };
    if params.regime() != Regime::Critical {
        return Err(LabError::RegimeMismatch(format!("the Orlicz-eta functional is for p = p_m only ({params})")));
    }
    if f.dim() != params.dim() {
        return Err(LabError::InvalidParams("field dimension differs from N".into()));
    }
    if !(horizon > 0.0) {
        return Err(LabError::InvalidParams(format!("T must be positive, got {horizon}")));
    }
    let limit = horizon.powf(params.theta().0);
    let radii = ladder(f.geometry(), spec.cap.min(limit), spec.ladder_ratio)?;
    let scale = horizon.powf(1.0 / (params.p() - 1.0));
    let w: Vec<f64> = f.values().iter().map(|&v| psi.eval(scale * v)).collect();
    let sups = ball_sups(f.geometry(), &w, &radii, spec.centers)?;
    let n = f.dim();
    let scores = sups
        .iter()
        .map(|s| Ok(eta(s.sigma / limit, n) * psi.inverse(s.avg.max(0.0))?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(finish(f.geometry(), &sups, &scores, radii))
}

/// Dispatch on the spec kind; `params` is needed for the Orlicz functional only.
pub fn evaluate(f: &GridField, spec: &NormSpec, params: Option<&ProblemParams>) -> Result<NormValue> {
    match spec.kind {
        NormKind::Morrey { .. } => morrey_norm(f, spec),
        NormKind::OrliczEta { .. } => {
            let p = params.ok_or_else(|| LabError::InvalidParams("Orlicz functional needs (N, m, p)".into()))?;
            orlicz_eta_norm(f, spec, p)
        }
        NormKind::SupBallMass => {
            let radii = ladder(f.geometry(), spec.cap, spec.ladder_ratio)?;
            let sups = ball_sups(f.geometry(), f.values(), &radii, spec.centers)?;
            let scores: Vec<f64> = sups.iter().map(|s| s.mass).collect();
            let mut best = finish(f.geometry(), &sups, &scores, radii);
            if let Some(s) = sups.iter().find(|s| s.sigma == best.sigma) {
                best.center = f.geometry().point(s.mass_center);
            }
            Ok(best)
        }
        NormKind::Linfty => {
            let (k, v) = f
                .values()
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
            Ok(NormValue { value: v, center: f.geometry().point(k), sigma: 0.0, ladder: Vec::new(), clipped: false })
        }
    }
}

/// `max_σ sup_z m(2σ) / sup_z m(σ)` over the given radii; `1` for the zero field.
pub fn doubling_constant(f: &GridField, sigmas: &[f64]) -> Result<f64> {
    if sigmas.is_empty() {
        return Err(LabError::InvalidParams("doubling constant needs at least one radius".into()));
    }
    let doubled: Vec<f64> = sigmas.iter().map(|s| 2.0 * s).collect();
    let a = ball_sups(f.geometry(), f.values(), sigmas, CenterSet::AllCells)?;
    let b = ball_sups(f.geometry(), f.values(), &doubled, CenterSet::AllCells)?;
    let mut worst = 1.0f64;
    for (x, y) in a.iter().zip(&b) {
        if x.mass > 0.0 {
            worst = worst.max(y.mass / x.mass);
        } else if y.mass > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(worst)
}
