//! Sampled nonnegative functions on uniform box or radial grids.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numerics::unit_ball_volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Periodic,
    Neumann,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Neumann => "neumann",
        })
    }
}

impl std::str::FromStr for Boundary {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(Boundary::Periodic),
            "neumann" => Ok(Boundary::Neumann),
            other => Err(LabError::InvalidParams(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Uniform cell-centred grid on a box in one or two dimensions.
///
/// Cell `(i, j)` has centre `lower + (i+½, j+½)·h` and is stored at `j·cells[0] + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub dim: usize,
    pub cells: [usize; 2],
    pub lower: [f64; 2],
    pub h: f64,
    pub boundary: Boundary,
}

impl BoxGrid {
    pub fn new(dim: usize, cells: [usize; 2], lower: [f64; 2], h: f64, boundary: Boundary) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(LabError::InvalidParams(format!(
                "box grids support N = 1 or 2 (got {dim}); use a radial grid"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(LabError::InvalidParams(format!("grid spacing must be positive, got {h}")));
        }
        let cells = if dim == 1 { [cells[0], 1] } else { cells };
        if cells[0] == 0 || cells[1] == 0 {
            return Err(LabError::InvalidParams("grid needs at least one cell per axis".into()));
        }
        let lower = if dim == 1 { [lower[0], 0.0] } else { lower };
        Ok(Self { dim, cells, lower, h, boundary })
    }

    /// Grid covering `[−L, L]^N` whose central cell is centred at the origin.
    ///
    /// The cell count per axis is odd, so the covered box is `[−L−h/2, L+h/2]` after rounding `L/h`.
    pub fn centered(dim: usize, half_width: f64, h: f64, boundary: Boundary) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(LabError::InvalidParams(format!("half width must be positive, got {half_width}")));
        }
        let k = (half_width / h).round() as usize;
        let n = 2 * k + 1;
        let lo = -(k as f64 + 0.5) * h;
        Self::new(dim, [n, n], [lo, lo], h, boundary)
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Side lengths of the box.
    pub fn extent(&self) -> [f64; 2] {
        [self.cells[0] as f64 * self.h, if self.dim == 2 { self.cells[1] as f64 * self.h } else { 0.0 }]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        let i = idx % self.cells[0];
        let j = idx / self.cells[0];
        let x = self.lower[0] + (i as f64 + 0.5) * self.h;
        let y = if self.dim == 2 { self.lower[1] + (j as f64 + 0.5) * self.h } else { 0.0 };
        [x, y]
    }

    /// Index of the cell whose centre is nearest to `z`.
    pub fn nearest(&self, z: [f64; 2]) -> usize {
        let along = |a: usize| {
            let t = ((z[a] - self.lower[a]) / self.h - 0.5).round();
            t.clamp(0.0, (self.cells[a] - 1) as f64) as usize
        };
        if self.dim == 1 {
            along(0)
        } else {
            self.index(along(0), along(1))
        }
    }
}

/// Cell-centred grid in the radial variable for radially symmetric functions on `R^N`.
///
/// Shell `k` is `[kh, (k+1)h)` with sample point `(k+½)h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub dim: usize,
    pub cells: usize,
    pub h: f64,
}

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, h: f64) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidParams("N must be positive".into()));
        }
        if !(h > 0.0 && h.is_finite()) || !(r_max >= h) {
            return Err(LabError::InvalidParams(format!("radial grid needs 0 < h <= r_max (h={h}, r_max={r_max})")));
        }
        let cells = (r_max / h).round() as usize;
        Ok(Self { dim, cells, h })
    }

    pub fn r_max(&self) -> f64 {
        self.cells as f64 * self.h
    }

    pub fn radius(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.h
    }

    /// N-dimensional volume of shell `k`.
    pub fn shell_volume(&self, k: usize) -> f64 {
        let n = self.dim as i32;
        unit_ball_volume(self.dim) * self.h.powi(n) * (((k + 1) as f64).powi(n) - (k as f64).powi(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Box(BoxGrid),
    Radial(RadialGrid),
}

impl Geometry {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Box(g) => g.dim,
            Geometry::Radial(g) => g.dim,
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            Geometry::Box(g) => g.h,
            Geometry::Radial(g) => g.h,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Geometry::Box(g) => g.len(),
            Geometry::Radial(g) => g.cells,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self, idx: usize) -> f64 {
        match self {
            Geometry::Box(g) => g.cell_volume(),
            Geometry::Radial(g) => g.shell_volume(idx),
        }
    }

    /// Cell centre; for radial grids `[r, 0]`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self {
            Geometry::Box(g) => g.center(idx),
            Geometry::Radial(g) => [g.radius(idx), 0.0],
        }
    }

    /// Distance of the cell centre from the origin.
    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y] = self.point(idx);
        x.hypot(y)
    }

    pub fn boundary(&self) -> Boundary {
        match self {
            Geometry::Box(g) => g.boundary,
            Geometry::Radial(_) => Boundary::Neumann,
        }
    }

    /// Same geometry with spacing and offsets multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        match *self {
            Geometry::Box(g) => Geometry::Box(BoxGrid {
                lower: [g.lower[0] * factor, g.lower[1] * factor],
                h: g.h * factor,
                ..g
            }),
            Geometry::Radial(g) => Geometry::Radial(RadialGrid { h: g.h * factor, ..g }),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Geometry::Box(_) => "box",
            Geometry::Radial(_) => "radial",
        }
    }
}

/// Nonnegative cell values on a [`Geometry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    geometry: Geometry,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(LabError::InvalidParams(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                geometry.len()
            )));
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(LabError::InvalidParams(format!("field value {v} at cell {k} is not a nonnegative number")));
        }
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        Self { values: vec![0.0; geometry.len()], geometry }
    }

    pub fn constant(geometry: Geometry, c: f64) -> Result<Self> {
        Self::new(geometry, vec![c; geometry.len()])
    }

    /// Sample `f` at cell centres.
    pub fn from_fn<F: Fn([f64; 2]) -> f64>(geometry: Geometry, f: F) -> Result<Self> {
        let values = (0..geometry.len()).map(|k| f(geometry.point(k))).collect();
        Self::new(geometry, values)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn h(&self) -> f64 {
        self.geometry.h()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// `∫ f dx` with exact cell (or shell) volumes.
    pub fn mass(&self) -> f64 {
        self.values.iter().enumerate().map(|(k, v)| v * self.geometry.cell_volume(k)).sum()
    }

    /// Pointwise map; the result must stay nonnegative.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::new(self.geometry, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        self.map(|v| lambda * v)
    }

    /// `∫ |f − g| dx` on a shared geometry.
    pub fn l1_distance(&self, other: &GridField) -> Result<f64> {
        if self.geometry != other.geometry {
            return Err(LabError::InvalidParams("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(k, (a, b))| (a - b).abs() * self.geometry.cell_volume(k))
            .sum())
    }
}
