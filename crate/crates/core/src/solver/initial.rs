//! Initial-data generators and the truncation `min(μ, i) + 1/j`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{Geometry, GridField};
use crate::params::ProblemParams;
use crate::special::mu_c_field;

use super::barenblatt::Barenblatt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialSpec {
    /// Cell averages of `μ_c`.
    MuC { c: f64 },
    /// `A exp(−|x|²/w²)`.
    Gaussian { amplitude: f64, width: f64 },
    Constant { value: f64 },
    /// Barenblatt profile of mass `M` at time `t0`.
    Barenblatt { mass: f64, t0: f64 },
    Custom(GridField),
}

impl InitialSpec {
    pub fn build(&self, geometry: Geometry, params: &ProblemParams) -> Result<GridField> {
        match self {
            InitialSpec::MuC { c } => mu_c_field(geometry, *c, params),
            InitialSpec::Gaussian { amplitude, width } => {
                if !(*width > 0.0) || !(*amplitude >= 0.0) {
                    return Err(LabError::InvalidParams(format!(
                        "gaussian needs amplitude >= 0 and width > 0 (got {amplitude}, {width})"
                    )));
                }
                GridField::from_fn(geometry, |x| amplitude * (-(x[0] * x[0] + x[1] * x[1]) / (width * width)).exp())
            }
            InitialSpec::Constant { value } => GridField::constant(geometry, *value),
            InitialSpec::Barenblatt { mass, t0 } => {
                let b = Barenblatt::new(params.dim(), params.m(), *mass)?;
                if !(*t0 > 0.0) {
                    return Err(LabError::InvalidParams(format!("Barenblatt start time must be positive, got {t0}")));
                }
                GridField::from_fn(geometry, |x| b.eval(x[0].hypot(x[1]), *t0))
            }
            InitialSpec::Custom(f) => {
                if f.geometry() != &geometry {
                    return Err(LabError::InvalidParams("custom initial field is on a different grid".into()));
                }
                Ok(f.clone())
            }
        }
    }
}

/// `min(μ, i) + 1/j`.
pub fn regularize_initial(mu: &GridField, i: f64, j: u32) -> Result<GridField> {
    if !(i > 0.0) || j == 0 {
        return Err(LabError::InvalidParams(format!("regularization needs i > 0 and j >= 1 (i={i}, j={j})")));
    }
    let floor = 1.0 / j as f64;
    mu.map(|v| v.min(i) + floor)
}
