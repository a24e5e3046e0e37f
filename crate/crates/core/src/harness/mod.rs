//! Experiments built on the solver, plus configuration parsing and output.

pub mod config;
pub mod dichotomy;
pub mod energy;
pub mod experiments;
pub mod io;
pub mod validate;

pub use config::{parse_config, ExperimentConfig, TraceSettings};
pub use dichotomy::{
    dichotomy_sensitivity, run_dichotomy, run_trial, DichotomyMeta, DichotomyResult, DichotomySettings, MuFamily,
    Sensitivity, Trial,
};
pub use energy::{energy_refinement, run_energy_monitor, EnergyMonitor, EnergyRegime, EnergySpec, EnergyTerm};
pub use experiments::{
    run_decay_check, run_fujita_probe, run_scaling_check, run_trace_check, DecayCheck, FujitaOutcome, FujitaProbe,
    ScalingCheck, TraceCheck, Trend,
};
pub use validate::{run_validation, Check};

use crate::error::Result;
use crate::field::{BoxGrid, Geometry, RadialGrid};

/// Same region with half the spacing.
pub fn refine(geometry: &Geometry) -> Result<Geometry> {
    Ok(match *geometry {
        Geometry::Box(g) => {
            let cells = if g.dim == 1 { [2 * g.cells[0], 1] } else { [2 * g.cells[0], 2 * g.cells[1]] };
            Geometry::Box(BoxGrid::new(g.dim, cells, g.lower, g.h / 2.0, g.boundary)?)
        }
        Geometry::Radial(g) => Geometry::Radial(RadialGrid::new(g.dim, g.r_max(), g.h / 2.0)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Boundary;

    #[test]
    fn refine_keeps_the_region() {
        let g = Geometry::Box(BoxGrid::centered(1, 4.0, 0.01, Boundary::Neumann).unwrap());
        let r = refine(&g).unwrap();
        assert_eq!(r.len(), 2 * g.len());
        let (Geometry::Box(a), Geometry::Box(b)) = (g, r) else { unreachable!() };
        assert_eq!(a.lower, b.lower);
        assert!((a.extent()[0] - b.extent()[0]).abs() < 1e-12);
        let rad = refine(&Geometry::Radial(RadialGrid::new(3, 2.0, 0.1).unwrap())).unwrap();
        assert_eq!(rad.len(), 40);
    }
}
