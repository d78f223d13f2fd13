//! Solutions inside an ordered pair, the `q -> p` continuation of the two-parameter
//! problem, and diagnostics for the homogeneous case `q = p`.

mod continuation;
mod frozen;
mod probe;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::eigen::{principal_eigenpair_with, AlphaGap, EigenOptions, EigenPair};
use crate::error::{Error, Result};
use crate::mesh::ops::loads;
use crate::mesh::sup_abs;
use crate::plap::{solve_torsion_with, PlapSolver, TorsionData};
use crate::subsuper::{Form, ProblemSpec};

pub use continuation::{continuation_q_to_p, ContinuationOptions, ContinuationTrace, Schedule, StageRecord};
pub use frozen::{
    frozen_gradient_solve, frozen_gradient_solve_with, FrozenOptions, SolveReport, SolveSummary, TracePoint,
};
pub use probe::{
    homogeneity_check, nonexistence_probe, probe_dynamics, HomogeneityReport, ProbeOutcome, ProbeReport, ProbeRun,
};

/// Relative tolerances for the building blocks of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Torsion solve, relative to the largest nodal load.
    pub torsion: f64,
    /// Eigenvalue change and eigen-equation residual.
    pub eigen: f64,
    /// Fixed-point increment and residual.
    pub solve: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { torsion: 1e-12, eigen: 1e-8, solve: 1e-9 }
    }
}

/// Relative torsion residual accepted when Newton stagnates before `Tolerances::torsion`.
pub const TORSION_FLOOR: f64 = 1e-6;

/// A problem together with its torsion data (weight `omega`) and principal eigenpair
/// (weight `w1` for the two-parameter form, `omega` otherwise).
#[derive(Clone, Debug)]
pub struct Prepared {
    pub spec: ProblemSpec,
    pub solver: PlapSolver,
    pub td: TorsionData,
    pub ep: EigenPair,
    pub tol: Tolerances,
}

impl Prepared {
    pub fn new(spec: ProblemSpec, tol: Tolerances) -> Result<Self> {
        let solver = PlapSolver::new(spec.domain().clone(), spec.p);
        let omega = spec.omega().clone();
        let scale = sup_abs(&loads(spec.domain(), omega.values()));
        let td = solve_torsion_with(&solver, &omega, tol.torsion * scale)?;
        // Newton stops at the rounding floor for p != 2, which can sit above a tight request
        let usable = td.converged || td.residual <= TORSION_FLOOR * scale;
        if !td.converged && usable {
            warn!("torsion residual {:e} stalled above the requested tolerance", td.residual / scale);
        }
        if !usable || !td.is_positive() {
            return Err(Error::InvalidArgument(format!(
                "torsion solve failed (residual {:e}, {} iterations)",
                td.residual, td.iterations
            )));
        }
        let w = match spec.form {
            Form::TwoParam => spec.w1().clone(),
            _ => omega,
        };
        let ep = principal_eigenpair_with(&solver, &w, tol.eigen, &EigenOptions::default())?;
        Ok(Prepared { spec, solver, td, ep, tol })
    }

    /// Replaces the problem while keeping the (weight-dependent) torsion and eigen data.
    pub fn with_spec(&self, spec: ProblemSpec) -> Self {
        Prepared { spec, ..self.clone() }
    }

    /// `alpha <= lambda1` for the eigenvalue with the torsion weight `omega`.
    pub fn alpha_gap(&self) -> Result<AlphaGap> {
        if self.ep.weight.values() == self.spec.omega().values() {
            return crate::eigen::check_alpha_lt_lambda1(&self.td, &self.ep);
        }
        let ep = principal_eigenpair_with(&self.solver, self.spec.omega(), self.tol.eigen, &EigenOptions::default())?;
        crate::eigen::check_alpha_lt_lambda1(&self.td, &ep)
    }
}
