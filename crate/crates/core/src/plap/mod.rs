//! The p-Laplacian: operator application, the torsion problem and the constants derived
//! from its solution.

mod banded;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::ops::operator_into;
use crate::mesh::{grad_magnitude, sup_norm, Domain, ScalarField, Weight};
use std::sync::Arc;

pub use solver::{PlapSolution, PlapSolver, SolverOptions};

/// Default gradient regularization used when evaluating the operator pointwise.
pub const DEFAULT_DELTA: f64 = 1e-10;

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    Ok(())
}

/// Nodal values of `-div(|grad u|^(p-2) grad u)` at interior nodes (zero on the boundary),
/// with |grad u| regularized as `sqrt(|grad u|^2 + delta^2)`.
pub fn apply_plap(u: &ScalarField, p: f64) -> Result<ScalarField> {
    apply_plap_with_delta(u, p, DEFAULT_DELTA)
}

pub fn apply_plap_with_delta(u: &ScalarField, p: f64, delta: f64) -> Result<ScalarField> {
    check_p(p)?;
    let dom = u.domain();
    let mut out = vec![0.0; u.len()];
    operator_into(dom, u.values(), p, delta, &mut out);
    for (i, v) in out.iter_mut().enumerate() {
        *v = if dom.is_boundary(i) { 0.0 } else { *v / dom.mass()[i] };
    }
    ScalarField::new(dom.clone(), out, true)
}

/// Torsion function `phi` (`-Delta_p phi = omega`, `phi = 0` on the boundary) with the
/// constants `alpha = |phi|_inf^(1-p)` and `mu = |grad phi|_inf / |phi|_inf`.
#[derive(Clone, Debug)]
pub struct TorsionData {
    phi: ScalarField,
    weight: Weight,
    p: f64,
    sup_phi: f64,
    sup_grad_phi: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl TorsionData {
    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sup_phi(&self) -> f64 {
        self.sup_phi
    }

    pub fn sup_grad_phi(&self) -> f64 {
        self.sup_grad_phi
    }

    pub fn alpha(&self) -> f64 {
        self.sup_phi.powf(1.0 - self.p)
    }

    pub fn mu(&self) -> f64 {
        self.sup_grad_phi / self.sup_phi
    }

    /// `phi > 0` at every interior node.
    pub fn is_positive(&self) -> bool {
        let dom = self.phi.domain();
        dom.free_nodes().all(|i| self.phi.values()[i] > 0.0)
    }

    /// `M phi / |phi|_inf`.
    pub fn normalized_scaled(&self, m: f64) -> ScalarField {
        self.phi.scaled(m / self.sup_phi)
    }

    pub fn summary(&self) -> TorsionSummary {
        TorsionSummary {
            p: self.p,
            alpha: self.alpha(),
            mu: self.mu(),
            sup_phi: self.sup_phi,
            sup_grad_phi: self.sup_grad_phi,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// JSON view of [`TorsionData`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorsionSummary {
    pub p: f64,
    pub alpha: f64,
    pub mu: f64,
    pub sup_phi: f64,
    pub sup_grad_phi: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the torsion problem to weak residual `tol`. Non-convergence is reported through
/// `converged = false` together with the best iterate.
pub fn solve_torsion(dom: &Arc<Domain>, omega: &Weight, p: f64, tol: f64) -> Result<TorsionData> {
    solve_torsion_with(&PlapSolver::new(dom.clone(), p), omega, tol)
}

pub fn solve_torsion_with(solver: &PlapSolver, omega: &Weight, tol: f64) -> Result<TorsionData> {
    let p = solver.p();
    check_p(p)?;
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    if omega.domain().num_nodes() != solver.domain().num_nodes() {
        return invalid("weight and domain disagree");
    }
    let sol = solver.solve_rhs(omega.values(), tol, None);
    let sup_phi = sup_norm(&sol.u);
    if !(sup_phi > 0.0) {
        return invalid("torsion solution vanishes");
    }
    let sup_grad_phi = sup_norm(&grad_magnitude(&sol.u));
    Ok(TorsionData {
        phi: sol.u,
        weight: omega.clone(),
        p,
        sup_phi,
        sup_grad_phi,
        residual: sol.residual,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Result of a nodewise comparison `u <= v`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderingReport {
    /// min over nodes of `v - u`.
    pub min_gap: f64,
    /// Node where the minimum is attained.
    pub worst_node: usize,
    /// Allowed undershoot `1e-12 * |v|_inf`.
    pub slack: f64,
    pub ordered: bool,
}

/// Checks `u <= v` nodewise with slack `1e-12 * |v|_inf`.
pub fn compare_fields(u: &ScalarField, v: &ScalarField) -> Result<OrderingReport> {
    if u.len() != v.len() {
        return invalid("fields live on different domains");
    }
    let mut min_gap = f64::INFINITY;
    let mut worst_node = 0;
    for (i, (a, b)) in u.values().iter().zip(v.values()).enumerate() {
        let gap = b - a;
        if gap < min_gap {
            min_gap = gap;
            worst_node = i;
        }
    }
    let slack = 1e-12 * sup_norm(v);
    Ok(OrderingReport { min_gap, worst_node, slack, ordered: min_gap >= -slack })
}
