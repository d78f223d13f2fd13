use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::ops::{defect, loads};
use crate::mesh::{grad_magnitude, sup_abs, sup_norm, ScalarField};
use crate::plap::PlapSolver;
use crate::subsuper::{ProblemSpec, Source, SubSuperPair};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FrozenOptions {
    pub max_iter: usize,
    /// `u <- (1 - theta) u + theta w`; 1 is the plain iteration.
    pub relaxation: f64,
    /// Inner solves run to this multiple of the largest nodal load.
    pub inner_rel_tol: f64,
    /// Allowed excursion outside the pair, relative to `|u|_inf`.
    pub sandwich_slack: f64,
}

impl Default for FrozenOptions {
    fn default() -> Self {
        FrozenOptions { max_iter: 2000, relaxation: 1.0, inner_rel_tol: 1e-12, sandwich_slack: 1e-8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub sup_u: f64,
    pub increment: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: ScalarField,
    pub iterations: usize,
    pub converged: bool,
    /// Weak residual of the full equation divided by the largest nodal load.
    pub residual: f64,
    pub residual_abs: f64,
    pub sup_u: f64,
    /// Every iterate stayed within the pair (up to `sandwich_slack * sup_u`).
    pub sandwich_pass: bool,
    /// Worst `min(u - sub)` over all iterates.
    pub sub_margin: f64,
    /// Worst `min(sup - u)` over all iterates.
    pub super_margin: f64,
    /// First iterate that left the pair, if any.
    pub escaped_at: Option<usize>,
    /// Iterates never decreased (monitored only).
    pub monotone: bool,
    pub trace: Vec<TracePoint>,
}

/// JSON view of a [`SolveReport`] without the field itself.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub residual_abs: f64,
    pub sup_u: f64,
    pub sandwich_pass: bool,
    pub sub_margin: f64,
    pub super_margin: f64,
    pub escaped_at: Option<usize>,
    pub monotone: bool,
    pub trace: Vec<TracePoint>,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            iterations: self.iterations,
            converged: self.converged,
            residual: self.residual,
            residual_abs: self.residual_abs,
            sup_u: self.sup_u,
            sandwich_pass: self.sandwich_pass,
            sub_margin: self.sub_margin,
            super_margin: self.super_margin,
            escaped_at: self.escaped_at,
            monotone: self.monotone,
            trace: self.trace.clone(),
        }
    }
}

/// Clamped nodal values `max(f(x, u, |grad u|), 0)`.
pub(crate) fn frozen_rhs(f: &dyn Source, u: &[f64], grad: &[f64]) -> Vec<f64> {
    u.iter().zip(grad).enumerate().map(|(i, (&u, &g))| f.eval(i, u, g).max(0.0)).collect()
}

/// (absolute, relative) weak residual of `-Delta_p u = f(x, u, grad u)`.
pub(crate) fn equation_residual(solver: &PlapSolver, f: &dyn Source, u: &ScalarField) -> (f64, f64) {
    let dom = solver.domain();
    let g = grad_magnitude(u);
    let rhs: Vec<f64> = u.values().iter().zip(g.values()).enumerate().map(|(i, (&u, &g))| f.eval(i, u, g)).collect();
    let load = loads(dom, &rhs);
    let r = sup_abs(&defect(dom, u.values(), &load, solver.p()));
    let scale = sup_abs(&load);
    (r, if scale > 0.0 { r / scale } else { r })
}

pub fn frozen_gradient_solve(spec: &ProblemSpec, pair: &SubSuperPair, tol: f64) -> Result<SolveReport> {
    let solver = PlapSolver::new(spec.domain().clone(), spec.p);
    frozen_gradient_solve_with(&solver, spec, pair, tol, None, &FrozenOptions::default())
}

/// Frozen-gradient iteration `-Delta_p u^(k+1) = max(f(x, u^k, grad u^k), 0)` started from
/// `start` (default: `pair.sub`).
///
/// Stops when `|u^(k+1) - u^k|_inf <= tol max(|u|_inf, 1)` and the relative weak residual of
/// the full equation is at most `tol`. Excursions outside the pair are recorded, not clamped.
pub fn frozen_gradient_solve_with(
    solver: &PlapSolver,
    f: &dyn Source,
    pair: &SubSuperPair,
    tol: f64,
    start: Option<&ScalarField>,
    opts: &FrozenOptions,
) -> Result<SolveReport> {
    if !pair.ordered {
        return invalid(format!("pair is not ordered (margin {:e})", pair.margin));
    }
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let dom = solver.domain().clone();
    if pair.sub.len() != dom.num_nodes() {
        return invalid("pair lives on another domain");
    }
    let theta = opts.relaxation;
    if !(theta > 0.0 && theta <= 1.0) {
        return invalid(format!("relaxation must lie in (0, 1], got {theta}"));
    }

    let mut u = start.unwrap_or(&pair.sub).values().to_vec();
    let mut warm: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let (mut sub_margin, mut super_margin) = (f64::INFINITY, f64::INFINITY);
    let mut escaped_at = None;
    let mut monotone = true;
    let mut converged = false;
    let mut last_res = (f64::INFINITY, f64::INFINITY);

    for k in 1..=opts.max_iter {
        let field = ScalarField::from_raw(dom.clone(), u.clone(), true);
        let grad = grad_magnitude(&field);
        let rhs = frozen_rhs(f, &u, grad.values());
        let load = loads(&dom, &rhs);
        let sol = solver.solve_load(&load, opts.inner_rel_tol * sup_abs(&load), warm.as_deref());
        let w = sol.u.into_values();
        let next: Vec<f64> = u.iter().zip(&w).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        warm = Some(w);

        let increment = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let sup_u = sup_abs(&next);
        let slack = opts.sandwich_slack * sup_u;
        let lo = next.iter().zip(pair.sub.values()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        let hi = pair.sup.values().iter().zip(&next).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        sub_margin = sub_margin.min(lo);
        super_margin = super_margin.min(hi);
        if escaped_at.is_none() && (lo < -slack || hi < -slack) {
            debug!("iterate {k} left the order interval: margins {lo:e}, {hi:e}");
            escaped_at = Some(k);
        }
        if next.iter().zip(&u).any(|(a, b)| *a < b - slack) {
            monotone = false;
        }
        if !next.iter().all(|v| v.is_finite()) {
            break;
        }
        u = next;
        let field = ScalarField::from_raw(dom.clone(), u.clone(), true);
        last_res = equation_residual(solver, f, &field);
        trace.push(TracePoint { k, sup_u, increment, residual: last_res.1 });
        if increment <= tol * sup_u.max(1.0) && last_res.1 <= tol {
            converged = true;
            break;
        }
    }
    let solution = ScalarField::from_raw(dom, u, true);
    let sup_u = sup_norm(&solution);
    debug!(
        "frozen-gradient solve: {} iterations, |u| = {sup_u:e}, residual {:e}, converged = {converged}",
        trace.len(),
        last_res.1
    );
    Ok(SolveReport {
        solution,
        iterations: trace.len(),
        converged,
        residual: last_res.1,
        residual_abs: last_res.0,
        sup_u,
        sandwich_pass: escaped_at.is_none(),
        sub_margin,
        super_margin,
        escaped_at,
        monotone,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, Weight};
    use crate::plap::solve_torsion;
    use crate::solve::{Prepared, Tolerances};
    use crate::subsuper::{subsolution_eps, supersolution_two_param};

    #[test]
    fn constant_source_gives_torsion_at_first_iterate() {
        let d = Domain::interval(1.0, 128).unwrap();
        let w = Weight::constant(d.clone(), 1.0).unwrap();
        let td = solve_torsion(&d, &w, 2.0, 1e-14).unwrap();
        let sub = ScalarField::zeros(d.clone());
        let pair = SubSuperPair::new(sub, 0.0, td.phi().scaled(2.0), 0.25).unwrap();
        let f = |_: usize, _: f64, _: f64| 1.0;
        let solver = PlapSolver::new(d.clone(), 2.0);
        let r = frozen_gradient_solve_with(&solver, &f, &pair, 1e-10, None, &FrozenOptions::default()).unwrap();
        assert!(r.converged && r.sandwich_pass);
        assert_eq!(r.iterations, 2);
        assert_eq!(r.trace[1].increment, 0.0);
        assert!(sup_norm(&r.solution.difference(td.phi()).unwrap()) < 1e-14);
    }

    #[test]
    fn sublinear_two_param_is_sandwiched() {
        let d = Domain::interval(1.0, 256).unwrap();
        let w = Weight::constant(d.clone(), 1.0).unwrap();
        let spec = ProblemSpec::two_param(2.0, 1.5, 0.5, 0.5, 1.0, 0.0, w.clone(), w).unwrap();
        let prep = Prepared::new(spec, Tolerances::default()).unwrap();
        let spec = prep.spec.with_params(1.0, 0.5 * prep.td.alpha() / prep.td.mu().sqrt()).unwrap();
        let sub = subsolution_eps(&spec, &prep.ep).unwrap();
        let sup = supersolution_two_param(&spec, &prep.td).unwrap();
        let pair = SubSuperPair::new(sub.field, sub.eps, sup.field, sup.m).unwrap();
        let r = frozen_gradient_solve(&spec, &pair, 1e-10).unwrap();
        assert!(r.converged, "residual {}", r.residual);
        assert!(r.sandwich_pass);
        assert!(r.sup_u >= sub.eps && r.sup_u <= sup.m);
    }

    #[test]
    fn unordered_pair_is_rejected() {
        let d = Domain::interval(1.0, 16).unwrap();
        let v = ScalarField::from_fn(d, true, |x, _| x * (1.0 - x)).unwrap();
        let pair = SubSuperPair::new(v.scaled(2.0), 2.0, v.clone(), 1.0).unwrap();
        let w = Weight::constant(v.domain().clone(), 1.0).unwrap();
        let spec = ProblemSpec::example1(2.0, 1.5, 1.0, w).unwrap();
        assert!(frozen_gradient_solve(&spec, &pair, 1e-8).is_err());
    }
}
