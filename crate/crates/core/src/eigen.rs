//! Principal Dirichlet eigenpair of `-Delta_p` with a weight, by inverse power iteration.

use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::ops::{defect, loads};
use crate::mesh::{sup_abs, sup_norm, Domain, ScalarField, Weight};
use crate::plap::{check_p, PlapSolver, TorsionData};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    pub max_iter: usize,
    /// Inner solves are run to this multiple of the largest nodal load.
    pub inner_rel_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { max_iter: 500, inner_rel_tol: 1e-11 }
    }
}

/// `(lambda1, u1)` with `-Delta_p u1 = lambda1 omega u1^(p-1)`, `u1 > 0`, `|u1|_inf = 1`.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda1: f64,
    pub u1: ScalarField,
    pub weight: Weight,
    pub p: f64,
    /// Weak residual (absolute, load units) of the eigen-equation.
    pub residual: f64,
    /// `residual` divided by the largest nodal load of the right-hand side.
    pub residual_rel: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Eigenvalue estimate after each iteration.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenSummary {
    pub p: f64,
    pub lambda1: f64,
    pub residual: f64,
    pub residual_rel: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl EigenPair {
    pub fn summary(&self) -> EigenSummary {
        EigenSummary {
            p: self.p,
            lambda1: self.lambda1,
            residual: self.residual,
            residual_rel: self.residual_rel,
            iterations: self.iterations,
            converged: self.converged,
        }
    }

    /// `lambda1 * omega * u1^(p-1)` as a nodal field.
    pub fn eigen_rhs(&self) -> ScalarField {
        eigen_rhs(&self.u1, &self.weight, self.lambda1, self.p)
    }
}

fn eigen_rhs(u: &ScalarField, w: &Weight, lambda: f64, p: f64) -> ScalarField {
    let vals = u.values().iter().zip(w.values()).map(|(u, w)| lambda * w * u.max(0.0).powf(p - 1.0)).collect();
    ScalarField::from_raw(u.domain().clone(), vals, false)
}

pub fn principal_eigenpair(dom: &Arc<Domain>, omega: &Weight, p: f64, tol: f64) -> Result<EigenPair> {
    principal_eigenpair_with(&PlapSolver::new(dom.clone(), p), omega, tol, &EigenOptions::default())
}

/// Inverse power iteration started from the normalized torsion function.
///
/// With `u^k` sup-normalized, `w` solves `-Delta_p w = omega (u^k)^(p-1)`; the estimate is
/// `lambda = |w|_inf^(1-p)` and `u^(k+1) = w / |w|_inf`. Stops once both the relative change
/// of `lambda` and the relative weak residual of the eigen-equation drop below `tol`.
pub fn principal_eigenpair_with(
    solver: &PlapSolver,
    omega: &Weight,
    tol: f64,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    let p = solver.p();
    check_p(p)?;
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    let dom = solver.domain();
    if omega.domain().num_nodes() != dom.num_nodes() {
        return invalid("weight and domain disagree");
    }
    if !(omega.sup() > 0.0) {
        return invalid("weight vanishes identically");
    }

    let torsion = solver.solve_rhs(omega.values(), 1e-12 * sup_abs(&loads(dom, omega.values())), None);
    let s = sup_norm(&torsion.u);
    if !(s > 0.0) {
        return Err(Error::InvalidArgument("torsion start vanishes".into()));
    }
    let mut u: Vec<f64> = torsion.u.values().iter().map(|v| v / s).collect();
    let mut warm: Option<Vec<f64>> = None;
    let mut lambda = f64::NAN;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut best_res = (f64::INFINITY, 0);

    for k in 0..opts.max_iter {
        iterations = k + 1;
        let rhs: Vec<f64> = u.iter().zip(omega.values()).map(|(u, w)| w * u.max(0.0).powf(p - 1.0)).collect();
        let load = loads(dom, &rhs);
        let sol = solver.solve_load(&load, opts.inner_rel_tol * sup_abs(&load), warm.as_deref());
        let t = sup_norm(&sol.u);
        if !(t > 0.0) {
            break;
        }
        let next_lambda = t.powf(1.0 - p);
        let next: Vec<f64> = sol.u.values().iter().map(|v| v / t).collect();
        let dl = (next_lambda - lambda).abs();
        trace.push(next_lambda);
        warm = Some(sol.u.into_values());
        u = next;
        lambda = next_lambda;
        if dl < tol * lambda {
            let r = relative_residual(dom, &u, omega, lambda, p).0;
            if r <= tol {
                converged = true;
                break;
            }
            // lambda has settled but the residual sits at its rounding floor
            if r < 0.5 * best_res.0 {
                best_res = (r, k);
            } else if k - best_res.1 >= 5 {
                debug!("eigen residual stagnated at {r:e} (tol {tol:e})");
                break;
            }
        }
    }
    debug!("eigenpair: p = {p}, lambda1 = {lambda}, {iterations} iterations, converged = {converged}");

    let (residual_rel, residual) = relative_residual(dom, &u, omega, lambda, p);
    let u1 = ScalarField::from_raw(dom.clone(), u, true);
    let positive = dom.free_nodes().all(|i| u1.values()[i] > 0.0);
    Ok(EigenPair {
        lambda1: lambda,
        u1,
        weight: omega.clone(),
        p,
        residual,
        residual_rel,
        iterations,
        converged: converged && positive && lambda.is_finite(),
        trace,
    })
}

/// (relative, absolute) weak residual of the eigen-equation at a sup-normalized `u`.
fn relative_residual(dom: &Arc<Domain>, u: &[f64], omega: &Weight, lambda: f64, p: f64) -> (f64, f64) {
    let rhs: Vec<f64> = u.iter().zip(omega.values()).map(|(u, w)| lambda * w * u.max(0.0).powf(p - 1.0)).collect();
    let load = loads(dom, &rhs);
    let r = sup_abs(&defect(dom, u, &load, p));
    let scale = sup_abs(&load);
    (if scale > 0.0 { r / scale } else { r }, r)
}

/// The ordering `alpha <= lambda1` and its strict gap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaGap {
    pub alpha: f64,
    pub lambda1: f64,
    pub gap: f64,
    pub rel_gap: f64,
}

/// Checks `alpha <= lambda1`; a violation is an error.
pub fn check_alpha_lt_lambda1(td: &TorsionData, ep: &EigenPair) -> Result<AlphaGap> {
    if td.phi().len() != ep.u1.len() {
        return invalid("torsion and eigenpair live on different domains");
    }
    if (td.p() - ep.p).abs() > 0.0 {
        return invalid("torsion and eigenpair use different p");
    }
    let alpha = td.alpha();
    let lambda1 = ep.lambda1;
    let gap = lambda1 - alpha;
    if gap < 0.0 {
        return Err(Error::Threshold { what: "alpha".into(), value: alpha, bound: lambda1 });
    }
    Ok(AlphaGap { alpha, lambda1, gap, rel_gap: gap / lambda1 })
}

/// `lambda1 (lam/lambda1)^e <= alpha (lam/alpha)^e` with `e = (p-1)/(p-q)`, compared in logs.
pub fn amplitude_ordering(alpha: f64, lambda1: f64, lam: f64, p: f64, q: f64) -> Result<bool> {
    check_p(p)?;
    if !(q > 1.0 && q < p) {
        return invalid(format!("need 1 < q < p, got q = {q}, p = {p}"));
    }
    if !(lam > 0.0) {
        return invalid(format!("lambda must be positive, got {lam}"));
    }
    if !(alpha > 0.0 && alpha <= lambda1) {
        return invalid(format!("need 0 < alpha <= lambda1, got alpha = {alpha}, lambda1 = {lambda1}"));
    }
    let e = (p - 1.0) / (p - q);
    let lhs = lambda1.ln() + e * (lam.ln() - lambda1.ln());
    let rhs = alpha.ln() + e * (lam.ln() - alpha.ln());
    Ok(lhs <= rhs + 1e-14 * rhs.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::weak_residual;
    use crate::mesh::ResidualMode;
    use crate::plap::solve_torsion;
    use std::f64::consts::PI;

    fn unit(dom: &Arc<Domain>) -> Weight {
        Weight::constant(dom.clone(), 1.0).unwrap()
    }

    #[test]
    fn interval_p2_matches_discrete_laplacian() {
        let n = 256;
        let d = Domain::interval(1.0, n).unwrap();
        let tol = 1e-10;
        let ep = principal_eigenpair(&d, &unit(&d), 2.0, tol).unwrap();
        assert!(ep.converged);
        let h = 1.0 / n as f64;
        let discrete = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((ep.lambda1 - discrete).abs() <= 2.0 * tol * discrete);
        assert!((sup_norm(&ep.u1) - 1.0).abs() < 1e-12);
        let r = weak_residual(&ep.u1, &ep.eigen_rhs(), 2.0, ResidualMode::Equal).unwrap();
        assert!(r <= ep.residual * (1.0 + 1e-12));
    }

    #[test]
    fn eigenfunction_is_sine() {
        let d = Domain::interval(1.0, 512).unwrap();
        let ep = principal_eigenpair(&d, &unit(&d), 2.0, 1e-11).unwrap();
        for (c, v) in d.coords().iter().zip(ep.u1.values()) {
            assert!((v - (PI * c[0]).sin()).abs() < 1e-5);
        }
    }

    #[test]
    fn weight_scaling_divides_eigenvalue() {
        let d = Domain::interval(1.0, 128).unwrap();
        for p in [1.5, 3.0] {
            let a = principal_eigenpair(&d, &unit(&d), p, 1e-10).unwrap();
            let b = principal_eigenpair(&d, &unit(&d).scaled(4.0).unwrap(), p, 1e-10).unwrap();
            assert!(a.converged && b.converged, "p = {p}");
            assert!((b.lambda1 * 4.0 / a.lambda1 - 1.0).abs() < 1e-8);
            let du = a.u1.difference(&b.u1).unwrap();
            assert!(sup_norm(&du) < 1e-7);
        }
    }

    #[test]
    fn vanishing_weight_region_is_accepted() {
        let d = Domain::interval(1.0, 128).unwrap();
        let w = Weight::from_fn(d.clone(), |x, _| if x < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let ep = principal_eigenpair(&d, &w, 2.0, 1e-10).unwrap();
        assert!(ep.converged);
        assert!(ep.lambda1 > PI * PI);
    }

    #[test]
    fn alpha_gap() {
        let d = Domain::interval(1.0, 256).unwrap();
        let w = unit(&d);
        let td = solve_torsion(&d, &w, 2.0, 1e-12).unwrap();
        let ep = principal_eigenpair(&d, &w, 2.0, 1e-10).unwrap();
        let g = check_alpha_lt_lambda1(&td, &ep).unwrap();
        assert!((g.gap - (PI * PI - 8.0)).abs() < 1e-3);
    }

    #[test]
    fn amplitude_ordering_cases() {
        // exponent 2: both sides collapse to lam^2 / (.)
        assert!(amplitude_ordering(8.0, PI * PI, 1.0, 2.0, 1.5).unwrap());
        assert!(amplitude_ordering(5.0, 5.0, 0.3, 3.0, 1.2).unwrap());
        assert!(amplitude_ordering(10.0, PI * PI, 1.0, 2.0, 1.5).is_err());
        assert!(amplitude_ordering(8.0, PI * PI, 1.0, 2.0, 2.0).is_err());
    }
}
