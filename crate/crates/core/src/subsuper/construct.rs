use serde::{Deserialize, Serialize};

use super::{source_field, Form, ProblemSpec, Source};
use crate::eigen::EigenPair;
use crate::error::{invalid, Error, Result};
use crate::mesh::ops::{defect, loads, reduce_defect};
use crate::mesh::{grad_magnitude, sup_abs, sup_norm, ResidualMode, ScalarField};
use crate::plap::TorsionData;

/// Super-solution amplitudes beyond this are treated as overflow.
pub const M_OVERFLOW: f64 = 1e12;

/// `U = M phi / |phi|_inf`.
#[derive(Clone, Debug)]
pub struct SuperSolution {
    pub field: ScalarField,
    pub m: f64,
    /// Relative defect of `alpha M^(p-1) = lam M^(q-1) + beta mu^b M^(a+b)`.
    pub identity_error: f64,
    /// Largest violation of the weak super-solution inequality (load units).
    pub residual: f64,
}

/// `u = eps u1`, checked against the weak sub-solution inequality.
#[derive(Clone, Debug)]
pub struct SubSolution {
    pub field: ScalarField,
    pub eps: f64,
    /// Largest violation of the weak sub-solution inequality (load units).
    pub residual: f64,
    pub tolerance: f64,
}

/// Positive root of `g(M) = alpha M^(p-1) - lam M^(q-1) - beta mu^b M^(a+b)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MRoot {
    pub m: f64,
    pub g: f64,
    /// `|g(M)| / max(alpha M^(p-1), 1)`.
    pub rel_residual: f64,
    /// `alpha M^(p-1) >= lam M^(q-1)`.
    pub ordering_holds: bool,
    pub iterations: usize,
}

fn check_two_param(spec: &ProblemSpec) -> Result<()> {
    if !spec.is_two_param() {
        return invalid("operation needs the two-parameter form");
    }
    if !(spec.q < spec.p) {
        return invalid(format!("need q < p, got q = {}, p = {}", spec.q, spec.p));
    }
    Ok(())
}

fn check_torsion(td: &TorsionData, spec: &ProblemSpec) -> Result<()> {
    if td.phi().len() != spec.domain().num_nodes() || td.p() != spec.p {
        return invalid("torsion data does not belong to this problem");
    }
    Ok(())
}

/// Largest violation of the weak (in)equality for `-Delta_p u` against `f(x, u, grad u)`:
/// (node, violation, load scale).
pub(crate) fn inequality_defect(f: &dyn Source, u: &ScalarField, p: f64, mode: ResidualMode) -> (usize, f64, f64) {
    let dom = u.domain();
    let rhs = source_field(f, u);
    let load = loads(dom, rhs.values());
    let (node, v) = reduce_defect(&defect(dom, u.values(), &load, p), mode);
    (node, v, sup_abs(&load))
}

/// Super-solution of the two-parameter problem with `a + b = p - 1`,
/// `M = (lam / (alpha - beta mu^b))^(1/(p-q))`.
pub fn supersolution_two_param(spec: &ProblemSpec, td: &TorsionData) -> Result<SuperSolution> {
    check_two_param(spec)?;
    check_torsion(td, spec)?;
    let (p, q, a, b) = (spec.p, spec.q, spec.a, spec.b);
    if (a + b - (p - 1.0)).abs() > 1e-12 {
        return invalid(format!("need a + b = p - 1, got a + b = {}", a + b));
    }
    if !(spec.lam > 0.0) {
        return invalid("lambda must be positive");
    }
    let (alpha, mu) = (td.alpha(), td.mu());
    let beta_max = alpha / mu.powf(b);
    if spec.beta >= beta_max {
        return Err(Error::Threshold { what: "beta".into(), value: spec.beta, bound: beta_max });
    }
    let denom = alpha - spec.beta * mu.powf(b);
    let ln_m = (spec.lam.ln() - denom.ln()) / (p - q);
    if ln_m > M_OVERFLOW.ln() {
        return Err(Error::Overflow(format!("M = exp({ln_m:.6}) exceeds {M_OVERFLOW:e}")));
    }
    let m = ln_m.exp();
    let lhs = alpha * m.powf(p - 1.0);
    let rhs = spec.lam * m.powf(q - 1.0) + spec.beta * mu.powf(b) * m.powf(a + b);
    let identity_error = (lhs - rhs).abs() / lhs;
    if !(identity_error <= 1e-12) {
        return Err(Error::Identity(format!("alpha M^(p-1) = {lhs:e} but lam M^(q-1) + beta mu^b M^(a+b) = {rhs:e}")));
    }
    let field = td.normalized_scaled(m);
    let residual = inequality_defect(spec, &field, p, ResidualMode::Super).1;
    Ok(SuperSolution { field, m, identity_error, residual })
}

/// Solves `alpha M^(p-1) = lam M^(q-1) + beta mu^b M^(a+b)` for `a + b < p - 1`.
///
/// `g(M) / M^(p-1) = alpha - lam M^(q-p) - beta mu^b M^(a+b+1-p)` is strictly increasing, so
/// bisection in `ln M` on that quotient finds the unique root. `beta = 0` has the closed form
/// `(lam/alpha)^(1/(p-q))`.
pub fn solve_m_root(spec: &ProblemSpec, td: &TorsionData) -> Result<MRoot> {
    check_two_param(spec)?;
    check_torsion(td, spec)?;
    let (p, q, a, b) = (spec.p, spec.q, spec.a, spec.b);
    if spec.beta > 0.0 && !(a + b < p - 1.0) {
        return invalid(format!("need a + b < p - 1, got a + b = {}", a + b));
    }
    if !(spec.lam > 0.0) {
        return invalid("lambda must be positive");
    }
    let (alpha, lam) = (td.alpha(), spec.lam);
    let c = spec.beta * td.mu().powf(b);
    let g = |m: f64| alpha * m.powf(p - 1.0) - lam * m.powf(q - 1.0) - c * m.powf(a + b);
    let finish = |m: f64, iterations: usize| {
        let gm = g(m);
        let top = alpha * m.powf(p - 1.0);
        MRoot {
            m,
            g: gm,
            rel_residual: gm.abs() / top.max(1.0),
            ordering_holds: top >= lam * m.powf(q - 1.0) * (1.0 - 1e-14),
            iterations,
        }
    };
    if spec.beta == 0.0 {
        return Ok(finish(((lam.ln() - alpha.ln()) / (p - q)).exp(), 0));
    }

    // quotient as a function of s = ln M, increasing
    let h = |s: f64| alpha - lam * ((q - p) * s).exp() - c * ((a + b + 1.0 - p) * s).exp();
    let (mut lo, mut hi) = (1e-12f64.ln(), 1e12f64.ln());
    let limit = 700.0;
    while h(lo) > 0.0 && lo > -limit {
        lo = (lo - 6.0 * std::f64::consts::LN_10).max(-limit);
    }
    while h(hi) < 0.0 && hi < limit {
        hi = (hi + 6.0 * std::f64::consts::LN_10).min(limit);
    }
    let (h_lo, h_hi) = (h(lo), h(hi));
    if !(h_lo <= 0.0 && h_hi >= 0.0) {
        return Err(Error::NoBracket { lo: lo.exp(), hi: hi.exp(), g_lo: g(lo.exp()), g_hi: g(hi.exp()) });
    }
    let mut iterations = 0;
    while iterations < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller |h|
    let s = if h(lo).abs() <= h(hi).abs() { lo } else { hi };
    let root = finish(s.exp(), iterations);
    if !root.ordering_holds {
        return Err(Error::Identity(format!("alpha M^(p-1) < lam M^(q-1) at the root M = {:e}", root.m)));
    }
    Ok(root)
}

/// Sub-solution `eps u1`. The two-parameter form and Example 1 use
/// `eps = (lam/lambda1)^(1/(p-q))`, Example 2 uses `eps = (lam c0 / (lambda1 sup w))^(1/(p-q))`;
/// custom nonlinearities need [`subsolution_abstract`] with an explicit `eps`.
pub fn subsolution_eps(spec: &ProblemSpec, ep: &EigenPair) -> Result<SubSolution> {
    let (p, q) = (spec.p, spec.q);
    if !(q < p) {
        return invalid(format!("need q < p, got q = {q}, p = {p}"));
    }
    if !(spec.lam > 0.0) {
        return invalid("lambda must be positive");
    }
    let ratio = match &spec.form {
        Form::TwoParam | Form::Example1 => spec.lam / ep.lambda1,
        Form::Example2 { c0, .. } => spec.lam * c0 / (ep.lambda1 * ep.weight.sup()),
        Form::Custom(_) => return invalid("custom nonlinearities need an explicit eps"),
    };
    let eps = (ratio.ln() / (p - q)).exp();
    subsolution_abstract(spec, spec.p, ep, eps)
}

/// Checks `eps u1` against the weak sub-solution inequality for `f`.
///
/// The allowed violation is `10 eps^(p-1)` times the eigenpair's own residual plus
/// `1e-12` of the load scale: at nodes where `f` touches `lambda1 w u^(p-1)` nothing better
/// is available.
pub fn subsolution_abstract(f: &dyn Source, p: f64, ep: &EigenPair, eps: f64) -> Result<SubSolution> {
    if p != ep.p {
        return invalid("eigenpair belongs to another p");
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    let field = ep.u1.scaled(eps);
    let (node, residual, scale) = inequality_defect(f, &field, p, ResidualMode::Sub);
    let tolerance = 10.0 * eps.powf(p - 1.0) * ep.residual + 1e-12 * scale;
    if residual > tolerance {
        return Err(Error::SubSolution { node, violation: residual, tolerance });
    }
    Ok(SubSolution { field, eps, residual, tolerance })
}

/// The abstract-problem choice `eps = min{eps0, M, mu M / |grad u1|_inf} / 2`.
pub fn abstract_eps(eps0: f64, m: f64, mu: f64, ep: &EigenPair) -> f64 {
    let g = sup_norm(&grad_magnitude(&ep.u1));
    0.5 * eps0.min(m).min(mu * m / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::principal_eigenpair;
    use crate::mesh::{weak_residual, Domain, Weight};
    use crate::plap::{compare_fields, solve_torsion};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(n: usize, p: f64) -> (Arc<Domain>, Weight, TorsionData) {
        let d = Domain::interval(1.0, n).unwrap();
        let w = Weight::constant(d.clone(), 1.0).unwrap();
        let td = solve_torsion(&d, &w, p, 1e-13).unwrap();
        (d, w, td)
    }

    fn two(p: f64, q: f64, a: f64, b: f64, lam: f64, beta: f64, w: &Weight) -> ProblemSpec {
        ProblemSpec::two_param(p, q, a, b, lam, beta, w.clone(), w.clone()).unwrap()
    }

    #[test]
    fn super_m_closed_form() {
        let (_, w, td) = setup(1024, 2.0);
        let s = supersolution_two_param(&two(2.0, 1.5, 0.5, 0.5, 1.0, 0.0, &w), &td).unwrap();
        let alpha = td.alpha();
        assert!((s.m - alpha.powi(-2)).abs() < 1e-15);
        assert!((s.m - 0.015625).abs() < 1e-5);
        assert!(s.identity_error <= 1e-12);
        assert!((sup_norm(&s.field) - s.m).abs() < 1e-15);
    }

    #[test]
    fn super_m_is_one_at_balance() {
        let (_, w, td) = setup(256, 2.0);
        let beta = 0.3 * td.alpha() / td.mu().sqrt();
        let lam = td.alpha() - beta * td.mu().sqrt();
        let s = supersolution_two_param(&two(2.0, 1.5, 0.5, 0.5, lam, beta, &w), &td).unwrap();
        assert!((s.m - 1.0).abs() < 1e-14);
    }

    #[test]
    fn super_threshold_and_overflow() {
        let (_, w, td) = setup(256, 2.0);
        let bmax = td.alpha() / td.mu().sqrt();
        let e = supersolution_two_param(&two(2.0, 1.5, 0.5, 0.5, 1.0, bmax, &w), &td).unwrap_err();
        assert!(matches!(e, Error::Threshold { bound, .. } if (bound - bmax).abs() < 1e-12));
        let near = bmax * (1.0 - 1e-12);
        let e = supersolution_two_param(&two(2.0, 1.5, 0.5, 0.5, 1.0, near, &w), &td).unwrap_err();
        assert!(matches!(e, Error::Overflow(_)));
    }

    #[test]
    fn super_is_weak_supersolution() {
        for p in [1.5, 2.0, 3.0] {
            let (_, w, td) = setup(256, p);
            let (a, b) = (0.4 * (p - 1.0), 0.6 * (p - 1.0));
            let beta = 0.5 * td.alpha() / td.mu().powf(b);
            let s = supersolution_two_param(&two(p, 1.2, a, b, 0.7, beta, &w), &td).unwrap();
            let scale = (s.m / td.sup_phi()).powf(p - 1.0);
            assert!(s.residual <= 10.0 * scale * td.residual + 1e-14, "p = {p}: {}", s.residual);
        }
    }

    #[test]
    fn m_root_closed_form_at_beta_zero() {
        let (_, w, td) = setup(256, 2.0);
        let r = solve_m_root(&two(2.0, 1.5, 0.3, 0.3, 1.0, 0.0, &w), &td).unwrap();
        assert_eq!(r.m, ((1.0f64.ln() - td.alpha().ln()) / 0.5).exp());
    }

    #[test]
    fn m_root_rejects_bad_exponents() {
        let (_, w, td) = setup(64, 2.0);
        assert!(solve_m_root(&two(2.0, 1.5, 0.5, 0.5, 1.0, 1.0, &w), &td).is_err());
        assert!(solve_m_root(&two(2.0, 2.0, 0.3, 0.3, 1.0, 1.0, &w), &td).is_err());
    }

    #[test]
    fn sub_eps_closed_form() {
        let (d, w, _) = setup(1024, 2.0);
        let ep = principal_eigenpair(&d, &w, 2.0, 1e-10).unwrap();
        let s = subsolution_eps(&two(2.0, 1.5, 0.5, 0.5, 1.0, 0.0, &w), &ep).unwrap();
        assert!((s.eps - PI.powi(-4)).abs() < 1e-6);
        let s1 = subsolution_eps(&two(2.0, 1.5, 0.5, 0.5, ep.lambda1, 0.0, &w), &ep).unwrap();
        assert!((s1.eps - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sub_check_rejects_large_eps() {
        let (d, w, _) = setup(256, 2.0);
        let ep = principal_eigenpair(&d, &w, 2.0, 1e-10).unwrap();
        let spec = two(2.0, 1.5, 0.5, 0.5, 1.0, 0.0, &w);
        let e = subsolution_abstract(&spec, 2.0, &ep, 0.5).unwrap_err();
        assert!(matches!(e, Error::SubSolution { .. }));
    }

    #[test]
    fn pair_is_ordered_and_sub_residual_small() {
        let (d, w, td) = setup(256, 3.0);
        let ep = principal_eigenpair(&d, &w, 3.0, 1e-10).unwrap();
        let spec = two(3.0, 2.0, 1.0, 1.0, 2.0, 0.2 * td.alpha() / td.mu(), &w);
        let sub = subsolution_eps(&spec, &ep).unwrap();
        let sup = supersolution_two_param(&spec, &td).unwrap();
        assert!(compare_fields(&sub.field, &sup.field).unwrap().ordered);
        let rhs = source_field(&spec, &sub.field);
        let r = weak_residual(&sub.field, &rhs, 3.0, ResidualMode::Sub).unwrap();
        assert!(r <= sub.tolerance);
    }
}
