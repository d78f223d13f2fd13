use std::io::Write;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::frozen::{frozen_gradient_solve_with, FrozenOptions};
use super::Prepared;
use crate::error::{invalid, Error, Result};
use crate::mesh::ops::{defect, dirichlet_integral, loads};
use crate::mesh::{grad_magnitude, sup_abs, ScalarField};
use crate::subsuper::{signed_pow, ProblemSpec, SubSuperPair};

/// `q_n = p - (p - q0) 2^-n` for `n = 0 .. stages - 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub q0: f64,
    pub stages: usize,
}

impl Schedule {
    pub fn exponents(&self, p: f64) -> Vec<f64> {
        (0..self.stages).map(|n| p - (p - self.q0) * 2f64.powi(-(n as i32))).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    /// Normalized iterations per stage.
    pub max_iter: usize,
    pub frozen: FrozenOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions { max_iter: 1000, frozen: FrozenOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub n: usize,
    pub q: f64,
    /// `lambda_q = lambda / |v_q|_inf^(p-q)`.
    pub lambda_q: f64,
    /// `ln |v_q|_inf` for the requested `lambda`.
    pub ln_sup_v: f64,
    /// `|v_q|_inf`, null in JSON when it leaves the floating-point range.
    pub sup_v: f64,
    pub sup_grad_u: f64,
    /// `alpha - beta mu^b <= lambda_q <= lambda1` up to `1e-6 lambda1`.
    pub in_bounds: bool,
    pub iterations: usize,
    /// Relative weak residual of the normalized problem.
    pub residual: f64,
    /// Outcome of the frozen-gradient verification run at `lambda = lambda_q`.
    pub verified: bool,
    pub sandwich_pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationTrace {
    pub p: f64,
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    pub mu: f64,
    pub lambda1: f64,
    /// `alpha - beta mu^b`.
    pub lower: f64,
    pub stages: Vec<StageRecord>,
    /// Two-level Richardson extrapolation over the final three stages.
    pub lambda_beta: f64,
    pub lambda_beta_error: f64,
    /// `lambda1 - lambda_beta`.
    pub gap: f64,
    /// max over stages of `|grad u_q|_inf` divided by its median.
    pub gradient_ratio: f64,
    pub complete: bool,
    pub failure: Option<String>,
    #[serde(skip)]
    pub u_beta: Option<ScalarField>,
}

impl ContinuationTrace {
    /// CSV with columns `n,q_n,sup_v,lambda_q`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "q_n", "sup_v", "ln_sup_v", "lambda_q"])?;
        for s in &self.stages {
            wr.write_record([
                s.n.to_string(),
                crate::report::fmt17(s.q),
                crate::report::fmt17(s.sup_v),
                crate::report::fmt17(s.ln_sup_v),
                crate::report::fmt17(s.lambda_q),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Normalized fixed point of stage `q`: `|u|_inf = 1` and
/// `-Delta_p u = L w1 u^(q-1) + beta w2 u^a |grad u|^b`, with `L` the Rayleigh-type quotient
/// `(int |grad u|^p - beta int w2 u^(a+1) |grad u|^b) / int w1 u^q`.
struct Stage {
    u: Vec<f64>,
    lambda: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn quotient(prep: &Prepared, spec: &ProblemSpec, u: &[f64]) -> f64 {
    let dom = prep.solver.domain();
    let field = ScalarField::from_raw(dom.clone(), u.to_vec(), true);
    let g = grad_magnitude(&field);
    let p_int = dirichlet_integral(dom, u, spec.p);
    let (w1, w2) = (spec.w1().values(), spec.w2().values());
    let mut q_int = 0.0;
    let mut g_int = 0.0;
    for i in dom.free_nodes() {
        let m = dom.mass()[i];
        let ui = u[i].max(0.0);
        q_int += m * w1[i] * ui.powf(spec.q);
        if spec.beta != 0.0 {
            g_int += m * w2[i] * ui.powf(spec.a + 1.0) * g.values()[i].powf(spec.b);
        }
    }
    (p_int - spec.beta * g_int) / q_int
}

fn stage_rhs(spec: &ProblemSpec, lambda: f64, u: &[f64], grad: &[f64]) -> Vec<f64> {
    let (w1, w2) = (spec.w1().values(), spec.w2().values());
    u.iter()
        .zip(grad)
        .enumerate()
        .map(|(i, (&u, &g))| {
            let u = u.max(0.0);
            let mut f = lambda * w1[i] * u.powf(spec.q - 1.0);
            if spec.beta != 0.0 {
                f += spec.beta * w2[i] * signed_pow(u, spec.a) * g.powf(spec.b);
            }
            f
        })
        .collect()
}

fn solve_stage(prep: &Prepared, spec: &ProblemSpec, start: &[f64], tol: f64, opts: &ContinuationOptions) -> Stage {
    let dom = prep.solver.domain().clone();
    let mut u = start.to_vec();
    let mut lambda = quotient(prep, spec, &u);
    let mut warm: Option<Vec<f64>> = None;
    let mut best = (f64::INFINITY, 0);
    let mut residual = f64::INFINITY;
    for k in 0..opts.max_iter {
        let field = ScalarField::from_raw(dom.clone(), u.clone(), true);
        let rhs = stage_rhs(spec, lambda, &u, grad_magnitude(&field).values());
        let load = loads(&dom, &rhs);
        let sol = prep.solver.solve_load(&load, opts.frozen.inner_rel_tol * sup_abs(&load), warm.as_deref());
        let t = sup_abs(sol.u.values());
        if !(t > 0.0 && t.is_finite()) {
            break;
        }
        let next: Vec<f64> = sol.u.values().iter().map(|v| v / t).collect();
        warm = Some(sol.u.into_values());
        let next_lambda = quotient(prep, spec, &next);
        let dl = (next_lambda - lambda).abs();
        u = next;
        lambda = next_lambda;

        let field = ScalarField::from_raw(dom.clone(), u.clone(), true);
        let rhs = stage_rhs(spec, lambda, &u, grad_magnitude(&field).values());
        let load = loads(&dom, &rhs);
        let r = sup_abs(&defect(&dom, &u, &load, spec.p));
        residual = r / sup_abs(&load);
        if dl <= tol * lambda && residual <= tol {
            return Stage { u, lambda, iterations: k + 1, residual, converged: true };
        }
        if residual < 0.5 * best.0 {
            best = (residual, k);
        } else if dl <= tol * lambda && k - best.1 >= 10 {
            debug!("stage q = {}: residual stagnated at {residual:e}", spec.q);
            break;
        }
    }
    Stage { u, lambda, iterations: opts.max_iter, residual, converged: false }
}

fn richardson(l: &[f64]) -> (f64, f64) {
    match l.len() {
        0 => (f64::NAN, f64::NAN),
        1 | 2 => (l[l.len() - 1], f64::NAN),
        n => {
            let (a, b, c) = (l[n - 3], l[n - 2], l[n - 1]);
            let r1_prev = 2.0 * b - a;
            let r1 = 2.0 * c - b;
            let r2 = (4.0 * r1 - r1_prev) / 3.0;
            (r2, (r2 - r1).abs())
        }
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Runs the two-parameter problem (`a + b = p - 1`) along `q_n -> p^-`.
///
/// Each stage computes the normalized profile `u_q = v_q / |v_q|_inf` and
/// `lambda_q = lambda / |v_q|_inf^(p-q)` directly, then re-solves `-Delta_p v = f` at
/// `lambda = lambda_q` with the frozen-gradient iteration inside the pair
/// `(lambda_q/lambda1)^(1/(p-q)) u1 <= v <= (lambda_q/(alpha - beta mu^b))^(1/(p-q)) phi/|phi|_inf`.
/// A stage that fails truncates the schedule.
pub fn continuation_q_to_p(
    prep: &Prepared,
    schedule: &Schedule,
    tol: f64,
    opts: &ContinuationOptions,
) -> Result<ContinuationTrace> {
    let spec = &prep.spec;
    if !spec.is_two_param() {
        return invalid("continuation needs the two-parameter form");
    }
    let (p, b) = (spec.p, spec.b);
    if (spec.a + b - (p - 1.0)).abs() > 1e-12 {
        return invalid(format!("need a + b = p - 1, got a + b = {}", spec.a + b));
    }
    if !(schedule.q0 > 1.0 && schedule.q0 < p && schedule.stages > 0) {
        return invalid(format!("need 1 < q0 < p and at least one stage, got q0 = {}", schedule.q0));
    }
    if !(spec.lam > 0.0) {
        return invalid("lambda must be positive");
    }
    let (alpha, mu, lambda1) = (prep.td.alpha(), prep.td.mu(), prep.ep.lambda1);
    let beta_max = alpha / mu.powf(b);
    if spec.beta >= beta_max {
        return Err(Error::Threshold { what: "beta".into(), value: spec.beta, bound: beta_max });
    }
    let lower = alpha - spec.beta * mu.powf(b);
    let dom = prep.solver.domain().clone();
    let phi_hat: Vec<f64> = prep.td.normalized_scaled(1.0).into_values();

    let mut stages = Vec::new();
    let mut lambdas = Vec::new();
    let mut grads = Vec::new();
    let mut failure = None;
    let mut u = prep.ep.u1.values().to_vec();
    for (n, q) in schedule.exponents(p).into_iter().enumerate() {
        let sq = spec.with_q(q)?;
        let st = solve_stage(prep, &sq, &u, tol, opts);
        if !st.converged {
            failure = Some(format!("stage {n} (q = {q}) did not converge: residual {:e}", st.residual));
            break;
        }
        let lq = st.lambda;
        let field = ScalarField::from_raw(dom.clone(), st.u.clone(), true);

        // frozen-gradient verification at lambda = lambda_q, where v = u_q
        let run = sq.with_params(lq, spec.beta)?;
        let eps = ((lq / lambda1).ln() / (p - q)).exp();
        let m = ((lq / lower).ln() / (p - q)).exp();
        let sub = prep.ep.u1.scaled(eps);
        let sup = ScalarField::from_raw(dom.clone(), phi_hat.iter().map(|v| m * v).collect(), true);
        let pair = SubSuperPair::new(sub, eps, sup, m)?;
        let check = if pair.ordered && m.is_finite() {
            Some(frozen_gradient_solve_with(&prep.solver, &run, &pair, tol, Some(&field), &opts.frozen)?)
        } else {
            None
        };
        let verified = check.as_ref().is_some_and(|c| c.converged);
        let sandwich_pass = check.as_ref().is_some_and(|c| c.sandwich_pass);

        let ln_sup_v = (spec.lam.ln() - lq.ln()) / (p - q);
        let slack = 1e-6 * lambda1;
        let g = sup_abs(grad_magnitude(&field).values());
        stages.push(StageRecord {
            n,
            q,
            lambda_q: lq,
            ln_sup_v,
            sup_v: ln_sup_v.exp(),
            sup_grad_u: g,
            in_bounds: lq >= lower - slack && lq <= lambda1 + slack,
            iterations: st.iterations,
            residual: st.residual,
            verified,
            sandwich_pass,
        });
        debug!("continuation stage {n}: q = {q}, lambda_q = {lq}, {} iterations", st.iterations);
        lambdas.push(lq);
        grads.push(g);
        u = st.u;
        if !verified {
            failure = Some(format!("stage {n} (q = {q}) failed the frozen-gradient verification"));
            break;
        }
    }
    if let Some(f) = &failure {
        warn!("continuation truncated: {f}");
    }
    let (lambda_beta, lambda_beta_error) = richardson(&lambdas);
    let gradient_ratio =
        if grads.is_empty() { f64::NAN } else { grads.iter().cloned().fold(0.0, f64::max) / median(&grads) };
    Ok(ContinuationTrace {
        p,
        lambda: spec.lam,
        beta: spec.beta,
        alpha,
        mu,
        lambda1,
        lower,
        complete: failure.is_none(),
        stages,
        lambda_beta,
        lambda_beta_error,
        gap: lambda1 - lambda_beta,
        gradient_ratio,
        failure,
        u_beta: Some(ScalarField::from_raw(dom, u, true)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_halves_the_distance() {
        let s = Schedule { q0: 1.5, stages: 4 };
        assert_eq!(s.exponents(2.0), vec![1.5, 1.75, 1.875, 1.9375]);
    }

    #[test]
    fn richardson_is_exact_on_quadratics_in_spacing() {
        // l(h) = 3 + 2h + 5h^2 sampled at h = 1, 1/2, 1/4
        let l: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|h| 3.0 + 2.0 * h + 5.0 * h * h).collect();
        let (r, _) = richardson(&l);
        assert!((r - 3.0).abs() < 1e-14);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
