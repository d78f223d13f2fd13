use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::thresholds::{
    example1_thresholds, example2_box, example2_thresholds, Example1Thresholds, Example2Thresholds,
};
use crate::error::{invalid, Error, Result};
use crate::mesh::{sup_abs, sup_norm, weak_residual, ResidualMode, ScalarField};
use crate::solve::{frozen_gradient_solve_with, FrozenOptions, Prepared, SolveReport, SolveSummary};
use crate::subsuper::{
    check_h1, check_h2, check_h3, solve_m_root, source_field, subsolution_abstract, subsolution_eps,
    supersolution_two_param, Form, H1Report, HypothesisReport, Sampling, Source, SubSuperPair,
};

/// `lower <= |u|_inf <= upper`, plus the nodewise margins against the pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub sup_u: f64,
    /// `min(u - sub) / |u|_inf`.
    pub sub_margin: f64,
    /// `min(sup - u) / |u|_inf`.
    pub super_margin: f64,
    pub pass: bool,
}

/// Relative slack of the bracket and nodewise checks.
pub const BRACKET_SLACK: f64 = 1e-6;

impl Bracket {
    pub fn new(u: &ScalarField, pair: &SubSuperPair, lower: f64, upper: f64) -> Self {
        let sup_u = sup_norm(u);
        let scale = sup_u.max(f64::MIN_POSITIVE);
        let lo = u.values().iter().zip(pair.sub.values()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        let hi = pair.sup.values().iter().zip(u.values()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        let (sub_margin, super_margin) = (lo / scale, hi / scale);
        let tol = BRACKET_SLACK * sup_u;
        let pass = sub_margin >= -BRACKET_SLACK
            && super_margin >= -BRACKET_SLACK
            && sup_u >= lower - tol
            && sup_u <= upper + tol;
        Bracket { lower, upper, sup_u, sub_margin, super_margin, pass }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairSummary {
    pub eps: f64,
    pub m: f64,
    pub ordered: bool,
    pub margin: f64,
    pub sub_residual: f64,
    pub super_residual: f64,
}

/// A solve inside an explicit pair with its bracket check.
#[derive(Clone, Debug)]
pub struct PairSolve {
    pub pair: SubSuperPair,
    pub pair_summary: PairSummary,
    pub report: SolveReport,
    pub bracket: Bracket,
}

fn super_residual(f: &dyn Source, sup: &ScalarField, p: f64) -> Result<f64> {
    weak_residual(sup, &source_field(f, sup), p, ResidualMode::Super)
}

fn solve_in_pair(
    prep: &Prepared,
    pair: SubSuperPair,
    sub_residual: f64,
    lower: f64,
    upper: f64,
    opts: &FrozenOptions,
) -> Result<PairSolve> {
    let spec = &prep.spec;
    let pair_summary = PairSummary {
        eps: pair.eps,
        m: pair.m,
        ordered: pair.ordered,
        margin: pair.margin,
        sub_residual,
        super_residual: super_residual(spec, &pair.sup, spec.p)?,
    };
    if !pair.ordered {
        return Err(Error::Threshold { what: "pair margin".into(), value: pair.margin, bound: 0.0 });
    }
    let report = frozen_gradient_solve_with(&prep.solver, spec, &pair, prep.tol.solve, None, opts)?;
    let bracket = Bracket::new(&report.solution, &pair, lower, upper);
    Ok(PairSolve { pair, pair_summary, report, bracket })
}

/// Two-parameter problem with `q < p`: pair from the explicit super-solution (`a + b = p - 1`)
/// or the root of the M-equation (`a + b < p - 1`), then a frozen-gradient solve.
pub fn two_param_driver(prep: &Prepared, opts: &FrozenOptions) -> Result<PairSolve> {
    let spec = &prep.spec;
    if !spec.is_two_param() || !(spec.q < spec.p) {
        return invalid("two_param_driver needs the two-parameter form with q < p");
    }
    let (sup, m) = if (spec.a + spec.b - (spec.p - 1.0)).abs() <= 1e-12 {
        let s = supersolution_two_param(spec, &prep.td)?;
        (s.field, s.m)
    } else {
        let root = solve_m_root(spec, &prep.td)?;
        (prep.td.normalized_scaled(root.m), root.m)
    };
    let sub = subsolution_eps(spec, &prep.ep)?;
    let pair = SubSuperPair::new(sub.field, sub.eps, sup, m)?;
    solve_in_pair(prep, pair, sub.residual, sub.eps, m, opts)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisChecks {
    pub h1: H1Report,
    pub h2: HypothesisReport,
    pub h3: HypothesisReport,
}

impl HypothesisChecks {
    pub fn pass(&self) -> bool {
        self.h1.report.pass && self.h2.pass && self.h3.pass
    }
}

#[derive(Clone, Debug)]
pub struct Example1Outcome {
    pub thresholds: Example1Thresholds,
    pub hypotheses: HypothesisChecks,
    /// `None` when a hypothesis failed.
    pub solve: Option<PairSolve>,
}

/// `f = lambda w u^(q-1) (1 + |grad u|^p)` for `0 < lambda <= lambda_*`.
///
/// The pair is `(eps u1, M_* phi/|phi|_inf)` with
/// `eps = min((lambda/lambda1)^(1/(p-q)), (alpha M_*^(p-1) / lambda1)^(1/(p-1)))`.
pub fn example1_driver(prep: &Prepared, sampling: &Sampling, opts: &FrozenOptions) -> Result<Example1Outcome> {
    let spec = &prep.spec;
    if !matches!(spec.form, Form::Example1) {
        return invalid("example1_driver needs the Example 1 form");
    }
    let (p, q, lam) = (spec.p, spec.q, spec.lam);
    let (alpha, mu, lambda1) = (prep.td.alpha(), prep.td.mu(), prep.ep.lambda1);
    let thresholds = example1_thresholds(p, q, alpha, mu)?;
    if lam > thresholds.lambda_star {
        return Err(Error::Threshold { what: "lambda".into(), value: lam, bound: thresholds.lambda_star });
    }
    if !(lam > 0.0) {
        return invalid("lambda must be positive");
    }
    let mstar = thresholds.m_star;
    let hypotheses = HypothesisChecks {
        h1: check_h1(spec, spec.domain(), p, mstar, mu * mstar, sampling)?,
        h2: check_h2(spec, &prep.ep, mu, mstar, sampling)?,
        h3: check_h3(spec, &prep.td, mstar, sampling)?,
    };
    if !hypotheses.pass() {
        warn!("Example 1 hypotheses failed at lambda = {lam}");
        return Ok(Example1Outcome { thresholds, hypotheses, solve: None });
    }
    let eps_sub = ((lam / lambda1).ln() / (p - q)).exp();
    let eps_box = ((alpha.ln() + (p - 1.0) * mstar.ln() - lambda1.ln()) / (p - 1.0)).exp();
    let sub = subsolution_abstract(spec, p, &prep.ep, eps_sub.min(eps_box))?;
    let pair = SubSuperPair::new(sub.field, sub.eps, prep.td.normalized_scaled(mstar), mstar)?;
    let solve = solve_in_pair(prep, pair, sub.residual, eps_sub, mstar, opts)?;
    Ok(Example1Outcome { thresholds, hypotheses, solve: Some(solve) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Example2Comparison {
    pub direct: SolveSummary,
    pub transformed: SolveSummary,
    /// `sup |u_direct - (p-1) ln(1 + w)|`.
    pub discrepancy: f64,
    /// `10 (tol_direct + tol_transformed) max(|u|_inf, 1)`.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct Example2Outcome {
    pub thresholds: Example2Thresholds,
    /// Box size of the super-solution.
    pub m: f64,
    pub h3: Option<HypothesisReport>,
    pub direct: Option<PairSolve>,
    pub transformed: Option<SolveReport>,
    pub comparison: Option<Example2Comparison>,
    /// `u = (p-1) ln(1 + w)` from the transformed solve.
    pub mapped: Option<ScalarField>,
}

/// `w = e^(u/(p-1)) - 1` applied nodewise.
pub fn to_transformed(u: &ScalarField, p: f64) -> ScalarField {
    ScalarField::from_raw(u.domain().clone(), u.values().iter().map(|v| (v / (p - 1.0)).exp_m1()).collect(), true)
}

/// `u = (p-1) ln(1 + w)` applied nodewise.
pub fn from_transformed(w: &ScalarField, p: f64) -> ScalarField {
    ScalarField::from_raw(w.domain().clone(), w.values().iter().map(|v| (p - 1.0) * v.ln_1p()).collect(), true)
}

/// `lambda c(x) u^(q-1) + |grad u|^p` solved directly and through `w = e^(u/(p-1)) - 1`,
/// which turns the problem into `-Delta_p w = (p-1)^(1-p) (1+w)^(p-1) lambda c(x) ((p-1) ln(1+w))^(q-1)`.
pub fn example2_driver(prep: &Prepared, sampling: &Sampling, opts: &FrozenOptions) -> Result<Example2Outcome> {
    let spec = &prep.spec;
    let Form::Example2 { coeff, c1, .. } = &spec.form else {
        return invalid("example2_driver needs the Example 2 form");
    };
    let (p, q, lam) = (spec.p, spec.q, spec.lam);
    let (mu, w_inf) = (prep.td.mu(), spec.omega().inf());
    let alpha_eff = prep.td.alpha() * w_inf;
    if !(alpha_eff > 0.0) {
        return invalid("the weight must be positive everywhere");
    }
    let thresholds = example2_thresholds(*c1, p, q, alpha_eff, mu)?;
    let bound = thresholds.admissible_max();
    if lam > bound {
        return Err(Error::Threshold { what: "lambda".into(), value: lam, bound });
    }
    let dom = spec.domain().clone();
    if lam == 0.0 {
        let zero = ScalarField::zeros(dom);
        return Ok(Example2Outcome {
            thresholds,
            m: 0.0,
            h3: None,
            direct: None,
            transformed: None,
            comparison: None,
            mapped: Some(zero),
        });
    }
    let m = example2_box(lam * c1, p, q, alpha_eff, mu).ok_or(Error::Threshold {
        what: "lambda".into(),
        value: lam,
        bound: thresholds.boxed,
    })?;
    let h3 = check_h3(spec, &prep.td, m, sampling)?;
    if !h3.pass {
        return Ok(Example2Outcome {
            thresholds,
            m,
            h3: Some(h3),
            direct: None,
            transformed: None,
            comparison: None,
            mapped: None,
        });
    }
    let sub = subsolution_eps(spec, &prep.ep)?;
    let pair = SubSuperPair::new(sub.field, sub.eps, prep.td.normalized_scaled(m), m)?;
    let direct = solve_in_pair(prep, pair.clone(), sub.residual, sub.eps, m, opts)?;

    let c = coeff.values().to_vec();
    let k = (p - 1.0).powf(1.0 - p);
    let g = move |i: usize, w: f64, _: f64| {
        let w = w.max(0.0);
        k * (1.0 + w).powf(p - 1.0) * lam * c[i] * ((p - 1.0) * w.ln_1p()).powf(q - 1.0)
    };
    let wpair = SubSuperPair::new(to_transformed(&pair.sub, p), pair.eps, to_transformed(&pair.sup, p), pair.m)?;
    let transformed = frozen_gradient_solve_with(&prep.solver, &g, &wpair, prep.tol.solve, None, opts)?;
    let mapped = from_transformed(&transformed.solution, p);

    let diff = mapped.values().iter().zip(direct.report.solution.values()).map(|(a, b)| a - b).collect::<Vec<_>>();
    let discrepancy = sup_abs(&diff);
    let tolerance = 10.0 * 2.0 * prep.tol.solve * direct.report.sup_u.max(1.0);
    info!("Example 2: direct vs transformed discrepancy {discrepancy:e} (tolerance {tolerance:e})");
    let comparison = Example2Comparison {
        direct: direct.report.summary(),
        transformed: transformed.summary(),
        discrepancy,
        tolerance,
        pass: direct.report.converged && transformed.converged && discrepancy <= tolerance,
    };
    Ok(Example2Outcome {
        thresholds,
        m,
        h3: Some(h3),
        direct: Some(direct),
        transformed: Some(transformed),
        comparison: Some(comparison),
        mapped: Some(mapped),
    })
}
