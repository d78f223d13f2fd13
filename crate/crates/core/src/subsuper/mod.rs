//! Problem data, the explicit sub- and super-solutions, the M-root equation and sampled
//! checks of the structural hypotheses on `f(x, u, grad u)`.

mod construct;
mod hypotheses;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{grad_magnitude, Domain, ScalarField, Weight};
use crate::plap::{check_p, compare_fields};

pub use construct::{
    abstract_eps, solve_m_root, subsolution_abstract, subsolution_eps, supersolution_two_param, MRoot, SubSolution,
    SuperSolution, M_OVERFLOW,
};
pub use hypotheses::{check_h1, check_h2, check_h3, H1Report, HypothesisReport, Sampling, Witness};

/// A nonlinearity `f(x, u, |grad u|)` evaluated at grid node `node`.
pub trait Source: Send + Sync {
    fn eval(&self, node: usize, u: f64, v: f64) -> f64;
}

impl<F: Fn(usize, f64, f64) -> f64 + Send + Sync> Source for F {
    fn eval(&self, node: usize, u: f64, v: f64) -> f64 {
        self(node, u, v)
    }
}

/// `|u|^(e-1) u`
#[inline]
pub(crate) fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(e)
    }
}

/// Which right-hand side a [`ProblemSpec`] describes.
#[derive(Clone)]
pub enum Form {
    /// `lam w1 |u|^(q-2) u + beta w2 |u|^(a-1) u |grad u|^b`
    TwoParam,
    /// `lam w u^(q-1) (1 + |grad u|^p)`
    Example1,
    /// `lam c(x) u^(q-1) + |grad u|^p`, with `c0 <= c(x) <= c1`.
    Example2 {
        coeff: ScalarField,
        c0: f64,
        c1: f64,
    },
    Custom(Arc<dyn Source>),
}

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Form::TwoParam => write!(f, "TwoParam"),
            Form::Example1 => write!(f, "Example1"),
            Form::Example2 { c0, c1, .. } => write!(f, "Example2 {{ c0: {c0}, c1: {c1} }}"),
            Form::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Exponents, parameters and weights of a Dirichlet problem `-Delta_p u = f(x, u, grad u)`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub lam: f64,
    pub beta: f64,
    w1: Weight,
    w2: Weight,
    omega: Weight,
    pub form: Form,
}

/// JSON view of the scalar part of a [`ProblemSpec`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub form: String,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn two_param(p: f64, q: f64, a: f64, b: f64, lam: f64, beta: f64, w1: Weight, w2: Weight) -> Result<Self> {
        check_p(p)?;
        if !(q > 1.0 && q <= p) {
            return invalid(format!("need 1 < q <= p, got q = {q}, p = {p}"));
        }
        if !(a > 0.0 && b > 0.0) {
            return invalid(format!("need a, b > 0, got a = {a}, b = {b}"));
        }
        if a + b > p - 1.0 + 1e-12 {
            return invalid(format!("need a + b <= p - 1, got a + b = {}", a + b));
        }
        check_params(lam, beta)?;
        let omega = Weight::max_of(&w1, &w2)?;
        Ok(ProblemSpec { p, q, a, b, lam, beta, w1, w2, omega, form: Form::TwoParam })
    }

    pub fn example1(p: f64, q: f64, lam: f64, w: Weight) -> Result<Self> {
        check_sublinear(p, q)?;
        check_params(lam, 0.0)?;
        Ok(Self::single_weight(p, q, lam, w, Form::Example1))
    }

    /// `coeff` is the sampled `c(x)`; the envelope `c0 <= c(x) <= c1` is checked here.
    pub fn example2(p: f64, q: f64, lam: f64, w: Weight, coeff: ScalarField, c0: f64, c1: f64) -> Result<Self> {
        check_sublinear(p, q)?;
        check_params(lam, 0.0)?;
        if !(c0 > 0.0 && c1 >= c0) {
            return invalid(format!("need 0 < c0 <= c1, got c0 = {c0}, c1 = {c1}"));
        }
        if coeff.len() != w.domain().num_nodes() {
            return invalid("coefficient and weight live on different domains");
        }
        let slack = 1e-12 * c1;
        if let Some(i) = coeff.values().iter().position(|&c| c < c0 - slack || c > c1 + slack) {
            return invalid(format!("c(x) = {} at node {i} leaves [{c0}, {c1}]", coeff.values()[i]));
        }
        Ok(Self::single_weight(p, q, lam, w, Form::Example2 { coeff, c0, c1 }))
    }

    /// An arbitrary nonlinearity; `w` is the weight defining the torsion function and eigenpair.
    pub fn custom(p: f64, w: Weight, f: Arc<dyn Source>) -> Result<Self> {
        check_p(p)?;
        Ok(Self::single_weight(p, p, 0.0, w, Form::Custom(f)))
    }

    fn single_weight(p: f64, q: f64, lam: f64, w: Weight, form: Form) -> Self {
        ProblemSpec { p, q, a: 0.0, b: 0.0, lam, beta: 0.0, w1: w.clone(), w2: w.clone(), omega: w, form }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.omega.domain()
    }

    pub fn w1(&self) -> &Weight {
        &self.w1
    }

    pub fn w2(&self) -> &Weight {
        &self.w2
    }

    /// `max(w1, w2)`, the weight of the torsion problem.
    pub fn omega(&self) -> &Weight {
        &self.omega
    }

    pub fn is_two_param(&self) -> bool {
        matches!(self.form, Form::TwoParam)
    }

    /// Same problem with other `lam` (and `beta`).
    pub fn with_params(&self, lam: f64, beta: f64) -> Result<Self> {
        check_params(lam, beta)?;
        Ok(ProblemSpec { lam, beta, ..self.clone() })
    }

    /// Same two-parameter problem with another exponent `q`.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        if !(q > 1.0 && q <= self.p) {
            return invalid(format!("need 1 < q <= p, got q = {q}, p = {}", self.p));
        }
        Ok(ProblemSpec { q, ..self.clone() })
    }

    pub fn summary(&self) -> ProblemSummary {
        let form = match self.form {
            Form::TwoParam => "two-param",
            Form::Example1 => "example1",
            Form::Example2 { .. } => "example2",
            Form::Custom(_) => "custom",
        };
        ProblemSummary {
            form: form.into(),
            p: self.p,
            q: self.q,
            a: self.a,
            b: self.b,
            lambda: self.lam,
            beta: self.beta,
        }
    }
}

impl Source for ProblemSpec {
    fn eval(&self, node: usize, u: f64, v: f64) -> f64 {
        match &self.form {
            Form::TwoParam => {
                let mut f = self.lam * self.w1.values()[node] * signed_pow(u, self.q - 1.0);
                if self.beta != 0.0 {
                    f += self.beta * self.w2.values()[node] * signed_pow(u, self.a) * v.powf(self.b);
                }
                f
            }
            Form::Example1 => {
                self.lam * self.omega.values()[node] * u.max(0.0).powf(self.q - 1.0) * (1.0 + v.powf(self.p))
            }
            Form::Example2 { coeff, .. } => {
                self.lam * coeff.values()[node] * u.max(0.0).powf(self.q - 1.0) + v.powf(self.p)
            }
            Form::Custom(f) => f.eval(node, u, v),
        }
    }
}

fn check_sublinear(p: f64, q: f64) -> Result<()> {
    check_p(p)?;
    if !(q > 1.0 && q < p) {
        return invalid(format!("need 1 < q < p, got q = {q}, p = {p}"));
    }
    Ok(())
}

fn check_params(lam: f64, beta: f64) -> Result<()> {
    if !(lam >= 0.0 && lam.is_finite()) {
        return invalid(format!("lambda must be finite and >= 0, got {lam}"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return invalid(format!("beta must be finite and >= 0, got {beta}"));
    }
    Ok(())
}

/// Nodal values of `f(x, u, |grad u|)`.
pub fn source_field(f: &dyn Source, u: &ScalarField) -> ScalarField {
    let g = grad_magnitude(u);
    let vals = u.values().iter().zip(g.values()).enumerate().map(|(i, (&u, &v))| f.eval(i, u, v)).collect();
    ScalarField::from_raw(u.domain().clone(), vals, false)
}

/// An ordered sub-/super-solution candidate pair.
#[derive(Clone, Debug)]
pub struct SubSuperPair {
    pub sub: ScalarField,
    pub sup: ScalarField,
    pub eps: f64,
    pub m: f64,
    pub ordered: bool,
    /// min over nodes of `sup - sub`.
    pub margin: f64,
}

impl SubSuperPair {
    pub fn new(sub: ScalarField, eps: f64, sup: ScalarField, m: f64) -> Result<Self> {
        let rep = compare_fields(&sub, &sup)?;
        Ok(SubSuperPair { sub, sup, eps, m, ordered: rep.ordered, margin: rep.min_gap })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: &Arc<Domain>) -> Weight {
        Weight::constant(d.clone(), 1.0).unwrap()
    }

    #[test]
    fn spec_validation() {
        let d = Domain::interval(1.0, 16).unwrap();
        let w = unit(&d);
        assert!(ProblemSpec::two_param(2.0, 1.5, 0.5, 0.5, 1.0, 0.0, w.clone(), w.clone()).is_ok());
        assert!(ProblemSpec::two_param(2.0, 2.5, 0.5, 0.5, 1.0, 0.0, w.clone(), w.clone()).is_err());
        assert!(ProblemSpec::two_param(2.0, 1.5, 0.6, 0.5, 1.0, 0.0, w.clone(), w.clone()).is_err());
        assert!(ProblemSpec::two_param(2.0, 1.5, 0.5, 0.5, -1.0, 0.0, w.clone(), w.clone()).is_err());
        assert!(ProblemSpec::example1(2.0, 2.0, 1.0, w.clone()).is_err());
        let c = ScalarField::from_fn(d.clone(), false, |x, _| 1.0 + x).unwrap();
        assert!(ProblemSpec::example2(2.0, 1.5, 1.0, w.clone(), c.clone(), 1.0, 2.0).is_ok());
        assert!(ProblemSpec::example2(2.0, 1.5, 1.0, w, c, 1.0, 1.5).is_err());
    }

    #[test]
    fn omega_is_nodewise_max() {
        let d = Domain::interval(1.0, 16).unwrap();
        let w1 = Weight::from_fn(d.clone(), |x, _| x).unwrap();
        let w2 = Weight::from_fn(d.clone(), |x, _| 1.0 - x).unwrap();
        let s = ProblemSpec::two_param(3.0, 2.0, 1.0, 1.0, 1.0, 0.5, w1, w2).unwrap();
        for (c, w) in d.coords().iter().zip(s.omega().values()) {
            assert_eq!(*w, c[0].max(1.0 - c[0]));
        }
    }

    #[test]
    fn forms_evaluate() {
        let d = Domain::interval(1.0, 16).unwrap();
        let w = unit(&d);
        let s = ProblemSpec::two_param(2.0, 1.5, 0.5, 0.5, 2.0, 3.0, w.clone(), w.clone()).unwrap();
        assert!((s.eval(3, 4.0, 9.0) - (2.0 * 2.0 + 3.0 * 2.0 * 3.0)).abs() < 1e-14);
        let e1 = ProblemSpec::example1(2.0, 1.5, 2.0, w.clone()).unwrap();
        assert!((e1.eval(3, 4.0, 3.0) - 2.0 * 2.0 * 10.0).abs() < 1e-14);
        let c = ScalarField::from_fn(d.clone(), false, |_, _| 1.5).unwrap();
        let e2 = ProblemSpec::example2(2.0, 1.5, 2.0, w, c, 1.0, 2.0).unwrap();
        assert!((e2.eval(3, 4.0, 3.0) - (2.0 * 1.5 * 2.0 + 9.0)).abs() < 1e-14);
    }
}
