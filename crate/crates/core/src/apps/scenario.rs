use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::mesh::{Domain, ScalarField, Shape, Weight};
use crate::solve::{ContinuationOptions, FrozenOptions, Schedule, Tolerances};
use crate::subsuper::{ProblemSpec, Sampling};

/// The right-hand side of a scenario. Weights and coefficients are expressions in `x, y, r`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `lambda w1 u^(q-1) + beta w2 u^a |grad u|^b`
    TwoParam {
        p: f64,
        q: f64,
        a: f64,
        b: f64,
        lambda: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default = "one")]
        w1: Expr,
        #[serde(default = "one")]
        w2: Expr,
    },
    /// `lambda w u^(q-1) (1 + |grad u|^p)`
    Example1 {
        p: f64,
        q: f64,
        lambda: f64,
        #[serde(default = "one")]
        weight: Expr,
    },
    /// `lambda c(x) u^(q-1) + |grad u|^p` with `c0 <= c(x) <= c1`
    Example2 {
        p: f64,
        q: f64,
        lambda: f64,
        #[serde(default = "one")]
        weight: Expr,
        coeff: Expr,
        c0: f64,
        c1: f64,
    },
}

fn one() -> Expr {
    Expr::parse("1").expect("constant parses")
}

/// Homogeneity and nonexistence diagnostics of a `q = p` scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub amplitudes: Vec<f64>,
    pub max_iter: usize,
    /// Probe at `lambda = factor lambda1`.
    pub lambda_factor: f64,
    pub homogeneity_scales: Vec<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            amplitudes: vec![1.0, 0.1, 10.0],
            max_iter: 80,
            lambda_factor: 1.1,
            homogeneity_scales: vec![0.5, 2.0, 10.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub domain: Shape,
    /// Grid spacing.
    pub h: f64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Used when `q = p`.
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default)]
    pub continuation: ContinuationOptions,
    #[serde(default)]
    pub frozen: FrozenOptions,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; reports go to `<out>/<name>/`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Scenario {
    /// Parses a scenario; syntax and schema errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn build_domain(&self) -> Result<Arc<Domain>> {
        Domain::new(self.domain.clone(), self.h).map_err(|e| Error::Config(format!("domain: {e}")))
    }

    pub fn p(&self) -> f64 {
        match self.problem {
            ProblemConfig::TwoParam { p, .. }
            | ProblemConfig::Example1 { p, .. }
            | ProblemConfig::Example2 { p, .. } => p,
        }
    }

    pub fn build_spec(&self, dom: &Arc<Domain>) -> Result<ProblemSpec> {
        let cfg = |field: &str, e: Error| Error::Config(format!("problem.{field}: {e}"));
        let finite = |field: &str, e: &Expr| -> Result<ScalarField> {
            let f = sample(dom, e, false);
            match f.values().iter().position(|v| !v.is_finite()) {
                Some(i) => Err(Error::Config(format!("problem.{field}: '{e}' is not finite at node {i}"))),
                None => Ok(f),
            }
        };
        let weight = |field: &str, e: &Expr| Weight::new(finite(field, e)?).map_err(|err| cfg(field, err));
        match &self.problem {
            ProblemConfig::TwoParam { p, q, a, b, lambda, beta, w1, w2 } => {
                let (w1, w2) = (weight("w1", w1)?, weight("w2", w2)?);
                ProblemSpec::two_param(*p, *q, *a, *b, *lambda, *beta, w1, w2).map_err(|e| cfg("form", e))
            }
            ProblemConfig::Example1 { p, q, lambda, weight: w } => {
                ProblemSpec::example1(*p, *q, *lambda, weight("weight", w)?).map_err(|e| cfg("form", e))
            }
            ProblemConfig::Example2 { p, q, lambda, weight: w, coeff, c0, c1 } => {
                let c = finite("coeff", coeff)?;
                ProblemSpec::example2(*p, *q, *lambda, weight("weight", w)?, c, *c0, *c1).map_err(|e| cfg("coeff", e))
            }
        }
    }
}

/// Nodal values of an expression; radial domains evaluate at `(r, 0)`.
pub fn sample(dom: &Arc<Domain>, e: &Expr, dirichlet: bool) -> ScalarField {
    let vals = dom.coords().iter().map(|c| e.eval(c[0], c[1])).collect();
    ScalarField::from_raw(dom.clone(), vals, dirichlet)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "name": "t",
        "domain": {"kind": "interval", "length": 1.0},
        "h": 0.0625,
        "problem": {"form": "two-param", "p": 2, "q": 1.5, "a": 0.5, "b": 0.5, "lambda": 1, "w1": "1 + x"}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_json(BASE).unwrap();
        let d = s.build_domain().unwrap();
        assert_eq!(d.num_nodes(), 17);
        let spec = s.build_spec(&d).unwrap();
        assert_eq!(spec.w1().values()[16], 2.0);
        assert_eq!(spec.w2().values()[16], 1.0);
        assert_eq!(spec.beta, 0.0);
        assert_eq!(s.tolerances.solve, Tolerances::default().solve);
    }

    #[test]
    fn errors_name_the_place() {
        let bad = BASE.replace("\"q\": 1.5", "\"qq\": 1.5");
        match Scenario::from_json(&bad) {
            Err(Error::Config(m)) => assert!(m.contains("line") && m.contains("qq"), "{m}"),
            other => panic!("{other:?}"),
        }
        let bad = BASE.replace("1 + x", "1 + ");
        match Scenario::from_json(&bad) {
            Err(Error::Config(m)) => assert!(m.contains("expression error") && m.contains("line"), "{m}"),
            other => panic!("{other:?}"),
        }
        let neg = BASE.replace("1 + x", "x - 0.5");
        let s = Scenario::from_json(&neg).unwrap();
        match s.build_spec(&s.build_domain().unwrap()) {
            Err(Error::Config(m)) => assert!(m.contains("w1"), "{m}"),
            other => panic!("{other:?}"),
        }
    }
}
