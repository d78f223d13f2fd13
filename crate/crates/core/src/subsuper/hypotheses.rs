//! Sampled certificates for the growth condition (H1), the behavior near `u = 0` (H2) and
//! the box bound (H3). Each report records the sampling it was computed on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Source;
use crate::eigen::EigenPair;
use crate::error::{invalid, Result};
use crate::mesh::{Domain, Weight};
use crate::plap::TorsionData;

/// Relative slack used by the pass/fail verdicts of (H2) and (H3).
const SLACK: f64 = 1e-12;

/// Sample lattice over `(x, u, |v|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sampling {
    pub u_samples: usize,
    pub v_samples: usize,
    /// Every `node_stride`-th grid node is sampled (the last node always is).
    pub node_stride: usize,
    /// (H2): the `u` grid runs geometrically from `eps0` down over this many decades.
    pub u_decades: f64,
    /// (H1): number of `vmax` doublings used to judge saturation.
    pub doublings: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { u_samples: 33, v_samples: 17, node_stride: 1, u_decades: 8.0, doublings: 4 }
    }
}

impl Sampling {
    fn validate(&self) -> Result<()> {
        if self.u_samples < 2 || self.v_samples < 2 || self.node_stride == 0 {
            return invalid("sampling needs >= 2 u and v samples and a positive node stride");
        }
        Ok(())
    }

    fn nodes(&self, n: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..n).step_by(self.node_stride).collect();
        if v.last() != Some(&(n - 1)) {
            v.push(n - 1);
        }
        v
    }

    fn uniform(k: usize, top: f64) -> impl Iterator<Item = f64> {
        (0..k).map(move |j| top * j as f64 / (k - 1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub node: usize,
    pub x: [f64; 2],
    pub u: f64,
    pub v: f64,
    pub f: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Resolution {
    pub nodes: usize,
    #[serde(flatten)]
    pub sampling: Sampling,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hypothesis: String,
    pub pass: bool,
    /// The fitted constant `C` for (H1), the accepted `eps0` for (H2), the box size `M` for (H3).
    pub value: f64,
    /// Worst (smallest) normalized margin; negative means violated.
    pub margin: f64,
    pub witness: Option<Witness>,
    pub resolution: Resolution,
}

/// (H1) report with the constant fitted at each `vmax`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct H1Report {
    #[serde(flatten)]
    pub report: HypothesisReport,
    /// `(vmax, C)` pairs.
    pub growth: Vec<[f64; 2]>,
}

struct Worst {
    margin: f64,
    witness: Option<Witness>,
}

/// Deterministic min-reduction of per-node results (ties keep the lower node).
fn reduce(per_node: Vec<Worst>) -> Worst {
    per_node.into_iter().fold(Worst { margin: f64::INFINITY, witness: None }, |acc, w| {
        if w.margin < acc.margin {
            w
        } else {
            acc
        }
    })
}

fn witness(dom: &Domain, node: usize, u: f64, v: f64, f: f64) -> Option<Witness> {
    Some(Witness { node, x: dom.coords()[node], u, v, f })
}

/// Fits the smallest `C` with `f(x, u, v) <= C (1 + v^p)` over `|u| <= mcap`, `v <= vmax`,
/// then repeats with `vmax` doubled. `C` still growing by more than 1% over the last
/// doubling is reported as a suspected violation.
pub fn check_h1(f: &dyn Source, dom: &Domain, p: f64, mcap: f64, vmax: f64, s: &Sampling) -> Result<H1Report> {
    s.validate()?;
    if !(mcap > 0.0 && vmax > 0.0) {
        return invalid("mcap and vmax must be positive");
    }
    let nodes = s.nodes(dom.num_nodes());
    let mut growth = Vec::new();
    let mut best = Worst { margin: 0.0, witness: None };
    for k in 0..=s.doublings {
        let vtop = vmax * 2f64.powi(k as i32);
        let per: Vec<Worst> = nodes
            .par_iter()
            .map(|&i| {
                let mut w = Worst { margin: f64::INFINITY, witness: None };
                for u in Sampling::uniform(s.u_samples, mcap).flat_map(|u| [u, -u]) {
                    for v in Sampling::uniform(s.v_samples, vtop) {
                        let fv = f.eval(i, u, v);
                        let c = fv / (1.0 + v.powf(p));
                        // min-reduction on -C finds the max C
                        if -c < w.margin {
                            w = Worst { margin: -c, witness: witness(dom, i, u, v, fv) };
                        }
                    }
                }
                w
            })
            .collect();
        let w = reduce(per);
        let c = (-w.margin).max(0.0);
        growth.push([vtop, c]);
        best = Worst { margin: c, witness: w.witness };
    }
    let n = growth.len();
    let (prev, last) = (growth[n - 2][1], growth[n - 1][1]);
    let ratio = if prev > 0.0 {
        last / prev
    } else if last > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let margin = 1.01 - ratio;
    Ok(H1Report {
        report: HypothesisReport {
            hypothesis: "H1".into(),
            pass: margin >= 0.0,
            value: best.margin,
            margin,
            witness: best.witness,
            resolution: Resolution { nodes: nodes.len(), sampling: s.clone() },
        },
        growth,
    })
}

/// Largest `eps0` in `1, 1/2, ..., 2^-40` with `f(x, u, v) >= lambda1 w(x) u^(p-1)` on the
/// samples `0 < u <= eps0`, `v <= mu mcap`. `w` and `lambda1` come from `ep`.
pub fn check_h2(f: &dyn Source, ep: &EigenPair, mu: f64, mcap: f64, s: &Sampling) -> Result<HypothesisReport> {
    s.validate()?;
    if !(mu > 0.0 && mcap > 0.0) {
        return invalid("mu and mcap must be positive");
    }
    let dom = ep.u1.domain().clone();
    let (w, l1, p) = (&ep.weight, ep.lambda1, ep.p);
    let nodes = s.nodes(dom.num_nodes());
    let vtop = mu * mcap;
    let trial = |eps0: f64| -> Worst {
        let per: Vec<Worst> = nodes
            .par_iter()
            .map(|&i| {
                let wi = w.values()[i];
                let mut worst = Worst { margin: f64::INFINITY, witness: None };
                for j in 0..s.u_samples {
                    let u = eps0 * 10f64.powf(-s.u_decades * j as f64 / (s.u_samples - 1) as f64);
                    let target = l1 * wi * u.powf(p - 1.0);
                    for v in Sampling::uniform(s.v_samples, vtop) {
                        let fv = f.eval(i, u, v);
                        let m = if target > 0.0 {
                            (fv - target) / target
                        } else if fv >= 0.0 {
                            0.0
                        } else {
                            -1.0
                        };
                        if m < worst.margin {
                            worst = Worst { margin: m, witness: witness(&dom, i, u, v, fv) };
                        }
                    }
                }
                worst
            })
            .collect();
        reduce(per)
    };

    let mut last = Worst { margin: f64::NEG_INFINITY, witness: None };
    for k in 0..=40 {
        let eps0 = 2f64.powi(-k);
        let w = trial(eps0);
        if w.margin >= -SLACK {
            return Ok(HypothesisReport {
                hypothesis: "H2".into(),
                pass: true,
                value: eps0,
                margin: w.margin,
                witness: w.witness,
                resolution: Resolution { nodes: nodes.len(), sampling: s.clone() },
            });
        }
        last = w;
    }
    Ok(HypothesisReport {
        hypothesis: "H2".into(),
        pass: false,
        value: 0.0,
        margin: last.margin,
        witness: last.witness,
        resolution: Resolution { nodes: nodes.len(), sampling: s.clone() },
    })
}

/// `0 <= f(x, u, v) <= alpha w(x) M^(p-1)` on `[0, M] x [0, mu M]`, endpoints included.
/// The margin is normalized by `alpha sup(w) M^(p-1)`.
pub fn check_h3(f: &dyn Source, td: &TorsionData, mcap: f64, s: &Sampling) -> Result<HypothesisReport> {
    s.validate()?;
    if !(mcap > 0.0) {
        return invalid("mcap must be positive");
    }
    let w: &Weight = td.weight();
    let dom = w.domain().clone();
    let p = td.p();
    let top = td.alpha() * mcap.powf(p - 1.0);
    let scale = top * w.sup();
    let vtop = td.mu() * mcap;
    let nodes = s.nodes(dom.num_nodes());
    let per: Vec<Worst> = nodes
        .par_iter()
        .map(|&i| {
            let cap = top * w.values()[i];
            let mut worst = Worst { margin: f64::INFINITY, witness: None };
            for u in Sampling::uniform(s.u_samples, mcap) {
                for v in Sampling::uniform(s.v_samples, vtop) {
                    let fv = f.eval(i, u, v);
                    let m = fv.min(cap - fv) / scale;
                    if m < worst.margin {
                        worst = Worst { margin: m, witness: witness(&dom, i, u, v, fv) };
                    }
                }
            }
            worst
        })
        .collect();
    let w = reduce(per);
    Ok(HypothesisReport {
        hypothesis: "H3".into(),
        pass: w.margin >= -SLACK,
        value: mcap,
        margin: w.margin,
        witness: w.witness,
        resolution: Resolution { nodes: nodes.len(), sampling: s.clone() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::principal_eigenpair;
    use crate::plap::solve_torsion;
    use crate::subsuper::ProblemSpec;
    use std::sync::Arc;

    fn setup() -> (Arc<Domain>, Weight, TorsionData, EigenPair) {
        let d = Domain::interval(1.0, 64).unwrap();
        let w = Weight::constant(d.clone(), 1.0).unwrap();
        let td = solve_torsion(&d, &w, 2.0, 1e-13).unwrap();
        let ep = principal_eigenpair(&d, &w, 2.0, 1e-10).unwrap();
        (d, w, td, ep)
    }

    #[test]
    fn h1_cases() {
        let (d, w, _, _) = setup();
        let s = Sampling::default();
        let e1 = ProblemSpec::example1(2.0, 1.5, 2.0, w).unwrap();
        let r = check_h1(&e1, &d, 2.0, 0.25, 1.0, &s).unwrap();
        assert!(r.report.pass);
        assert!((r.report.value - 2.0 * 0.25f64.sqrt()).abs() < 1e-14);
        let zero = |_: usize, _: f64, _: f64| 0.0;
        let r = check_h1(&zero, &d, 2.0, 1.0, 1.0, &s).unwrap();
        assert!(r.report.pass && r.report.value == 0.0);
        let steep = |_: usize, _: f64, v: f64| v.powi(3);
        let r = check_h1(&steep, &d, 2.0, 1.0, 1.0, &s).unwrap();
        assert!(!r.report.pass);
    }

    #[test]
    fn h2_cases() {
        let (_, _, td, ep) = setup();
        let s = Sampling::default();
        let l1 = ep.lambda1;
        let half = move |_: usize, u: f64, _: f64| 0.5 * l1 * u.max(0.0);
        assert!(!check_h2(&half, &ep, td.mu(), 1.0, &s).unwrap().pass);
        let exact = move |_: usize, u: f64, _: f64| l1 * u.max(0.0);
        let r = check_h2(&exact, &ep, td.mu(), 1.0, &s).unwrap();
        assert!(r.pass && r.value == 1.0);
    }

    #[test]
    fn h3_cases() {
        let (_, w, td, _) = setup();
        let s = Sampling::default();
        let zero = |_: usize, _: f64, _: f64| 0.0;
        assert!(check_h3(&zero, &td, 3.0, &s).unwrap().pass);
        let neg = |_: usize, _: f64, _: f64| -1.0;
        assert!(!check_h3(&neg, &td, 3.0, &s).unwrap().pass);
        let e1 = ProblemSpec::example1(2.0, 1.5, 100.0, w).unwrap();
        let r = check_h3(&e1, &td, 0.1, &s).unwrap();
        assert!(!r.pass);
        let wt = r.witness.unwrap();
        assert!((wt.u - 0.1).abs() < 1e-15 && (wt.v - td.mu() * 0.1).abs() < 1e-15);
    }
}
