use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frozen::{equation_residual, frozen_rhs};
use super::Prepared;
use crate::error::{invalid, Error, Result};
use crate::mesh::ops::{defect, loads};
use crate::mesh::{grad_magnitude, sup_abs, ScalarField};
use crate::subsuper::{ProblemSpec, Source};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub k: f64,
    /// Absolute weak residual of `u`.
    pub residual_u: f64,
    /// Absolute weak residual of `k u`.
    pub residual_ku: f64,
    /// `k^(p-1) residual_u`.
    pub scaled: f64,
    /// Largest nodal difference between the defect of `k u` and `k^(p-1)` times the defect of `u`.
    pub mismatch: f64,
}

fn nodal_defect(spec: &ProblemSpec, u: &[f64]) -> Vec<f64> {
    let dom = spec.domain();
    let field = ScalarField::from_raw(dom.clone(), u.to_vec(), true);
    let g = grad_magnitude(&field);
    let rhs: Vec<f64> = u.iter().zip(g.values()).enumerate().map(|(i, (&u, &g))| spec.eval(i, u, g)).collect();
    defect(dom, u, &loads(dom, &rhs), spec.p)
}

/// Compares the weak residual of `k u` with `k^(p-1)` times that of `u` for the homogeneous
/// problem (`q = p`, `a + b = p - 1`).
pub fn homogeneity_check(u: &ScalarField, spec: &ProblemSpec, k: f64) -> Result<HomogeneityReport> {
    if !spec.is_two_param() {
        return invalid("homogeneity check needs the two-parameter form");
    }
    if (spec.q - spec.p).abs() > 1e-12 || (spec.a + spec.b - (spec.p - 1.0)).abs() > 1e-12 {
        return invalid(format!("need q = p and a + b = p - 1, got q = {}, a + b = {}", spec.q, spec.a + spec.b));
    }
    if !(k >= 0.0 && k.is_finite()) {
        return invalid(format!("scale must be finite and nonnegative, got {k}"));
    }
    if u.len() != spec.domain().num_nodes() {
        return invalid("field lives on another domain");
    }
    let ku: Vec<f64> = u.values().iter().map(|v| k * v).collect();
    let du = nodal_defect(spec, u.values());
    let dku = nodal_defect(spec, &ku);
    let s = k.powf(spec.p - 1.0);
    let mismatch = du.iter().zip(&dku).fold(0.0f64, |m, (a, b)| m.max((b - s * a).abs()));
    let residual_u = sup_abs(&du);
    Ok(HomogeneityReport { k, residual_u, residual_ku: sup_abs(&dku), scaled: s * residual_u, mismatch })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeOutcome {
    /// `|u|_inf` passed `1e100`, or its final growth factor exceeds `1 + 1e-3`.
    Grows,
    /// `|u|_inf` fell below `1e-100`, or its final growth factor is below `1 - 1e-3`.
    Collapses,
    /// The iteration settled on a positive profile with a small residual.
    Anomaly,
    /// Growth factor within `1e-3` of one without convergence.
    Undecided,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeRun {
    pub amplitude: f64,
    pub iterations: usize,
    pub sup_trace: Vec<f64>,
    /// Median of the last per-iteration ratios `|u^(k+1)|_inf / |u^k|_inf`.
    pub growth: f64,
    pub residual: f64,
    pub outcome: ProbeOutcome,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub lambda: f64,
    pub lambda1: f64,
    /// `lambda / lambda1`, the linear prediction for `p = 2`.
    pub predicted_growth: f64,
    pub runs: Vec<ProbeRun>,
    /// Median growth over the runs.
    pub growth: f64,
    pub anomaly: bool,
}

const RATIO_WINDOW: usize = 10;
const TREND: f64 = 1e-3;

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Unnormalized frozen iteration `-Delta_p u^(k+1) = f(x, u^k, grad u^k)` from seeded positive
/// starts `a (1/2 + U_i) phi/|phi|_inf`, one run per amplitude.
pub fn probe_dynamics(prep: &Prepared, amplitudes: &[f64], seed: u64, max_iter: usize) -> Result<ProbeReport> {
    let spec = &prep.spec;
    let dom = prep.solver.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = prep.td.normalized_scaled(1.0);
    let tol = prep.tol.solve;
    let mut runs = Vec::with_capacity(amplitudes.len());
    for &amp in amplitudes {
        if !(amp > 0.0 && amp.is_finite()) {
            return invalid(format!("amplitudes must be positive, got {amp}"));
        }
        let mut u: Vec<f64> = phi.values().iter().map(|v| amp * v * (0.5 + rng.gen::<f64>())).collect();
        let mut sups = vec![sup_abs(&u)];
        let mut warm: Option<Vec<f64>> = None;
        let mut outcome = ProbeOutcome::Undecided;
        let mut residual = f64::NAN;
        for _ in 0..max_iter {
            let field = ScalarField::from_raw(dom.clone(), u.clone(), true);
            let rhs = frozen_rhs(spec as &dyn Source, &u, grad_magnitude(&field).values());
            let load = loads(&dom, &rhs);
            let scale = sup_abs(&load);
            let w = if scale > 0.0 {
                // rescale so the inner solve sees loads of order one
                let warm_scaled = warm.as_ref().map(|w: &Vec<f64>| {
                    let t = scale.powf(1.0 / (spec.p - 1.0));
                    w.iter().map(|v| v / t).collect::<Vec<_>>()
                });
                let unit: Vec<f64> = load.iter().map(|l| l / scale).collect();
                let sol = prep.solver.solve_load(&unit, 1e-12, warm_scaled.as_deref());
                let t = scale.powf(1.0 / (spec.p - 1.0));
                sol.u.into_values().into_iter().map(|v| v * t).collect()
            } else {
                vec![0.0; u.len()]
            };
            let s = sup_abs(&w);
            let step = w.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            sups.push(s);
            warm = Some(w.clone());
            u = w;
            if !(s < 1e100) {
                outcome = ProbeOutcome::Grows;
                break;
            }
            if s < 1e-100 {
                outcome = ProbeOutcome::Collapses;
                break;
            }
            if step <= tol * s {
                residual =
                    equation_residual(&prep.solver, spec, &ScalarField::from_raw(dom.clone(), u.clone(), true)).1;
                if residual <= 10.0 * tol {
                    outcome = ProbeOutcome::Anomaly;
                    break;
                }
            }
        }
        let mut ratios: Vec<f64> = sups.windows(2).map(|w| w[1] / w[0]).filter(|r| r.is_finite()).collect();
        let keep = ratios.len().min(RATIO_WINDOW);
        let start = ratios.len() - keep;
        let growth = median(&mut ratios[start..]);
        if outcome == ProbeOutcome::Undecided {
            if growth > 1.0 + TREND {
                outcome = ProbeOutcome::Grows;
            } else if growth < 1.0 - TREND {
                outcome = ProbeOutcome::Collapses;
            }
        }
        debug!("probe run from amplitude {amp}: {outcome:?}, growth {growth}");
        runs.push(ProbeRun { amplitude: amp, iterations: sups.len() - 1, sup_trace: sups, growth, residual, outcome });
    }
    let mut g: Vec<f64> = runs.iter().map(|r| r.growth).collect();
    let growth = median(&mut g);
    Ok(ProbeReport {
        seed,
        lambda: spec.lam,
        lambda1: prep.ep.lambda1,
        predicted_growth: spec.lam / prep.ep.lambda1,
        anomaly: runs.iter().any(|r| r.outcome == ProbeOutcome::Anomaly),
        runs,
        growth,
    })
}

/// [`probe_dynamics`] restricted to the homogeneous problem with `lambda >= lambda1 (1 + 1e-3)`.
pub fn nonexistence_probe(prep: &Prepared, amplitudes: &[f64], seed: u64, max_iter: usize) -> Result<ProbeReport> {
    let spec = &prep.spec;
    if !spec.is_two_param() || (spec.q - spec.p).abs() > 1e-12 {
        return invalid("nonexistence probe needs the two-parameter form with q = p");
    }
    let bound = prep.ep.lambda1 * (1.0 + 1e-3);
    if spec.lam < bound {
        return Err(Error::Threshold { what: "lambda".into(), value: spec.lam, bound });
    }
    probe_dynamics(prep, amplitudes, seed, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, Weight};
    use crate::solve::Tolerances;

    fn homogeneous(p: f64, n: usize, lam: f64, beta: f64) -> Prepared {
        let d = Domain::interval(1.0, n).unwrap();
        let w = Weight::constant(d, 1.0).unwrap();
        let a = 0.5 * (p - 1.0);
        let spec = ProblemSpec::two_param(p, p, a, p - 1.0 - a, lam, beta, w.clone(), w).unwrap();
        Prepared::new(spec, Tolerances::default()).unwrap()
    }

    #[test]
    fn homogeneity_trivial_scales() {
        let prep = homogeneous(3.0, 64, 5.0, 0.5);
        let u = prep.ep.u1.clone();
        let r1 = homogeneity_check(&u, &prep.spec, 1.0).unwrap();
        assert_eq!(r1.residual_u, r1.residual_ku);
        let r0 = homogeneity_check(&u, &prep.spec, 0.0).unwrap();
        assert_eq!(r0.residual_ku, 0.0);
    }

    #[test]
    fn linear_probe_grows_by_eigenvalue_ratio() {
        let prep = homogeneous(2.0, 256, 1.0, 0.0);
        let lam = 1.1 * prep.ep.lambda1;
        let prep = prep.with_spec(prep.spec.with_params(lam, 0.0).unwrap());
        let r = nonexistence_probe(&prep, &[1.0, 0.1], 7, 80).unwrap();
        assert!((r.growth - 1.1).abs() < 1e-3, "growth {}", r.growth);
        assert!(!r.anomaly);
        assert!(r.runs.iter().all(|run| run.outcome == ProbeOutcome::Grows));
    }

    #[test]
    fn probe_below_threshold_is_rejected() {
        let prep = homogeneous(2.0, 64, 1.0, 0.0);
        assert!(nonexistence_probe(&prep, &[1.0], 0, 10).is_err());
    }

    #[test]
    fn small_lambda_collapses() {
        let prep = homogeneous(2.0, 128, 1.0, 0.0);
        let prep = prep.with_spec(prep.spec.with_params(0.5 * prep.td.alpha(), 0.0).unwrap());
        let r = probe_dynamics(&prep, &[1e-3], 1, 2000).unwrap();
        assert_eq!(r.runs[0].outcome, ProbeOutcome::Collapses);
    }
}
