use serde::{Deserialize, Serialize};

use crate::eigen::AlphaGap;
use crate::error::{invalid, Result};

/// Constants of a scenario and whether its `(lambda, beta)` is admissible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub alpha: f64,
    pub mu: f64,
    /// Principal eigenvalue for the weight entering the sub-solution.
    pub lambda1: f64,
    /// `alpha / mu^b`; infinite when there is no gradient term.
    pub beta_max: f64,
    pub lambda_star: Option<f64>,
    pub m_star: Option<f64>,
    /// Example 2: bound obtained by maximizing over the box size.
    pub lambda_star_box: Option<f64>,
    pub alpha_gap: Option<AlphaGap>,
    pub lambda: f64,
    pub beta: f64,
    pub admissible: bool,
    pub verdict: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Example1Thresholds {
    pub lambda_star: f64,
    pub m_star: f64,
    /// `H(M_*)` with `H(M) = M^(q-p) (1 + mu^p M^p)`.
    pub h_min: f64,
    /// `|lambda_star - alpha / H(M_*)| / lambda_star`.
    pub cross_check: f64,
    /// Minimizer of `H` found by golden-section search in `ln M` on `[1e-6, 1e6]`.
    pub m_golden: f64,
}

fn h_example1(p: f64, q: f64, mu: f64, m: f64) -> f64 {
    m.powf(q - p) * (1.0 + (mu * m).powf(p))
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// `M_* = (p/q - 1)^(1/p) / mu`, `lambda_* = alpha / H(M_*)`, evaluated in the log domain.
pub fn example1_thresholds(p: f64, q: f64, alpha: f64, mu: f64) -> Result<Example1Thresholds> {
    if !(q > 1.0 && q < p) {
        return invalid(format!("need 1 < q < p, got q = {q}, p = {p}"));
    }
    if !(alpha > 0.0 && mu > 0.0) {
        return invalid("alpha and mu must be positive");
    }
    let r = p / q - 1.0;
    let ln_m = r.ln() / p - mu.ln();
    let m_star = ln_m.exp();
    // ln H(M_*) = (q - p) ln M_* + ln(p/q)
    let ln_h = (q - p) * ln_m + (p / q).ln();
    let h_min = ln_h.exp();
    // lambda_* = (alpha / mu^(p-q)) r^((p-q)/p) (q/p)
    let lambda_star = (alpha.ln() - (p - q) * mu.ln() + (p - q) / p * r.ln() + (q / p).ln()).exp();
    let cross_check = ((lambda_star - alpha / h_example1(p, q, mu, m_star)) / lambda_star).abs();
    let s = golden_section(|s| h_example1(p, q, mu, s.exp()).ln(), 1e-6f64.ln(), 1e6f64.ln(), 1e-12);
    Ok(Example1Thresholds { lambda_star, m_star, h_min, cross_check, m_golden: s.exp() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Example2Thresholds {
    /// `(1/c1) ((p-q)/mu^p)^(p-q) (alpha/(p-q+1))^(p-q)`.
    pub printed: f64,
    /// `max_M (alpha M^(p-q) - mu^p M^(p-q+1)) / c1`.
    pub boxed: f64,
    /// The maximizing box size `(p-q) alpha / ((p-q+1) mu^p)`.
    pub m_box: f64,
}

impl Example2Thresholds {
    /// Largest `lambda` accepted by the drivers.
    pub fn admissible_max(&self) -> f64 {
        self.printed.min(self.boxed)
    }
}

pub fn example2_thresholds(c1: f64, p: f64, q: f64, alpha: f64, mu: f64) -> Result<Example2Thresholds> {
    if !(q > 1.0 && q < p) {
        return invalid(format!("need 1 < q < p, got q = {q}, p = {p}"));
    }
    if !(c1 > 0.0 && alpha > 0.0 && mu > 0.0) {
        return invalid("c1, alpha and mu must be positive");
    }
    let s = p - q;
    let printed = (-c1.ln() + s * (s.ln() - p * mu.ln()) + s * (alpha.ln() - (s + 1.0).ln())).exp();
    let ln_m = s.ln() + alpha.ln() - (s + 1.0).ln() - p * mu.ln();
    let boxed = (s * ln_m + alpha.ln() - (s + 1.0).ln() - c1.ln()).exp();
    Ok(Example2Thresholds { printed, boxed, m_box: ln_m.exp() })
}

/// Smallest `M` with `lam c1 M^(q-1) + (mu M)^p <= alpha M^(p-1)`, i.e. the lower root of
/// `alpha M^(p-q) - mu^p M^(p-q+1) = lam c1` on `(0, m_box]`.
pub(crate) fn example2_box(lam_c1: f64, p: f64, q: f64, alpha: f64, mu: f64) -> Option<f64> {
    let s = p - q;
    let m_box = s * alpha / ((s + 1.0) * mu.powf(p));
    let g = |m: f64| alpha * m.powf(s) - mu.powf(p) * m.powf(s + 1.0) - lam_c1;
    if g(m_box) < 0.0 {
        return None;
    }
    if lam_c1 <= 0.0 {
        return Some(0.0);
    }
    // g is increasing on (0, m_box]; bisect in ln M
    let (mut lo, mut hi) = (m_box.ln() - 700.0, m_box.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid.exp()) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Some(hi.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_closed_form() {
        let t = example1_thresholds(2.0, 1.5, 8.0, 4.0).unwrap();
        assert!((t.m_star - (1.0f64 / 3.0).sqrt() / 4.0).abs() < 1e-15);
        assert!((t.lambda_star - 3.0 * 3f64.powf(-0.25)).abs() < 1e-14);
        assert!(t.cross_check < 1e-12);
        assert!((t.m_golden / t.m_star - 1.0).abs() < 1e-5);
        assert!(example1_thresholds(2.0, 2.0, 8.0, 4.0).is_err());
    }

    #[test]
    fn example2_printed_and_box() {
        let t = example2_thresholds(1.0, 2.0, 1.5, 8.0, 4.0).unwrap();
        assert!((t.printed - (0.5f64 / 16.0).sqrt() * (8.0f64 / 1.5).sqrt()).abs() < 1e-14);
        assert!((t.boxed - t.printed * 8.0 / 1.5).abs() < 1e-13);
        let m = example2_box(t.boxed, 2.0, 1.5, 8.0, 4.0).unwrap();
        assert!((m / t.m_box - 1.0).abs() < 1e-6);
        assert!(example2_box(1.01 * t.boxed, 2.0, 1.5, 8.0, 4.0).is_none());
        let half = example2_thresholds(2.0, 2.0, 1.5, 8.0, 4.0).unwrap();
        assert!((half.printed * 2.0 - t.printed).abs() < 1e-15);
    }

    #[test]
    fn box_root_satisfies_the_inequality() {
        let (p, q, a, mu) = (3.0, 2.0, 20.0, 2.5);
        let m = example2_box(0.3, p, q, a, mu).unwrap();
        let lhs = 0.3 * m.powf(q - 1.0) + (mu * m).powf(p);
        assert!((lhs - a * m.powf(p - 1.0)).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let x = golden_section(|x| (x - 0.3).powi(2), -2.0, 5.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
