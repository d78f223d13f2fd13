//! Independent reference values and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use plap::apps::Scenario;
use plap::mesh::{Domain, Weight};
use plap::solve::{Prepared, Tolerances};
use plap::subsuper::ProblemSpec;

pub const N_FINE: usize = 1024;

pub fn interval(n: usize) -> Arc<Domain> {
    Domain::interval(1.0, n).unwrap()
}

pub fn unit(d: &Arc<Domain>) -> Weight {
    Weight::constant(d.clone(), 1.0).unwrap()
}

/// Looser eigen and solve tolerances for p < 2, where rounding sets a floor near 1e-8.
pub fn tolerances_for(p: f64) -> Tolerances {
    if p < 2.0 {
        Tolerances { eigen: 1e-7, solve: 1e-8, ..Tolerances::default() }
    } else {
        Tolerances::default()
    }
}

/// Two-parameter problem on (0,1) with unit weights and `a = b = (p-1)/2` unless given.
pub fn two_param(p: f64, q: f64, a: f64, b: f64, lam: f64, beta: f64, n: usize) -> Prepared {
    let d = interval(n);
    let w = unit(&d);
    let spec = ProblemSpec::two_param(p, q, a, b, lam, beta, w.clone(), w).unwrap();
    Prepared::new(spec, tolerances_for(p)).unwrap()
}

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn shipped() -> Vec<(PathBuf, Scenario)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.into_iter().map(|p| (p.clone(), Scenario::load(&p).unwrap())).collect()
}

/// Torsion of the unit interval: `phi' = sgn(1/2 - x) |1/2 - x|^(1/(p-1))`, so
/// `|phi|_inf = (p-1)/p 2^(-p/(p-1))` and `|phi'|_inf = 2^(-1/(p-1))`. Returns `(alpha, mu)`.
pub fn torsion_interval(p: f64) -> (f64, f64) {
    let s = (p - 1.0) / p * 0.5f64.powf(p / (p - 1.0));
    (s.powf(1.0 - p), 0.5f64.powf(1.0 / (p - 1.0)) / s)
}

/// Torsion of the unit ball in R^n: `phi'(r) = -(r/n)^(1/(p-1))`, so
/// `|phi|_inf = (p-1)/p n^(-1/(p-1))` and `|phi'|_inf = n^(-1/(p-1))`. Returns `(alpha, mu)`.
pub fn torsion_ball(p: f64, n: f64) -> (f64, f64) {
    let g = n.powf(-1.0 / (p - 1.0));
    let s = (p - 1.0) / p * g;
    (s.powf(1.0 - p), g / s)
}

/// Tanh-sinh quadrature of `f(s, 1 - s)` over `[0, 1]`; the complement is passed exactly.
pub fn tanh_sinh(f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let mut sum = 0.0;
    for k in -400i32..=400 {
        let t = k as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let (s, c) = (1.0 / (1.0 + (-2.0 * u).exp()), 1.0 / (1.0 + (2.0 * u).exp()));
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (2.0 * u.cosh().powi(2));
        if w == 0.0 || s == 0.0 || c == 0.0 {
            continue;
        }
        sum += w * f(s, c);
    }
    h * sum
}

/// First Dirichlet p-eigenvalue of (0,1): `(p-1) pi_p^p` with `pi_p = 2 int_0^1 (1-s^p)^(-1/p) ds`.
pub fn p_eigen_interval(p: f64) -> f64 {
    // 1 - s^p from the complement c = 1 - s without cancellation
    let pi_p = 2.0 * tanh_sinh(|_, c| (-(p * (-c).ln_1p()).exp_m1()).powf(-1.0 / p));
    (p - 1.0) * pi_p.powf(p)
}

/// Square of the first zero of `J0`, by shooting `y'' + y'/r + y = 0`, `y(0) = 1`, with RK4.
pub fn bessel_j0_zero_squared() -> f64 {
    let rhs = |r: f64, y: [f64; 2]| [y[1], -y[1] / r - y[0]];
    let step = |r: f64, y: [f64; 2], h: f64| {
        let k1 = rhs(r, y);
        let k2 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    };
    let h = 1e-4;
    // series start away from the singular point
    let r0: f64 = 1e-3;
    let mut r = r0;
    let mut y = [1.0 - r0 * r0 / 4.0 + r0.powi(4) / 64.0, -r0 / 2.0 + r0.powi(3) / 16.0];
    loop {
        let next = step(r, y, h);
        if next[0] <= 0.0 {
            break;
        }
        y = next;
        r += h;
    }
    // Newton on the shooting value, each correction integrated with one RK4 step
    for _ in 0..4 {
        let dz = -y[0] / y[1];
        y = step(r, y, dz);
        r += dz;
    }
    r * r
}

/// Positive root of `alpha M^(p-1) = lam M^(q-1) + c M^(s)` with `s < p - 1`, by plain bisection on `M`.
pub fn m_root_bisect(alpha: f64, lam: f64, c: f64, p: f64, q: f64, s: f64) -> f64 {
    let g = |m: f64| alpha - lam * m.powf(q - p) - c * m.powf(s + 1.0 - p);
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    while g(lo) > 0.0 {
        lo *= 0.5;
    }
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimum of `M^(q-p) (1 + mu^p M^p)` by a dense scan in `ln M` refined with ternary search.
pub fn example1_lambda_star(p: f64, q: f64, alpha: f64, mu: f64) -> f64 {
    let h = |t: f64| {
        let m = t.exp();
        m.powf(q - p) * (1.0 + (mu * m).powf(p))
    };
    let (lo, hi, k) = (-30.0, 30.0, 6000);
    let best = (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).min_by(|a, b| h(*a).total_cmp(&h(*b))).unwrap();
    let step = (hi - lo) / k as f64;
    let (mut a, mut b) = (best - step, best + step);
    for _ in 0..200 {
        let (c, d) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
        if h(c) < h(d) {
            b = d;
        } else {
            a = c;
        }
    }
    alpha / h(0.5 * (a + b))
}
