mod common;

use std::f64::consts::PI;

use common::*;
use plap::apps::{example1_thresholds, example2_thresholds};
use plap::mesh::Domain;
use plap::solve::Prepared;
use plap::subsuper::ProblemSpec;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn quadrature_matches_beta_function_closed_form() {
    for p in [1.25, 1.5, 2.0, 3.0, 4.5] {
        let pi_p = 2.0 * PI / (p * (PI / p).sin());
        let closed = (p - 1.0) * pi_p.powf(p);
        assert!(rel(p_eigen_interval(p), closed) < 1e-10, "p = {p}");
    }
    assert!(rel(p_eigen_interval(2.0), PI * PI) < 1e-12);
}

#[test]
fn bessel_shooting_hits_known_zero() {
    // j_{0,1} = 2.404825557695773
    assert!((bessel_j0_zero_squared().sqrt() - 2.404825557695773).abs() < 1e-9);
}

#[test]
fn interval_constants_for_p_away_from_two() {
    for p in [1.5, 3.0] {
        let prep = two_param(p, 0.5 * (1.0 + p), 0.5 * (p - 1.0), 0.5 * (p - 1.0), 1.0, 0.0, N_FINE);
        let (alpha, mu) = torsion_interval(p);
        let lambda1 = p_eigen_interval(p);
        assert!(rel(prep.td.alpha(), alpha) < 1e-4, "p = {p}: alpha {}", prep.td.alpha());
        assert!(rel(prep.td.mu(), mu) < 1e-3, "p = {p}: mu {}", prep.td.mu());
        assert!(rel(prep.ep.lambda1, lambda1) < 1e-4, "p = {p}: lambda1 {} vs {lambda1}", prep.ep.lambda1);
    }
}

#[test]
fn ball_torsion_constants() {
    for (p, n) in [(1.5, 2), (3.0, 2), (2.0, 3)] {
        let d = Domain::ball(1.0, n, 512).unwrap();
        let w = unit(&d);
        let spec = ProblemSpec::two_param(p, 0.5 * (1.0 + p), 0.5 * (p - 1.0), 0.5 * (p - 1.0), 1.0, 0.0, w.clone(), w)
            .unwrap();
        let prep = Prepared::new(spec, tolerances_for(p)).unwrap();
        let (alpha, mu) = torsion_ball(p, n as f64);
        assert!(rel(prep.td.alpha(), alpha) < 1e-3, "p = {p}, n = {n}: alpha {} vs {alpha}", prep.td.alpha());
        assert!(rel(prep.td.mu(), mu) < 1e-2, "p = {p}, n = {n}: mu {} vs {mu}", prep.td.mu());
    }
}

#[test]
fn ball_in_three_dimensions_matches_first_sine_zero() {
    // radial eigenfunction sin(pi r)/r
    let d = Domain::ball(1.0, 3, N_FINE).unwrap();
    let w = unit(&d);
    let spec = ProblemSpec::two_param(2.0, 1.5, 0.5, 0.5, 1.0, 0.0, w.clone(), w).unwrap();
    let prep = Prepared::new(spec, tolerances_for(2.0)).unwrap();
    assert!(rel(prep.ep.lambda1, PI * PI) < 1e-4, "{}", prep.ep.lambda1);
}

#[test]
fn example1_threshold_agrees_with_scan() {
    for (p, q, alpha, mu) in [(2.0, 1.5, 8.0, 4.0), (3.0, 2.0, 18.0, 3.0), (1.5, 1.2, 4.9, 6.0), (4.0, 1.1, 2.0, 0.7)] {
        let lib = example1_thresholds(p, q, alpha, mu).unwrap().lambda_star;
        let scan = example1_lambda_star(p, q, alpha, mu);
        assert!(rel(lib, scan) < 1e-10, "({p}, {q}): {lib} vs {scan}");
    }
}

#[test]
fn example2_box_threshold_agrees_with_scan() {
    for (c1, p, q, alpha, mu) in [(1.0, 2.0, 1.5, 8.0, 4.0), (2.0, 3.0, 2.0, 18.0, 3.0), (0.5, 1.5, 1.25, 4.9, 6.0)] {
        let th = example2_thresholds(c1, p, q, alpha, mu).unwrap();
        let s = p - q;
        let k = 200_000;
        let best = (1..=k)
            .map(|i| {
                let m = th.m_box * 4.0 * i as f64 / k as f64;
                (alpha * m.powf(s) - mu.powf(p) * m.powf(s + 1.0)) / c1
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(rel(th.boxed, best) < 1e-8, "{} vs {best}", th.boxed);
        assert!(th.admissible_max() <= th.printed && th.admissible_max() <= th.boxed);
    }
}
