use std::sync::Arc;

use log::{debug, trace};
use serde::{Deserialize, Serialize};

use super::banded::BandedSpd;
use crate::mesh::ops::{cell_grad_sq, defect, dirichlet_integral, flux_coefficient, loads, operator_into};
use crate::mesh::{sup_abs, Domain, ScalarField};

/// Smallest delta tried when the unregularized residual is still above tolerance.
const EXTRA_DELTA_MIN: f64 = 1e-30;

/// Controls for the energy-minimizing p-Laplacian solver.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Last scheduled value of the gradient regularization delta; smaller values follow
    /// while they keep reducing the unregularized residual.
    pub delta_floor: f64,
    /// First continuation value of delta for cold starts.
    pub delta_start: f64,
    /// First continuation value of delta when an initial guess is supplied.
    pub warm_delta_start: f64,
    /// Ratio between successive continuation values.
    pub delta_factor: f64,
    /// Newton iterations per continuation stage.
    pub max_newton: usize,
    /// Nonlinear Gauss-Seidel sweeps run when Newton stagnates.
    pub gs_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            delta_floor: 1e-10,
            delta_start: 1e-2,
            warm_delta_start: 1e-6,
            delta_factor: 10.0,
            max_newton: 100,
            gs_sweeps: 40,
        }
    }
}

/// Outcome of one `-Delta_p u = f` solve.
#[derive(Clone, Debug)]
pub struct PlapSolution {
    pub u: ScalarField,
    /// Weak residual max_i |A(u)_i - load_i| with the unregularized flux.
    pub residual: f64,
    /// Newton steps over all continuation stages.
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the Dirichlet problem `-Delta_p u = f` on a fixed domain by minimizing
/// `(1/p) int |grad u|^p - int f u` with damped Newton and delta continuation.
#[derive(Clone, Debug)]
pub struct PlapSolver {
    domain: Arc<Domain>,
    p: f64,
    opts: SolverOptions,
    free: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl PlapSolver {
    /// `p > 1` is the caller's responsibility (checked by the public entry points).
    pub fn new(domain: Arc<Domain>, p: f64) -> Self {
        Self::with_options(domain, p, SolverOptions::default())
    }

    pub fn with_options(domain: Arc<Domain>, p: f64, opts: SolverOptions) -> Self {
        let free: Vec<usize> = domain.free_nodes().collect();
        let mut slot = vec![None; domain.num_nodes()];
        for (k, &i) in free.iter().enumerate() {
            slot[i] = Some(k);
        }
        PlapSolver { domain, p, opts, free, slot }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    /// Solves `-Delta_p u = rhs` to weak residual `tol` (absolute, in load units).
    pub fn solve_rhs(&self, rhs: &[f64], tol: f64, initial: Option<&[f64]>) -> PlapSolution {
        let load = loads(&self.domain, rhs);
        self.solve_load(&load, tol, initial)
    }

    /// Same as [`PlapSolver::solve_rhs`] with precomputed nodal loads `mass_i * rhs_i`.
    pub fn solve_load(&self, load: &[f64], tol: f64, initial: Option<&[f64]>) -> PlapSolution {
        let dom = &self.domain;
        let n = dom.num_nodes();
        if sup_abs(load) == 0.0 {
            return PlapSolution { u: ScalarField::zeros(dom.clone()), residual: 0.0, iterations: 0, converged: true };
        }
        let mut u = match initial {
            Some(u0) => {
                let mut u = u0.to_vec();
                self.zero_boundary(&mut u);
                u
            }
            None => self.initial_guess(load),
        };
        debug_assert_eq!(u.len(), n);

        let stages = self.delta_stages(initial.is_some());
        let load_max = sup_abs(load);
        let mut iterations = 0;
        let last = stages.len() - 1;
        for (k, &delta) in stages.iter().enumerate() {
            let stage_tol = if k == last { tol } else { tol.max(1e-8 * load_max) };
            iterations += self.newton(&mut u, load, delta, stage_tol);
        }
        let mut residual = sup_abs(&defect(dom, &u, load, self.p));
        // a flat peak can have slopes not far above the floor; keep shrinking delta while it helps
        let mut delta = stages[last];
        while residual > tol && self.p != 2.0 && delta > EXTRA_DELTA_MIN {
            delta *= 1e-2;
            let mut trial = u.clone();
            iterations += self.newton(&mut trial, load, delta, tol);
            let r = sup_abs(&defect(dom, &trial, load, self.p));
            if !(r < 0.5 * residual) {
                if r < residual {
                    u = trial;
                    residual = r;
                }
                break;
            }
            u = trial;
            residual = r;
        }
        let converged = residual <= tol && u.iter().all(|v| v.is_finite());
        debug!(
            "p-Laplacian solve: p = {}, residual {:.3e} (tol {:.1e}), {} Newton steps",
            self.p, residual, tol, iterations
        );
        if !u.iter().all(|v| v.is_finite()) {
            u = vec![0.0; n];
        }
        PlapSolution { u: ScalarField::from_raw(dom.clone(), u, true), residual, iterations, converged }
    }

    fn delta_stages(&self, warm: bool) -> Vec<f64> {
        let floor = self.opts.delta_floor;
        if self.p == 2.0 {
            return vec![floor];
        }
        let mut d = if warm { self.opts.warm_delta_start } else { self.opts.delta_start };
        let mut out = Vec::new();
        while d > floor * (1.0 + 1e-9) {
            out.push(d);
            d /= self.opts.delta_factor;
        }
        out.push(floor);
        out
    }

    fn zero_boundary(&self, u: &mut [f64]) {
        for (i, v) in u.iter_mut().enumerate() {
            if self.domain.is_boundary(i) {
                *v = 0.0;
            }
        }
    }

    /// Solution of the linear (p = 2) problem, rescaled to minimize the p-energy along its ray.
    fn initial_guess(&self, load: &[f64]) -> Vec<f64> {
        let dom = &self.domain;
        let zero = vec![0.0; dom.num_nodes()];
        let h = self.hessian(&zero, 2.0, 1.0);
        let mut b: Vec<f64> = self.free.iter().map(|&i| load[i]).collect();
        match h.factor() {
            Ok(ch) => ch.solve(&mut b),
            Err(_) => return zero,
        }
        let mut psi = zero;
        for (k, &i) in self.free.iter().enumerate() {
            psi[i] = b[k];
        }
        if self.p == 2.0 {
            return psi;
        }
        let work: f64 = load.iter().zip(&psi).map(|(f, v)| f * v).sum();
        let dir = dirichlet_integral(dom, &psi, self.p);
        if work <= 0.0 || dir <= 0.0 {
            return psi;
        }
        let c = (work / dir).powf(1.0 / (self.p - 1.0));
        psi.iter().map(|v| c * v).collect()
    }

    fn energy(&self, u: &[f64], load: &[f64], delta: f64) -> (f64, f64) {
        let dom = &self.domain;
        let p = self.p;
        let mut pos = 0.0;
        for (c, cell) in dom.cells.iter().enumerate() {
            let g2 = cell_grad_sq(dom, c, u);
            pos += cell.volume * (g2 + delta * delta).powf(0.5 * p);
        }
        pos /= p;
        let work: f64 = load.iter().zip(u).map(|(f, v)| f * v).sum();
        (pos - work, pos + work.abs())
    }

    fn gradient(&self, u: &[f64], load: &[f64], delta: f64) -> Vec<f64> {
        let mut g = vec![0.0; u.len()];
        operator_into(&self.domain, u, self.p, delta, &mut g);
        for (i, v) in g.iter_mut().enumerate() {
            *v = if self.domain.is_boundary(i) { 0.0 } else { *v - load[i] };
        }
        g
    }

    fn hessian(&self, u: &[f64], p: f64, delta: f64) -> BandedSpd {
        let dom = &self.domain;
        let mut h = BandedSpd::zeros(self.free.len(), dom.bandwidth());
        let mut nodes = [0usize; 4];
        let mut z = [0.0f64; 4];
        for (c, cell) in dom.cells.iter().enumerate() {
            let edges = dom.cell_edges(c);
            let g2 = cell_grad_sq(dom, c, u);
            let r = g2 + delta * delta;
            let s = flux_coefficient(g2, p, delta);
            let t = if p == 2.0 || r == 0.0 { 0.0 } else { (p - 2.0) * r.powf(0.5 * (p - 4.0)) };
            let v = cell.volume;
            let mut m = 0;
            let local = |node: usize, nodes: &mut [usize; 4], m: &mut usize| -> usize {
                if let Some(k) = nodes[..*m].iter().position(|&x| x == node) {
                    k
                } else {
                    nodes[*m] = node;
                    *m += 1;
                    *m - 1
                }
            };
            z.iter_mut().for_each(|x| *x = 0.0);
            for e in edges {
                let c2 = v * s * e.weight * e.inv_len * e.inv_len;
                let (si, sj) = (self.slot[e.i], self.slot[e.j]);
                if let Some(a) = si {
                    h.add(a, a, c2);
                }
                if let Some(b) = sj {
                    h.add(b, b, c2);
                }
                if let (Some(a), Some(b)) = (si, sj) {
                    h.add(a, b, -c2);
                }
                if t != 0.0 {
                    let d = (u[e.j] - u[e.i]) * e.inv_len;
                    let li = local(e.i, &mut nodes, &mut m);
                    let lj = local(e.j, &mut nodes, &mut m);
                    z[lj] += e.weight * d * e.inv_len;
                    z[li] -= e.weight * d * e.inv_len;
                }
            }
            if t != 0.0 {
                for a in 0..m {
                    let Some(sa) = self.slot[nodes[a]] else { continue };
                    for b in 0..=a {
                        let Some(sb) = self.slot[nodes[b]] else { continue };
                        let val = v * t * z[a] * z[b];
                        if a == b {
                            h.add(sa, sa, val);
                        } else {
                            h.add(sa, sb, val);
                        }
                    }
                }
            }
        }
        h
    }

    /// Damped Newton on the delta-regularized energy; returns the number of steps taken.
    fn newton(&self, u: &mut [f64], load: &[f64], delta: f64, tol: f64) -> usize {
        let mut stalls = 0;
        let mut steps = 0;
        // (best |g| seen, step at which it last dropped by a factor 2)
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.opts.max_newton {
            let g = self.gradient(u, load, delta);
            let gnorm = sup_abs(&g);
            if gnorm <= tol {
                break;
            }
            if gnorm < 0.5 * best.0 {
                best = (gnorm, k);
            } else if k - best.1 >= 8 {
                trace!("Newton stagnated at |g| = {gnorm:e} (tol {tol:e}), delta = {delta:e}");
                break;
            }
            steps += 1;
            let mut d: Vec<f64> = self.free.iter().map(|&i| -g[i]).collect();
            match self.hessian(u, self.p, delta).factor() {
                Ok(ch) => ch.solve(&mut d),
                Err(_) => {
                    trace!("Hessian not positive definite at delta = {delta:e}, sweeping");
                    self.gauss_seidel(u, load, delta);
                    stalls += 1;
                    if stalls > 3 {
                        break;
                    }
                    continue;
                }
            }
            let mut dir = vec![0.0; u.len()];
            for (k, &i) in self.free.iter().enumerate() {
                dir[i] = d[k];
            }
            if !self.line_search(u, &dir, &g, gnorm, load, delta) {
                trace!("line search failed at delta = {delta:e}, |g| = {gnorm:e}");
                self.gauss_seidel(u, load, delta);
                stalls += 1;
                if stalls > 3 {
                    break;
                }
            }
        }
        steps
    }

    fn line_search(&self, u: &mut [f64], dir: &[f64], g: &[f64], gnorm: f64, load: &[f64], delta: f64) -> bool {
        let (e0, scale) = self.energy(u, load, delta);
        let slope: f64 = g.iter().zip(dir).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            return false;
        }
        let mut trial = vec![0.0; u.len()];
        let mut t = 1.0;
        for _ in 0..60 {
            for ((x, y), d) in trial.iter_mut().zip(u.iter()).zip(dir) {
                *x = y + t * d;
            }
            let (e, _) = self.energy(&trial, load, delta);
            if e.is_finite() {
                if e <= e0 + 1e-4 * t * slope {
                    u.copy_from_slice(&trial);
                    return true;
                }
                // energy differences lost in rounding: fall back to the gradient norm
                if (e - e0).abs() <= 1e-13 * scale {
                    let gn = sup_abs(&self.gradient(&trial, load, delta));
                    if gn < gnorm {
                        u.copy_from_slice(&trial);
                        return true;
                    }
                }
            }
            t *= 0.5;
        }
        false
    }

    /// Nonlinear Gauss-Seidel: one damped scalar Newton update per free node, per sweep.
    fn gauss_seidel(&self, u: &mut [f64], load: &[f64], delta: f64) {
        let dom = &self.domain;
        let p = self.p;
        for _ in 0..self.opts.gs_sweeps {
            for &i in &self.free {
                let local_energy = |u: &[f64]| -> f64 {
                    dom.node_cells[i]
                        .iter()
                        .map(|&c| dom.cells[c].volume * (cell_grad_sq(dom, c, u) + delta * delta).powf(0.5 * p))
                        .sum::<f64>()
                        / p
                        - load[i] * u[i]
                };
                let (mut gi, mut hi) = (-load[i], 0.0);
                for &c in &dom.node_cells[i] {
                    let g2 = cell_grad_sq(dom, c, u);
                    let r = g2 + delta * delta;
                    let s = flux_coefficient(g2, p, delta);
                    let t = if p == 2.0 || r == 0.0 { 0.0 } else { (p - 2.0) * r.powf(0.5 * (p - 4.0)) };
                    let v = dom.cells[c].volume;
                    let (mut zi, mut zz) = (0.0, 0.0);
                    for e in dom.cell_edges(c) {
                        let dd = if e.j == i {
                            e.inv_len
                        } else if e.i == i {
                            -e.inv_len
                        } else {
                            continue;
                        };
                        let d = (u[e.j] - u[e.i]) * e.inv_len;
                        zi += e.weight * d * dd;
                        zz += e.weight * dd * dd;
                    }
                    gi += v * s * zi;
                    hi += v * (s * zz + t * zi * zi);
                }
                if !(hi > 0.0) {
                    continue;
                }
                let e0 = local_energy(u);
                let old = u[i];
                let mut step = -gi / hi;
                for _ in 0..30 {
                    u[i] = old + step;
                    if local_energy(u) <= e0 {
                        break;
                    }
                    step *= 0.5;
                    u[i] = old;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(dom: &Arc<Domain>) -> Vec<f64> {
        vec![1.0; dom.num_nodes()]
    }

    #[test]
    fn linear_interval_torsion_is_exact() {
        let d = Domain::interval(1.0, 128).unwrap();
        let s = PlapSolver::new(d.clone(), 2.0).solve_rhs(&ones(&d), 1e-13, None);
        assert!(s.converged, "residual {}", s.residual);
        for (c, v) in d.coords().iter().zip(s.u.values()) {
            let x = c[0];
            assert!((v - x * (1.0 - x) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_and_singular_exponents_converge() {
        let d = Domain::interval(1.0, 256).unwrap();
        for p in [1.5, 3.0, 4.0] {
            let s = PlapSolver::new(d.clone(), p).solve_rhs(&ones(&d), 1e-12, None);
            assert!(s.converged, "p = {p}: residual {}", s.residual);
            assert!(s.u.values()[1..256].iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn square_p3_converges() {
        let d = Domain::rectangle(1.0, 1.0, 24, 24).unwrap();
        let s = PlapSolver::new(d.clone(), 3.0).solve_rhs(&ones(&d), 1e-12, None);
        assert!(s.converged, "residual {}", s.residual);
    }

    #[test]
    fn zero_load_gives_zero() {
        let d = Domain::interval(1.0, 16).unwrap();
        let s = PlapSolver::new(d.clone(), 3.0).solve_rhs(&[0.0; 17], 1e-12, None);
        assert!(s.converged);
        assert_eq!(s.iterations, 0);
        assert!(s.u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warm_start_from_solution_is_cheap() {
        let d = Domain::interval(1.0, 256).unwrap();
        let solver = PlapSolver::new(d.clone(), 3.0);
        let cold = solver.solve_rhs(&ones(&d), 1e-12, None);
        let warm = solver.solve_rhs(&ones(&d), 1e-12, Some(cold.u.values()));
        assert!(warm.converged);
        assert!(warm.iterations <= cold.iterations);
    }
}
