use serde::{Deserialize, Serialize};

use super::domain::Domain;
use super::field::{same_domain, ScalarField};
use crate::error::{invalid, Result};

/// Which side of the weak (in)equality `int |grad u|^(p-2) grad u . grad phi = int rhs phi`
/// is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    /// max |lhs - rhs| over the test functions.
    Equal,
    /// Sub-solution check: max (lhs - rhs)^+; zero when `lhs <= rhs` for every test function.
    Sub,
    /// Super-solution check: max (rhs - lhs)^+; zero when `lhs >= rhs` for every test function.
    Super,
}

/// `|g_c|^2` for one cell.
#[inline]
pub(crate) fn cell_grad_sq(dom: &Domain, c: usize, u: &[f64]) -> f64 {
    dom.cell_edges(c)
        .iter()
        .map(|e| {
            let d = (u[e.j] - u[e.i]) * e.inv_len;
            e.weight * d * d
        })
        .sum()
}

/// Flux coefficient `(g^2 + delta^2)^((p-2)/2)`, with the `delta = 0, g = 0` limit of the
/// flux itself (zero) encoded as a zero coefficient.
#[inline]
pub(crate) fn flux_coefficient(g2: f64, p: f64, delta: f64) -> f64 {
    let r = g2 + delta * delta;
    if r == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        1.0
    } else {
        r.powf(0.5 * (p - 2.0))
    }
}

/// Writes `A(u)_i = d/du_i (1/p) sum_c V_c (|g_c|^2 + delta^2)^(p/2)` into `out` for every node.
///
/// This is the discrete `int |grad u|^(p-2) grad u . grad phi_i` against the nodal hat
/// function `phi_i`; dividing by the nodal mass gives the pointwise `-Delta_p u`.
pub(crate) fn operator_into(dom: &Domain, u: &[f64], p: f64, delta: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (c, cell) in dom.cells.iter().enumerate() {
        let g2 = cell_grad_sq(dom, c, u);
        let s = flux_coefficient(g2, p, delta);
        if s == 0.0 {
            continue;
        }
        let vs = cell.volume * s;
        for e in dom.cell_edges(c) {
            let d = (u[e.j] - u[e.i]) * e.inv_len;
            let t = vs * e.weight * d * e.inv_len;
            out[e.j] += t;
            out[e.i] -= t;
        }
    }
}

/// `sum_c V_c |g_c|^p`, the discrete `int |grad u|^p`.
pub(crate) fn dirichlet_integral(dom: &Domain, u: &[f64], p: f64) -> f64 {
    dom.cells.iter().enumerate().map(|(c, cell)| cell.volume * cell_grad_sq(dom, c, u).powf(0.5 * p)).sum()
}

/// Nodal loads `mass_i * rhs_i` on free nodes, zero on the Dirichlet boundary.
pub(crate) fn loads(dom: &Domain, rhs: &[f64]) -> Vec<f64> {
    rhs.iter().zip(dom.mass()).enumerate().map(|(i, (f, m))| if dom.is_boundary(i) { 0.0 } else { f * m }).collect()
}

/// `A(u) - load` at free nodes (unregularized flux), zero on the boundary.
pub(crate) fn defect(dom: &Domain, u: &[f64], load: &[f64], p: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    operator_into(dom, u, p, 0.0, &mut out);
    for (i, v) in out.iter_mut().enumerate() {
        *v = if dom.is_boundary(i) { 0.0 } else { *v - load[i] };
    }
    out
}

pub(crate) fn reduce_defect(defect: &[f64], mode: ResidualMode) -> (usize, f64) {
    let mut worst = (0, 0.0);
    for (i, &d) in defect.iter().enumerate() {
        let v = match mode {
            ResidualMode::Equal => d.abs(),
            ResidualMode::Sub => d.max(0.0),
            ResidualMode::Super => (-d).max(0.0),
        };
        if v > worst.1 {
            worst = (i, v);
        }
    }
    worst
}

/// Per-node weak defect `int |grad u|^(p-2) grad u . grad phi_i - int rhs phi_i` for every
/// interior hat function `phi_i` (zero on boundary nodes).
pub fn weak_defect(u: &ScalarField, rhs: &ScalarField, p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0) {
        return invalid(format!("p must exceed 1, got {p}"));
    }
    same_domain(u, rhs)?;
    let dom = u.domain();
    let load = loads(dom, rhs.values());
    Ok(defect(dom, u.values(), &load, p))
}

/// Largest weak defect over the interior hat functions, measured according to `mode`.
pub fn weak_residual(u: &ScalarField, rhs: &ScalarField, p: f64, mode: ResidualMode) -> Result<f64> {
    Ok(reduce_defect(&weak_defect(u, rhs, p)?, mode).1)
}

/// Largest nodal load `max_i mass_i |rhs_i|`, the natural scale for weak residuals.
pub fn load_scale(rhs: &ScalarField) -> f64 {
    let dom = rhs.domain();
    loads(dom, rhs.values()).iter().fold(0.0, |m, v| m.max(v.abs()))
}
