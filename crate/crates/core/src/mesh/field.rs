use std::sync::Arc;

use super::domain::{Domain, Shape};
use crate::error::{invalid, Result};

/// Nodal values on a [`Domain`].
///
/// When `dirichlet` is set the boundary values are exactly zero. Every constructor rejects
/// non-finite values.
#[derive(Clone, Debug)]
pub struct ScalarField {
    domain: Arc<Domain>,
    values: Vec<f64>,
    dirichlet: bool,
}

impl ScalarField {
    pub fn new(domain: Arc<Domain>, values: Vec<f64>, dirichlet: bool) -> Result<Self> {
        if values.len() != domain.num_nodes() {
            return invalid(format!("field has {} values for {} nodes", values.len(), domain.num_nodes()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite value {} at node {i}", values[i]));
        }
        if dirichlet {
            if let Some(i) = domain.free_nodes_complement().find(|&i| values[i] != 0.0) {
                return invalid(format!("Dirichlet field is {} on boundary node {i}", values[i]));
            }
        }
        Ok(ScalarField { domain, values, dirichlet })
    }

    /// Builds a field without validation; callers guarantee finiteness and boundary zeros.
    pub(crate) fn from_raw(domain: Arc<Domain>, values: Vec<f64>, dirichlet: bool) -> Self {
        debug_assert_eq!(values.len(), domain.num_nodes());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ScalarField { domain, values, dirichlet }
    }

    pub fn zeros(domain: Arc<Domain>) -> Self {
        let n = domain.num_nodes();
        ScalarField { domain, values: vec![0.0; n], dirichlet: true }
    }

    /// Samples `f(x, y)` at the nodes (`x` is the radius on the ball). With `dirichlet`,
    /// boundary nodes are set to zero regardless of `f`.
    pub fn from_fn(domain: Arc<Domain>, dirichlet: bool, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = domain
            .coords()
            .iter()
            .enumerate()
            .map(|(i, c)| if dirichlet && domain.is_boundary(i) { 0.0 } else { f(c[0], c[1]) })
            .collect();
        Self::new(domain, values, dirichlet)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Self {
        let values = self.values.iter().map(|v| k * v).collect();
        ScalarField { domain: self.domain.clone(), values, dirichlet: self.dirichlet }
    }

    /// Nodewise `self - other`.
    pub fn difference(&self, other: &ScalarField) -> Result<Self> {
        same_domain(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ScalarField { domain: self.domain.clone(), values, dirichlet: self.dirichlet && other.dirichlet })
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the (first) node with the largest |value|.
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        best
    }
}

pub(crate) fn same_domain(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if Arc::ptr_eq(&a.domain, &b.domain) {
        return Ok(());
    }
    if a.domain.shape() == b.domain.shape() && a.domain.num_nodes() == b.domain.num_nodes() {
        return Ok(());
    }
    invalid("fields live on different domains")
}

impl Domain {
    pub(crate) fn free_nodes_complement(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(move |&i| self.is_boundary(i))
    }
}

/// Nonnegative weight sampled on the grid, not identically zero.
#[derive(Clone, Debug)]
pub struct Weight(ScalarField);

impl Weight {
    pub fn new(field: ScalarField) -> Result<Self> {
        if let Some(i) = field.values().iter().position(|&v| v < 0.0) {
            return invalid(format!("weight is negative ({}) at node {i}", field.values()[i]));
        }
        if field.max() <= 0.0 {
            return invalid("weight vanishes identically");
        }
        // weights are sampled on the closed domain
        let f = ScalarField { dirichlet: false, ..field };
        Ok(Weight(f))
    }

    pub fn constant(domain: Arc<Domain>, c: f64) -> Result<Self> {
        Self::from_fn(domain, |_, _| c)
    }

    pub fn from_fn(domain: Arc<Domain>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(ScalarField::from_fn(domain, false, f)?)
    }

    /// Nodewise maximum of two weights.
    pub fn max_of(a: &Weight, b: &Weight) -> Result<Self> {
        same_domain(&a.0, &b.0)?;
        let values = a.values().iter().zip(b.values()).map(|(x, y)| x.max(*y)).collect();
        Self::new(ScalarField::new(a.0.domain.clone(), values, false)?)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.scaled(c))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.0.domain()
    }

    pub fn sup(&self) -> f64 {
        self.0.max()
    }

    pub fn inf(&self) -> f64 {
        self.0.min()
    }
}

/// Discrete sup-norm: max of |f| over all nodes, boundary included.
pub fn sup_norm(f: &ScalarField) -> f64 {
    sup_abs(f.values())
}

pub(crate) fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Nodal magnitude of the discrete gradient.
///
/// Interior nodes use central differences (the mean of the two adjacent midpoint differences
/// per axis); boundary nodes use second-order one-sided differences, where the maximum of
/// |grad phi| sits for torsion functions. On the ball the value at `r = 0` is zero (symmetry).
pub fn grad_magnitude(f: &ScalarField) -> ScalarField {
    let dom = f.domain().clone();
    let u = f.values();
    let h = dom.h();
    let values = match dom.shape() {
        Shape::Interval { .. } => {
            let n = dom.divisions().0;
            (0..=n).map(|i| axis_derivative(|k| u[k], i, n, h).abs()).collect()
        }
        Shape::RadialBall { .. } => {
            let n = dom.divisions().0;
            (0..=n).map(|i| if i == 0 { 0.0 } else { axis_derivative(|k| u[k], i, n, h).abs() }).collect()
        }
        Shape::Rectangle { .. } => {
            let (nx, ny) = dom.divisions();
            let stride = nx + 1;
            let mut out = Vec::with_capacity(u.len());
            for j in 0..=ny {
                for i in 0..=nx {
                    let gx = axis_derivative(|k| u[k + j * stride], i, nx, h);
                    let gy = axis_derivative(|k| u[i + k * stride], j, ny, h);
                    out.push(gx.hypot(gy));
                }
            }
            out
        }
    };
    ScalarField::from_raw(dom, values, false)
}

fn axis_derivative(u: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (2.0 * h)
    } else if i == n {
        (3.0 * u(n) - 4.0 * u(n - 1) + u(n - 2)) / (2.0 * h)
    } else {
        (u(i + 1) - u(i - 1)) / (2.0 * h)
    }
}
