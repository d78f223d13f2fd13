use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Geometry of a computational region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    /// The interval (0, length).
    Interval { length: f64 },
    /// The rectangle (0, width) x (0, height).
    Rectangle { width: f64, height: f64 },
    /// The ball of the given radius in R^dim, reduced to its radial profile on [0, radius].
    RadialBall { radius: f64, dim: usize },
}

/// One difference quotient `(u[j] - u[i]) / len` contributing `weight * D^2` to a cell's |grad u|^2.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Edge {
    pub i: usize,
    pub j: usize,
    pub inv_len: f64,
    pub weight: f64,
}

/// A quadrature cell: the discrete gradient is constant on it.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Cell {
    pub volume: f64,
    pub first: usize,
    pub count: usize,
}

/// A uniform grid on one of the three supported shapes, with Dirichlet boundary marking.
///
/// Every discrete operator in the crate is generated from the cell/edge tables built here:
/// the p-Dirichlet energy is `(1/p) sum_c volume_c |g_c|^p` where `|g_c|^2` is a weighted
/// sum of squared edge differences, and nodal loads are `mass_i * f_i`. For the radial ball
/// the cell volume carries the `r^(N-1)` Jacobian so that the scheme discretizes
/// `-(r^(N-1) |u'|^(p-2) u')' = r^(N-1) f` with a free (symmetric) node at `r = 0`.
#[derive(Debug)]
pub struct Domain {
    shape: Shape,
    h: f64,
    nx: usize,
    ny: usize,
    coords: Vec<[f64; 2]>,
    boundary: Vec<bool>,
    mass: Vec<f64>,
    pub(crate) cells: Vec<Cell>,
    pub(crate) edges: Vec<Edge>,
    pub(crate) node_cells: Vec<Vec<usize>>,
    bandwidth: usize,
}

impl Domain {
    /// Builds a domain with (nominal) spacing `h`. The number of intervals per axis is
    /// `round(extent / h)`; the effective spacing is `extent / n` and must agree across axes.
    pub fn new(shape: Shape, h: f64) -> Result<Arc<Domain>> {
        if !(h.is_finite() && h > 0.0) {
            return invalid(format!("grid spacing must be positive, got {h}"));
        }
        match shape {
            Shape::Interval { length } => {
                let n = intervals(length, h, "length")?;
                Ok(Arc::new(Self::build_interval(length, n)))
            }
            Shape::Rectangle { width, height } => {
                let nx = intervals(width, h, "width")?;
                let ny = intervals(height, h, "height")?;
                let (hx, hy) = (width / nx as f64, height / ny as f64);
                if ((hx - hy) / hx).abs() > 1e-9 {
                    return invalid(format!(
                        "rectangle {width} x {height} has no uniform grid near h = {h} (hx = {hx}, hy = {hy})"
                    ));
                }
                Ok(Arc::new(Self::build_rectangle(width, height, nx, ny)))
            }
            Shape::RadialBall { radius, dim } => {
                if dim < 1 {
                    return invalid("ball dimension must be at least 1");
                }
                let n = intervals(radius, h, "radius")?;
                Ok(Arc::new(Self::build_ball(radius, dim, n)))
            }
        }
    }

    /// Interval (0, length) split into `n` equal cells.
    pub fn interval(length: f64, n: usize) -> Result<Arc<Domain>> {
        check_count(n)?;
        check_extent(length, "length")?;
        Ok(Arc::new(Self::build_interval(length, n)))
    }

    /// Square/rectangle with `nx` x `ny` cells; the spacing must be uniform.
    pub fn rectangle(width: f64, height: f64, nx: usize, ny: usize) -> Result<Arc<Domain>> {
        check_count(nx)?;
        check_count(ny)?;
        check_extent(width, "width")?;
        check_extent(height, "height")?;
        let (hx, hy) = (width / nx as f64, height / ny as f64);
        if ((hx - hy) / hx).abs() > 1e-9 {
            return invalid(format!("rectangle grid {nx} x {ny} on {width} x {height} is not uniform"));
        }
        Ok(Arc::new(Self::build_rectangle(width, height, nx, ny)))
    }

    /// Radial ball of radius `radius` in R^dim, `n` radial cells.
    pub fn ball(radius: f64, dim: usize, n: usize) -> Result<Arc<Domain>> {
        check_count(n)?;
        check_extent(radius, "radius")?;
        if dim < 1 {
            return invalid("ball dimension must be at least 1");
        }
        Ok(Arc::new(Self::build_ball(radius, dim, n)))
    }

    fn build_interval(length: f64, n: usize) -> Domain {
        let h = length / n as f64;
        let coords = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
        let boundary = (0..=n).map(|i| i == 0 || i == n).collect::<Vec<_>>();
        let mass = (0..=n).map(|i| if i == 0 || i == n { 0.5 * h } else { h }).collect();
        let mut cells = Vec::with_capacity(n);
        let mut edges = Vec::with_capacity(n);
        for i in 0..n {
            cells.push(Cell { volume: h, first: edges.len(), count: 1 });
            edges.push(Edge { i, j: i + 1, inv_len: 1.0 / h, weight: 1.0 });
        }
        Self::finish(Shape::Interval { length }, h, n, 0, coords, boundary, mass, cells, edges)
    }

    fn build_rectangle(width: f64, height: f64, nx: usize, ny: usize) -> Domain {
        let h = width / nx as f64;
        let stride = nx + 1;
        let idx = |i: usize, j: usize| i + j * stride;
        let mut coords = Vec::with_capacity(stride * (ny + 1));
        let mut boundary = Vec::with_capacity(stride * (ny + 1));
        let mut mass = Vec::with_capacity(stride * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([i as f64 * h, j as f64 * h]);
                let bx = i == 0 || i == nx;
                let by = j == 0 || j == ny;
                boundary.push(bx || by);
                let fx = if bx { 0.5 } else { 1.0 };
                let fy = if by { 0.5 } else { 1.0 };
                mass.push(fx * fy * h * h);
            }
        }
        let mut cells = Vec::with_capacity(nx * ny);
        let mut edges = Vec::with_capacity(4 * nx * ny);
        let inv = 1.0 / h;
        for j in 0..ny {
            for i in 0..nx {
                cells.push(Cell { volume: h * h, first: edges.len(), count: 4 });
                // bottom, top (x-differences), left, right (y-differences)
                edges.push(Edge { i: idx(i, j), j: idx(i + 1, j), inv_len: inv, weight: 0.5 });
                edges.push(Edge { i: idx(i, j + 1), j: idx(i + 1, j + 1), inv_len: inv, weight: 0.5 });
                edges.push(Edge { i: idx(i, j), j: idx(i, j + 1), inv_len: inv, weight: 0.5 });
                edges.push(Edge { i: idx(i + 1, j), j: idx(i + 1, j + 1), inv_len: inv, weight: 0.5 });
            }
        }
        Self::finish(Shape::Rectangle { width, height }, h, nx, ny, coords, boundary, mass, cells, edges)
    }

    fn build_ball(radius: f64, dim: usize, n: usize) -> Domain {
        let h = radius / n as f64;
        let d = dim as f64;
        let coords = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
        let boundary = (0..=n).map(|i| i == n).collect();
        // dual-cell volumes of [r_{i-1/2}, r_{i+1/2}] clipped to [0, R], measure r^(N-1) dr
        let shell = |a: f64, b: f64| (b.powf(d) - a.powf(d)) / d;
        let mass = (0..=n)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
                let hi = if i == n { radius } else { (i as f64 + 0.5) * h };
                shell(lo, hi)
            })
            .collect();
        let mut cells = Vec::with_capacity(n);
        let mut edges = Vec::with_capacity(n);
        for i in 0..n {
            let rc = (i as f64 + 0.5) * h;
            cells.push(Cell { volume: rc.powf(d - 1.0) * h, first: edges.len(), count: 1 });
            edges.push(Edge { i, j: i + 1, inv_len: 1.0 / h, weight: 1.0 });
        }
        Self::finish(Shape::RadialBall { radius, dim }, h, n, 0, coords, boundary, mass, cells, edges)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        shape: Shape,
        h: f64,
        nx: usize,
        ny: usize,
        coords: Vec<[f64; 2]>,
        boundary: Vec<bool>,
        mass: Vec<f64>,
        cells: Vec<Cell>,
        edges: Vec<Edge>,
    ) -> Domain {
        let mut node_cells = vec![Vec::new(); coords.len()];
        let mut bandwidth = 0;
        for (c, cell) in cells.iter().enumerate() {
            let es = &edges[cell.first..cell.first + cell.count];
            let lo = es.iter().map(|e| e.i.min(e.j)).min().unwrap_or(0);
            let hi = es.iter().map(|e| e.i.max(e.j)).max().unwrap_or(0);
            bandwidth = bandwidth.max(hi - lo);
            let mut nodes: Vec<usize> = es.iter().flat_map(|e| [e.i, e.j]).collect();
            nodes.sort_unstable();
            nodes.dedup();
            for n in nodes {
                node_cells[n].push(c);
            }
        }
        Domain { shape, h, nx, ny, coords, boundary, mass, cells, edges, node_cells, bandwidth }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Grid spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Dimension N of the ambient space (1 for the interval).
    pub fn ambient_dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            Shape::Rectangle { .. } => 2,
            Shape::RadialBall { dim, .. } => dim,
        }
    }

    /// Number of cells along each grid axis (`ny == 0` for one-dimensional grids).
    pub fn divisions(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Node coordinates; `[x, 0]` on the interval, `[r, 0]` on the ball.
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    /// Quadrature weight of each node's dual cell (including the radial Jacobian).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Indices of nodes carrying an unknown (everything not on the Dirichlet boundary).
    pub fn free_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(move |&i| !self.boundary[i])
    }

    /// Half bandwidth of the stiffness pattern in natural node order.
    pub(crate) fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub(crate) fn cell_edges(&self, c: usize) -> &[Edge] {
        let cell = &self.cells[c];
        &self.edges[cell.first..cell.first + cell.count]
    }

    /// Names of the coordinate columns used by the CSV export.
    pub fn coord_names(&self) -> &'static [&'static str] {
        match self.shape {
            Shape::Interval { .. } => &["x"],
            Shape::Rectangle { .. } => &["x", "y"],
            Shape::RadialBall { .. } => &["r"],
        }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n < 2 {
        return invalid(format!("need at least 3 nodes per axis, got {} cells", n));
    }
    Ok(())
}

fn check_extent(v: f64, what: &str) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return invalid(format!("{what} must be positive, got {v}"));
    }
    Ok(())
}

fn intervals(extent: f64, h: f64, what: &str) -> Result<usize> {
    check_extent(extent, what)?;
    let n = (extent / h).round();
    if n < 2.0 {
        return invalid(format!("{what} {extent} with h = {h} gives fewer than 3 nodes"));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_layout() {
        let d = Domain::interval(1.0, 4).unwrap();
        assert_eq!(d.num_nodes(), 5);
        assert_eq!(d.boundary(), &[true, false, false, false, true]);
        assert_eq!(d.free_nodes().count(), 3);
        assert!((d.mass().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(d.bandwidth(), 1);
    }

    #[test]
    fn rectangle_needs_uniform_spacing() {
        assert!(Domain::new(Shape::Rectangle { width: 1.0, height: 0.5 }, 0.25).is_ok());
        assert!(Domain::rectangle(1.0, 1.0, 4, 3).is_err());
        let d = Domain::rectangle(1.0, 1.0, 4, 4).unwrap();
        assert_eq!(d.num_nodes(), 25);
        assert_eq!(d.free_nodes().count(), 9);
        assert_eq!(d.bandwidth(), 6);
        assert!((d.mass().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ball_masses_sum_to_volume_factor() {
        // sum of dual volumes = R^N / N
        let d = Domain::ball(1.0, 3, 10).unwrap();
        assert!((d.mass().iter().sum::<f64>() - 1.0 / 3.0).abs() < 1e-14);
        assert!(!d.is_boundary(0));
        assert!(d.is_boundary(10));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Domain::interval(1.0, 1).is_err());
        assert!(Domain::new(Shape::Interval { length: 1.0 }, 0.0).is_err());
        assert!(Domain::new(Shape::Interval { length: -1.0 }, 0.1).is_err());
        assert!(Domain::new(Shape::Interval { length: 1.0 }, 0.8).is_err());
    }
}
