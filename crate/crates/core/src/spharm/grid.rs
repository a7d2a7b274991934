use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;

/// Gauss–Legendre latitudes crossed with uniformly spaced longitudes.
///
/// `mu` holds the sine of latitude at each ring, ascending from the south
/// pole. `weights` are the Gauss–Legendre weights on `[-1, 1]`; a cell at
/// ring `i` carries area `weights[i] * 2π / nlon`, so the cells tile the
/// sphere with total area `4π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nlat: usize,
    nlon: usize,
    mu: Vec<f64>,
    weights: Vec<f64>,
    lon: Vec<f64>,
}

impl Grid {
    pub fn new(nlat: usize, nlon: usize) -> Result<Self> {
        if nlat < 2 {
            return Err(Error::GridSize(format!("nlat={nlat} must be at least 2")));
        }
        if nlon < 4 || nlon % 2 != 0 {
            return Err(Error::GridSize(format!(
                "nlon={nlon} must be even and at least 4"
            )));
        }
        let (mu, weights) = gauss_legendre(nlat)?;
        let lon = (0..nlon)
            .map(|k| 2.0 * PI * k as f64 / nlon as f64)
            .collect();
        Ok(Self {
            nlat,
            nlon,
            mu,
            weights,
            lon,
        })
    }

    /// Smallest grid on which analysis at truncation `trunc` is exact for
    /// band-limited input.
    pub fn for_truncation(trunc: usize) -> Result<Self> {
        Self::new((trunc + 1).max(2), even_at_least(2 * trunc + 1))
    }

    /// Grid for alias-free evaluation of quadratic products (3/2 rule).
    pub fn dealiased(trunc: usize) -> Result<Self> {
        Self::new(
            (3 * (trunc + 1)).div_ceil(2).max(2),
            even_at_least(3 * trunc + 1),
        )
    }

    /// Grid on which quadrature of any product of `order` fields band-limited
    /// at `trunc` is exact.
    pub fn for_products(trunc: usize, order: usize) -> Result<Self> {
        let degree = order.max(1) * trunc;
        Self::new((degree + 2).div_ceil(2).max(2), even_at_least(degree + 1))
    }

    pub fn nlat(&self) -> usize {
        self.nlat
    }

    pub fn nlon(&self) -> usize {
        self.nlon
    }

    pub fn len(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lon(&self) -> &[f64] {
        &self.lon
    }

    pub fn cell_area(&self, ring: usize) -> f64 {
        self.weights[ring] * 2.0 * PI / self.nlon as f64
    }

    pub fn total_area(&self) -> f64 {
        (0..self.nlat).map(|i| self.cell_area(i)).sum::<f64>() * self.nlon as f64
    }

    /// Cartesian position of node `(ring, k)`.
    pub fn point(&self, ring: usize, k: usize) -> Vector3<f64> {
        let mu = self.mu[ring];
        let rho = (1.0 - mu * mu).sqrt();
        let (s, c) = self.lon[k].sin_cos();
        Vector3::new(rho * c, rho * s, mu)
    }

    /// All node positions in ring-major order.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nlat {
            for k in 0..self.nlon {
                out.push(self.point(i, k));
            }
        }
        out
    }

    /// Cell areas in ring-major order.
    pub fn areas(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nlat {
            let a = self.cell_area(i);
            out.extend(std::iter::repeat_n(a, self.nlon));
        }
        out
    }

    /// Samples a function of position at every node.
    pub fn sample<F: Fn(Vector3<f64>) -> f64>(self: &Arc<Self>, f: F) -> GridField {
        let values = self.points().into_iter().map(f).collect();
        GridField {
            grid: Arc::clone(self),
            values,
        }
    }
}

fn even_at_least(n: usize) -> usize {
    let n = n.max(4);
    n + n % 2
}

/// Nodes (ascending) and weights of the `n`-point Gauss–Legendre rule.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NodeSolve { index: i, nlat: n });
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Real samples on a [`Grid`], ring-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample {v}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid.len(), other.grid.len(), "grid mismatch");
        Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Quadrature of `f(value)` over the sphere.
    pub fn integrate_with(&self, f: impl Fn(f64) -> f64) -> f64 {
        let nlon = self.grid.nlon;
        let mut total = 0.0;
        for (i, ring) in self.values.chunks(nlon).enumerate() {
            let s: f64 = ring.iter().map(|&v| f(v)).sum();
            total += self.grid.cell_area(i) * s;
        }
        total
    }

    pub fn integrate(&self) -> f64 {
        self.integrate_with(|v| v)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        self.integrate_with(|v| v.abs().powf(p)).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.integrate_with(|v| v * v).sqrt()
    }

    /// `∫ x u dσ`.
    pub fn moment(&self) -> Vector3<f64> {
        let g = &self.grid;
        let mut m = Vector3::zeros();
        for i in 0..g.nlat {
            let area = g.cell_area(i);
            for k in 0..g.nlon {
                m += g.point(i, k) * (area * self.values[i * g.nlon + k]);
            }
        }
        m
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_rule() {
        let g = Grid::new(2, 4).unwrap();
        assert_relative_eq!(g.mu()[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(g.mu()[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(g.total_area(), 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn total_area_is_four_pi() {
        for (nlat, nlon) in [(24, 48), (33, 64), (7, 16), (101, 200)] {
            let g = Grid::new(nlat, nlon).unwrap();
            assert_relative_eq!(g.total_area(), 4.0 * PI, max_relative = 1e-13);
        }
    }

    #[test]
    fn x3_squared_integral() {
        let g = Arc::new(Grid::new(8, 16).unwrap());
        let f = g.sample(|x| x.z * x.z);
        assert_relative_eq!(f.integrate(), 4.0 * PI / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn nodes_are_legendre_roots() {
        let n = 40;
        let g = Grid::new(n, 8).unwrap();
        for &x in g.mu() {
            assert!(legendre_with_derivative(n, x).0.abs() < 1e-13);
        }
        assert!(g.mu().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(Grid::new(1, 8), Err(Error::GridSize(_))));
        assert!(matches!(Grid::new(4, 7), Err(Error::GridSize(_))));
        assert!(matches!(Grid::new(4, 2), Err(Error::GridSize(_))));
    }

    #[test]
    fn dealiased_sizes() {
        let g = Grid::dealiased(21).unwrap();
        assert_eq!((g.nlat(), g.nlon()), (33, 64));
    }

    #[test]
    fn moment_of_coordinate() {
        let g = Arc::new(Grid::new(6, 12).unwrap());
        let m = g.sample(|x| x.y).moment();
        assert_relative_eq!(m.y, 4.0 * PI / 3.0, epsilon = 1e-13);
        assert!(m.x.abs() < 1e-14 && m.z.abs() < 1e-14);
    }
}
