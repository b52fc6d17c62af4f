//! Uniform tensor grids on intervals and rectangles, grid functions, and the
//! quadrature-weighted discrete norms used throughout the crate.
//!
//! Only interior nodes carry unknowns. Homogeneous Dirichlet data sits on the
//! boundary, so a grid with `n` interior nodes per axis has spacing
//! `h = (b - a) / (n + 1)` and every node carries the cell volume `h^dim`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::Eigenbasis;

/// Coordinates of a node; the second entry is unused in 1D.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    /// Number of interior nodes.
    pub n: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.n as f64 + 1.0)
    }

    /// Coordinate of interior node `i` (zero-based), i.e. `a + (i + 1) h`.
    pub fn coord(&self, i: usize) -> f64 {
        self.lower + (i as f64 + 1.0) * self.spacing()
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// A 1D or 2D uniform grid of interior nodes. Nodes are numbered with the
/// first axis running fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    axes: Vec<Axis>,
}

impl SpatialGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (k, ax) in axes.iter().enumerate() {
            if !(ax.lower.is_finite() && ax.upper.is_finite()) || ax.lower >= ax.upper {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: endpoints must be finite and strictly ordered, got ({}, {})",
                    ax.lower, ax.upper
                )));
            }
            if ax.n == 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: need at least one interior node"
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of every node (the cell volume).
    pub fn weight(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![self.weight(); self.len()]
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(Axis::length).product()
    }

    /// Total mass of the closed-grid trapezoidal rule: the interior weights
    /// plus the half cells at the boundary nodes, where grid functions vanish.
    /// Equals [`measure`](Self::measure) up to rounding.
    pub fn closed_quadrature_total(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| a.n as f64 * a.spacing() + a.spacing())
            .product()
    }

    /// Multi-index of node `idx`.
    pub fn index(&self, idx: usize) -> [usize; 2] {
        let n0 = self.axes[0].n;
        [idx % n0, idx / n0]
    }

    pub fn node(&self, idx: usize) -> Point {
        let [i, j] = self.index(idx);
        let x = self.axes[0].coord(i);
        let y = self.axes.get(1).map_or(0.0, |a| a.coord(j));
        [x, y]
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Index of the node closest to `p`.
    pub fn nearest(&self, p: &[f64]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (k, ax) in self.axes.iter().enumerate() {
            let x = p.get(k).copied().unwrap_or(ax.lower);
            let i = ((x - ax.lower) / ax.spacing() - 1.0).round();
            let i = i.clamp(0.0, ax.n as f64 - 1.0) as usize;
            idx += i * stride;
            stride *= ax.n;
        }
        idx
    }
}

/// Builds a uniform grid with `n_per_axis[k]` interior nodes on
/// `(endpoints[k].0, endpoints[k].1)`.
pub fn build_grid(
    dimension: usize,
    endpoints: &[(f64, f64)],
    n_per_axis: &[usize],
) -> Result<Arc<SpatialGrid>> {
    if endpoints.len() != dimension || n_per_axis.len() != dimension {
        return Err(Error::InvalidGrid(format!(
            "dimension {dimension} needs {dimension} endpoint pairs and node counts, got {} and {}",
            endpoints.len(),
            n_per_axis.len()
        )));
    }
    let axes = endpoints
        .iter()
        .zip(n_per_axis)
        .map(|(&(lower, upper), &n)| Axis { lower, upper, n })
        .collect();
    SpatialGrid::new(axes).map(Arc::new)
}

/// Which discrete norm to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum Norm<'a> {
    /// Quadrature-weighted `L_q`, `q > 1`.
    Lq(f64),
    Sup,
    /// Spectral stand-in for `W^{2θ}` at `p = 2`:
    /// `(Σ_k (1 + |λ_k|)^{2θ} |v̂_k|²)^{1/2}` in the eigenbasis of the
    /// diffusion operator.
    Fractional {
        theta: f64,
        basis: &'a Eigenbasis,
    },
}

/// Node values of a field on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<SpatialGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<SpatialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<SpatialGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: Arc<SpatialGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dimension();
        let values = grid.nodes().map(|p| f(&p[..dim])).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn same_grid(&self, other: &SpatialGrid) -> bool {
        *self.grid == *other
    }

    pub fn norm(&self, which: Norm<'_>) -> Result<f64> {
        match which {
            Norm::Sup => Ok(self.max_abs()),
            Norm::Lq(q) => {
                if !(q > 1.0 && q.is_finite()) {
                    return Err(Error::InvalidNorm(format!(
                        "L_q needs 1 < q < inf, got {q}"
                    )));
                }
                let w = self.grid.weight();
                let s: f64 = self.values.iter().map(|v| w * v.abs().powf(q)).sum();
                Ok(s.powf(1.0 / q))
            }
            Norm::Fractional { theta, basis } => {
                if !(0.0..=1.0).contains(&theta) {
                    return Err(Error::InvalidNorm(format!(
                        "fractional order theta must lie in [0, 1], got {theta}"
                    )));
                }
                if basis.len() != self.len() {
                    return Err(Error::GridMismatch(
                        "eigenbasis size differs from the grid function".into(),
                    ));
                }
                let coeffs = basis.coefficients(&self.values);
                let w = self.grid.weight();
                let s: f64 = coeffs
                    .iter()
                    .zip(basis.values.iter())
                    .map(|(c, lam)| (1.0 + lam.abs()).powf(2.0 * theta) * w * c * c)
                    .sum();
                Ok(s.sqrt())
            }
        }
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.grid != other.grid && *self.grid != *other.grid {
            return Err(Error::GridMismatch(
                "difference of fields on different grids".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(GridFunction {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Exact `L_p → L_∞` operator norm of `m` over the quadrature-weighted grid,
/// by Hölder duality row by row:
/// `max_i (Σ_j w_j^{1-p'} |m_ij|^{p'})^{1/p'}` with `p' = p/(p-1)`.
/// `p = ∞` gives the maximum absolute row sum.
pub fn operator_norm_p_to_inf(m: &DMatrix<f64>, grid: &SpatialGrid, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidNorm(format!("p must exceed 1, got {p}")));
    }
    if m.nrows() != grid.len() || m.ncols() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{}x{} matrix on a grid of {} nodes",
            m.nrows(),
            m.ncols(),
            grid.len()
        )));
    }
    let w = grid.weight();
    let norm = if p.is_infinite() {
        m.row_iter()
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    } else {
        let q = p / (p - 1.0);
        let wf = w.powf(1.0 - q);
        m.row_iter()
            .map(|row| {
                let s: f64 = row.iter().map(|x| wf * x.abs().powf(q)).sum();
                s.powf(1.0 / q)
            })
            .fold(0.0, f64::max)
    };
    Ok(norm)
}
