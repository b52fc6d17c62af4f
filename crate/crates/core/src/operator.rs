//! Discrete Dirichlet operator `w ↦ div(d ∇w)` on tensor grids.
//!
//! The matrix is stored as a symmetric stencil: a main diagonal plus one band
//! per axis coupling node `i` with node `i + stride`. Shifted resolvent
//! systems `I - τA` are factored with a banded Cholesky decomposition; dense
//! eigendecompositions back the exact semigroup and the spectral norms.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Largest number of unknowns for which dense eigendecompositions are formed.
pub const EIGEN_SIZE_LIMIT: usize = 4096;

/// Off-diagonal band of a [`StencilMatrix`]: `values[i]` is the entry at
/// `(i, i + offset)` (and, by symmetry, `(i + offset, i)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub offset: usize,
    pub values: Vec<f64>,
}

/// Symmetric banded matrix with a handful of nonzero diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilMatrix {
    diag: Vec<f64>,
    bands: Vec<Band>,
}

impl StencilMatrix {
    pub fn new(diag: Vec<f64>, bands: Vec<Band>) -> Self {
        debug_assert!(bands
            .iter()
            .all(|b| b.offset > 0 && b.values.len() + b.offset == diag.len()));
        Self { diag, bands }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.iter().map(|b| b.offset).max().unwrap_or(0)
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diag).zip(x) {
            *yi = d * xi;
        }
        for band in &self.bands {
            let o = band.offset;
            for (i, &m) in band.values.iter().enumerate() {
                if m != 0.0 {
                    y[i] += m * x[i + o];
                    y[i + o] += m * x[i];
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        y
    }

    /// `M - diag(q)`.
    pub fn minus_diagonal(&self, q: &[f64]) -> StencilMatrix {
        let diag = self.diag.iter().zip(q).map(|(d, q)| d - q).collect();
        StencilMatrix::new(diag, self.bands.clone())
    }

    /// `s M`.
    pub fn scaled(&self, s: f64) -> StencilMatrix {
        StencilMatrix::new(
            self.diag.iter().map(|d| s * d).collect(),
            self.bands
                .iter()
                .map(|b| Band {
                    offset: b.offset,
                    values: b.values.iter().map(|v| s * v).collect(),
                })
                .collect(),
        )
    }

    /// `I - τ M`, the backward-Euler system matrix.
    pub fn identity_minus(&self, tau: f64) -> StencilMatrix {
        let mut m = self.scaled(-tau);
        m.diag.iter_mut().for_each(|d| *d += 1.0);
        m
    }

    /// Entry `(i, j)`; zero outside the stored pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.bands
            .iter()
            .find(|b| b.offset == hi - lo)
            .map_or(0.0, |b| b.values[lo])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.len()];
        self.mul_vec(&ones)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for band in &self.bands {
            for (i, &v) in band.values.iter().enumerate() {
                m[(i, i + band.offset)] = v;
                m[(i + band.offset, i)] = v;
            }
        }
        debug_assert_eq!(m.nrows(), n);
        m
    }
}

/// Banded Cholesky factor `S = L Lᵀ` of a symmetric positive definite
/// [`StencilMatrix`]. Costs `O(N b²)` to factor and `O(N b)` per solve.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // Row-major: entry (i, j) for i - bw <= j <= i lives at i * (bw + 1) + (j + bw - i).
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(s: &StencilMatrix) -> Result<Self> {
        let n = s.len();
        let bw = s.bandwidth();
        let width = bw + 1;
        let mut l = vec![0.0; n * width];
        for (i, &d) in s.diag.iter().enumerate() {
            l[i * width + bw] = d;
        }
        for band in &s.bands {
            for (j, &v) in band.values.iter().enumerate() {
                let i = j + band.offset;
                l[i * width + (j + bw - i)] = v;
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut acc = l[i * width + (j + bw - i)];
                for k in j0..j {
                    acc -= l[i * width + (k + bw - i)] * l[j * width + (k + bw - j)];
                }
                if i == j {
                    if !(acc > 0.0) {
                        return Err(Error::SingularResolvent(acc));
                    }
                    l[i * width + bw] = acc.sqrt();
                } else {
                    l[i * width + (j + bw - i)] = acc / l[j * width + bw];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Overwrites `b` with `S⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, width) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let row = &self.l[i * width..(i + 1) * width];
            let mut acc = b[i];
            for k in j0..i {
                acc -= row[k + bw - i] * b[k];
            }
            b[i] = acc / row[bw];
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            let hi = n.min(i + bw + 1);
            for (k, bk) in b.iter().enumerate().take(hi).skip(i + 1) {
                acc -= self.l[k * width + (i + bw - k)] * bk;
            }
            b[i] = acc / self.l[i * width + bw];
        }
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted in decreasing order.
/// Eigenvectors are orthonormal in the Euclidean inner product.
#[derive(Debug, Clone)]
pub struct Eigenbasis {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigenbasis {
    pub fn of_symmetric(m: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = eig.eigenvectors.select_columns(&order);
        Self { values, vectors }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest eigenvalue.
    pub fn spectral_bound(&self) -> f64 {
        self.values[0]
    }

    /// Euclidean coefficients `Vᵀ v`.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(v);
        (self.vectors.tr_mul(&v)).as_slice().to_vec()
    }

    /// `V c`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        let c = nalgebra::DVector::from_column_slice(c);
        (&self.vectors * c).as_slice().to_vec()
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn function_matrix(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        scaled * self.vectors.transpose()
    }

    /// `V diag(f(λ)) Vᵀ v` without forming the matrix.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64, v: &[f64]) -> Vec<f64> {
        let mut c = self.coefficients(v);
        for (ck, &lam) in c.iter_mut().zip(&self.values) {
            *ck *= f(lam);
        }
        self.synthesize(&c)
    }
}

pub(crate) fn check_eigen_size(nodes: usize) -> Result<()> {
    if nodes > EIGEN_SIZE_LIMIT {
        Err(Error::TooLargeForEigen {
            nodes,
            limit: EIGEN_SIZE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// The assembled diffusion operator `L ≈ div(d ∇·)` with homogeneous
/// Dirichlet conditions.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    grid: Arc<SpatialGrid>,
    matrix: StencilMatrix,
    diffusivity: Vec<f64>,
    eigen: OnceLock<Eigenbasis>,
}

impl SpatialOperator {
    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn matrix(&self) -> &StencilMatrix {
        &self.matrix
    }

    /// Diffusivity samples at the cell midpoints, axis by axis.
    pub fn diffusivity_samples(&self) -> &[f64] {
        &self.diffusivity
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Cached eigendecomposition; refused above [`EIGEN_SIZE_LIMIT`].
    pub fn eigenbasis(&self) -> Result<&Eigenbasis> {
        check_eigen_size(self.len())?;
        Ok(self
            .eigen
            .get_or_init(|| Eigenbasis::of_symmetric(self.matrix.to_dense())))
    }

    /// The spectral bound `s₀ < 0`.
    pub fn spectral_bound(&self) -> Result<f64> {
        Ok(self.eigenbasis()?.spectral_bound())
    }
}

/// Second-order conservative discretization of `div(d ∇w)` with `d` sampled
/// at cell midpoints. Boundary neighbours are the homogeneous Dirichlet
/// values and drop out of the stencil.
pub fn assemble_diffusion(
    grid: Arc<SpatialGrid>,
    d: impl Fn(&[f64]) -> f64,
) -> Result<SpatialOperator> {
    let n = grid.len();
    let dim = grid.dimension();
    let mut diag = vec![0.0; n];
    let mut bands = Vec::with_capacity(dim);
    let mut samples = Vec::new();
    let mut stride = 1;
    for (axis_idx, axis) in grid.axes().iter().enumerate() {
        let h = axis.spacing();
        let inv_h2 = 1.0 / (h * h);
        let mut upper = vec![0.0; n - stride];
        for idx in 0..n {
            let pos = grid.index(idx)[axis_idx];
            let mut p = grid.node(idx);
            // Midpoint on the low side of every node; the last node also owns
            // its high-side midpoint next to the boundary.
            p[axis_idx] -= 0.5 * h;
            let lo = sample_diffusivity(&d, &p[..dim])?;
            samples.push(lo);
            diag[idx] -= lo * inv_h2;
            if pos > 0 {
                upper[idx - stride] = lo * inv_h2;
                diag[idx - stride] -= lo * inv_h2;
            }
            if pos + 1 == axis.n {
                p[axis_idx] += h;
                let hi = sample_diffusivity(&d, &p[..dim])?;
                samples.push(hi);
                diag[idx] -= hi * inv_h2;
            }
        }
        bands.push(Band {
            offset: stride,
            values: upper,
        });
        stride *= axis.n;
    }
    // Single-node grids have no couplings at all.
    bands.retain(|b| !b.values.is_empty());
    Ok(SpatialOperator {
        grid,
        matrix: StencilMatrix::new(diag, bands),
        diffusivity: samples,
        eigen: OnceLock::new(),
    })
}

fn sample_diffusivity(d: &impl Fn(&[f64]) -> f64, p: &[f64]) -> Result<f64> {
    let v = d(p);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositiveDiffusivity {
            value: v,
            location: p.to_vec(),
        })
    }
}
