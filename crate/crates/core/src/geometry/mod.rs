//! Spin surfaces, their analytic Dirac spectra, quadrature grids, and truncated
//! spinor eigenbases used for Galerkin discretization.
//!
//! Two surfaces are supported: the unit round sphere and flat tori with an
//! arbitrary nondegenerate lattice and one of the four spin structures. Both
//! carry closed-form Dirac eigenbases, so the basis construction is exact up to
//! quadrature and the optimizer is the only approximation source.

mod factor;
pub mod quadrature;
mod sphere;
mod torus;
pub mod wigner;

pub use factor::{evaluate_factor, ConformalFactor, FactorForm};
pub use sphere::build_sphere_basis;
pub use torus::{build_torus_basis, unit_square_lattice};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which spin surface a basis lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    RoundSphere,
    FlatTorus,
}

/// Spin structure on the torus: two half-integer shifts, entries in {0, 1/2}.
/// The trivial structure (0,0) carries a two-dimensional space of harmonic
/// spinors; every other choice has trivial kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinStructure {
    pub shifts: [f64; 2],
}

impl SpinStructure {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        for v in [a, b] {
            if v != 0.0 && v != 0.5 {
                return Err(Error::validation(
                    "spin_structure",
                    format!("entries must be 0 or 1/2, got {v}"),
                ));
            }
        }
        Ok(SpinStructure { shifts: [a, b] })
    }

    pub fn is_trivial(&self) -> bool {
        self.shifts == [0.0, 0.0]
    }
}

/// A spin surface and its analytic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    /// Lattice vectors as rows, torus only.
    pub lattice: Option<[[f64; 2]; 2]>,
    pub spin_structure: Option<SpinStructure>,
    pub genus: u32,
    pub area: f64,
}

impl SurfaceSpec {
    /// Unit round sphere: genus 0, area 4π.
    pub fn round_sphere() -> Self {
        SurfaceSpec {
            kind: SurfaceKind::RoundSphere,
            lattice: None,
            spin_structure: None,
            genus: 0,
            area: 4.0 * std::f64::consts::PI,
        }
    }

    /// Flat torus R²/Γ with Γ spanned by the rows of `lattice`.
    pub fn flat_torus(lattice: [[f64; 2]; 2], spin: SpinStructure) -> Result<Self> {
        let det = lattice[0][0] * lattice[1][1] - lattice[0][1] * lattice[1][0];
        if det.abs() < 1e-12 {
            return Err(Error::validation(
                "lattice",
                "lattice vectors must be linearly independent",
            ));
        }
        Ok(SurfaceSpec {
            kind: SurfaceKind::FlatTorus,
            lattice: Some(lattice),
            spin_structure: Some(spin),
            genus: 1,
            area: det.abs(),
        })
    }

    /// Minimum of the scalar curvature, used by the Friedrich bound.
    pub fn min_scalar_curvature(&self) -> f64 {
        match self.kind {
            SurfaceKind::RoundSphere => 2.0,
            SurfaceKind::FlatTorus => 0.0,
        }
    }

    /// Gauss curvature of the reference metric (constant for both surfaces).
    pub fn gauss_curvature(&self) -> f64 {
        match self.kind {
            SurfaceKind::RoundSphere => 1.0,
            SurfaceKind::FlatTorus => 0.0,
        }
    }
}

/// Quadrature grid on the surface, stored as a structured rows × cols lattice.
///
/// Sphere: rows index Gauss–Legendre colatitudes, cols a uniform longitude
/// grid. Torus: uniform grid in lattice coordinates. Row-major node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub surface: SurfaceSpec,
    pub rows: usize,
    pub cols: usize,
    /// Quadrature weight per node (units of area); sums to the surface area.
    pub weights: Vec<f64>,
    /// Intrinsic coordinates per node: (θ, φ) on the sphere, (t₁, t₂) on the torus.
    pub coords: Vec<[f64; 2]>,
    /// Embedding used for geodesic distances: unit vectors (sphere) or
    /// lattice-plane points (torus, z = 0).
    pub positions: Vec<[f64; 3]>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Geodesic distance between two nodes.
    pub fn geodesic_distance(&self, i: usize, j: usize) -> f64 {
        match self.surface.kind {
            SurfaceKind::RoundSphere => {
                let a = self.positions[i];
                let b = self.positions[j];
                let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                dot.clamp(-1.0, 1.0).acos()
            }
            SurfaceKind::FlatTorus => {
                let lat = self.surface.lattice.expect("torus grid carries a lattice");
                let a = self.positions[i];
                let b = self.positions[j];
                let mut best = f64::INFINITY;
                // Minimum-image over neighbouring lattice translates.
                for s1 in -1..=1 {
                    for s2 in -1..=1 {
                        let dx = a[0] - b[0] + s1 as f64 * lat[0][0] + s2 as f64 * lat[1][0];
                        let dy = a[1] - b[1] + s1 as f64 * lat[0][1] + s2 as f64 * lat[1][1];
                        best = best.min((dx * dx + dy * dy).sqrt());
                    }
                }
                best
            }
        }
    }

    /// Grid neighbours of a node (4-stencil). Longitude/lattice directions wrap;
    /// colatitude rows clamp at the poles.
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let (r, c) = (id / self.cols, id % self.cols);
        let mut out = Vec::with_capacity(4);
        let wrap_rows = matches!(self.surface.kind, SurfaceKind::FlatTorus);
        if r > 0 {
            out.push((r - 1) * self.cols + c);
        } else if wrap_rows {
            out.push((self.rows - 1) * self.cols + c);
        }
        if r + 1 < self.rows {
            out.push((r + 1) * self.cols + c);
        } else if wrap_rows {
            out.push(c);
        }
        out.push(r * self.cols + (c + self.cols - 1) % self.cols);
        out.push(r * self.cols + (c + 1) % self.cols);
        out
    }

    /// Discrete Laplace–Beltrami of a nodal function, finite differences on the
    /// structured grid. Used by the curvature diagnostic only.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.len());
        match self.surface.kind {
            SurfaceKind::RoundSphere => self.sphere_laplacian(f),
            SurfaceKind::FlatTorus => self.torus_laplacian(f),
        }
    }

    fn sphere_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let (nr, nc) = (self.rows, self.cols);
        let thetas: Vec<f64> = (0..nr).map(|r| self.coords[r * nc][0]).collect();
        let dphi = 2.0 * std::f64::consts::PI / nc as f64;
        let mut out = vec![0.0; f.len()];
        for r in 0..nr {
            let sin_r = thetas[r].sin();
            for c in 0..nc {
                let id = r * nc + c;
                // Longitude term, periodic.
                let fl = f[r * nc + (c + nc - 1) % nc];
                let fr = f[r * nc + (c + 1) % nc];
                let d2phi = (fl - 2.0 * f[id] + fr) / (dphi * dphi);
                // Colatitude term in flux form; flux vanishes towards the poles.
                let flux_up = if r + 1 < nr {
                    let mid = 0.5 * (thetas[r] + thetas[r + 1]);
                    mid.sin() * (f[(r + 1) * nc + c] - f[id]) / (thetas[r + 1] - thetas[r])
                } else {
                    0.0
                };
                let flux_down = if r > 0 {
                    let mid = 0.5 * (thetas[r - 1] + thetas[r]);
                    mid.sin() * (f[id] - f[(r - 1) * nc + c]) / (thetas[r] - thetas[r - 1])
                } else {
                    0.0
                };
                let h = if r == 0 {
                    thetas[1] - thetas[0]
                } else if r + 1 == nr {
                    thetas[nr - 1] - thetas[nr - 2]
                } else {
                    0.5 * (thetas[r + 1] - thetas[r - 1])
                };
                out[id] = (flux_up - flux_down) / (sin_r * h) + d2phi / (sin_r * sin_r);
            }
        }
        out
    }

    fn torus_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let lat = self.surface.lattice.expect("torus grid carries a lattice");
        // Metric in lattice coordinates and its inverse.
        let g11 = lat[0][0] * lat[0][0] + lat[0][1] * lat[0][1];
        let g12 = lat[0][0] * lat[1][0] + lat[0][1] * lat[1][1];
        let g22 = lat[1][0] * lat[1][0] + lat[1][1] * lat[1][1];
        let det = g11 * g22 - g12 * g12;
        let (i11, i12, i22) = (g22 / det, -g12 / det, g11 / det);
        let (nr, nc) = (self.rows, self.cols);
        let (h1, h2) = (1.0 / nr as f64, 1.0 / nc as f64);
        let mut out = vec![0.0; f.len()];
        let at = |r: isize, c: isize| -> f64 {
            let r = r.rem_euclid(nr as isize) as usize;
            let c = c.rem_euclid(nc as isize) as usize;
            f[r * nc + c]
        };
        for r in 0..nr as isize {
            for c in 0..nc as isize {
                let id = r as usize * nc + c as usize;
                let f11 = (at(r + 1, c) - 2.0 * at(r, c) + at(r - 1, c)) / (h1 * h1);
                let f22 = (at(r, c + 1) - 2.0 * at(r, c) + at(r, c - 1)) / (h2 * h2);
                let f12 = (at(r + 1, c + 1) - at(r + 1, c - 1) - at(r - 1, c + 1)
                    + at(r - 1, c - 1))
                    / (4.0 * h1 * h2);
                out[id] = i11 * f11 + 2.0 * i12 * f12 + i22 * f22;
            }
        }
        out
    }
}

/// One Dirac eigenmode of the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracMode {
    pub index: usize,
    /// Dirac eigenvalue μ (1/length).
    pub eigenvalue: f64,
    pub label: String,
}

/// Truncated Dirac eigenbasis with quadrature grid and spinor value tables.
///
/// Value tables are stored as two real matrices of shape (2·nodes) × modes
/// (real and imaginary parts), which keeps quadratic-form assembly in real
/// GEMM territory. Row 2·node holds the first spinor component, row 2·node+1
/// the second.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub surface: SurfaceSpec,
    pub modes: Vec<DiracMode>,
    /// Maximum |μ| included.
    pub cutoff: f64,
    /// Modes with |μ| ≤ kernel_tol form the discrete kernel of D.
    pub kernel_tol: f64,
    pub grid: Grid,
    values_re: DMatrix<f64>,
    values_im: DMatrix<f64>,
}

impl SpectralBasis {
    pub(crate) fn from_parts(
        surface: SurfaceSpec,
        modes: Vec<DiracMode>,
        cutoff: f64,
        kernel_tol: f64,
        grid: Grid,
        values_re: DMatrix<f64>,
        values_im: DMatrix<f64>,
    ) -> Result<Self> {
        let basis = SpectralBasis {
            surface,
            modes,
            cutoff,
            kernel_tol,
            grid,
            values_re,
            values_im,
        };
        basis.check_invariants()?;
        Ok(basis)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    /// Spinor value of a mode at a node.
    pub fn value(&self, mode: usize, node: usize) -> [Complex64; 2] {
        [
            Complex64::new(
                self.values_re[(2 * node, mode)],
                self.values_im[(2 * node, mode)],
            ),
            Complex64::new(
                self.values_re[(2 * node + 1, mode)],
                self.values_im[(2 * node + 1, mode)],
            ),
        ]
    }

    pub(crate) fn values_re(&self) -> &DMatrix<f64> {
        &self.values_re
    }

    pub(crate) fn values_im(&self) -> &DMatrix<f64> {
        &self.values_im
    }

    /// Indices of discrete kernel modes (|μ| ≤ kernel_tol).
    pub fn kernel_indices(&self) -> Vec<usize> {
        self.modes
            .iter()
            .filter(|m| m.eigenvalue.abs() <= self.kernel_tol)
            .map(|m| m.index)
            .collect()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_indices().len()
    }

    /// Pointwise values of a spinor given by basis coefficients, per node.
    pub fn evaluate_coefficients(
        &self,
        coeffs: &nalgebra::DVector<Complex64>,
    ) -> Vec<[Complex64; 2]> {
        assert_eq!(coeffs.len(), self.n_modes());
        let n = self.n_nodes();
        let mut out = vec![[Complex64::new(0.0, 0.0); 2]; n];
        for m in 0..self.n_modes() {
            let c = coeffs[m];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for node in 0..n {
                let re0 = self.values_re[(2 * node, m)];
                let im0 = self.values_im[(2 * node, m)];
                let re1 = self.values_re[(2 * node + 1, m)];
                let im1 = self.values_im[(2 * node + 1, m)];
                out[node][0] += c * Complex64::new(re0, im0);
                out[node][1] += c * Complex64::new(re1, im1);
            }
        }
        out
    }

    /// Quadrature Gram matrix of the mode family (should equal the identity).
    pub fn gram_matrix(&self) -> DMatrix<Complex64> {
        crate::spectrum::weighted_gram(self, &vec![1.0; self.n_nodes()])
    }

    /// Largest deviation of the quadrature Gram matrix from the identity.
    pub fn gram_residual(&self) -> f64 {
        let g = self.gram_matrix();
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    fn check_invariants(&self) -> Result<()> {
        let area: f64 = self.grid.weights.iter().sum();
        if (area - self.surface.area).abs() > 1e-12 * self.surface.area {
            return Err(Error::Resolution {
                message: format!(
                    "grid weights sum to {area}, surface area is {}",
                    self.surface.area
                ),
            });
        }
        // Spectral symmetry μ ↦ -μ as multisets.
        let mut pos: Vec<f64> = self
            .modes
            .iter()
            .map(|m| m.eigenvalue)
            .filter(|&mu| mu > self.kernel_tol)
            .collect();
        let mut neg: Vec<f64> = self
            .modes
            .iter()
            .map(|m| -m.eigenvalue)
            .filter(|&mu| mu > self.kernel_tol)
            .collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        if pos.len() != neg.len()
            || pos
                .iter()
                .zip(&neg)
                .any(|(a, b)| (a - b).abs() > 1e-10 * a.abs().max(1.0))
        {
            return Err(Error::validation(
                "modes",
                "spectrum not symmetric under μ ↦ -μ",
            ));
        }
        let residual = self.gram_residual();
        if residual > 1e-10 {
            return Err(Error::Resolution {
                message: format!(
                    "Gram orthonormality residual {residual:.3e} exceeds 1e-10; \
                     increase grid_resolution"
                ),
            });
        }
        Ok(())
    }
}
