//! Fourier Dirac eigenbasis on a flat torus R²/Γ.
//!
//! Admissible spinor frequencies are ξ = γ* + δ₁b₁ + δ₂b₂ over the dual
//! lattice, where (b₁, b₂) is the dual basis and δ the spin structure. Each
//! nonzero frequency contributes one eigenmode per sign of μ = ±2π|ξ|; the
//! trivial structure contributes two zero modes at ξ = 0.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DiracMode, Grid, SpectralBasis, SpinStructure, SurfaceSpec};
use crate::{Error, Result};

fn torus_grid(surface: &SurfaceSpec, n: usize) -> Grid {
    let lat = surface.lattice.expect("torus surface carries a lattice");
    let area = surface.area;
    let w = area / (n * n) as f64;
    let mut weights = Vec::with_capacity(n * n);
    let mut coords = Vec::with_capacity(n * n);
    let mut positions = Vec::with_capacity(n * n);
    for r in 0..n {
        let t1 = r as f64 / n as f64;
        for c in 0..n {
            let t2 = c as f64 / n as f64;
            weights.push(w);
            coords.push([t1, t2]);
            positions.push([
                t1 * lat[0][0] + t2 * lat[1][0],
                t1 * lat[0][1] + t2 * lat[1][1],
                0.0,
            ]);
        }
    }
    Grid {
        surface: surface.clone(),
        rows: n,
        cols: n,
        weights,
        coords,
        positions,
    }
}

/// Truncated Fourier Dirac basis on the torus with lattice rows `lattice`,
/// spin structure `spin`, including all modes with |μ| = 2π|γ*+δ| ≤ cutoff.
/// `grid_resolution` is the number of nodes per lattice direction.
pub fn build_torus_basis(
    lattice: [[f64; 2]; 2],
    spin: SpinStructure,
    cutoff: f64,
    grid_resolution: u32,
) -> Result<SpectralBasis> {
    if cutoff <= 0.0 {
        return Err(Error::validation("cutoff", "must be positive"));
    }
    let surface = SurfaceSpec::flat_torus(lattice, spin)?;
    let n = grid_resolution as usize;
    if n < 2 {
        return Err(Error::validation("grid_resolution", "must be at least 2"));
    }

    // Dual basis: columns of (Aᵀ)⁻¹ where A has the lattice vectors as rows.
    let det = lattice[0][0] * lattice[1][1] - lattice[0][1] * lattice[1][0];
    let b1 = [lattice[1][1] / det, -lattice[1][0] / det];
    let b2 = [-lattice[0][1] / det, lattice[0][0] / det];

    // Enumeration box: |ξ| ≤ R needs |m+δ| bounded by R / σ_min(dual basis).
    let radius = cutoff / (2.0 * PI);
    let smin = dual_min_singular_value(b1, b2);
    let box_radius = (radius / smin).ceil() as i64 + 1;

    struct FreqMode {
        m1: i64,
        m2: i64,
        xi: [f64; 2],
        sign: f64,
        kernel: bool,
    }
    let kernel_tol = 1e-8 * cutoff;
    let mut freq_modes: Vec<FreqMode> = Vec::new();
    let mut max_abs_m: i64 = 0;
    for m1 in -box_radius..=box_radius {
        for m2 in -box_radius..=box_radius {
            let s1 = m1 as f64 + spin.shifts[0];
            let s2 = m2 as f64 + spin.shifts[1];
            let xi = [s1 * b1[0] + s2 * b2[0], s1 * b1[1] + s2 * b2[1]];
            let mu = 2.0 * PI * (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            if mu > cutoff * (1.0 + 1e-12) {
                continue;
            }
            max_abs_m = max_abs_m.max(m1.abs()).max(m2.abs());
            if mu <= kernel_tol {
                // Two constant zero modes.
                for sign in [1.0, -1.0] {
                    freq_modes.push(FreqMode {
                        m1,
                        m2,
                        xi,
                        sign,
                        kernel: true,
                    });
                }
            } else {
                for sign in [1.0, -1.0] {
                    freq_modes.push(FreqMode {
                        m1,
                        m2,
                        xi,
                        sign,
                        kernel: false,
                    });
                }
            }
        }
    }
    if freq_modes.is_empty() {
        return Err(Error::validation(
            "cutoff",
            "no Fourier modes below the requested cutoff",
        ));
    }
    // Uniform quadrature is exact iff no frequency difference aliases to a
    // nonzero multiple of the grid.
    if (n as i64) < 2 * max_abs_m + 1 {
        return Err(Error::Resolution {
            message: format!(
                "cutoff {cutoff} selects Fourier indices up to {max_abs_m}; \
                 grid_resolution must be at least {}",
                2 * max_abs_m + 1
            ),
        });
    }

    let grid = torus_grid(&surface, n);
    let n_nodes = grid.len();
    let n_modes = freq_modes.len();
    let mut values_re = DMatrix::<f64>::zeros(2 * n_nodes, n_modes);
    let mut values_im = DMatrix::<f64>::zeros(2 * n_nodes, n_modes);
    let mut modes = Vec::with_capacity(n_modes);
    let inv_sqrt_area = 1.0 / surface.area.sqrt();

    for (k, fm) in freq_modes.iter().enumerate() {
        let norm = (fm.xi[0] * fm.xi[0] + fm.xi[1] * fm.xi[1]).sqrt();
        let mu = if fm.kernel {
            0.0
        } else {
            fm.sign * 2.0 * PI * norm
        };
        modes.push(DiracMode {
            index: k,
            eigenvalue: mu,
            label: format!(
                "g({},{})_{}",
                fm.m1,
                fm.m2,
                if fm.sign > 0.0 { "+" } else { "-" }
            ),
        });
        // Symbol eigenvectors: (1, ±(ξ₁+iξ₂)/|ξ|)/√2; kernel modes take the
        // constant spinors e₁, e₂.
        let (v0, v1) = if fm.kernel {
            if fm.sign > 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
            }
        } else {
            let unit = Complex64::new(fm.xi[0] / norm, fm.xi[1] / norm);
            (
                Complex64::new(1.0 / 2f64.sqrt(), 0.0),
                unit * (fm.sign / 2f64.sqrt()),
            )
        };
        let f1 = fm.m1 as f64 + spin.shifts[0];
        let f2 = fm.m2 as f64 + spin.shifts[1];
        for node in 0..n_nodes {
            let t = grid.coords[node];
            let phase = Complex64::from_polar(1.0, 2.0 * PI * (f1 * t[0] + f2 * t[1]));
            let a = phase * v0 * inv_sqrt_area;
            let b = phase * v1 * inv_sqrt_area;
            values_re[(2 * node, k)] = a.re;
            values_im[(2 * node, k)] = a.im;
            values_re[(2 * node + 1, k)] = b.re;
            values_im[(2 * node + 1, k)] = b.im;
        }
    }

    SpectralBasis::from_parts(
        surface, modes, cutoff, kernel_tol, grid, values_re, values_im,
    )
}

fn dual_min_singular_value(b1: [f64; 2], b2: [f64; 2]) -> f64 {
    // Smallest singular value of the 2×2 matrix with columns b1, b2.
    let g11 = b1[0] * b1[0] + b1[1] * b1[1];
    let g12 = b1[0] * b2[0] + b1[1] * b2[1];
    let g22 = b2[0] * b2[0] + b2[1] * b2[1];
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc).max(0.0).sqrt()
}

/// Unit square torus, handy in tests and defaults.
pub fn unit_square_lattice() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}
