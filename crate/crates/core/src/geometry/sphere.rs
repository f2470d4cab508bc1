//! Analytic Dirac eigenbasis on the unit round sphere.
//!
//! Eigenvalues are ±(m+1), m ≥ 0, with multiplicity 2(m+1) per sign. The
//! eigenspinors are realized through Wigner small-d functions: for half-integer
//! j and |m| ≤ j the pair of columns d^j_{m,±1/2}(θ)·e^{imφ} spans the two
//! spinor components, and the Dirac pairing fixes the relative phase between
//! them. Any unitarily equivalent realization would do; only the Gram and
//! symmetry invariants are contractual.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::quadrature::gauss_legendre;
use super::wigner::wigner_d;
use super::{DiracMode, Grid, SpectralBasis, SurfaceSpec};
use crate::{Error, Result};

/// Builds the sphere grid: Gauss–Legendre colatitudes × uniform longitudes.
fn sphere_grid(n_theta: usize, n_phi: usize) -> Grid {
    let (x, w) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    let mut coords = Vec::with_capacity(n_theta * n_phi);
    let mut positions = Vec::with_capacity(n_theta * n_phi);
    // Rows ordered by ascending colatitude.
    for r in 0..n_theta {
        let theta = x[n_theta - 1 - r].acos();
        let wt = w[n_theta - 1 - r] * dphi;
        for c in 0..n_phi {
            let phi = c as f64 * dphi;
            weights.push(wt);
            coords.push([theta, phi]);
            positions.push([
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ]);
        }
    }
    Grid {
        surface: SurfaceSpec::round_sphere(),
        rows: n_theta,
        cols: n_phi,
        weights,
        coords,
        positions,
    }
}

/// Truncated Dirac eigenbasis of the unit sphere.
///
/// `cutoff_degree` is the largest |μ| included; `grid_resolution` sets the
/// number of colatitude nodes (longitudes are twice that). The grid must
/// integrate all mode products exactly: this needs at least `cutoff_degree`
/// colatitude nodes and `2·cutoff_degree` longitude nodes.
pub fn build_sphere_basis(cutoff_degree: u32, grid_resolution: u32) -> Result<SpectralBasis> {
    if cutoff_degree < 1 {
        return Err(Error::validation("cutoff_degree", "must be at least 1"));
    }
    if grid_resolution < 1 {
        return Err(Error::validation("grid_resolution", "must be at least 1"));
    }
    let n_theta = grid_resolution as usize;
    let n_phi = 2 * grid_resolution as usize;
    let c = cutoff_degree as i64;
    if (n_theta as i64) < c || (n_phi as i64) < 2 * c {
        return Err(Error::Resolution {
            message: format!(
                "cutoff_degree {c} needs at least {c} colatitude nodes (got {n_theta}) and \
                 {} longitude nodes (got {n_phi})",
                2 * c
            ),
        });
    }

    let grid = sphere_grid(n_theta, n_phi);
    let n_nodes = grid.len();

    // Mode bookkeeping: l = j + 1/2 runs 1..=cutoff, sign ∈ {+, -}, m ∈ {-j..j}.
    struct ModeSpec {
        two_j: i64,
        two_m: i64,
        sign: f64,
    }
    let mut specs = Vec::new();
    let mut modes = Vec::new();
    for l in 1..=c {
        let two_j = 2 * l - 1;
        for sign in [1.0f64, -1.0] {
            let mut two_m = -two_j;
            while two_m <= two_j {
                let index = specs.len();
                specs.push(ModeSpec { two_j, two_m, sign });
                modes.push(DiracMode {
                    index,
                    eigenvalue: sign * l as f64,
                    label: format!(
                        "s{}_2j{}_2m{}",
                        if sign > 0.0 { "+" } else { "-" },
                        two_j,
                        two_m
                    ),
                });
                two_m += 2;
            }
        }
    }

    let n_modes = specs.len();
    let mut values_re = DMatrix::<f64>::zeros(2 * n_nodes, n_modes);
    let mut values_im = DMatrix::<f64>::zeros(2 * n_nodes, n_modes);

    // Cache the θ-dependent column values per (j, m, ±1/2) and row.
    for (k, spec) in specs.iter().enumerate() {
        let nj = ((spec.two_j as f64 + 1.0) / (4.0 * PI)).sqrt() / 2f64.sqrt();
        for r in 0..n_theta {
            let theta = grid.coords[r * n_phi][0];
            let up = nj * wigner_d(spec.two_j, spec.two_m, 1, theta);
            let lo = nj * wigner_d(spec.two_j, spec.two_m, -1, theta);
            for cphi in 0..n_phi {
                let node = r * n_phi + cphi;
                let phi = grid.coords[node][1];
                let phase = Complex64::from_polar(1.0, 0.5 * spec.two_m as f64 * phi);
                // Upper component: d^j_{m,+1/2}; lower: ∓i·d^j_{m,-1/2} for μ = ±(j+1/2).
                let v0 = phase * up;
                let v1 = phase * Complex64::new(0.0, -spec.sign) * lo;
                values_re[(2 * node, k)] = v0.re;
                values_im[(2 * node, k)] = v0.im;
                values_re[(2 * node + 1, k)] = v1.re;
                values_im[(2 * node + 1, k)] = v1.im;
            }
        }
    }

    let kernel_tol = 1e-8 * c as f64;
    SpectralBasis::from_parts(
        SurfaceSpec::round_sphere(),
        modes,
        c as f64,
        kernel_tol,
        grid,
        values_re,
        values_im,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_counts_and_multiplicities() {
        let basis = build_sphere_basis(3, 6).unwrap();
        assert_eq!(basis.n_modes(), 2 * 3 * 4); // 2·C(C+1)
        let count = |mu: f64| {
            basis
                .modes
                .iter()
                .filter(|m| (m.eigenvalue - mu).abs() < 1e-12)
                .count()
        };
        assert_eq!(count(1.0), 2);
        assert_eq!(count(-1.0), 2);
        assert_eq!(count(2.0), 4);
        assert_eq!(count(-2.0), 4);
        assert_eq!(count(3.0), 6);
        assert_eq!(count(-3.0), 6);
    }

    #[test]
    fn cutoff_one_gives_four_killing_modes() {
        let basis = build_sphere_basis(1, 4).unwrap();
        let mut mus: Vec<f64> = basis.modes.iter().map(|m| m.eigenvalue).collect();
        mus.sort_by(f64::total_cmp);
        assert_eq!(mus, vec![-1.0, -1.0, 1.0, 1.0]);
        // Killing spinors have constant pointwise norm.
        for k in 0..4 {
            let norms: Vec<f64> = (0..basis.n_nodes())
                .map(|n| {
                    let v = basis.value(k, n);
                    v[0].norm_sqr() + v[1].norm_sqr()
                })
                .collect();
            let first = norms[0];
            assert!(norms.iter().all(|&x| (x - first).abs() < 1e-13 * first));
        }
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        let basis = build_sphere_basis(4, 10).unwrap();
        let area: f64 = basis.grid.weights.iter().sum();
        assert!((area - 4.0 * PI).abs() <= 1e-12 * 4.0 * PI);
    }

    #[test]
    fn gram_identity_at_various_cutoffs() {
        for (c, g) in [(1u32, 2u32), (2, 4), (4, 6), (6, 9)] {
            let basis = build_sphere_basis(c, g).unwrap();
            assert!(
                basis.gram_residual() <= 1e-10,
                "cutoff {c} resolution {g}: residual {}",
                basis.gram_residual()
            );
        }
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let err = build_sphere_basis(6, 5).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn no_kernel_on_the_sphere() {
        let basis = build_sphere_basis(4, 8).unwrap();
        assert_eq!(basis.kernel_dim(), 0);
    }
}
