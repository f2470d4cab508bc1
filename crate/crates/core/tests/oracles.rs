//! Independent discretization oracles for the analytic eigenbases.
//!
//! The sphere oracle never touches the Wigner-function construction. In each
//! azimuthal sector m (half-integer) the square of the Dirac operator acts on
//! the first spinor component as the Sturm–Liouville problem
//!     -(1/sinθ)(sinθ ψ')' + V_m ψ = λ² ψ,
//!     V_m(θ) = (2 - 4m·cosθ - cos²θ + 4m²)/(4 sin²θ),
//! and the weighted problem Dφ = λβφ with axisymmetric β becomes
//!     -(1/sinθ)(sinθ f ψ')' + (f·V_m - f'·c₂)ψ = λ² β ψ,
//!     f = 1/β,  c₂(θ) = (cosθ - 2m)/(2 sinθ),
//! both discretized by flux-form finite differences on a cell-centered grid
//! (the sinθ factor supplies natural boundary conditions at the poles). The
//! scheme is second order; agreement with the spectral Galerkin solver pins
//! both the eigenvalues and the relative phases of the spinor value tables,
//! since a wrong Dirac pairing shifts weighted eigenvalues at the amplitude
//! level.

use diracopt_core::geometry::{
    build_sphere_basis, build_torus_basis, ConformalFactor, SpinStructure,
};
use diracopt_core::spectrum::{assemble_forms, generalized_eigensolve};
use nalgebra::{Complex, DMatrix};
use std::f64::consts::PI;

/// Ascending positive λ of sector m for Dφ = λβφ, axisymmetric β.
/// Pass β ≡ 1 for the plain Dirac spectrum.
fn sector_spectrum(
    m: f64,
    n: usize,
    beta: impl Fn(f64) -> f64,
    dbeta: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let h = PI / n as f64;
    let center = |i: usize| (i as f64 + 0.5) * h;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let t = center(i);
        let s = t.sin();
        let cos = t.cos();
        let v = (2.0 - 4.0 * m * cos - cos * cos + 4.0 * m * m) / (4.0 * s * s);
        let c2 = (cos - 2.0 * m) / (2.0 * s);
        let f = 1.0 / beta(t);
        let fp = -dbeta(t) / (beta(t) * beta(t));
        let mut diag = (f * v - fp * c2) * s;
        // Flux through the cell interfaces at i·h and (i+1)·h; sin vanishes at
        // the poles, which is exactly the natural boundary condition.
        for (iface, neighbor) in [
            (i as f64 * h, i.checked_sub(1)),
            (
                (i as f64 + 1.0) * h,
                if i + 1 < n { Some(i + 1) } else { None },
            ),
        ] {
            let g = iface.sin() / beta(iface) / (h * h);
            diag += g;
            if let Some(j) = neighbor {
                a[(i, j)] = -g;
            }
        }
        a[(i, i)] = diag;
    }
    // Symmetric reduction of A ψ = λ² diag(β sinθ) ψ.
    for i in 0..n {
        for j in 0..n {
            let bi = (beta(center(i)) * center(i).sin()).sqrt();
            let bj = (beta(center(j)) * center(j).sin()).sqrt();
            a[(i, j)] /= bi * bj;
        }
    }
    let mut vals: Vec<f64> = a
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

#[test]
fn sphere_low_eigenvalues_converge_to_integers() {
    // μ = ±1 with multiplicity 2 comes from one eigenvalue 1 in each of the
    // sectors m = ±1/2; μ = ±2 (multiplicity 4) adds the sectors m = ±3/2.
    for m in [0.5, -0.5] {
        let vals = sector_spectrum(m, 800, |_| 1.0, |_| 0.0);
        assert!(
            (vals[0] - 1.0).abs() < 1e-4,
            "sector m={m}: lowest {} should be 1",
            vals[0]
        );
        assert!(
            (vals[1] - 2.0).abs() < 1e-4,
            "sector m={m}: next {} should be 2",
            vals[1]
        );
    }
    for m in [1.5, -1.5] {
        let vals = sector_spectrum(m, 800, |_| 1.0, |_| 0.0);
        assert!(
            (vals[0] - 2.0).abs() < 1e-4,
            "sector m={m}: lowest {} should be 2",
            vals[0]
        );
    }
    // Friedrich equality cross-check: λ² = (n/(4(n-1)))·min S = 1 on the unit
    // sphere, matched by the lowest oracle eigenvalue.
    let lowest = sector_spectrum(0.5, 800, |_| 1.0, |_| 0.0)[0];
    assert!((lowest * lowest - 1.0).abs() < 1e-4);
}

#[test]
fn sphere_galerkin_matches_fd_for_axisymmetric_weight() {
    let beta_fn = |theta: f64| 1.0 + 0.3 * theta.cos();
    let dbeta_fn = |theta: f64| -0.3 * theta.sin();

    let basis = build_sphere_basis(10, 20).unwrap();
    let values: Vec<f64> = (0..basis.n_nodes())
        .map(|i| beta_fn(basis.grid.coords[i][0]))
        .collect();
    let beta = ConformalFactor::from_values(&basis.grid, values, 0.0, 2.0).unwrap();
    let spec = generalized_eigensolve(&assemble_forms(&basis, &beta).unwrap(), 8).unwrap();

    let mut fd: Vec<f64> = Vec::new();
    for two_m in [1i64, -1, 3, -3, 5, -5] {
        let m = two_m as f64 / 2.0;
        let coarse = sector_spectrum(m, 700, beta_fn, dbeta_fn);
        let fine = sector_spectrum(m, 1400, beta_fn, dbeta_fn);
        for i in 0..4 {
            // Second-order scheme: Richardson over grid halving.
            fd.push((4.0 * fine[i] - coarse[i]) / 3.0);
        }
    }
    fd.sort_by(f64::total_cmp);

    for k in 1..=6 {
        let lam = spec.lambda(k);
        let oracle = fd[k - 1];
        assert!(
            ((lam - oracle) / oracle).abs() < 1e-6,
            "k={k}: galerkin {lam} vs fd oracle {oracle}"
        );
    }
}

#[test]
fn wigner_columns_satisfy_the_dirac_ladder() {
    // (d/dθ + m/sinθ)(√sinθ·d^j_{m,-1/2}) = -(j+1/2)(√sinθ·d^j_{m,+1/2})
    // and the opposite ladder with the same sign; this is exactly the pairing
    // encoded in the value tables. Centered differences away from the poles
    // (the half-power endpoint behavior ruins finite differences there).
    use diracopt_core::geometry::wigner::wigner_d;
    let n = 4000usize;
    let h = PI / n as f64;
    for two_j in [1i64, 3, 5, 7, 9] {
        let lam = (two_j as f64 + 1.0) / 2.0;
        for two_m in (-two_j..=two_j).step_by(2) {
            let m = two_m as f64 / 2.0;
            let mut worst_a = 0.0f64;
            let mut worst_b = 0.0f64;
            for i in (n / 8)..(7 * n / 8) {
                let theta = (i as f64 + 0.5) * h;
                let tp = theta + h;
                let tm = theta - h;
                let y2 = |t: f64| t.sin().sqrt() * wigner_d(two_j, two_m, -1, t);
                let y1 = |t: f64| t.sin().sqrt() * wigner_d(two_j, two_m, 1, t);
                let d2 = (y2(tp) - y2(tm)) / (2.0 * h);
                let d1 = (y1(tp) - y1(tm)) / (2.0 * h);
                let lhs_a = d2 + m / theta.sin() * y2(theta);
                let lhs_b = d1 - m / theta.sin() * y1(theta);
                worst_a = worst_a.max((lhs_a + lam * y1(theta)).abs());
                worst_b = worst_b.max((lhs_b - lam * y2(theta)).abs());
            }
            assert!(
                worst_a < 1e-4 * lam * lam && worst_b < 1e-4 * lam * lam,
                "ladder violated at 2j={two_j}, 2m={two_m}: {worst_a:.2e}, {worst_b:.2e}"
            );
        }
    }
}

#[test]
fn torus_symbol_oracle_matches_basis() {
    // Direct numerical diagonalization of the 2×2 Fourier symbol at every
    // admissible frequency, compared against the constructed mode table.
    let lattice = [[1.0, 0.0], [0.0, 1.0]];
    for shifts in [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5]] {
        let spin = SpinStructure::new(shifts[0], shifts[1]).unwrap();
        let cutoff = 9.0;
        let basis = build_torus_basis(lattice, spin, cutoff, 10).unwrap();

        let mut oracle: Vec<f64> = Vec::new();
        let r = (cutoff / (2.0 * PI)).ceil() as i64 + 1;
        for m1 in -r..=r {
            for m2 in -r..=r {
                let xi = [m1 as f64 + shifts[0], m2 as f64 + shifts[1]];
                // Symbol 2π(ξ₁σ₁ + ξ₂σ₂), diagonalized numerically.
                let s = DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        Complex::new(0.0, 0.0),
                        Complex::new(2.0 * PI * xi[0], -2.0 * PI * xi[1]),
                        Complex::new(2.0 * PI * xi[0], 2.0 * PI * xi[1]),
                        Complex::new(0.0, 0.0),
                    ],
                );
                for ev in s.symmetric_eigen().eigenvalues.iter() {
                    if ev.abs() <= cutoff * (1.0 + 1e-12) {
                        oracle.push(*ev);
                    }
                }
            }
        }
        oracle.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = basis.modes.iter().map(|m| m.eigenvalue).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got.len(), oracle.len(), "spin {shifts:?}");
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-9, "spin {shifts:?}: {g} vs {o}");
        }
        // Zero block at γ* = 0 exactly for the trivial structure.
        let expected_kernel = if shifts == [0.0, 0.0] { 2 } else { 0 };
        assert_eq!(basis.kernel_dim(), expected_kernel);
    }
}
