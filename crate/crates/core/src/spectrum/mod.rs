//! Galerkin forms for a conformal factor β and the weighted generalized
//! eigenproblem Dφ = λβφ on the truncated eigenbasis.
//!
//! In basis coordinates the Dirac form is diag(μ) and the weight form is
//! Q_{ij} = ∫ β ⟨φᵢ, φⱼ⟩. Discrete kernel modes (μ = 0) are eliminated by a
//! Schur complement, which realizes the minimax restriction E ∩ ker D = {0}:
//! the reduced pencil diag(μ̃) v = λ S v carries exactly the nonzero spectrum,
//! and kernel components of eigenspinors are reconstructed afterwards.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::geometry::{ConformalFactor, SpectralBasis};
use crate::{Error, Result};

/// Default relative gap below which consecutive eigenvalues share a cluster.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// Hermitian quadratic forms of the weighted problem in basis coordinates.
#[derive(Debug, Clone)]
pub struct QuadraticForms {
    /// Dirac eigenvalues per basis mode; the Dirac form is diag(μ).
    pub mu: Vec<f64>,
    /// Kernel flags per basis mode.
    pub kernel: Vec<bool>,
    /// Q(β)_{ij} = ∫ β ⟨φᵢ, φⱼ⟩ dv.
    pub weight: DMatrix<Complex64>,
    /// ∫ (1/β) ⟨Dφᵢ, Dφⱼ⟩ dv; present only when β carries a positive floor.
    pub inverse_weight: Option<DMatrix<Complex64>>,
    /// Worst Hermiticity defect of the assembled matrices before symmetrization.
    pub hermiticity_residual: f64,
}

impl QuadraticForms {
    pub fn n_modes(&self) -> usize {
        self.mu.len()
    }

    /// The Dirac form as a dense matrix (diagonal by construction).
    pub fn dirac_form(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.mu.len(), self.mu.len(), |i, j| {
            if i == j {
                Complex64::new(self.mu[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// Quadrature Gram matrix with nonnegative pointwise weight f:
/// G_{ij} = Σ_x w(x) f(x) ⟨φᵢ(x), φⱼ(x)⟩, assembled through four real GEMMs.
pub fn weighted_gram(basis: &SpectralBasis, f: &[f64]) -> DMatrix<Complex64> {
    assert_eq!(f.len(), basis.n_nodes());
    let vr = basis.values_re();
    let vi = basis.values_im();
    let n_nodes = basis.n_nodes();
    let mut wr = vr.clone();
    let mut wi = vi.clone();
    for node in 0..n_nodes {
        let s = (basis.grid.weights[node] * f[node]).max(0.0).sqrt();
        for row in [2 * node, 2 * node + 1] {
            for col in 0..wr.ncols() {
                wr[(row, col)] *= s;
                wi[(row, col)] *= s;
            }
        }
    }
    let rr = wr.transpose() * &wr;
    let ii = wi.transpose() * &wi;
    let ri = wr.transpose() * &wi;
    let re = rr + ii;
    let m = re.nrows();
    let mut out = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    for i in 0..m {
        for j in 0..m {
            // Imaginary part (RᵀI − IᵀR) is skew; build it from one product.
            out[(i, j)] = Complex64::new(re[(i, j)], ri[(i, j)] - ri[(j, i)]);
        }
    }
    out
}

fn hermitize(m: &mut DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let a = m[(i, j)];
            let b = m[(j, i)].conj();
            worst = worst.max((a - b).norm());
            let avg = 0.5 * (a + b);
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        worst = worst.max(m[(i, i)].im.abs());
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
    }
    worst
}

/// Assembles the Dirac, weight and inverse-weight forms for β on the basis.
///
/// The inverse-weight form divides by β and is assembled only when β carries a
/// positive floor; requesting it otherwise is reported by [`rayleigh_value`].
pub fn assemble_forms(basis: &SpectralBasis, beta: &ConformalFactor) -> Result<QuadraticForms> {
    if beta.values().len() != basis.n_nodes() {
        return Err(Error::GridMismatch {
            factor_nodes: beta.values().len(),
            basis_nodes: basis.n_nodes(),
        });
    }
    let mut weight = weighted_gram(basis, beta.values());
    let mut herm = hermitize(&mut weight);

    let inverse_weight = if beta.floor() > 0.0 {
        let inv: Vec<f64> = beta.values().iter().map(|v| 1.0 / v).collect();
        let mut g = weighted_gram(basis, &inv);
        herm = herm.max(hermitize(&mut g));
        // ⟨Dφᵢ, Dφⱼ⟩ = μᵢ μⱼ ⟨φᵢ, φⱼ⟩ on an eigenbasis.
        let mu = &basis.modes;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                g[(i, j)] *= mu[i].eigenvalue * mu[j].eigenvalue;
            }
        }
        Some(g)
    } else {
        None
    };

    Ok(QuadraticForms {
        mu: basis.modes.iter().map(|m| m.eigenvalue).collect(),
        kernel: basis
            .modes
            .iter()
            .map(|m| m.eigenvalue.abs() <= basis.kernel_tol)
            .collect(),
        weight,
        inverse_weight,
        hermiticity_residual: herm,
    })
}

/// Degeneracy cluster of a positive eigenvalue: 1-based (i(k), I(k)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterSpan {
    pub lo: usize,
    pub hi: usize,
}

impl ClusterSpan {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Solved weighted spectrum: sorted eigenvalues, positive indexing with the
/// kernel excluded, B-orthonormal eigenspinor coefficients and diagnostics.
#[derive(Debug, Clone)]
pub struct WeightedSpectrum {
    /// All nonzero generalized eigenvalues, ascending (kernel excluded).
    pub eigenvalues: Vec<f64>,
    /// Positive eigenvalues λ₁ ≤ λ₂ ≤ … (counted with multiplicity).
    pub positive: Vec<f64>,
    /// k (1-based) ↦ position of λₖ inside `eigenvalues`.
    pub positive_index_map: Vec<usize>,
    /// Coefficient matrix over the full mode set; column k-1 belongs to λₖ.
    pub eigenvectors: DMatrix<Complex64>,
    /// Cluster span (i(k), I(k)) per positive k (1-based, index k-1).
    pub clusters: Vec<ClusterSpan>,
    /// ‖diag(μ)φ − λ Q φ‖₂ per positive eigenpair.
    pub residuals: Vec<f64>,
    /// max |B(β,φᵢ,φⱼ) − δᵢⱼ| over the returned positive family.
    pub b_orthonormality_residual: f64,
    /// Dimension of the excluded discrete kernel.
    pub kernel_dim: usize,
    /// Relative tolerance used for cluster detection.
    pub cluster_tol: f64,
}

impl WeightedSpectrum {
    /// λₖ, 1-based.
    pub fn lambda(&self, k: usize) -> f64 {
        self.positive[k - 1]
    }

    /// Eigenvector coefficients of λₖ, 1-based.
    pub fn eigenvector(&self, k: usize) -> DVector<Complex64> {
        DVector::from_column_slice(self.eigenvectors.column(k - 1).as_slice())
    }

    pub fn cluster(&self, k: usize) -> ClusterSpan {
        self.clusters[k - 1]
    }
}

/// Contiguous index ranges of positive eigenvalues whose consecutive relative
/// gaps stay below `cluster_tol`.
pub fn detect_clusters(positive: &[f64], cluster_tol: f64) -> Vec<ClusterSpan> {
    let n = positive.len();
    let mut spans = Vec::with_capacity(n);
    let mut start = 0usize;
    for i in 0..n {
        let boundary = i + 1 == n
            || (positive[i + 1] - positive[i]).abs()
                > cluster_tol * positive[i].abs().max(positive[i + 1].abs());
        if boundary {
            for _ in start..=i {
                spans.push(ClusterSpan {
                    lo: start + 1,
                    hi: i + 1,
                });
            }
            start = i + 1;
        }
    }
    spans
}

/// Solves diag(μ)·v = λ·Q·v for the kernel-excluded spectrum.
///
/// `k_max` is the highest positive index the caller intends to use; exceeding
/// the discrete positive spectral range is a truncation error.
pub fn generalized_eigensolve(forms: &QuadraticForms, k_max: usize) -> Result<WeightedSpectrum> {
    generalized_eigensolve_with_tol(forms, k_max, DEFAULT_CLUSTER_TOL)
}

pub fn generalized_eigensolve_with_tol(
    forms: &QuadraticForms,
    k_max: usize,
    cluster_tol: f64,
) -> Result<WeightedSpectrum> {
    let m = forms.n_modes();
    let kernel_idx: Vec<usize> = (0..m).filter(|&i| forms.kernel[i]).collect();
    let normal_idx: Vec<usize> = (0..m).filter(|&i| !forms.kernel[i]).collect();
    let nk = normal_idx.len();
    if nk == 0 {
        return Err(Error::Truncation {
            requested: k_max,
            available: 0,
        });
    }

    let q = &forms.weight;
    let q_nn = q
        .select_rows(normal_idx.iter())
        .select_columns(normal_idx.iter());
    let (schur, kappa_map) = if kernel_idx.is_empty() {
        (q_nn.clone(), None)
    } else {
        let q_kk = q
            .select_rows(kernel_idx.iter())
            .select_columns(kernel_idx.iter());
        let q_kn = q
            .select_rows(kernel_idx.iter())
            .select_columns(normal_idx.iter());
        let chol_kk = q_kk.clone().cholesky().ok_or(Error::IndefiniteWeightForm)?;
        // κ = −Q_kk⁻¹ Q_kn ψ realizes the kernel part of each eigenspinor.
        let kmap = -chol_kk.solve(&q_kn);
        let schur = &q_nn + q_kn.adjoint() * &kmap;
        (schur, Some(kmap))
    };

    let mut schur = schur;
    hermitize(&mut schur);
    let chol = schur
        .clone()
        .cholesky()
        .ok_or(Error::IndefiniteWeightForm)?;
    let l = chol.l();
    // Semi-definite weight forms can slip through the factorization with
    // denormal pivots; treat them as indefinite rather than solving a
    // meaningless pencil.
    let pivots: Vec<f64> = (0..nk).map(|i| l[(i, i)].re).collect();
    let pmax = pivots.iter().cloned().fold(0.0f64, f64::max);
    if pivots.iter().any(|&p| p.is_nan() || p <= 1e-8 * pmax) {
        return Err(Error::IndefiniteWeightForm);
    }

    // A = L⁻¹ diag(μ̃) L⁻ᴴ, Hermitian with the pencil's eigenvalues.
    let mut d = DMatrix::from_element(nk, nk, Complex64::new(0.0, 0.0));
    for (r, &i) in normal_idx.iter().enumerate() {
        d[(r, r)] = Complex64::new(forms.mu[i], 0.0);
    }
    let x = l
        .solve_lower_triangular(&d)
        .ok_or(Error::IndefiniteWeightForm)?;
    let y = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or(Error::IndefiniteWeightForm)?;
    let mut a = y.adjoint();
    hermitize(&mut a);

    let eig = a.symmetric_eigen();
    // Back-substitute and sort ascending.
    let mut order: Vec<usize> = (0..nk).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vt = l
        .adjoint()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or(Error::IndefiniteWeightForm)?;

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let first_positive = eigenvalues.partition_point(|&l| l <= 0.0);
    let positive: Vec<f64> = eigenvalues[first_positive..].to_vec();
    if k_max > positive.len() {
        return Err(Error::Truncation {
            requested: k_max,
            available: positive.len(),
        });
    }

    // Full-space eigenvectors for the positive family.
    let np = positive.len();
    let mut eigenvectors = DMatrix::from_element(m, np, Complex64::new(0.0, 0.0));
    for (col, &oi) in order[first_positive..].iter().enumerate() {
        let psi = vt.column(oi);
        for (r, &i) in normal_idx.iter().enumerate() {
            eigenvectors[(i, col)] = psi[r];
        }
        if let Some(kmap) = &kappa_map {
            let kappa = kmap * psi;
            for (r, &i) in kernel_idx.iter().enumerate() {
                eigenvectors[(i, col)] = kappa[r];
            }
        }
    }

    // Residuals of the full pencil and B-orthonormality of the family.
    let qv = q * &eigenvectors;
    let mut residuals = Vec::with_capacity(np);
    for col in 0..np {
        let lambda = positive[col];
        let mut r2 = 0.0;
        for i in 0..m {
            let r = Complex64::new(forms.mu[i], 0.0) * eigenvectors[(i, col)]
                - Complex64::new(lambda, 0.0) * qv[(i, col)];
            r2 += r.norm_sqr();
        }
        residuals.push(r2.sqrt());
    }
    let gram = eigenvectors.adjoint() * &qv;
    let mut b_res: f64 = 0.0;
    for i in 0..np {
        for j in 0..np {
            let t = if i == j { 1.0 } else { 0.0 };
            b_res = b_res.max((gram[(i, j)] - Complex64::new(t, 0.0)).norm());
        }
    }

    let positive_index_map: Vec<usize> = (0..np).map(|k| first_positive + k).collect();
    let clusters = detect_clusters(&positive, cluster_tol);

    Ok(WeightedSpectrum {
        eigenvalues,
        positive,
        positive_index_map,
        eigenvectors,
        clusters,
        residuals,
        b_orthonormality_residual: b_res,
        kernel_dim: kernel_idx.len(),
        cluster_tol,
    })
}

/// The functional F(β)[φ] = ∫⟨Dφ,φ⟩ / ∫(1/β)|Dφ|² in basis coordinates.
///
/// For an exact eigenspinor of λₖ this equals 1/λₖ.
pub fn rayleigh_value(forms: &QuadraticForms, coeffs: &DVector<Complex64>) -> Result<f64> {
    let iw = forms
        .inverse_weight
        .as_ref()
        .ok_or_else(|| Error::FloorRequired("rayleigh_value needs the 1/β form".into()))?;
    if coeffs.len() != forms.n_modes() {
        return Err(Error::validation(
            "coefficients",
            "length mismatch with basis",
        ));
    }
    let mut num = 0.0;
    for i in 0..forms.n_modes() {
        num += forms.mu[i] * coeffs[i].norm_sqr();
    }
    let den = (coeffs.adjoint() * iw * coeffs)[(0, 0)].re;
    let scale: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if den.abs() <= 1e-14 * scale.max(1e-300) {
        return Err(Error::KernelInput);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        build_sphere_basis, build_torus_basis, evaluate_factor, ConformalFactor, FactorForm,
        SpinStructure,
    };
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_lattice() -> [[f64; 2]; 2] {
        [[1.0, 0.0], [0.0, 1.0]]
    }

    #[test]
    fn constant_beta_gives_scaled_identity_weight_form() {
        let basis = build_sphere_basis(3, 6).unwrap();
        let beta = ConformalFactor::constant(&basis.grid, 0.7, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        for i in 0..forms.n_modes() {
            for j in 0..forms.n_modes() {
                let expect = if i == j { 0.7 } else { 0.0 };
                assert!((forms.weight[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_beta_inverse_form_is_mu_squared_over_c() {
        let basis = build_sphere_basis(3, 6).unwrap();
        let beta = ConformalFactor::from_values(&basis.grid, vec![0.5; basis.n_nodes()], 0.5, 2.0)
            .unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let iw = forms.inverse_weight.as_ref().unwrap();
        for i in 0..forms.n_modes() {
            for j in 0..forms.n_modes() {
                let expect = if i == j {
                    forms.mu[i] * forms.mu[i] / 0.5
                } else {
                    0.0
                };
                assert!((iw[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn bump_weight_form_is_positive_definite() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = evaluate_factor(
            &basis,
            &FactorForm::ColatitudeBump { amplitude: 0.3 },
            0.0,
            2.0,
        )
        .unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        assert!(forms.hermiticity_residual < 1e-12);
        // Positive definiteness checked by the factorization oracle.
        assert!(forms.weight.clone().cholesky().is_some());
    }

    #[test]
    fn sphere_unit_norm_beta_hits_two_sqrt_pi() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let c = (4.0 * PI).powf(-0.5);
        let beta = ConformalFactor::constant(&basis.grid, c, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 4).unwrap();
        assert_relative_eq!(spec.lambda(1), 2.0 * PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(spec.lambda(2), 2.0 * PI.sqrt(), max_relative = 1e-12);
        assert!(spec.lambda(3) > spec.lambda(2) * 1.5);
    }

    #[test]
    fn eigenvalue_scaling_in_beta() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = evaluate_factor(
            &basis,
            &FactorForm::ColatitudeBump { amplitude: 0.25 },
            0.0,
            2.0,
        )
        .unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 6).unwrap();
        assert!(spec.b_orthonormality_residual <= 1e-8);
        assert!(spec.residuals.iter().all(|&r| r <= 1e-8));
        let scaled = beta.scaled(3.0).unwrap();
        let spec3 = generalized_eigensolve(&assemble_forms(&basis, &scaled).unwrap(), 6).unwrap();
        for k in 1..=6 {
            assert_relative_eq!(spec3.lambda(k), spec.lambda(k) / 3.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn torus_kernel_is_excluded_from_indexing() {
        let basis = build_torus_basis(
            unit_lattice(),
            SpinStructure::new(0.0, 0.0).unwrap(),
            9.0,
            10,
        )
        .unwrap();
        let beta = ConformalFactor::constant(&basis.grid, 1.0, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 2).unwrap();
        assert_eq!(spec.kernel_dim, 2);
        assert!(spec.lambda(1) > 0.0);
        assert_relative_eq!(spec.lambda(1), 2.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn torus_antiperiodic_lambda_one_is_pi() {
        let basis = build_torus_basis(
            unit_lattice(),
            SpinStructure::new(0.5, 0.0).unwrap(),
            8.0,
            9,
        )
        .unwrap();
        let beta = ConformalFactor::constant(&basis.grid, 1.0, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 2).unwrap();
        assert_relative_eq!(spec.lambda(1), PI, max_relative = 1e-12);
        assert_relative_eq!(spec.lambda(2), PI, max_relative = 1e-12);
    }

    #[test]
    fn rayleigh_value_inverts_eigenvalue_for_constant_beta() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let c = (4.0 * PI).powf(-0.5);
        let beta =
            ConformalFactor::from_values(&basis.grid, vec![c; basis.n_nodes()], c, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 2).unwrap();
        let v = spec.eigenvector(1);
        let f = rayleigh_value(&forms, &v).unwrap();
        assert_relative_eq!(f, 1.0 / (2.0 * PI.sqrt()), max_relative = 1e-10);
    }

    #[test]
    fn rayleigh_value_rejects_kernel_input() {
        let basis = build_torus_basis(
            unit_lattice(),
            SpinStructure::new(0.0, 0.0).unwrap(),
            7.0,
            8,
        )
        .unwrap();
        let beta = ConformalFactor::from_values(&basis.grid, vec![1.0; basis.n_nodes()], 1.0, 2.0)
            .unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let kernel = basis.kernel_indices();
        let mut v = DVector::from_element(basis.n_modes(), Complex64::new(0.0, 0.0));
        v[kernel[0]] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            rayleigh_value(&forms, &v),
            Err(Error::KernelInput)
        ));
    }

    #[test]
    fn rayleigh_of_mixture_sits_between_extremes() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let c = (4.0 * PI).powf(-0.5);
        let beta =
            ConformalFactor::from_values(&basis.grid, vec![c; basis.n_nodes()], c, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 4).unwrap();
        // Equal B-norm mix of λ₁ and λ₃ eigenspinors.
        let v = (spec.eigenvector(1) + spec.eigenvector(3)) / Complex64::new(2f64.sqrt(), 0.0);
        let f = rayleigh_value(&forms, &v).unwrap();
        assert!(f <= 1.0 / spec.lambda(1) + 1e-9);
        assert!(f >= 1.0 / spec.lambda(3) - 1e-9);
    }

    #[test]
    fn random_nonkernel_spinors_never_beat_the_minimax() {
        // Brute-force sampling oracle for the k = 1 minimax bound.
        use rand::Rng;
        use rand::SeedableRng;
        let basis = build_sphere_basis(4, 8).unwrap();
        let c = (4.0 * PI).powf(-0.5);
        let beta =
            ConformalFactor::from_values(&basis.grid, vec![c; basis.n_nodes()], c, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 1).unwrap();
        let bound = 1.0 / spec.lambda(1) + 1e-9;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let v = DVector::from_fn(basis.n_modes(), |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let f = rayleigh_value(&forms, &v).unwrap();
            assert!(f <= bound, "sampled F = {f} above 1/λ₁ = {bound}");
        }
    }

    #[test]
    fn clusters_on_the_round_sphere() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = ConformalFactor::constant(&basis.grid, 1.0, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 6).unwrap();
        assert_eq!(spec.cluster(1), ClusterSpan { lo: 1, hi: 2 });
        assert_eq!(spec.cluster(2), ClusterSpan { lo: 1, hi: 2 });
        assert_eq!(spec.cluster(3), ClusterSpan { lo: 3, hi: 6 });
        assert_eq!(spec.cluster(6), ClusterSpan { lo: 3, hi: 6 });
    }

    #[test]
    fn clusters_of_distinct_values_are_singletons() {
        let spans = detect_clusters(&[1.0, 2.0, 3.5, 7.0], 1e-6);
        for (k, s) in spans.iter().enumerate() {
            assert_eq!(
                *s,
                ClusterSpan {
                    lo: k + 1,
                    hi: k + 1
                }
            );
        }
    }

    #[test]
    fn degenerate_factor_yields_indefinite_weight_form() {
        let basis = build_sphere_basis(3, 6).unwrap();
        let mut values = vec![0.0; basis.n_nodes()];
        values[0] = 1.0;
        values[1] = 1.0;
        let beta = ConformalFactor::from_values(&basis.grid, values, 0.0, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        assert!(matches!(
            generalized_eigensolve(&forms, 1),
            Err(Error::IndefiniteWeightForm)
        ));
    }

    #[test]
    fn truncation_error_past_spectral_range() {
        let basis = build_sphere_basis(2, 4).unwrap();
        let beta = ConformalFactor::constant(&basis.grid, 1.0, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let err = generalized_eigensolve(&forms, 100).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn grid_mismatch_detected() {
        let basis = build_sphere_basis(2, 4).unwrap();
        let other = build_sphere_basis(2, 6).unwrap();
        let beta = ConformalFactor::constant(&other.grid, 1.0, 2.0).unwrap();
        assert!(matches!(
            assemble_forms(&basis, &beta),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn rayleigh_consistency_for_band_limited_bump() {
        // The bump couples only adjacent degrees, so low eigenspinors are
        // fully resolved at this cutoff and F(β)[φₖ] = 1/λₖ to solver noise.
        let basis = build_sphere_basis(10, 20).unwrap();
        let values: Vec<f64> = (0..basis.n_nodes())
            .map(|i| 1.0 + 0.3 * basis.grid.coords[i][0].cos())
            .collect();
        let beta = ConformalFactor::from_values(&basis.grid, values, 1e-3, 2.0).unwrap();
        let forms = assemble_forms(&basis, &beta).unwrap();
        let spec = generalized_eigensolve(&forms, 2).unwrap();
        for k in 1..=2 {
            let f = rayleigh_value(&forms, &spec.eigenvector(k)).unwrap();
            assert!(
                (f - 1.0 / spec.lambda(k)).abs() <= 1e-8,
                "k={k}: F = {f}, 1/λ = {}",
                1.0 / spec.lambda(k)
            );
        }
    }

    #[test]
    fn monotone_in_constant_shift() {
        let basis = build_sphere_basis(3, 6).unwrap();
        let beta = evaluate_factor(
            &basis,
            &FactorForm::ColatitudeBump { amplitude: 0.4 },
            0.0,
            2.0,
        )
        .unwrap();
        let mut last = f64::INFINITY;
        for t in [0.0, 0.1, 0.3, 0.9] {
            let shifted: Vec<f64> = beta.values().iter().map(|v| v + t).collect();
            let f = ConformalFactor::from_values(&basis.grid, shifted, 0.0, 2.0).unwrap();
            let spec = generalized_eigensolve(&assemble_forms(&basis, &f).unwrap(), 4).unwrap();
            assert!(spec.lambda(4) <= last + 1e-12);
            last = spec.lambda(4);
        }
    }
}
