//! Axisymmetric fast path on the sphere.
//!
//! For a conformal factor depending on the colatitude alone, the weight form
//! never couples different azimuthal orders: the generalized eigenproblem
//! splits into one real symmetric pencil per half-integer m with sector sizes
//! bounded by 2·cutoff. That turns high cutoffs (needed to resolve
//! concentration bubbles) from an O(cutoff⁶) dense solve into an O(cutoff⁴)
//! sweep, and the fixed-point minimizer preserves the symmetry because the
//! cluster densities |φ|² of sector eigenspinors are colatitude functions.
//!
//! Eigenvalues, densities and the iteration agree with the general path; the
//! equivalence is covered by tests against the full solver at low cutoff.

use nalgebra::{DMatrix, DVector};

use crate::geometry::quadrature::gauss_legendre;
use crate::geometry::wigner::wigner_d;
use crate::geometry::{Grid, SurfaceSpec};
use crate::spectrum::{detect_clusters, ClusterSpan};
use crate::variation::{
    ClusterWeights, IterationRecord, MinimizeParams, OptimizationTrace, RunStatus, WeightRule,
};
use crate::{Error, Result};

/// One azimuthal sector: all modes with a fixed m, both signs of μ.
struct Sector {
    /// Dirac eigenvalues per sector mode.
    mus: Vec<f64>,
    /// θ-profiles of the two spinor components, nodes × modes. The complex
    /// structure of the lower component (∓i per sign) drops out of every
    /// sector-internal pairing, so the tables stay real: within a sector,
    /// ⟨φᵢ, φⱼ⟩(θ) = upᵢ·upⱼ + sᵢsⱼ·loᵢ·loⱼ.
    up: DMatrix<f64>,
    lo: DMatrix<f64>,
    signs: Vec<f64>,
}

/// Sector-diagonalized Dirac eigenbasis of the unit sphere.
pub struct AxisymBasis {
    pub cutoff: u32,
    /// Colatitude quadrature nodes, ascending.
    pub thetas: Vec<f64>,
    /// Full surface quadrature weights (Gauss–Legendre × 2π).
    pub weights: Vec<f64>,
    sectors: Vec<Sector>,
}

impl AxisymBasis {
    /// Builds the basis with `n_theta` Gauss–Legendre colatitude nodes.
    /// Exactness of the sector Gram matrices needs n_theta ≥ cutoff.
    pub fn build(cutoff: u32, n_theta: u32) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::validation("cutoff", "must be at least 1"));
        }
        if n_theta < cutoff {
            return Err(Error::Resolution {
                message: format!(
                    "cutoff {cutoff} needs at least {cutoff} colatitude nodes, got {n_theta}"
                ),
            });
        }
        let g = n_theta as usize;
        let (x, w) = gauss_legendre(g);
        let thetas: Vec<f64> = (0..g).map(|i| x[g - 1 - i].acos()).collect();
        let weights: Vec<f64> = (0..g)
            .map(|i| w[g - 1 - i] * 2.0 * std::f64::consts::PI)
            .collect();

        let c = cutoff as i64;
        let mut sectors = Vec::new();
        for two_m in (1..=(2 * c - 1)).step_by(2).flat_map(|m| [m, -m]) {
            // j runs from |m| to cutoff − 1/2.
            let two_js: Vec<i64> = ((two_m.abs())..=(2 * c - 1)).step_by(2).collect();
            let n_modes = 2 * two_js.len();
            let mut up = DMatrix::<f64>::zeros(g, n_modes);
            let mut lo = DMatrix::<f64>::zeros(g, n_modes);
            let mut mus = Vec::with_capacity(n_modes);
            let mut signs = Vec::with_capacity(n_modes);
            for (jj, &two_j) in two_js.iter().enumerate() {
                let nj = ((two_j as f64 + 1.0) / (8.0 * std::f64::consts::PI)).sqrt();
                let lam = (two_j as f64 + 1.0) / 2.0;
                for (si, sign) in [1.0f64, -1.0].iter().enumerate() {
                    let col = 2 * jj + si;
                    mus.push(sign * lam);
                    signs.push(*sign);
                    for (row, &theta) in thetas.iter().enumerate() {
                        up[(row, col)] = nj * wigner_d(two_j, two_m, 1, theta);
                        lo[(row, col)] = nj * wigner_d(two_j, two_m, -1, theta);
                    }
                }
            }
            sectors.push(Sector { mus, up, lo, signs });
        }
        Ok(AxisymBasis {
            cutoff,
            thetas,
            weights,
            sectors,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    /// Surface integral of a colatitude profile.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Lᵖ norm of a profile.
    pub fn norm(&self, f: &[f64], p: f64) -> f64 {
        self.weights
            .iter()
            .zip(f)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Meridian grid carrying the profile, for trace export.
    pub fn meridian_grid(&self) -> Grid {
        Grid {
            surface: SurfaceSpec::round_sphere(),
            rows: self.n_theta(),
            cols: 1,
            weights: self.weights.clone(),
            coords: self.thetas.iter().map(|&t| [t, 0.0]).collect(),
            positions: self
                .thetas
                .iter()
                .map(|&t| [t.sin(), 0.0, t.cos()])
                .collect(),
        }
    }
}

/// Solved axisymmetric spectrum; eigenvectors stay sector-local.
pub struct AxisymSpectrum {
    pub positive: Vec<f64>,
    pub clusters: Vec<ClusterSpan>,
    /// (sector index, real coefficients) per positive eigenvalue.
    members: Vec<(usize, DVector<f64>)>,
}

impl AxisymSpectrum {
    pub fn lambda(&self, k: usize) -> f64 {
        self.positive[k - 1]
    }

    pub fn cluster(&self, k: usize) -> ClusterSpan {
        self.clusters[k - 1]
    }
}

/// Solves all sector pencils diag(μ)v = λ·Q_m(β)·v for a colatitude profile β.
pub fn solve_axisym(
    basis: &AxisymBasis,
    beta: &[f64],
    k_max: usize,
    cluster_tol: f64,
) -> Result<AxisymSpectrum> {
    if beta.len() != basis.n_theta() {
        return Err(Error::GridMismatch {
            factor_nodes: beta.len(),
            basis_nodes: basis.n_theta(),
        });
    }
    let g = basis.n_theta();
    let mut eigs: Vec<(f64, usize, DVector<f64>)> = Vec::new();
    for (si, sector) in basis.sectors.iter().enumerate() {
        let n = sector.mus.len();
        // Q_m[i,j] = Σ_θ w·β·(upᵢupⱼ + sᵢsⱼ loᵢloⱼ)
        let mut q = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for row in 0..g {
                    let wv = basis.weights[row] * beta[row];
                    s += wv
                        * (sector.up[(row, i)] * sector.up[(row, j)]
                            + sector.signs[i]
                                * sector.signs[j]
                                * sector.lo[(row, i)]
                                * sector.lo[(row, j)]);
                }
                q[(i, j)] = s;
                q[(j, i)] = s;
            }
        }
        let chol = q.cholesky().ok_or(Error::IndefiniteWeightForm)?;
        let l = chol.l();
        let pmax = (0..n).map(|i| l[(i, i)]).fold(0.0f64, f64::max);
        if (0..n).any(|i| l[(i, i)].is_nan() || l[(i, i)] <= 1e-8 * pmax) {
            return Err(Error::IndefiniteWeightForm);
        }
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = sector.mus[i];
        }
        let x = l
            .solve_lower_triangular(&d)
            .ok_or(Error::IndefiniteWeightForm)?;
        let y = l
            .solve_lower_triangular(&x.transpose())
            .ok_or(Error::IndefiniteWeightForm)?;
        let mut a = y.transpose();
        // Symmetrize roundoff.
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = avg;
                a[(j, i)] = avg;
            }
        }
        let eig = a.symmetric_eigen();
        let vt = l
            .transpose()
            .solve_upper_triangular(&eig.eigenvectors)
            .ok_or(Error::IndefiniteWeightForm)?;
        for idx in 0..n {
            let lam = eig.eigenvalues[idx];
            if lam > 0.0 {
                eigs.push((
                    lam,
                    si,
                    DVector::from_column_slice(vt.column(idx).as_slice()),
                ));
            }
        }
    }
    eigs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if k_max > eigs.len() {
        return Err(Error::Truncation {
            requested: k_max,
            available: eigs.len(),
        });
    }
    let positive: Vec<f64> = eigs.iter().map(|e| e.0).collect();
    let clusters = detect_clusters(&positive, cluster_tol);
    Ok(AxisymSpectrum {
        positive,
        clusters,
        members: eigs.into_iter().map(|(_, s, v)| (s, v)).collect(),
    })
}

/// Pointwise |φₖ(θ)|² of a positive eigenspinor.
pub fn eigenspinor_density(basis: &AxisymBasis, spectrum: &AxisymSpectrum, k: usize) -> Vec<f64> {
    let (si, v) = &spectrum.members[k - 1];
    let sector = &basis.sectors[*si];
    let g = basis.n_theta();
    let mut out = vec![0.0; g];
    for row in 0..g {
        let mut u = 0.0;
        let mut l_re = 0.0;
        for (i, c) in v.iter().enumerate() {
            u += c * sector.up[(row, i)];
            l_re += c * sector.signs[i] * sector.lo[(row, i)];
        }
        out[row] = u * u + l_re * l_re;
    }
    out
}

/// Σ dᵢ|φᵢ|² over the weighted subrange.
pub fn cluster_density_axisym(
    basis: &AxisymBasis,
    spectrum: &AxisymSpectrum,
    weights: &ClusterWeights,
) -> Vec<f64> {
    let mut density = vec![0.0; basis.n_theta()];
    for (offset, &d) in weights.d.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let k = weights.start + offset;
        for (row, v) in eigenspinor_density(basis, spectrum, k)
            .into_iter()
            .enumerate()
        {
            density[row] += d * v;
        }
    }
    density
}

fn axisym_weights(
    basis: &AxisymBasis,
    beta: &[f64],
    spectrum: &AxisymSpectrum,
    k: usize,
    p: f64,
    rule: WeightRule,
    subrange_start: Option<usize>,
) -> ClusterWeights {
    let cluster = spectrum.cluster(k);
    let r = subrange_start.map(|r| r.clamp(1, k)).unwrap_or(cluster.lo);
    let size = k - r + 1;
    match rule {
        WeightRule::Uniform => ClusterWeights::uniform(r, k),
        WeightRule::NonnegativeLeastSquares => {
            let g = basis.n_theta();
            let mut a = DMatrix::<f64>::zeros(g, size);
            for (col, kk) in (r..=k).enumerate() {
                let dens = eigenspinor_density(basis, spectrum, kk);
                for row in 0..g {
                    a[(row, col)] = basis.weights[row].sqrt() * dens[row];
                }
            }
            let target = DVector::from_fn(g, |row, _| {
                basis.weights[row].sqrt() * beta[row].powf(p - 1.0)
            });
            let d = crate::variation::nnls_solve(&a, &target);
            let sum: f64 = d.iter().sum();
            if !(sum.is_finite() && sum > 1e-10) {
                return ClusterWeights::uniform(r, k);
            }
            ClusterWeights {
                start: r,
                end: k,
                d: d.iter().map(|v| v / sum).collect(),
            }
        }
    }
}

/// ‖β^{p-1} − Σdᵢ|φᵢ|²‖_{L^{p/(p-1)}} on the meridian quadrature.
pub fn el_residual_axisym(basis: &AxisymBasis, beta: &[f64], density: &[f64], p: f64) -> f64 {
    let q = p / (p - 1.0);
    let mut s = 0.0;
    for row in 0..basis.n_theta() {
        let diff = (beta[row].powf(p - 1.0) - density[row]).abs();
        s += basis.weights[row] * diff.powf(q);
    }
    s.powf(1.0 / q)
}

/// Largest geodesic-ball mass fraction of β² over ball centers on the
/// meridian; exact in the azimuthal direction through the chord angle.
pub fn max_ball_mass_axisym(basis: &AxisymBasis, beta: &[f64], radii: &[f64]) -> (f64, f64) {
    let g = basis.n_theta();
    let sq: Vec<f64> = (0..g)
        .map(|i| basis.weights[i] * beta[i] * beta[i] / (2.0 * std::f64::consts::PI))
        .collect();
    let total: f64 = sq.iter().sum::<f64>() * 2.0 * std::f64::consts::PI;
    let mut best = 0.0f64;
    let mut best_radius = radii.first().copied().unwrap_or(0.0);
    for &r in radii {
        let cos_r = r.cos();
        for c in 0..g {
            let (tc_cos, tc_sin) = (basis.thetas[c].cos(), basis.thetas[c].sin());
            let mut mass = 0.0;
            for row in 0..g {
                let a = tc_cos * basis.thetas[row].cos();
                let b = tc_sin * basis.thetas[row].sin();
                let arg = if b.abs() < 1e-300 {
                    if a >= cos_r {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    ((cos_r - a) / b).clamp(-1.0, 1.0)
                };
                let dphi = 2.0 * arg.acos();
                mass += sq[row] * dphi;
            }
            let frac = mass / total;
            if frac > best {
                best = frac;
                best_radius = r;
            }
        }
    }
    (best, best_radius)
}

/// Near-zero count on the meridian: local minima below zero_tol·max(β).
pub fn zero_count_axisym(beta: &[f64], zero_tol: f64) -> usize {
    let max = beta.iter().cloned().fold(0.0, f64::max);
    let cut = zero_tol * max;
    let n = beta.len();
    let mut count = 0;
    let mut in_flat = false;
    for i in 0..n {
        let left = if i > 0 { beta[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < n {
            beta[i + 1]
        } else {
            f64::INFINITY
        };
        let is_min =
            beta[i] <= cut && beta[i] <= left + 1e-15 * max && beta[i] <= right + 1e-15 * max;
        if is_min && !in_flat {
            count += 1;
        }
        in_flat = is_min;
    }
    count
}

/// Damped fixed-point minimization restricted to colatitude profiles.
/// Same continuation schedule, damping guard, convergence and concentration
/// logic as the general path; radically cheaper per iteration at high cutoff.
pub fn minimize_axisym(
    basis: &AxisymBasis,
    beta0: &[f64],
    k: usize,
    p_schedule: &[f64],
    params: &MinimizeParams,
) -> Result<OptimizationTrace> {
    if p_schedule.is_empty() || !p_schedule.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::NonDecreasingSchedule(p_schedule.to_vec()));
    }
    let g = basis.n_theta();
    if beta0.len() != g {
        return Err(Error::GridMismatch {
            factor_nodes: beta0.len(),
            basis_nodes: g,
        });
    }

    let mut beta: Vec<f64> = beta0.to_vec();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut iter_global = 0usize;
    let mut leg_estimates: Vec<f64> = Vec::new();
    let mut concentrating = false;
    let mut concentrating_final_leg = false;
    let mut diverged = false;
    let mut last_stage_converged = false;
    let mut final_el = f64::NAN;
    let mut final_mass = f64::NAN;
    let mut final_zero = 0usize;

    'legs: for (leg, &floor_rel) in params.delta_schedule.iter().enumerate() {
        let final_leg = leg + 1 == params.delta_schedule.len();
        let mut stage_values: Vec<(f64, f64)> = Vec::new();
        for &p in p_schedule {
            // Refloor and renormalize at this stage.
            let max = beta.iter().cloned().fold(0.0, f64::max);
            for v in beta.iter_mut() {
                *v = v.max(floor_rel * max);
            }
            let norm = basis.norm(&beta, p);
            for v in beta.iter_mut() {
                *v /= norm;
            }
            let mut theta = params.theta;
            let mut window: Vec<f64> = Vec::new();
            let mut streak = 0usize;
            let mut stage_initial: Option<f64> = None;
            let mut stage_converged = false;

            for _ in 0..params.max_iters {
                let spectrum = solve_axisym(basis, &beta, k, params.cluster_tol)?;
                let weights = axisym_weights(
                    basis,
                    &beta,
                    &spectrum,
                    k,
                    p,
                    params.weight_rule,
                    params.subrange_start,
                );
                let density = cluster_density_axisym(basis, &spectrum, &weights);
                let el = el_residual_axisym(basis, &beta, &density, p);
                let objective = spectrum.lambda(k) * basis.norm(&beta, p);
                let lambda_bar_l2 = spectrum.lambda(k) * basis.norm(&beta, 2.0);
                let (mass, _) = max_ball_mass_axisym(basis, &beta, &params.radii);
                let zeros = zero_count_axisym(&beta, params.zero_tol);
                let cluster = spectrum.cluster(k);

                iterations.push(IterationRecord {
                    iter: iter_global,
                    p,
                    delta: floor_rel,
                    objective,
                    lambda_bar_l2,
                    el_residual: el,
                    damping: theta,
                    max_local_mass: mass,
                    zero_count: zeros,
                    cluster_lo: cluster.lo,
                    cluster_hi: cluster.hi,
                });
                final_el = el;
                final_mass = mass;
                final_zero = zeros;
                iter_global += 1;

                let initial = *stage_initial.get_or_insert(objective);
                if objective > params.divergence_factor * initial {
                    diverged = true;
                    break 'legs;
                }

                let lambda_one = 2.0 * std::f64::consts::PI.sqrt();
                let threshold = 0.25 * (lambda_one / lambda_bar_l2.max(1e-300)).sqrt();
                let plateau = window
                    .last()
                    .map(|prev| (objective - prev).abs() <= params.plateau_tol * objective.abs())
                    .unwrap_or(false);
                if mass > threshold && plateau {
                    streak += 1;
                } else {
                    streak = 0;
                }
                let fired = streak >= params.concentration_persist;
                if fired {
                    concentrating = true;
                    if final_leg {
                        concentrating_final_leg = true;
                    }
                }

                let stalled = window.len() + 1 >= params.window
                    && window.iter().all(|v| {
                        (v - objective).abs() <= params.val_tol * objective.abs().max(1.0)
                    });
                if el <= params.el_tol && stalled {
                    stage_converged = true;
                    break;
                }
                if fired {
                    break;
                }

                if let Some(prev) = window.last() {
                    if objective > *prev * (1.0 + 1e-12) {
                        theta = (theta * 0.5).max(params.theta_min);
                    }
                }
                window.push(objective);
                if window.len() >= params.window {
                    window.remove(0);
                }

                // Damped substitution on the profile.
                let inv = 1.0 / (p - 1.0);
                let mut next: Vec<f64> = beta
                    .iter()
                    .zip(&density)
                    .map(|(b, t)| ((1.0 - theta) * b.powf(p - 1.0) + theta * t).powf(inv))
                    .collect();
                let maxv = next.iter().cloned().fold(0.0, f64::max);
                for v in next.iter_mut() {
                    *v = v.max(floor_rel * maxv);
                }
                let norm = basis.norm(&next, p);
                for v in next.iter_mut() {
                    *v /= norm;
                }
                beta = next;
            }
            last_stage_converged = stage_converged;
            if let Some(last) = iterations.last() {
                stage_values.push((p, last.lambda_bar_l2));
            }
        }
        leg_estimates.push(crate::variation::extrapolate_to_critical(&stage_values));
    }

    let lambda_estimate = leg_estimates.last().copied().unwrap_or(f64::NAN);
    let error_bar = if leg_estimates.len() > 1 {
        leg_estimates.iter().cloned().fold(f64::MIN, f64::max)
            - leg_estimates.iter().cloned().fold(f64::MAX, f64::min)
    } else {
        0.0
    };
    let status = if diverged {
        RunStatus::Diverged
    } else if concentrating_final_leg || concentrating {
        RunStatus::Concentrating
    } else if last_stage_converged {
        RunStatus::Converged
    } else {
        RunStatus::MaxIters
    };

    let grid = basis.meridian_grid();
    let final_beta = crate::geometry::ConformalFactor::from_values(
        &grid,
        beta,
        0.0,
        p_schedule[p_schedule.len() - 1].max(2.0),
    )?;

    Ok(OptimizationTrace {
        iterations,
        status,
        lambda_estimate,
        error_bar,
        final_beta,
        final_el_residual: final_el,
        final_zero_count: final_zero,
        final_max_local_mass: final_mass,
        k,
        stopped_early: false,
    })
}

/// Samples a closed-form factor on the meridian grid; only colatitude-only
/// forms are admissible here.
pub fn sample_profile(basis: &AxisymBasis, form: &crate::geometry::FactorForm) -> Result<Vec<f64>> {
    use crate::geometry::FactorForm as F;
    let vals: Vec<f64> = match form {
        F::Constant { value } => vec![*value; basis.n_theta()],
        F::ColatitudeBump { amplitude } => basis
            .thetas
            .iter()
            .map(|t| 1.0 + amplitude * t.cos())
            .collect(),
        F::SymmetricBump { amplitude } => basis
            .thetas
            .iter()
            .map(|t| 1.0 + amplitude * (2.0 * t).cos())
            .collect(),
        _ => {
            return Err(Error::validation(
                "init",
                "axisymmetric runs need a colatitude-only factor form",
            ))
        }
    };
    if let Some(v) = vals.iter().find(|v| **v < 0.0) {
        return Err(Error::validation("init", format!("negative sample {v}")));
    }
    Ok(vals)
}

/// Two antipodal stereographic bubbles of concentration a, as a colatitude
/// profile: f_a(θ) + f_a(π−θ) with f_a(θ) = a(1+t²)/(1+a²t²), t = tan(θ/2).
pub fn two_bubble_profile(basis: &AxisymBasis, a: f64) -> Vec<f64> {
    basis
        .thetas
        .iter()
        .map(|&th| {
            let tn = (th / 2.0).tan();
            let ts = ((std::f64::consts::PI - th) / 2.0).tan();
            a * (1.0 + tn * tn) / (1.0 + a * a * tn * tn)
                + a * (1.0 + ts * ts) / (1.0 + a * a * ts * ts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sphere_basis, ConformalFactor};
    use crate::variation::solve;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn matches_general_solver_for_axisymmetric_weight() {
        let cutoff = 6u32;
        let general = build_sphere_basis(cutoff, 12).unwrap();
        let axi = AxisymBasis::build(cutoff, 12).unwrap();
        let profile: Vec<f64> = axi.thetas.iter().map(|t| 1.0 + 0.3 * t.cos()).collect();
        let values: Vec<f64> = (0..general.n_nodes())
            .map(|i| 1.0 + 0.3 * general.grid.coords[i][0].cos())
            .collect();
        let beta = ConformalFactor::from_values(&general.grid, values, 0.0, 2.0).unwrap();
        let full = solve(&general, &beta, 8).unwrap();
        let fast = solve_axisym(&axi, &profile, 8, 1e-6).unwrap();
        for k in 1..=8 {
            assert_relative_eq!(fast.lambda(k), full.lambda(k), max_relative = 1e-10);
        }
    }

    #[test]
    fn round_sphere_spectrum() {
        let axi = AxisymBasis::build(4, 8).unwrap();
        let c = (4.0 * PI).powf(-0.5);
        let profile = vec![c; axi.n_theta()];
        let s = solve_axisym(&axi, &profile, 6, 1e-6).unwrap();
        let norm = axi.norm(&profile, 2.0);
        assert_relative_eq!(s.lambda(1) * norm, 2.0 * PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(s.lambda(2) * norm, 2.0 * PI.sqrt(), max_relative = 1e-12);
        assert_eq!(s.cluster(3), ClusterSpan { lo: 3, hi: 6 });
    }

    #[test]
    fn density_is_area_normalized() {
        let axi = AxisymBasis::build(4, 10).unwrap();
        let profile: Vec<f64> = axi.thetas.iter().map(|t| 0.3 + 0.1 * t.cos()).collect();
        let s = solve_axisym(&axi, &profile, 2, 1e-6).unwrap();
        // B-orthonormality: ∫ β|φₖ|² = 1.
        for k in 1..=2 {
            let d = eigenspinor_density(&axi, &s, k);
            let q: f64 = (0..axi.n_theta())
                .map(|i| axi.weights[i] * profile[i] * d[i])
                .sum();
            assert_relative_eq!(q, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn ball_mass_of_uniform_profile() {
        let axi = AxisymBasis::build(4, 96).unwrap();
        let profile = vec![1.0; axi.n_theta()];
        let (mass, _) = max_ball_mass_axisym(&axi, &profile, &[0.3]);
        // Cap fraction (1 − cos r)/2; the chord-angle integrand has a kink at
        // the ball edge, so the quadrature is only percent-accurate.
        let expect = (1.0 - 0.3f64.cos()) / 2.0;
        assert_relative_eq!(mass, expect, max_relative = 2e-2);
    }

    #[test]
    fn short_axisym_run_matches_general_minimize() {
        let cutoff = 5u32;
        let general = build_sphere_basis(cutoff, 10).unwrap();
        let axi = AxisymBasis::build(cutoff, 10).unwrap();
        let profile: Vec<f64> = axi.thetas.iter().map(|t| 1.0 + 0.2 * t.cos()).collect();
        let values: Vec<f64> = (0..general.n_nodes())
            .map(|i| 1.0 + 0.2 * general.grid.coords[i][0].cos())
            .collect();
        let beta = ConformalFactor::from_values(&general.grid, values, 0.0, 2.5).unwrap();
        let params = MinimizeParams {
            max_iters: 12,
            delta_schedule: vec![1e-5],
            ..Default::default()
        };
        let schedule = [2.5, 2.25];
        let full = crate::variation::minimize(&general, &beta, 2, &schedule, &params).unwrap();
        let fast = minimize_axisym(&axi, &profile, 2, &schedule, &params).unwrap();
        assert_eq!(full.iterations.len(), fast.iterations.len());
        for (a, b) in full.iterations.iter().zip(&fast.iterations) {
            assert_relative_eq!(a.objective, b.objective, max_relative = 1e-8);
            assert_relative_eq!(a.el_residual, b.el_residual, epsilon = 1e-8);
        }
        assert_relative_eq!(
            full.lambda_estimate,
            fast.lambda_estimate,
            max_relative = 1e-8
        );
    }
}
