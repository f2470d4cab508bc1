//! Variational layer: directional derivatives of λₖ, the Euler–Lagrange
//! residual, the damped fixed-point minimizer for λ̄ₖᵖ = λₖ(β)·‖β‖_{Lᵖ} with
//! p → 2 continuation, and concentration/nodal diagnostics.
//!
//! At a minimizer the factor satisfies β^{p-1} = Σ dᵢ|φᵢ|² for convex weights
//! dᵢ over part of the eigencluster of λₖ; the solver iterates exactly this
//! substitution, damped, renormalized in Lᵖ and floored away from zero.

mod nnls;

pub(crate) use nnls::nnls as nnls_solve;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{ConformalFactor, SpectralBasis};
use crate::spectrum::{
    assemble_forms, generalized_eigensolve_with_tol, weighted_gram, WeightedSpectrum,
};
use crate::{Error, Result};

/// Convex weights over the active cluster subrange r..k (1-based, inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterWeights {
    pub start: usize,
    pub end: usize,
    pub d: Vec<f64>,
}

impl ClusterWeights {
    pub fn uniform(start: usize, end: usize) -> Self {
        let n = end - start + 1;
        ClusterWeights {
            start,
            end,
            d: vec![1.0 / n as f64; n],
        }
    }

    pub fn sum(&self) -> f64 {
        self.d.iter().sum()
    }
}

/// How the convex weights dᵢ are chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Nonnegative least squares against β^{p-1}, normalized to sum 1;
    /// falls back to uniform when degenerate.
    NonnegativeLeastSquares,
    Uniform,
}

/// Right derivative of λₖ along a nonnegative direction b:
/// the (k−i(k)+1)-th ascending eigenvalue of the form −λₖ·∫b⟨·,·⟩ on the
/// eigencluster, taken against the Q(β,·)-orthonormal cluster basis.
pub fn directional_derivative(
    basis: &SpectralBasis,
    spectrum: &WeightedSpectrum,
    b: &ConformalFactor,
    k: usize,
) -> Result<f64> {
    if k == 0 || k > spectrum.positive.len() {
        return Err(Error::Truncation {
            requested: k,
            available: spectrum.positive.len(),
        });
    }
    let cluster = spectrum.cluster(k);
    let vals = cluster_derivative_values(basis, spectrum, b, k)?;
    Ok(vals[k - cluster.lo])
}

/// All cluster derivative values in ascending order (positions i(k)..I(k)).
pub fn cluster_derivative_values(
    basis: &SpectralBasis,
    spectrum: &WeightedSpectrum,
    b: &ConformalFactor,
    k: usize,
) -> Result<Vec<f64>> {
    if b.values().len() != basis.n_nodes() {
        return Err(Error::GridMismatch {
            factor_nodes: b.values().len(),
            basis_nodes: basis.n_nodes(),
        });
    }
    let cluster = spectrum.cluster(k);
    if cluster.hi > spectrum.positive.len() {
        return Err(Error::EmptyCluster(k));
    }
    let lambda = spectrum.lambda(k);
    let gram_b = weighted_gram(basis, b.values());
    let cols: Vec<usize> = (cluster.lo..=cluster.hi).map(|i| i - 1).collect();
    let vc = spectrum.eigenvectors.select_columns(cols.iter());
    let mut form = vc.adjoint() * gram_b * vc;
    for v in form.iter_mut() {
        *v *= Complex64::new(-lambda, 0.0);
    }
    let mut vals: Vec<f64> = form.symmetric_eigen().eigenvalues.iter().cloned().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Pointwise density Σ dᵢ |φᵢ(x)|² of the weighted cluster family.
pub fn cluster_density(
    basis: &SpectralBasis,
    spectrum: &WeightedSpectrum,
    weights: &ClusterWeights,
) -> Vec<f64> {
    let mut density = vec![0.0f64; basis.n_nodes()];
    for (offset, &d) in weights.d.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let k = weights.start + offset;
        let coeffs = spectrum.eigenvector(k);
        let vals = basis.evaluate_coefficients(&coeffs);
        for (node, v) in vals.iter().enumerate() {
            density[node] += d * (v[0].norm_sqr() + v[1].norm_sqr());
        }
    }
    density
}

/// Chooses cluster weights per the given rule, subrange r..k with r = i(k)
/// unless overridden.
pub fn cluster_weights(
    basis: &SpectralBasis,
    beta: &ConformalFactor,
    spectrum: &WeightedSpectrum,
    k: usize,
    p: f64,
    rule: WeightRule,
    subrange_start: Option<usize>,
) -> Result<ClusterWeights> {
    let cluster = spectrum.cluster(k);
    let r = subrange_start.map(|r| r.clamp(1, k)).unwrap_or(cluster.lo);
    let size = k - r + 1;
    if size == 0 {
        return Err(Error::EmptyCluster(k));
    }
    match rule {
        WeightRule::Uniform => Ok(ClusterWeights::uniform(r, k)),
        WeightRule::NonnegativeLeastSquares => {
            let n = basis.n_nodes();
            let mut a = DMatrix::<f64>::zeros(n, size);
            for (col, kk) in (r..=k).enumerate() {
                let vals = basis.evaluate_coefficients(&spectrum.eigenvector(kk));
                for node in 0..n {
                    let w = basis.grid.weights[node].sqrt();
                    a[(node, col)] = w * (vals[node][0].norm_sqr() + vals[node][1].norm_sqr());
                }
            }
            let target = nalgebra::DVector::from_fn(n, |node, _| {
                basis.grid.weights[node].sqrt() * beta.values()[node].powf(p - 1.0)
            });
            let mut d = nnls::nnls(&a, &target);
            let sum: f64 = d.iter().sum();
            if !(sum.is_finite() && sum > 1e-10) {
                return Ok(ClusterWeights::uniform(r, k));
            }
            d /= sum;
            Ok(ClusterWeights {
                start: r,
                end: k,
                d: d.iter().cloned().collect(),
            })
        }
    }
}

/// ‖β^{p-1} − Σ dᵢ|φᵢ|²‖_{L^{p/(p-1)}} with the family Q(β,·)-orthonormal.
pub fn euler_lagrange_residual(
    basis: &SpectralBasis,
    beta: &ConformalFactor,
    spectrum: &WeightedSpectrum,
    p: f64,
    weights: &ClusterWeights,
) -> f64 {
    let density = cluster_density(basis, spectrum, weights);
    let q = p / (p - 1.0);
    let mut s = 0.0;
    for node in 0..basis.n_nodes() {
        let diff = (beta.values()[node].powf(p - 1.0) - density[node]).abs();
        s += basis.grid.weights[node] * diff.powf(q);
    }
    s.powf(1.0 / q)
}

/// One damped fixed-point substitution:
/// β' = normalize_{Lᵖ}( ((1−θ)·β^{p-1} + θ·Σdᵢ|φᵢ|²)^{1/(p-1)} ), floored.
pub fn fixed_point_step(
    basis: &SpectralBasis,
    beta: &ConformalFactor,
    k: usize,
    p: f64,
    theta: f64,
    rule: WeightRule,
    floor_rel: f64,
) -> Result<(ConformalFactor, ClusterWeights)> {
    if !(0.0 < theta && theta <= 1.0) {
        return Err(Error::validation("theta", "damping must lie in (0, 1]"));
    }
    let beta = if (beta.p() - p).abs() > 0.0 {
        ConformalFactor::from_values(&basis.grid, beta.values().to_vec(), beta.floor(), p)?
    } else {
        beta.clone()
    };
    let spectrum = solve(basis, &beta, k)?;
    let weights = cluster_weights(basis, &beta, &spectrum, k, p, rule, None)?;
    let next = apply_step(basis, &beta, &spectrum, p, theta, &weights, floor_rel)?;
    Ok((next, weights))
}

fn apply_step(
    basis: &SpectralBasis,
    beta: &ConformalFactor,
    spectrum: &WeightedSpectrum,
    p: f64,
    theta: f64,
    weights: &ClusterWeights,
    floor_rel: f64,
) -> Result<ConformalFactor> {
    let density = cluster_density(basis, spectrum, weights);
    let inv = 1.0 / (p - 1.0);
    let raw: Vec<f64> = beta
        .values()
        .iter()
        .zip(&density)
        .map(|(b, t)| ((1.0 - theta) * b.powf(p - 1.0) + theta * t).powf(inv))
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    let floored = ConformalFactor::from_values(&basis.grid, raw, floor_rel * max, p)?;
    floored.normalized_lp(&basis.grid)
}

/// Convenience: assemble and solve at β, requesting at least index k.
pub fn solve(basis: &SpectralBasis, beta: &ConformalFactor, k: usize) -> Result<WeightedSpectrum> {
    let forms = assemble_forms(basis, beta)?;
    generalized_eigensolve_with_tol(&forms, k, crate::spectrum::DEFAULT_CLUSTER_TOL)
}

/// Ball-membership tables per radius, precomputed once per grid.
pub struct BallIndex {
    radii: Vec<f64>,
    members: Vec<Vec<Vec<usize>>>,
}

impl BallIndex {
    pub fn build(grid: &crate::geometry::Grid, radii: &[f64]) -> Self {
        let n = grid.len();
        let mut members = Vec::with_capacity(radii.len());
        for &r in radii {
            let mut per_node = vec![Vec::new(); n];
            for i in 0..n {
                for j in 0..n {
                    if grid.geodesic_distance(i, j) <= r {
                        per_node[i].push(j);
                    }
                }
            }
            members.push(per_node);
        }
        BallIndex {
            radii: radii.to_vec(),
            members,
        }
    }
}

/// Concentration scan report.
#[derive(Debug, Clone)]
pub struct ConcentrationScan {
    /// Mass-fraction threshold (1/2ⁿ)(Λ₁(S²)/Λ)^{1/2}, n = 2.
    pub threshold: f64,
    /// Largest geodesic-ball fraction of ∫β² over all (node, radius).
    pub max_local_mass: f64,
    pub max_node: usize,
    pub max_radius: f64,
    /// Nodes whose ball mass exceeds the threshold at some radius.
    pub flagged: Vec<usize>,
}

/// Geodesic-ball mass fractions of β² against the concentration threshold
/// (1/4)·(2√π/Λ)^{1/2} for the estimate Λ.
pub fn concentration_scan(
    basis: &SpectralBasis,
    beta: &ConformalFactor,
    lambda_estimate: f64,
    radii: &[f64],
) -> ConcentrationScan {
    let index = BallIndex::build(&basis.grid, radii);
    concentration_scan_with_index(basis, beta, lambda_estimate, &index)
}

pub fn concentration_scan_with_index(
    basis: &SpectralBasis,
    beta: &ConformalFactor,
    lambda_estimate: f64,
    index: &BallIndex,
) -> ConcentrationScan {
    let lambda_one_sphere = 2.0 * std::f64::consts::PI.sqrt();
    let threshold = 0.25 * (lambda_one_sphere / lambda_estimate.max(1e-300)).sqrt();
    let grid = &basis.grid;
    let sq: Vec<f64> = beta
        .values()
        .iter()
        .zip(&grid.weights)
        .map(|(b, w)| w * b * b)
        .collect();
    let total: f64 = sq.iter().sum();
    let mut max_local = 0.0f64;
    let mut max_node = 0usize;
    let mut max_radius = index.radii.first().copied().unwrap_or(0.0);
    let mut flagged = Vec::new();
    for (ri, per_node) in index.members.iter().enumerate() {
        for (node, ball) in per_node.iter().enumerate() {
            let mass: f64 = ball.iter().map(|&j| sq[j]).sum::<f64>() / total;
            if mass > max_local {
                max_local = mass;
                max_node = node;
                max_radius = index.radii[ri];
            }
            if mass > threshold {
                flagged.push(node);
            }
        }
    }
    flagged.sort_unstable();
    flagged.dedup();
    ConcentrationScan {
        threshold,
        max_local_mass: max_local,
        max_node,
        max_radius,
        flagged,
    }
}

/// Counts isolated near-zeros: grid-local minima with β ≤ zero_tol·max(β),
/// adjacent flagged nodes merged.
pub fn zero_set_count(
    grid: &crate::geometry::Grid,
    beta: &ConformalFactor,
    zero_tol: f64,
) -> usize {
    let max = beta.max_value();
    let cut = zero_tol * max;
    let n = grid.len();
    let vals = beta.values();
    let candidate: Vec<bool> = (0..n)
        .map(|i| {
            vals[i] <= cut
                && grid
                    .neighbors(i)
                    .iter()
                    .all(|&j| vals[i] <= vals[j] + 1e-15 * max)
        })
        .collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut i = i;
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        if !candidate[i] {
            continue;
        }
        for j in grid.neighbors(i) {
            if candidate[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut roots = Vec::new();
    for i in 0..n {
        if candidate[i] {
            let r = find(&mut parent, i);
            if !roots.contains(&r) {
                roots.push(r);
            }
        }
    }
    roots.len()
}

/// Curvature check of the conformal metric β²g: computes
/// K = (K_g − Δ_g log β)/β² nodewise and tests K ≤ λ²(1 + tol).
#[derive(Debug, Clone)]
pub struct CurvatureCheck {
    pub curvature: Vec<f64>,
    pub passed: Vec<bool>,
    pub all_passed: bool,
}

pub fn curvature_bound_check(
    grid: &crate::geometry::Grid,
    beta: &ConformalFactor,
    lambda: f64,
    tol: f64,
) -> Result<CurvatureCheck> {
    if beta.values().iter().any(|&v| v <= 0.0) {
        return Err(Error::FloorRequired(
            "curvature of β²g needs β bounded away from zero".into(),
        ));
    }
    let log_beta: Vec<f64> = beta.values().iter().map(|v| v.ln()).collect();
    let lap = grid.laplacian(&log_beta);
    let k_g = grid.surface.gauss_curvature();
    let bound = lambda * lambda * (1.0 + tol);
    let curvature: Vec<f64> = beta
        .values()
        .iter()
        .zip(&lap)
        .map(|(b, l)| (k_g - l) / (b * b))
        .collect();
    let passed: Vec<bool> = curvature.iter().map(|&k| k <= bound).collect();
    let all_passed = passed.iter().all(|&p| p);
    Ok(CurvatureCheck {
        curvature,
        passed,
        all_passed,
    })
}

/// Termination status of a minimization run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIters,
    Concentrating,
    Diverged,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunStatus::Converged => "Converged",
            RunStatus::MaxIters => "MaxIters",
            RunStatus::Concentrating => "Concentrating",
            RunStatus::Diverged => "Diverged",
        };
        f.write_str(s)
    }
}

/// One recorded iteration of the fixed-point continuation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub p: f64,
    pub delta: f64,
    /// λ̄ₖᵖ = λₖ(β)·‖β‖_{Lᵖ}.
    pub objective: f64,
    /// λₖ(β)·‖β‖_{L²}, the conformal normalization reported as Λ estimate.
    pub lambda_bar_l2: f64,
    pub el_residual: f64,
    pub damping: f64,
    pub max_local_mass: f64,
    pub zero_count: usize,
    pub cluster_lo: usize,
    pub cluster_hi: usize,
}

/// Full record of a minimization run.
#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub iterations: Vec<IterationRecord>,
    pub status: RunStatus,
    /// λ̄ₖ estimate: λₖ·‖β‖_{L²} extrapolated linearly in (p−2) at the
    /// smallest floor.
    pub lambda_estimate: f64,
    /// Spread of the extrapolated estimate across the floor schedule.
    pub error_bar: f64,
    pub final_beta: ConformalFactor,
    pub final_el_residual: f64,
    pub final_zero_count: usize,
    pub final_max_local_mass: f64,
    pub k: usize,
    /// Set when an observer stopped the run before the schedule finished.
    pub stopped_early: bool,
}

/// Minimizer parameters; defaults follow the shipped configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeParams {
    pub theta: f64,
    pub el_tol: f64,
    pub val_tol: f64,
    pub max_iters: usize,
    /// Relative floors δ/max(β), decreasing.
    pub delta_schedule: Vec<f64>,
    /// Geodesic radii for the concentration scan.
    pub radii: Vec<f64>,
    pub zero_tol: f64,
    pub weight_rule: WeightRule,
    pub cluster_tol: f64,
    /// Plateau tolerance for the concentration detector (relative Δλ̄).
    pub plateau_tol: f64,
    /// Consecutive flagged-plateau iterations before Concentrating is set.
    pub concentration_persist: usize,
    /// Objective-stall window for convergence.
    pub window: usize,
    pub theta_min: f64,
    pub divergence_factor: f64,
    /// Start r of the active cluster subrange r..k; i(k) when unset. Along a
    /// bubbling sequence the eigenvalues below k merge only in the limit, so
    /// pinning r below i(k) realizes the limiting substitution at finite
    /// resolution.
    pub subrange_start: Option<usize>,
}

impl Default for MinimizeParams {
    fn default() -> Self {
        MinimizeParams {
            theta: 0.5,
            el_tol: 1e-6,
            val_tol: 1e-9,
            max_iters: 250,
            delta_schedule: vec![1e-4, 1e-5, 1e-6],
            radii: vec![0.05, 0.1, 0.2, 0.3],
            zero_tol: 1e-3,
            weight_rule: WeightRule::NonnegativeLeastSquares,
            cluster_tol: crate::spectrum::DEFAULT_CLUSTER_TOL,
            plateau_tol: 1e-5,
            concentration_persist: 50,
            window: 5,
            theta_min: 1.0 / 64.0,
            divergence_factor: 10.0,
            subrange_start: None,
        }
    }
}

/// Default p continuation: geometric approach to the critical exponent 2.
pub fn default_p_schedule() -> Vec<f64> {
    vec![2.5, 2.25, 2.125, 2.0625, 2.03125]
}

/// Resumable continuation state: everything the loop consults across
/// iterations.
#[derive(Debug, Clone)]
pub struct MinimizeState {
    pub beta: ConformalFactor,
    pub delta_idx: usize,
    pub p_idx: usize,
    pub iter_in_stage: usize,
    pub iter_global: usize,
    pub theta: f64,
    pub objective_window: Vec<f64>,
    pub concentration_streak: usize,
    pub concentrating: bool,
    /// Stage-end λ̄_{L²} values of the current floor leg, one per finished p.
    pub stage_values: Vec<(f64, f64)>,
    /// Extrapolated λ̄ per finished floor leg.
    pub leg_estimates: Vec<f64>,
    pub stage_initial_objective: Option<f64>,
}

impl MinimizeState {
    pub fn fresh(beta: ConformalFactor, theta: f64) -> Self {
        MinimizeState {
            beta,
            delta_idx: 0,
            p_idx: 0,
            iter_in_stage: 0,
            iter_global: 0,
            theta,
            objective_window: Vec::new(),
            concentration_streak: 0,
            concentrating: false,
            stage_values: Vec::new(),
            leg_estimates: Vec::new(),
            stage_initial_objective: None,
        }
    }
}

pub(crate) fn extrapolate_to_critical(values: &[(f64, f64)]) -> f64 {
    match values {
        [] => f64::NAN,
        [(_, v)] => *v,
        [.., (pa, va), (pb, vb)] => {
            let c = (va - vb) / (pa - pb);
            vb - c * (pb - 2.0)
        }
    }
}

/// Damped fixed-point minimization with warm-started p and floor continuation.
///
/// The observer sees every recorded iteration together with the current β and
/// loop state before the step is taken; checkpointing and persistence hang off
/// it. Returning false stops the run before the shown record is committed, so
/// a later resume from the observed state reproduces the uninterrupted trace.
pub fn minimize_with_observer(
    basis: &SpectralBasis,
    k: usize,
    p_schedule: &[f64],
    params: &MinimizeParams,
    mut state: MinimizeState,
    observer: &mut dyn FnMut(&IterationRecord, &ConformalFactor, &MinimizeState) -> bool,
) -> Result<OptimizationTrace> {
    validate_schedule(p_schedule)?;
    if params.delta_schedule.is_empty() {
        return Err(Error::validation("delta_schedule", "must not be empty"));
    }
    if !params.delta_schedule.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::validation(
            "delta_schedule",
            "floors must strictly decrease",
        ));
    }

    let ball_index = BallIndex::build(&basis.grid, &params.radii);
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut diverged = false;
    let mut stopped_early = false;
    let mut final_el = f64::NAN;
    let mut final_zero = 0usize;
    let mut final_mass = f64::NAN;
    let mut last_stage_converged = false;
    let mut concentrating_final_leg = false;

    let start_delta = state.delta_idx;
    let resume_p = state.p_idx;
    let resume_mid_stage = state.iter_in_stage > 0;
    'legs: for delta_idx in start_delta..params.delta_schedule.len() {
        let floor_rel = params.delta_schedule[delta_idx];
        state.delta_idx = delta_idx;
        let final_leg = delta_idx + 1 == params.delta_schedule.len();
        let start_p = if delta_idx == start_delta {
            resume_p
        } else {
            0
        };
        for p_idx in start_p..p_schedule.len() {
            let p = p_schedule[p_idx];
            let resuming_here = resume_mid_stage && delta_idx == start_delta && p_idx == resume_p;
            state.p_idx = p_idx;
            if !resuming_here {
                state.iter_in_stage = 0;
                state.theta = params.theta;
                state.objective_window.clear();
                state.stage_initial_objective = None;
                state.concentration_streak = 0;
            }
            // Re-express β at this stage's exponent and floor. A mid-stage
            // resume must not re-floor: the running β already carries the
            // floor taken from the stage-entry maximum.
            if !resuming_here {
                let max = state.beta.max_value();
                state.beta = ConformalFactor::from_values(
                    &basis.grid,
                    state.beta.values().to_vec(),
                    floor_rel * max,
                    p,
                )?
                .normalized_lp(&basis.grid)?;
            }

            let mut stage_converged = false;
            while state.iter_in_stage < params.max_iters {
                let forms = assemble_forms(basis, &state.beta)?;
                let spectrum = generalized_eigensolve_with_tol(&forms, k, params.cluster_tol)?;
                let weights = cluster_weights(
                    basis,
                    &state.beta,
                    &spectrum,
                    k,
                    p,
                    params.weight_rule,
                    params.subrange_start,
                )?;
                let el = euler_lagrange_residual(basis, &state.beta, &spectrum, p, &weights);
                let objective = spectrum.lambda(k) * state.beta.norm_lp();
                let lambda_bar_l2 = spectrum.lambda(k) * state.beta.norm_l2();
                let scan =
                    concentration_scan_with_index(basis, &state.beta, lambda_bar_l2, &ball_index);
                let zeros = zero_set_count(&basis.grid, &state.beta, params.zero_tol);
                let cluster = spectrum.cluster(k);

                let record = IterationRecord {
                    iter: state.iter_global,
                    p,
                    delta: floor_rel,
                    objective,
                    lambda_bar_l2,
                    el_residual: el,
                    damping: state.theta,
                    max_local_mass: scan.max_local_mass,
                    zero_count: zeros,
                    cluster_lo: cluster.lo,
                    cluster_hi: cluster.hi,
                };
                if !observer(&record, &state.beta, &state) {
                    stopped_early = true;
                    break 'legs;
                }
                iterations.push(record);
                final_el = el;
                final_zero = zeros;
                final_mass = scan.max_local_mass;

                let initial = *state.stage_initial_objective.get_or_insert(objective);
                if objective > params.divergence_factor * initial {
                    diverged = true;
                    break 'legs;
                }

                // Concentration detector: flagged local mass while the
                // objective plateaus, persisting over many iterations.
                let plateau = state
                    .objective_window
                    .last()
                    .map(|prev| (objective - prev).abs() <= params.plateau_tol * objective.abs())
                    .unwrap_or(false);
                if !scan.flagged.is_empty() && plateau {
                    state.concentration_streak += 1;
                } else {
                    state.concentration_streak = 0;
                }
                let concentration_fired =
                    state.concentration_streak >= params.concentration_persist;
                if concentration_fired {
                    state.concentrating = true;
                    if final_leg {
                        concentrating_final_leg = true;
                    }
                }

                // Convergence: small EL residual and a stalled objective.
                let stalled = state.objective_window.len() + 1 >= params.window
                    && state.objective_window.iter().all(|v| {
                        (v - objective).abs() <= params.val_tol * objective.abs().max(1.0)
                    });
                if el <= params.el_tol && stalled {
                    stage_converged = true;
                    state.iter_in_stage += 1;
                    state.iter_global += 1;
                    break;
                }
                if concentration_fired {
                    // The bubble persists through continuation; stop burning
                    // iterations in this stage.
                    state.iter_in_stage += 1;
                    state.iter_global += 1;
                    break;
                }

                // Damping guard: halve θ when the objective rose.
                if let Some(prev) = state.objective_window.last() {
                    if objective > *prev * (1.0 + 1e-12) {
                        state.theta = (state.theta * 0.5).max(params.theta_min);
                    }
                }
                state.objective_window.push(objective);
                if state.objective_window.len() >= params.window {
                    state.objective_window.remove(0);
                }

                state.beta = apply_step(
                    basis,
                    &state.beta,
                    &spectrum,
                    p,
                    state.theta,
                    &weights,
                    floor_rel,
                )?;
                state.iter_in_stage += 1;
                state.iter_global += 1;
            }
            last_stage_converged = stage_converged;
            if let Some(last) = iterations.last() {
                state.stage_values.push((p, last.lambda_bar_l2));
            }
        }
        state
            .leg_estimates
            .push(extrapolate_to_critical(&state.stage_values));
        state.stage_values.clear();
        state.p_idx = 0;
        state.iter_in_stage = 0;
    }

    let lambda_estimate = state.leg_estimates.last().copied().unwrap_or(f64::NAN);
    let error_bar = if state.leg_estimates.len() > 1 {
        let max = state.leg_estimates.iter().cloned().fold(f64::MIN, f64::max);
        let min = state.leg_estimates.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    } else {
        0.0
    };

    let status = if diverged {
        RunStatus::Diverged
    } else if concentrating_final_leg || state.concentrating {
        RunStatus::Concentrating
    } else if last_stage_converged {
        RunStatus::Converged
    } else {
        RunStatus::MaxIters
    };

    Ok(OptimizationTrace {
        iterations,
        status,
        lambda_estimate,
        error_bar,
        final_beta: state.beta.clone(),
        final_el_residual: final_el,
        final_zero_count: final_zero,
        final_max_local_mass: final_mass,
        k,
        stopped_early,
    })
}

/// Damped fixed-point minimization of λ̄ₖᵖ with p continuation.
pub fn minimize(
    basis: &SpectralBasis,
    beta0: &ConformalFactor,
    k: usize,
    p_schedule: &[f64],
    params: &MinimizeParams,
) -> Result<OptimizationTrace> {
    let state = MinimizeState::fresh(beta0.clone(), params.theta);
    minimize_with_observer(basis, k, p_schedule, params, state, &mut |_, _, _| true)
}

fn validate_schedule(p_schedule: &[f64]) -> Result<()> {
    if p_schedule.is_empty() {
        return Err(Error::NonDecreasingSchedule(p_schedule.to_vec()));
    }
    if p_schedule.iter().any(|&p| p < 2.0) {
        return Err(Error::validation("p_schedule", "exponents must be ≥ n = 2"));
    }
    if !p_schedule.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::NonDecreasingSchedule(p_schedule.to_vec()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sphere_basis, evaluate_factor, FactorForm};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn round_beta(basis: &SpectralBasis, p: f64) -> ConformalFactor {
        let c = (4.0 * PI).powf(-1.0 / p);
        ConformalFactor::from_values(&basis.grid, vec![c; basis.n_nodes()], 1e-6 * c, p).unwrap()
    }

    #[test]
    fn derivative_along_beta_is_minus_lambda() {
        // λₖ((1+t)β) = λₖ(β)/(1+t) ⇒ right derivative at t = 0 is −λₖ(β).
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = evaluate_factor(
            &basis,
            &FactorForm::ColatitudeBump { amplitude: 0.2 },
            0.0,
            2.0,
        )
        .unwrap();
        let spectrum = solve(&basis, &beta, 4).unwrap();
        for k in [1usize, 3, 4] {
            let d = directional_derivative(&basis, &spectrum, &beta, k).unwrap();
            assert_relative_eq!(d, -spectrum.lambda(k), max_relative = 1e-9);
        }
    }

    #[test]
    fn cluster_derivative_values_are_nondecreasing() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = round_beta(&basis, 2.0);
        let spectrum = solve(&basis, &beta, 4).unwrap();
        let b = evaluate_factor(
            &basis,
            &FactorForm::RandomSmooth {
                seed: 3,
                amplitude: 0.8,
                terms: 5,
            },
            0.0,
            2.0,
        )
        .unwrap();
        let vals = cluster_derivative_values(&basis, &spectrum, &b, 3).unwrap();
        assert_eq!(vals.len(), 4);
        for w in vals.windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn el_residual_vanishes_at_round_sphere_pair() {
        // The λ = 1 eigenspinors are Killing spinors of constant pointwise
        // norm; with d = (1/2, 1/2) and β = (4π)^{-1/2}, p = 2 the condition
        // β^{p-1} = Σ dᵢ|φᵢ|² holds exactly.
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = round_beta(&basis, 2.0);
        let spectrum = solve(&basis, &beta, 2).unwrap();
        let weights = ClusterWeights::uniform(1, 2);
        let el = euler_lagrange_residual(&basis, &beta, &spectrum, 2.0, &weights);
        assert!(el <= 1e-8, "el residual {el}");
        let w = cluster_weights(
            &basis,
            &beta,
            &spectrum,
            2,
            2.0,
            WeightRule::NonnegativeLeastSquares,
            None,
        )
        .unwrap();
        assert!((w.sum() - 1.0).abs() < 1e-12);
        let el2 = euler_lagrange_residual(&basis, &beta, &spectrum, 2.0, &w);
        assert!(el2 <= 1e-8);
    }

    #[test]
    fn exact_substitution_zeroes_the_residual() {
        // β ← (Σ dᵢ|φᵢ|²)^{1/(p-1)} makes the residual vanish by construction
        // against the same family.
        let basis = build_sphere_basis(4, 8).unwrap();
        let p = 2.25;
        let beta = evaluate_factor(
            &basis,
            &FactorForm::ColatitudeBump { amplitude: 0.3 },
            0.0,
            p,
        )
        .unwrap();
        let spectrum = solve(&basis, &beta, 2).unwrap();
        let weights = ClusterWeights::uniform(1, 2);
        let density = cluster_density(&basis, &spectrum, &weights);
        let substituted: Vec<f64> = density.iter().map(|t| t.powf(1.0 / (p - 1.0))).collect();
        let next = ConformalFactor::from_values(&basis.grid, substituted, 0.0, p).unwrap();
        let el = euler_lagrange_residual(&basis, &next, &spectrum, p, &weights);
        assert!(el <= 1e-12, "residual {el}");
    }

    #[test]
    fn objective_descends_on_at_least_ninety_percent_of_iterations() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta0 = evaluate_factor(
            &basis,
            &FactorForm::RandomSmooth {
                seed: 2,
                amplitude: 0.4,
                terms: 5,
            },
            0.0,
            2.25,
        )
        .unwrap();
        let params = MinimizeParams {
            max_iters: 120,
            delta_schedule: vec![1e-5],
            ..Default::default()
        };
        let trace = minimize(&basis, &beta0, 2, &[2.25], &params).unwrap();
        let objectives: Vec<f64> = trace.iterations.iter().map(|r| r.objective).collect();
        let descents = objectives
            .windows(2)
            .filter(|w| w[1] <= w[0] + 1e-9 * w[0].abs())
            .count();
        assert!(
            descents as f64 >= 0.9 * (objectives.len() - 1) as f64,
            "{descents} descents over {} steps",
            objectives.len() - 1
        );
    }

    #[test]
    fn generic_factor_has_positive_residual() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = evaluate_factor(
            &basis,
            &FactorForm::RandomSmooth {
                seed: 9,
                amplitude: 0.5,
                terms: 5,
            },
            0.0,
            2.0,
        )
        .unwrap()
        .normalized_lp(&basis.grid)
        .unwrap();
        let spectrum = solve(&basis, &beta, 2).unwrap();
        let weights = cluster_weights(
            &basis,
            &beta,
            &spectrum,
            2,
            2.0,
            WeightRule::NonnegativeLeastSquares,
            None,
        )
        .unwrap();
        let el = euler_lagrange_residual(&basis, &beta, &spectrum, 2.0, &weights);
        assert!(el > 1e-4);
    }

    #[test]
    fn undamped_step_fixes_critical_point() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = round_beta(&basis, 2.0);
        let (next, _) =
            fixed_point_step(&basis, &beta, 2, 2.0, 1.0, WeightRule::Uniform, 1e-6).unwrap();
        for (a, b) in beta.values().iter().zip(next.values()) {
            assert!((a - b).abs() <= 1e-10 * a.abs());
        }
    }

    #[test]
    fn step_preserves_lp_normalization() {
        let basis = build_sphere_basis(4, 8).unwrap();
        let beta = evaluate_factor(
            &basis,
            &FactorForm::RandomSmooth {
                seed: 4,
                amplitude: 0.4,
                terms: 6,
            },
            0.0,
            2.25,
        )
        .unwrap()
        .normalized_lp(&basis.grid)
        .unwrap();
        let (next, w) = fixed_point_step(
            &basis,
            &beta,
            2,
            2.25,
            0.5,
            WeightRule::NonnegativeLeastSquares,
            1e-6,
        )
        .unwrap();
        assert!((next.norm_lp() - 1.0).abs() <= 1e-12);
        assert!((w.sum() - 1.0).abs() <= 1e-14);
        assert!(w.d.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn zero_set_counts_constructed_wells() {
        let basis = build_sphere_basis(4, 12).unwrap();
        let n = basis.n_nodes();
        let nodes = vec![3, n / 2, n - 5];
        let f = evaluate_factor(
            &basis,
            &FactorForm::Wells {
                nodes: nodes.clone(),
                width: 0.35,
            },
            0.0,
            2.0,
        )
        .unwrap();
        assert_eq!(zero_set_count(&basis.grid, &f, 1e-3), 3);
        let c = ConformalFactor::constant(&basis.grid, 1.0, 2.0).unwrap();
        assert_eq!(zero_set_count(&basis.grid, &c, 1e-3), 0);
    }

    #[test]
    fn concentration_scan_flags_synthetic_bump() {
        let basis = build_sphere_basis(6, 16).unwrap();
        let uniform = ConformalFactor::constant(&basis.grid, (4.0 * PI).powf(-0.5), 2.0).unwrap();
        let quiet = concentration_scan(&basis, &uniform, 2.0 * PI.sqrt(), &[0.1, 0.2]);
        assert!(quiet.flagged.is_empty());
        assert_relative_eq!(quiet.threshold, 0.25, max_relative = 1e-12);

        // Bump carrying most of its L² mass inside radius ~0.1.
        let bump = evaluate_factor(
            &basis,
            &FactorForm::GaussianBump {
                node: basis.n_nodes() / 2,
                width: 0.05,
                amplitude: 30.0,
                background: 0.05,
            },
            0.0,
            2.0,
        )
        .unwrap();
        let scan = concentration_scan(&basis, &bump, 2.0 * PI.sqrt(), &[0.1, 0.2]);
        assert!(scan.max_local_mass > 0.5);
        assert!(!scan.flagged.is_empty());
    }

    #[test]
    fn flat_torus_curvature_is_zero() {
        let basis = crate::geometry::build_torus_basis(
            crate::geometry::unit_square_lattice(),
            crate::geometry::SpinStructure::new(0.5, 0.0).unwrap(),
            6.0 * PI,
            12,
        )
        .unwrap();
        let beta =
            ConformalFactor::from_values(&basis.grid, vec![0.8; basis.n_nodes()], 0.1, 2.0)
                .unwrap();
        let check = curvature_bound_check(&basis.grid, &beta, PI, 1e-9).unwrap();
        assert!(check.all_passed);
        for k in &check.curvature {
            assert!(k.abs() < 1e-10);
        }
    }

    #[test]
    fn curvature_equality_for_constant_factor() {
        let basis = build_sphere_basis(4, 10).unwrap();
        let c = (4.0 * PI).powf(-0.5);
        let beta =
            ConformalFactor::from_values(&basis.grid, vec![c; basis.n_nodes()], c / 2.0, 2.0)
                .unwrap();
        let check = curvature_bound_check(&basis.grid, &beta, 2.0 * PI.sqrt(), 1e-9).unwrap();
        assert!(check.all_passed);
        for k in &check.curvature {
            assert_relative_eq!(*k, 4.0 * PI, max_relative = 1e-10);
        }
    }

    #[test]
    fn schedule_validation() {
        let basis = build_sphere_basis(2, 4).unwrap();
        let beta = round_beta(&basis, 2.5);
        let err = minimize(
            &basis,
            &beta,
            1,
            &[2.25, 2.5],
            &MinimizeParams {
                max_iters: 2,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDecreasingSchedule(_)));
    }
}
