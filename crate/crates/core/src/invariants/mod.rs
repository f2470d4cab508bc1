//! Conformal invariants and the quantitative inequalities the solver is
//! checked against: the sphere table Λ₂ₖ(S²) = 2√(kπ), the partition upper
//! bound combiner, strict monotonicity gaps, Friedrich/Bär sanity checks and
//! the Sobolev-type probe with K(2) = 1/(2√π).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::geometry::{ConformalFactor, SpectralBasis, SurfaceSpec};
use crate::spectrum::WeightedSpectrum;
use crate::{Error, Result};

/// Λₖ(S²) = 2√(⌈k/2⌉·π); consecutive odd/even indices coincide.
pub fn sphere_value(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::validation("k", "sphere table starts at k = 1"));
    }
    Ok(2.0 * (k.div_ceil(2) as f64 * std::f64::consts::PI).sqrt())
}

/// Λₖ(S²)² = 4·⌈k/2⌉·π, exact in the power domain used by the combiner.
pub fn sphere_value_squared(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::validation("k", "sphere table starts at k = 1"));
    }
    Ok(4.0 * k.div_ceil(2) as f64 * std::f64::consts::PI)
}

/// Sphere conformal spectrum with attainment flags.
///
/// The flags are configuration, not derived logic: indices 1 and 2 are
/// attained (round metric), all higher indices are not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereTable {
    pub max_k: usize,
    pub attained: Vec<bool>,
}

impl SphereTable {
    pub fn standard(max_k: usize) -> Self {
        SphereTable {
            max_k,
            attained: (1..=max_k).map(|k| k <= 2).collect(),
        }
    }

    pub fn with_attained_flags(flags: Vec<bool>) -> Self {
        SphereTable {
            max_k: flags.len(),
            attained: flags,
        }
    }

    pub fn value(&self, k: usize) -> Result<f64> {
        sphere_value(k)
    }

    /// Λₖ(S²)ⁿ for the combiner; exact for n = 2.
    pub fn power(&self, k: usize, n: f64) -> Result<f64> {
        if n == 2.0 {
            sphere_value_squared(k)
        } else {
            Ok(sphere_value(k)?.powf(n))
        }
    }

    pub fn is_attained(&self, k: usize) -> bool {
        k >= 1 && k <= self.max_k && self.attained[k - 1]
    }
}

/// Known Λ_{l₀}(M) data entering the combiner as the non-sphere term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MTermEstimate {
    pub value: f64,
    pub attained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AubinPartition {
    pub l0: usize,
    pub sphere_parts: Vec<usize>,
}

/// Result of the partition bound: the unrestricted upper bound and the
/// attained-restricted threshold of the existence criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AubinBound {
    pub value: f64,
    pub partition: AubinPartition,
    pub restricted_value: Option<f64>,
    pub restricted_partition: Option<AubinPartition>,
}

/// Minimizes Λ_{l₀}(M)ⁿ + Σᵢ Λ_{lᵢ}(S²)ⁿ over l₀ + Σlᵢ = k (lᵢ ≥ 1, l₀ < k)
/// by dynamic programming over partitions.
///
/// `m_values` must contain l₀ = 0 with value 0. Ties prefer more, smaller
/// sphere parts, which keeps the reported partition deterministic.
pub fn aubin_bound(
    k: usize,
    m_values: &BTreeMap<usize, MTermEstimate>,
    n: f64,
    table: &SphereTable,
) -> Result<AubinBound> {
    if k == 0 {
        return Err(Error::validation("k", "partition bound needs k ≥ 1"));
    }
    let zero = m_values
        .get(&0)
        .ok_or_else(|| Error::validation("m_values", "missing l0 = 0 entry"))?;
    if zero.value != 0.0 {
        return Err(Error::validation("m_values", "l0 = 0 must carry value 0"));
    }
    if table.max_k < k {
        return Err(Error::validation(
            "sphere_table",
            format!("table covers k ≤ {}, need {k}", table.max_k),
        ));
    }

    let best_unrestricted = sphere_partition_dp(k, n, table, false)?;
    let best_restricted = sphere_partition_dp(k, n, table, true)?;

    let mut plain: Option<(f64, AubinPartition)> = None;
    let mut restricted: Option<(f64, AubinPartition)> = None;
    for (&l0, est) in m_values {
        if l0 >= k {
            continue;
        }
        let m_power = if l0 == 0 { 0.0 } else { est.value.powf(n) };
        if let Some((sphere_power, parts)) = &best_unrestricted[k - l0] {
            let total = m_power + sphere_power;
            if plain.as_ref().is_none_or(|(v, _)| total < *v) {
                plain = Some((
                    total,
                    AubinPartition {
                        l0,
                        sphere_parts: parts.clone(),
                    },
                ));
            }
        }
        if l0 == 0 || est.attained {
            if let Some((sphere_power, parts)) = &best_restricted[k - l0] {
                let total = m_power + sphere_power;
                if restricted.as_ref().is_none_or(|(v, _)| total < *v) {
                    restricted = Some((
                        total,
                        AubinPartition {
                            l0,
                            sphere_parts: parts.clone(),
                        },
                    ));
                }
            }
        }
    }

    let (value_power, partition) =
        plain.ok_or_else(|| Error::validation("m_values", "no feasible partition"))?;
    Ok(AubinBound {
        value: value_power.powf(1.0 / n),
        partition,
        restricted_value: restricted.as_ref().map(|(v, _)| v.powf(1.0 / n)),
        restricted_partition: restricted.map(|(_, p)| p),
    })
}

/// best[j] = minimal Σ Λ_{lᵢ}ⁿ over partitions of j into parts ≥ 1
/// (restricted to attained sphere indices when asked). best[0] = empty sum.
#[allow(clippy::type_complexity)]
fn sphere_partition_dp(
    k: usize,
    n: f64,
    table: &SphereTable,
    attained_only: bool,
) -> Result<Vec<Option<(f64, Vec<usize>)>>> {
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; k + 1];
    best[0] = Some((0.0, Vec::new()));
    for j in 1..=k {
        for l in 1..=j {
            if attained_only && !table.is_attained(l) {
                continue;
            }
            let power = table.power(l, n)?;
            if let Some((prev, parts)) = best[j - l].clone() {
                let cand = prev + power;
                let better = match &best[j] {
                    None => true,
                    Some((cur, _)) => cand < *cur,
                };
                if better {
                    let mut parts = parts;
                    parts.push(l);
                    parts.sort_unstable();
                    best[j] = Some((cand, parts));
                }
            }
        }
    }
    Ok(best)
}

/// Exhaustive partition enumeration, the oracle mate of [`aubin_bound`].
pub fn aubin_bound_exhaustive(
    k: usize,
    m_values: &BTreeMap<usize, MTermEstimate>,
    n: f64,
    table: &SphereTable,
    attained_only: bool,
) -> Result<Option<f64>> {
    fn partitions(j: usize, min_part: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if j == 0 {
            out.push(current.clone());
            return;
        }
        for l in min_part..=j {
            current.push(l);
            partitions(j - l, l, current, out);
            current.pop();
        }
    }
    let mut best: Option<f64> = None;
    for (&l0, est) in m_values {
        if l0 >= k {
            continue;
        }
        if attained_only && l0 != 0 && !est.attained {
            continue;
        }
        let m_power = if l0 == 0 { 0.0 } else { est.value.powf(n) };
        let mut parts = Vec::new();
        partitions(k - l0, 1, &mut Vec::new(), &mut parts);
        for p in parts {
            if p.is_empty() {
                continue;
            }
            if attained_only && p.iter().any(|&l| !table.is_attained(l)) {
                continue;
            }
            let mut total = m_power;
            for &l in &p {
                total += table.power(l, n)?;
            }
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    }
    Ok(best.map(|b| b.powf(1.0 / n)))
}

/// Tri-state verdict of the strict-monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapVerdict {
    Strict,
    Inconclusive,
    Violated,
}

/// Checks Λ_{2k} + err < Λ_{2k+2} − err over consecutive even indices.
/// Overlapping error bars are Inconclusive rather than a failure.
pub fn gap_check(estimates: &BTreeMap<usize, (f64, f64)>) -> Result<GapVerdict> {
    if estimates.len() < 2 {
        return Err(Error::validation(
            "estimates",
            "need at least two even indices",
        ));
    }
    if let Some(k) = estimates.keys().find(|k| *k % 2 != 0) {
        return Err(Error::validation(
            "estimates",
            format!("indices must be even, got {k}"),
        ));
    }
    let entries: Vec<(&usize, &(f64, f64))> = estimates.iter().collect();
    let mut verdict = GapVerdict::Strict;
    for w in entries.windows(2) {
        let (v1, e1) = *w[0].1;
        let (v2, e2) = *w[1].1;
        if v1 + e1 < v2 - e2 {
            continue;
        } else if v1 - e1 > v2 + e2 {
            verdict = GapVerdict::Violated;
        } else if verdict == GapVerdict::Strict {
            verdict = GapVerdict::Inconclusive;
        }
    }
    Ok(verdict)
}

/// Friedrich bound outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FriedrichOutcome {
    /// All eigenvalues satisfy λ² ≥ (n/(4(n−1)))·min S − tol; carries the
    /// smallest margin λ² − bound.
    Pass {
        margin: f64,
    },
    Fail {
        margin: f64,
    },
    /// min S of the weighted metric β²g is unknown (non-constant β).
    NotApplicable,
}

/// Checks λ² ≥ (n/(4(n−1)))·min_M S over the solved spectrum. Applies to the
/// reference metric (β constant, rescaled accordingly); non-constant factors
/// are reported NotApplicable.
pub fn friedrich_check(
    spectrum: &WeightedSpectrum,
    surface: &SurfaceSpec,
    beta: &ConformalFactor,
    grid: &crate::geometry::Grid,
    tol: f64,
) -> FriedrichOutcome {
    if beta.coefficient_of_variation(grid) > 1e-10 {
        return FriedrichOutcome::NotApplicable;
    }
    let c = beta.values()[0];
    // β ≡ c scales the metric by c²: min S(c²g) = min S(g)/c².
    let bound = 0.5 * surface.min_scalar_curvature() / (c * c);
    let mut margin = f64::INFINITY;
    for &l in &spectrum.eigenvalues {
        margin = margin.min(l * l - bound);
    }
    if margin >= -tol {
        FriedrichOutcome::Pass { margin }
    } else {
        FriedrichOutcome::Fail { margin }
    }
}

/// Probe report for the Sobolev-type inequality
/// |∫⟨Dφ,φ⟩| ≤ (K(2)+ε)‖Dφ‖²_{L^{4/3}} + B_ε‖φ‖²_{L^{4/3}}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SobolevProbe {
    /// Smallest B_ε ≥ 0 making every sample pass.
    pub calibrated_b: f64,
    /// Violations when re-testing all samples at calibrated_b × 1.01.
    pub violations: usize,
    pub samples: usize,
    pub epsilon: f64,
    /// Most binding value of (|∫⟨Dφ,φ⟩| − (K+ε)‖Dφ‖²)/‖φ‖² over the samples;
    /// negative when the first term alone dominates every sample.
    pub worst_margin: f64,
}

/// Sobolev constant K(2) = Λ₁(S²)⁻¹ = 1/(2√π).
pub fn sobolev_k2() -> f64 {
    1.0 / (2.0 * std::f64::consts::PI.sqrt())
}

/// Evaluates both sides of the Sobolev-type inequality on random finite basis
/// combinations and calibrates the empirical B_ε.
pub fn sobolev_probe(
    basis: &SpectralBasis,
    epsilon: f64,
    sample_count: usize,
    seed: u64,
) -> Result<SobolevProbe> {
    if epsilon <= 0.0 {
        return Err(Error::validation("epsilon", "must be positive"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = basis.n_modes();
    let n = basis.n_nodes();
    let k2 = sobolev_k2();

    // Batched evaluation: pointwise φ and Dφ for all samples at once.
    let mut coeff = DMatrix::<Complex64>::zeros(m, sample_count);
    for j in 0..sample_count {
        for i in 0..m {
            coeff[(i, j)] =
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let mut dcoeff = coeff.clone();
    for i in 0..m {
        let mu = Complex64::new(basis.modes[i].eigenvalue, 0.0);
        for j in 0..sample_count {
            dcoeff[(i, j)] *= mu;
        }
    }
    let values = complex_value_product(basis, &coeff);
    let dvalues = complex_value_product(basis, &dcoeff);

    let mut ratios = Vec::with_capacity(sample_count);
    for j in 0..sample_count {
        // |∫⟨Dφ,φ⟩| = |Σ μᵢ|cᵢ|²| on the orthonormal eigenbasis.
        let mut lhs = 0.0;
        for i in 0..m {
            lhs += basis.modes[i].eigenvalue * coeff[(i, j)].norm_sqr();
        }
        let lhs = lhs.abs();
        let mut phi43 = 0.0;
        let mut dphi43 = 0.0;
        for node in 0..n {
            let w = basis.grid.weights[node];
            let pv = values[(node, j)];
            let dv = dvalues[(node, j)];
            phi43 += w * pv.powf(2.0 / 3.0);
            dphi43 += w * dv.powf(2.0 / 3.0);
        }
        // ‖·‖²_{L^{4/3}} = (∫|·|^{4/3})^{3/2}
        let phi_norm2 = phi43.powf(1.5);
        let dphi_norm2 = dphi43.powf(1.5);
        let needed = (lhs - (k2 + epsilon) * dphi_norm2) / phi_norm2;
        ratios.push(needed);
    }
    let worst_margin = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let calibrated_b = worst_margin.max(0.0);
    let b_test = calibrated_b * 1.01;
    let violations = ratios.iter().filter(|&&r| r > b_test && r > 0.0).count();
    Ok(SobolevProbe {
        calibrated_b,
        violations,
        samples: sample_count,
        epsilon,
        worst_margin,
    })
}

/// Pointwise |φ|² tables for a batch of coefficient vectors.
/// Returns an n_nodes × samples matrix of squared pointwise norms.
fn complex_value_product(basis: &SpectralBasis, coeff: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = basis.n_nodes();
    let samples = coeff.ncols();
    let m = basis.n_modes();
    let vr = basis.values_re();
    let vi = basis.values_im();
    let mut cr = DMatrix::<f64>::zeros(m, samples);
    let mut ci = DMatrix::<f64>::zeros(m, samples);
    for i in 0..m {
        for j in 0..samples {
            cr[(i, j)] = coeff[(i, j)].re;
            ci[(i, j)] = coeff[(i, j)].im;
        }
    }
    // (V c): real = Vr·cr − Vi·ci, imag = Vr·ci + Vi·cr, rows = 2·node + comp.
    let real = vr * &cr - vi * &ci;
    let imag = vr * &ci + vi * &cr;
    let mut out = DMatrix::<f64>::zeros(n, samples);
    for node in 0..n {
        for j in 0..samples {
            let a = real[(2 * node, j)];
            let b = imag[(2 * node, j)];
            let c = real[(2 * node + 1, j)];
            let d = imag[(2 * node + 1, j)];
            out[(node, j)] = a * a + b * b + c * c + d * d;
        }
    }
    out
}

/// λ̄ₖᵖ(β) = λₖ(β)·‖β‖_{Lᵖ}.
pub fn normalized_eigenvalue(
    basis: &SpectralBasis,
    beta: &ConformalFactor,
    k: usize,
    p: f64,
) -> Result<f64> {
    let spectrum = crate::variation::solve(basis, beta, k)?;
    Ok(spectrum.lambda(k) * beta.norm(&basis.grid, p))
}
