//! Acceptance suite: the quantitative exit criteria of the library, each
//! pinned to its stated tolerance. The `verify` CLI subcommand and the
//! `acceptance` integration test both run exactly this code.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use crate::geometry::{
    build_sphere_basis, build_torus_basis, evaluate_factor, ConformalFactor, FactorForm,
    SpectralBasis, SpinStructure,
};
use crate::invariants::{
    aubin_bound, aubin_bound_exhaustive, friedrich_check, gap_check, sobolev_probe, sphere_value,
    FriedrichOutcome, GapVerdict, MTermEstimate, SphereTable,
};
use crate::variation::{
    default_p_schedule, minimize, solve, MinimizeParams, OptimizationTrace, RunStatus,
};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

const NAMES: [&str; 12] = [
    "sphere-ground-truth",
    "minimizer-recovery",
    "non-attainment",
    "derivative",
    "scale-invariance",
    "even-multiplicity",
    "kernel",
    "aubin",
    "gap",
    "friedrich",
    "sobolev",
    "nodal",
];

pub fn criterion_names() -> &'static [&'static str] {
    &NAMES
}

fn unit_lattice() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}

/// Shared expensive runs, computed once per suite.
#[derive(Default)]
pub struct Suite {
    sphere_k2: OnceLock<Result<Vec<OptimizationTrace>, String>>,
    sphere_k4: OnceLock<Result<OptimizationTrace, String>>,
    torus_k2: OnceLock<Result<OptimizationTrace, String>>,
}

/// Seeds of the five random starts in the recovery criterion.
pub const RECOVERY_SEEDS: [u64; 5] = [11, 22, 33, 44, 55];

fn recovery_params() -> MinimizeParams {
    MinimizeParams {
        max_iters: 160,
        ..Default::default()
    }
}

fn bubbling_params() -> MinimizeParams {
    MinimizeParams {
        max_iters: 400,
        ..Default::default()
    }
}

impl Suite {
    pub fn new() -> Self {
        Suite::default()
    }

    fn sphere_k2_runs(&self) -> Result<&Vec<OptimizationTrace>, String> {
        self.sphere_k2
            .get_or_init(|| {
                let basis = build_sphere_basis(6, 12).map_err(|e| e.to_string())?;
                RECOVERY_SEEDS
                    .par_iter()
                    .map(|&seed| {
                        let beta0 = evaluate_factor(
                            &basis,
                            &FactorForm::RandomSmooth {
                                seed,
                                amplitude: 0.5,
                                terms: 6,
                            },
                            0.0,
                            default_p_schedule()[0],
                        )
                        .map_err(|e| e.to_string())?;
                        minimize(&basis, &beta0, 2, &default_p_schedule(), &recovery_params())
                            .map_err(|e| e.to_string())
                    })
                    .collect()
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn sphere_k4_run(&self) -> Result<&OptimizationTrace, String> {
        self.sphere_k4
            .get_or_init(|| {
                // Concentration needs bubbles far sharper than a dense solve
                // can afford; the minimizing flow is rotationally symmetric,
                // so the sector-diagonal solver reaches cutoff 48.
                let basis =
                    crate::axisym::AxisymBasis::build(48, 192).map_err(|e| e.to_string())?;
                let beta0: Vec<f64> = basis
                    .thetas
                    .iter()
                    .map(|&t| 1.0 + 0.5 * (2.0 * t).cos())
                    .collect();
                crate::axisym::minimize_axisym(
                    &basis,
                    &beta0,
                    4,
                    &default_p_schedule(),
                    &bubbling_params(),
                )
                .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn torus_k2_run(&self) -> Result<&OptimizationTrace, String> {
        self.torus_k2
            .get_or_init(|| {
                let basis = build_torus_basis(
                    unit_lattice(),
                    SpinStructure::new(0.5, 0.0).map_err(|e| e.to_string())?,
                    8.5 * PI,
                    20,
                )
                .map_err(|e| e.to_string())?;
                let beta0 = evaluate_factor(
                    &basis,
                    &FactorForm::RandomSmooth {
                        seed: 13,
                        amplitude: 0.4,
                        terms: 6,
                    },
                    0.0,
                    default_p_schedule()[0],
                )
                .map_err(|e| e.to_string())?;
                minimize(&basis, &beta0, 2, &default_p_schedule(), &recovery_params())
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| e.clone())
    }
}

/// Runs the full suite (or one criterion via `only`) and returns per-criterion
/// results in order.
pub fn run_all(only: Option<&str>) -> Vec<CriterionResult> {
    run_all_with_suite(only, &Suite::new())
}

pub fn run_all_with_suite(only: Option<&str>, suite: &Suite) -> Vec<CriterionResult> {
    (1..=12usize)
        .filter(|id| only.is_none_or(|name| NAMES[id - 1] == name))
        .map(|id| run_criterion(id, suite))
        .collect()
}

/// One row of the measurement report: measured conformal invariant per k with
/// its bar, the partition upper bound, and the strict-gap verdict against the
/// previous even index.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportRow {
    pub k: usize,
    pub lambda_estimate: f64,
    pub error_bar: f64,
    pub aubin_bound: f64,
    pub gap_verdict: String,
}

/// Builds the sphere measurement report from the suite's runs (computing them
/// if needed): k = 2 from the recovery runs, k = 4 from the bubbling run.
pub fn measurement_report(suite: &Suite) -> Result<Vec<ReportRow>, String> {
    let k2 = suite.sphere_k2_runs()?;
    let k4 = suite.sphere_k4_run()?;
    let mut zero = BTreeMap::new();
    zero.insert(
        0,
        MTermEstimate {
            value: 0.0,
            attained: true,
        },
    );
    let table = SphereTable::standard(8);
    let mut rows = Vec::new();
    let entries = [
        (2usize, k2[0].lambda_estimate, k2[0].error_bar),
        (4usize, k4.lambda_estimate, k4.error_bar),
    ];
    for (i, &(k, lambda, bar)) in entries.iter().enumerate() {
        let bound = aubin_bound(k, &zero, 2.0, &table).map_err(|e| e.to_string())?;
        let verdict = if i == 0 {
            "-".to_string()
        } else {
            let mut est = BTreeMap::new();
            est.insert(
                entries[i - 1].0,
                (entries[i - 1].1, entries[i - 1].2.max(1e-12)),
            );
            est.insert(k, (lambda, bar.max(1e-12)));
            format!("{:?}", gap_check(&est).map_err(|e| e.to_string())?)
        };
        rows.push(ReportRow {
            k,
            lambda_estimate: lambda,
            error_bar: bar,
            aubin_bound: bound.value,
            gap_verdict: verdict,
        });
    }
    Ok(rows)
}

pub fn run_criterion(id: usize, suite: &Suite) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => sphere_ground_truth(),
        2 => minimizer_recovery(suite),
        3 => non_attainment(suite),
        4 => derivative_formula(),
        5 => scale_invariance(),
        6 => even_multiplicity(),
        7 => kernel_handling(),
        8 => aubin_combiner(),
        9 => strict_gap(suite),
        10 => friedrich_equality(),
        11 => sobolev(),
        12 => nodal_bound(suite),
        _ => Err("unknown criterion".into()),
    };
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => CriterionResult {
            id,
            name: NAMES[id - 1],
            passed: true,
            detail,
            seconds,
        },
        Err(detail) => CriterionResult {
            id,
            name: NAMES[id - 1],
            passed: false,
            detail,
            seconds,
        },
    }
}

type Check = Result<String, String>;

/// 1. λ̄₂ = 2√π within 1e−9 for β ≡ (4π)^{-1/2} at cutoff ≥ 6, under 1 s.
fn sphere_ground_truth() -> Check {
    let t0 = Instant::now();
    let basis = build_sphere_basis(6, 12).map_err(|e| e.to_string())?;
    let c = (4.0 * PI).powf(-0.5);
    let beta = ConformalFactor::constant(&basis.grid, c, 2.0).map_err(|e| e.to_string())?;
    let spectrum = solve(&basis, &beta, 2).map_err(|e| e.to_string())?;
    let lambda_bar = spectrum.lambda(2) * beta.norm_l2();
    let target = 2.0 * PI.sqrt();
    let err = (lambda_bar - target).abs();
    let elapsed = t0.elapsed().as_secs_f64();
    if err > 1e-9 {
        return Err(format!(
            "λ̄₂ = {lambda_bar:.12} vs 2√π, error {err:.3e} > 1e-9"
        ));
    }
    if elapsed >= 1.0 {
        return Err(format!("runtime {elapsed:.3}s exceeds 1s"));
    }
    Ok(format!("λ̄₂ error {err:.3e}, runtime {elapsed:.3}s"))
}

/// 2. Five random starts recover λ̄₂ = 2√π within 1% with β within 2% CV.
fn minimizer_recovery(suite: &Suite) -> Check {
    let runs = suite.sphere_k2_runs()?;
    let basis = build_sphere_basis(6, 12).map_err(|e| e.to_string())?;
    let target = 2.0 * PI.sqrt();
    let mut details = Vec::new();
    for (i, trace) in runs.iter().enumerate() {
        let rel = (trace.lambda_estimate - target).abs() / target;
        let cv = trace.final_beta.coefficient_of_variation(&basis.grid);
        if rel > 0.01 {
            return Err(format!(
                "seed {}: λ̄₂ = {:.8} off 2√π by {:.3}% (> 1%)",
                RECOVERY_SEEDS[i],
                trace.lambda_estimate,
                100.0 * rel
            ));
        }
        if cv > 0.02 {
            return Err(format!(
                "seed {}: final β coefficient of variation {:.3}% (> 2%)",
                RECOVERY_SEEDS[i],
                100.0 * cv
            ));
        }
        details.push(format!("{:.3e}/{:.2e}", rel, cv));
    }
    Ok(format!("rel-err/cv per seed: {}", details.join(", ")))
}

/// 3. k = 4 bubbling: λ̄₄ in [−2%, +5%] of 2√(2π), status Concentrating,
///    final local mass > 3× initial.
fn non_attainment(suite: &Suite) -> Check {
    let trace = suite.sphere_k4_run()?;
    let target = 2.0 * (2.0 * PI).sqrt();
    let value = trace.lambda_estimate;
    if value < 0.98 * target || value > 1.05 * target {
        return Err(format!(
            "λ̄₄ = {value:.6} outside [{:.6}, {:.6}]",
            0.98 * target,
            1.05 * target
        ));
    }
    if trace.status != RunStatus::Concentrating {
        return Err(format!("status {:?}, expected Concentrating", trace.status));
    }
    let initial_mass = trace
        .iterations
        .first()
        .map(|r| r.max_local_mass)
        .unwrap_or(0.0);
    let final_mass = trace.final_max_local_mass;
    if final_mass <= 3.0 * initial_mass {
        return Err(format!(
            "max_local_mass {final_mass:.4} not > 3× initial {initial_mass:.4}"
        ));
    }
    Ok(format!(
        "λ̄₄ = {value:.6} (target {target:.6}), mass {initial_mass:.4} → {final_mass:.4}"
    ))
}

/// 4. Directional derivative vs Richardson-extrapolated forward differences,
///    20 random (β, b) pairs with pair-degenerate λₖ, rel. error ≤ 1e−3.
fn derivative_formula() -> Check {
    let sphere = build_sphere_basis(5, 10).map_err(|e| e.to_string())?;
    let torus = build_torus_basis(
        unit_lattice(),
        SpinStructure::new(0.5, 0.0).map_err(|e| e.to_string())?,
        7.0 * PI,
        16,
    )
    .map_err(|e| e.to_string())?;

    let cases: Vec<(usize, &SpectralBasis, u64)> = (0..10)
        .map(|i| (i, &sphere, 100 + i as u64))
        .chain((0..10).map(|i| (i + 10, &torus, 200 + i as u64)))
        .collect();

    let worst = cases
        .par_iter()
        .map(|&(case, basis, seed)| -> Result<f64, String> {
            let beta = evaluate_factor(
                basis,
                &FactorForm::RandomSmooth {
                    seed,
                    amplitude: 0.45,
                    terms: 6,
                },
                0.0,
                2.0,
            )
            .map_err(|e| e.to_string())?;
            let b = evaluate_factor(
                basis,
                &FactorForm::RandomSmooth {
                    seed: seed + 5000,
                    amplitude: 0.9,
                    terms: 5,
                },
                0.0,
                2.0,
            )
            .map_err(|e| e.to_string())?;
            let spectrum = solve(basis, &beta, 4).map_err(|e| e.to_string())?;
            // Pick the lowest k whose cluster is a plain quaternionic pair.
            let k = (1..=3)
                .find(|&k| spectrum.cluster(k).len() == 2 && spectrum.cluster(k).lo == k)
                .ok_or_else(|| format!("case {case}: no pair cluster found"))?;
            let formula = crate::variation::directional_derivative(basis, &spectrum, &b, k)
                .map_err(|e| e.to_string())?;
            let lam0 = spectrum.lambda(k);
            let fd = |t: f64| -> Result<f64, String> {
                let shifted: Vec<f64> = beta
                    .values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| x + t * y)
                    .collect();
                let f = ConformalFactor::from_values(&basis.grid, shifted, 0.0, 2.0)
                    .map_err(|e| e.to_string())?;
                let s = solve(basis, &f, k).map_err(|e| e.to_string())?;
                Ok((s.lambda(k) - lam0) / t)
            };
            let (t1, t2) = (1e-4, 1e-5);
            let (r1, r2) = (fd(t1)?, fd(t2)?);
            let richardson = (t1 * r2 - t2 * r1) / (t1 - t2);
            let rel = (formula - richardson).abs() / formula.abs().max(1e-12);
            if rel > 1e-3 {
                return Err(format!(
                    "case {case}: formula {formula:.8e} vs fd {richardson:.8e}, rel {rel:.2e}"
                ));
            }
            Ok(rel)
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let max = worst.iter().cloned().fold(0.0f64, f64::max);
    Ok(format!("20 pairs, worst relative error {max:.2e}"))
}

/// 5. λ̄ₖᵖ(cβ) = λ̄ₖᵖ(β) within 1e−10 for c ∈ {0.1, 1, 7}, k ≤ 6, both surfaces.
fn scale_invariance() -> Check {
    let sphere = build_sphere_basis(5, 10).map_err(|e| e.to_string())?;
    let torus = build_torus_basis(
        unit_lattice(),
        SpinStructure::new(0.5, 0.5).map_err(|e| e.to_string())?,
        7.0 * PI,
        16,
    )
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (basis, seed) in [(&sphere, 31u64), (&torus, 32u64)] {
        for &p in &[2.0, 2.25] {
            let beta = evaluate_factor(
                basis,
                &FactorForm::RandomSmooth {
                    seed,
                    amplitude: 0.4,
                    terms: 6,
                },
                0.0,
                p,
            )
            .map_err(|e| e.to_string())?;
            let reference: Vec<f64> = {
                let s = solve(basis, &beta, 6).map_err(|e| e.to_string())?;
                (1..=6).map(|k| s.lambda(k) * beta.norm_lp()).collect()
            };
            for &c in &[0.1, 1.0, 7.0] {
                let scaled = beta.scaled(c).map_err(|e| e.to_string())?;
                let s = solve(basis, &scaled, 6).map_err(|e| e.to_string())?;
                for k in 1..=6usize {
                    let v = s.lambda(k) * scaled.norm_lp();
                    let rel = (v - reference[k - 1]).abs() / reference[k - 1];
                    worst = worst.max(rel);
                    if rel > 1e-10 {
                        return Err(format!(
                            "k={k} c={c} p={p}: λ̄ deviates by {rel:.2e} > 1e-10"
                        ));
                    }
                }
            }
        }
    }
    Ok(format!("worst relative deviation {worst:.2e}"))
}

/// 6. Even multiplicity: every cluster touching k ≤ 8 has even size, ten
///    random β per surface, cluster_tol = 1e−6.
fn even_multiplicity() -> Check {
    let sphere = build_sphere_basis(6, 12).map_err(|e| e.to_string())?;
    let torus = build_torus_basis(
        unit_lattice(),
        SpinStructure::new(0.0, 0.0).map_err(|e| e.to_string())?,
        8.0 * PI,
        18,
    )
    .map_err(|e| e.to_string())?;
    for (basis, label) in [(&sphere, "sphere"), (&torus, "torus")] {
        for seed in 0..10u64 {
            let beta = evaluate_factor(
                basis,
                &FactorForm::RandomSmooth {
                    seed: 300 + seed,
                    amplitude: 0.5,
                    terms: 6,
                },
                0.0,
                2.0,
            )
            .map_err(|e| e.to_string())?;
            let spectrum = solve(basis, &beta, 8).map_err(|e| e.to_string())?;
            for k in 1..=8usize {
                let c = spectrum.cluster(k);
                if c.len() % 2 != 0 {
                    return Err(format!(
                        "{label} seed {seed}: cluster ({},{}) at k={k} has odd size {}",
                        c.lo,
                        c.hi,
                        c.len()
                    ));
                }
            }
        }
    }
    Ok("all clusters even over 10 random β per surface".into())
}

/// 7. Torus kernel bookkeeping and λ̄₁ = π at δ = (1/2, 0), β ≡ 1.
fn kernel_handling() -> Check {
    let trivial = build_torus_basis(
        unit_lattice(),
        SpinStructure::new(0.0, 0.0).map_err(|e| e.to_string())?,
        7.0 * PI,
        16,
    )
    .map_err(|e| e.to_string())?;
    if trivial.kernel_dim() != 2 {
        return Err(format!("kernel dim {}, expected 2", trivial.kernel_dim()));
    }
    let beta = ConformalFactor::constant(&trivial.grid, 1.0, 2.0).map_err(|e| e.to_string())?;
    let spec = solve(&trivial, &beta, 1).map_err(|e| e.to_string())?;
    if spec.kernel_dim != 2 || spec.lambda(1) <= 0.0 {
        return Err(format!(
            "kernel_dim {} λ₁ {}; expected 2 and positive",
            spec.kernel_dim,
            spec.lambda(1)
        ));
    }

    let anti = build_torus_basis(
        unit_lattice(),
        SpinStructure::new(0.5, 0.0).map_err(|e| e.to_string())?,
        7.0 * PI,
        16,
    )
    .map_err(|e| e.to_string())?;
    let beta = ConformalFactor::constant(&anti.grid, 1.0, 2.0).map_err(|e| e.to_string())?;
    let spec = solve(&anti, &beta, 1).map_err(|e| e.to_string())?;
    let lambda_bar = spec.lambda(1) * beta.norm_l2();
    let err = (lambda_bar - PI).abs();
    if err > 1e-9 {
        return Err(format!(
            "λ̄₁ = {lambda_bar:.12}, |λ̄₁ − π| = {err:.3e} > 1e-9"
        ));
    }
    Ok(format!("kernel dim 2; λ̄₁ − π = {err:.3e}"))
}

/// 8. Partition combiner: DP equals exhaustive enumeration for k ≤ 12 over
///    every attained-flag configuration; S² k = 4 bound is exactly 2√(2π).
fn aubin_combiner() -> Check {
    let mut m_values = BTreeMap::new();
    m_values.insert(
        0,
        MTermEstimate {
            value: 0.0,
            attained: true,
        },
    );
    m_values.insert(
        2,
        MTermEstimate {
            value: 3.03,
            attained: true,
        },
    );
    m_values.insert(
        5,
        MTermEstimate {
            value: 5.6,
            attained: false,
        },
    );

    let k_max = 12usize;
    let configs: Vec<u32> = (0..(1u32 << k_max)).collect();
    let bad = configs.par_iter().find_map_any(|&mask| {
        let flags: Vec<bool> = (0..k_max).map(|i| mask & (1 << i) != 0).collect();
        let table = SphereTable::with_attained_flags(flags);
        for k in 1..=k_max {
            let dp = match aubin_bound(k, &m_values, 2.0, &table) {
                Ok(b) => b,
                Err(e) => return Some(format!("mask {mask:#x} k={k}: {e}")),
            };
            let brute = match aubin_bound_exhaustive(k, &m_values, 2.0, &table, false) {
                Ok(Some(b)) => b,
                Ok(None) => return Some(format!("mask {mask:#x} k={k}: no brute value")),
                Err(e) => return Some(format!("mask {mask:#x} k={k}: {e}")),
            };
            if (dp.value - brute).abs() > 1e-12 * brute {
                return Some(format!(
                    "mask {mask:#x} k={k}: dp {} vs brute {}",
                    dp.value, brute
                ));
            }
            let brute_r = match aubin_bound_exhaustive(k, &m_values, 2.0, &table, true) {
                Ok(v) => v,
                Err(e) => return Some(format!("mask {mask:#x} k={k}: {e}")),
            };
            match (dp.restricted_value, brute_r) {
                (Some(a), Some(b)) if (a - b).abs() <= 1e-12 * b => {}
                (None, None) => {}
                other => {
                    return Some(format!(
                        "mask {mask:#x} k={k}: restricted mismatch {other:?}"
                    ))
                }
            }
        }
        None
    });
    if let Some(msg) = bad {
        return Err(msg);
    }

    // Sphere k = 4 bound, exactly 2√(2π).
    let mut just_zero = BTreeMap::new();
    just_zero.insert(
        0,
        MTermEstimate {
            value: 0.0,
            attained: true,
        },
    );
    let table = SphereTable::standard(12);
    let bound = aubin_bound(4, &just_zero, 2.0, &table).map_err(|e| e.to_string())?;
    let target = 2.0 * (2.0 * PI).sqrt();
    if (bound.value - target).abs() > 1e-13 {
        return Err(format!("S² k=4 bound {} vs 2√(2π) {}", bound.value, target));
    }
    Ok(format!(
        "4096 flag configs × 12 indices agree; S² k=4 bound = {:.12}",
        bound.value
    ))
}

/// 9. Strict gap between measured Λ₂ and Λ₄ on the sphere, bars included.
fn strict_gap(suite: &Suite) -> Check {
    let k2 = suite.sphere_k2_runs()?;
    let k4 = suite.sphere_k4_run()?;
    let l2 = k2[0].lambda_estimate;
    let e2 = k2[0].error_bar.max(1e-12);
    let l4 = k4.lambda_estimate;
    let e4 = k4.error_bar.max(1e-12);
    let mut est = BTreeMap::new();
    est.insert(2usize, (l2, e2));
    est.insert(4usize, (l4, e4));
    match gap_check(&est).map_err(|e| e.to_string())? {
        GapVerdict::Strict => Ok(format!("Λ₂ = {l2:.6}±{e2:.1e} < Λ₄ = {l4:.6}±{e4:.1e}")),
        other => Err(format!(
            "gap verdict {other:?}: Λ₂ = {l2:.6}±{e2:.2e}, Λ₄ = {l4:.6}±{e4:.2e}"
        )),
    }
}

/// 10. Friedrich equality: λ₁² = 1 within 1e−9 on the round sphere, β ≡ 1.
fn friedrich_equality() -> Check {
    let basis = build_sphere_basis(6, 12).map_err(|e| e.to_string())?;
    let beta = ConformalFactor::constant(&basis.grid, 1.0, 2.0).map_err(|e| e.to_string())?;
    let spectrum = solve(&basis, &beta, 1).map_err(|e| e.to_string())?;
    let err = (spectrum.lambda(1) * spectrum.lambda(1) - 1.0).abs();
    if err > 1e-9 {
        return Err(format!("λ₁² − 1 = {err:.3e} > 1e-9"));
    }
    match friedrich_check(&spectrum, &basis.surface, &beta, &basis.grid, 1e-9) {
        FriedrichOutcome::Pass { margin } => {
            Ok(format!("λ₁² − 1 = {err:.3e}; bound margin {margin:.3e}"))
        }
        other => Err(format!("Friedrich check returned {other:?}")),
    }
}

/// 11. Sobolev probe: ε = 0.1, 10⁴ spinors per seed, 3 seeds, zero violations
///     at the calibrated B_ε × 1.01.
fn sobolev() -> Check {
    let basis = build_sphere_basis(5, 10).map_err(|e| e.to_string())?;
    let mut calibrated: f64 = 0.0;
    for seed in [101u64, 202, 303] {
        let probe = sobolev_probe(&basis, 0.1, 10_000, seed).map_err(|e| e.to_string())?;
        if probe.violations != 0 {
            return Err(format!(
                "seed {seed}: {} violations at calibrated × 1.01",
                probe.violations
            ));
        }
        calibrated = calibrated.max(probe.calibrated_b);
    }
    Ok(format!(
        "3 × 10⁴ samples, pooled calibrated B_ε = {calibrated:.6e}, zero violations"
    ))
}

/// 12. Nodal bound: every Converged run reports
///     zero_count ≤ genus − 1 + k/2 with no slack.
fn nodal_bound(suite: &Suite) -> Check {
    let mut checked = 0usize;
    let sphere_runs = suite.sphere_k2_runs()?;
    for trace in sphere_runs {
        if trace.status == RunStatus::Converged {
            let genus = 0usize;
            let bound = genus + trace.k / 2 - 1;
            if trace.final_zero_count > bound {
                return Err(format!(
                    "sphere k={}: zero_count {} > bound {bound}",
                    trace.k, trace.final_zero_count
                ));
            }
            checked += 1;
        }
    }
    let torus = suite.torus_k2_run()?;
    if torus.status == RunStatus::Converged {
        let genus = 1usize;
        let bound = genus + torus.k / 2 - 1;
        if torus.final_zero_count > bound {
            return Err(format!(
                "torus k={}: zero_count {} > bound {bound}",
                torus.k, torus.final_zero_count
            ));
        }
        checked += 1;
    }
    if checked == 0 {
        return Err("no converged runs available to check".into());
    }
    Ok(format!("{checked} converged runs within the nodal bound"))
}

/// Sphere table sanity used by the verify command header.
pub fn sphere_reference(k: usize) -> f64 {
    sphere_value(k).unwrap_or(f64::NAN)
}
