//! Nonnegative conformal factors β sampled on a quadrature grid.

use serde::{Deserialize, Serialize};

use super::{Grid, SpectralBasis, SurfaceKind};
use crate::{Error, Result};

/// Grid function β ≥ 0 with floor, cached norms and the Lᵖ exponent used by
/// the renormalized functional.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor {
    values: Vec<f64>,
    floor: f64,
    p: f64,
    norm_l2: f64,
    norm_lp: f64,
}

impl ConformalFactor {
    /// Wraps nodal samples; negative samples are a validation error, values
    /// below the floor are raised onto it.
    pub fn from_values(grid: &Grid, mut values: Vec<f64>, floor: f64, p: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                factor_nodes: values.len(),
                basis_nodes: grid.len(),
            });
        }
        if floor < 0.0 {
            return Err(Error::validation("floor", "must be nonnegative"));
        }
        if p < 2.0 {
            return Err(Error::validation("p", "must be at least n = 2"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation(
                "values",
                format!("samples must be finite and nonnegative, got {v}"),
            ));
        }
        for v in &mut values {
            if *v < floor {
                *v = floor;
            }
        }
        let norm_l2 = lp_norm(grid, &values, 2.0);
        let norm_lp = lp_norm(grid, &values, p);
        Ok(ConformalFactor {
            values,
            floor,
            p,
            norm_l2,
            norm_lp,
        })
    }

    pub fn constant(grid: &Grid, c: f64, p: f64) -> Result<Self> {
        Self::from_values(grid, vec![c; grid.len()], 0.0, p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2
    }

    pub fn norm_lp(&self) -> f64 {
        self.norm_lp
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// ‖β‖_{Lq} for an arbitrary exponent, by quadrature.
    pub fn norm(&self, grid: &Grid, q: f64) -> f64 {
        lp_norm(grid, &self.values, q)
    }

    /// Rescaled copy c·β (norms scale exactly).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c <= 0.0 {
            return Err(Error::validation("scale", "must be positive"));
        }
        Ok(ConformalFactor {
            values: self.values.iter().map(|v| c * v).collect(),
            floor: self.floor * c,
            p: self.p,
            norm_l2: self.norm_l2 * c,
            norm_lp: self.norm_lp * c,
        })
    }

    /// Copy normalized to ‖β‖_{Lᵖ} = 1, with norm caches recomputed by
    /// quadrature so that serialization round-trips reproduce them bitwise.
    pub fn normalized_lp(&self, grid: &Grid) -> Result<Self> {
        if self.norm_lp <= 0.0 {
            return Err(Error::validation(
                "values",
                "cannot normalize the zero factor",
            ));
        }
        let c = 1.0 / self.norm_lp;
        let values: Vec<f64> = self.values.iter().map(|v| c * v).collect();
        Self::from_values(grid, values, self.floor * c, self.p)
    }

    /// Quadrature-weighted coefficient of variation (std/mean).
    pub fn coefficient_of_variation(&self, grid: &Grid) -> f64 {
        let total: f64 = grid.weights.iter().sum();
        let mean: f64 = grid
            .weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            / total;
        let var: f64 = grid
            .weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * (v - mean) * (v - mean))
            .sum::<f64>()
            / total;
        var.max(0.0).sqrt() / mean
    }
}

fn lp_norm(grid: &Grid, values: &[f64], p: f64) -> f64 {
    let s: f64 = grid
        .weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.abs().powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// Closed-form descriptors for initial and synthetic conformal factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum FactorForm {
    /// β ≡ c.
    Constant { value: f64 },
    /// 1 + amplitude·cos(colatitude) on the sphere; 1 + amplitude·cos(2πt₁)
    /// on the torus.
    ColatitudeBump { amplitude: f64 },
    /// 1 + amplitude·cos(2·colatitude): mild antipodally symmetric double
    /// bump, the stock initializer for bubbling runs.
    SymmetricBump { amplitude: f64 },
    /// Smooth positive random field 1 + amplitude·s(x)/max|s| built from a
    /// seeded low-frequency combination; amplitude must stay below 1.
    RandomSmooth {
        seed: u64,
        amplitude: f64,
        terms: u32,
    },
    /// background + amplitude·exp(−d(x, x₀)²/(2·width²)) around a grid node.
    GaussianBump {
        node: usize,
        width: f64,
        amplitude: f64,
        background: f64,
    },
    /// Smooth wells vanishing at the given nodes: Π (1 − exp(−d²/width²)).
    Wells { nodes: Vec<usize>, width: f64 },
}

/// Samples a closed-form factor on the basis grid. Errors if the form is
/// negative anywhere.
pub fn evaluate_factor(
    basis: &SpectralBasis,
    form: &FactorForm,
    floor: f64,
    p: f64,
) -> Result<ConformalFactor> {
    let grid = &basis.grid;
    let values = sample_form(grid, form)?;
    if let Some(v) = values.iter().find(|v| **v < 0.0) {
        return Err(Error::validation(
            "closed_form",
            format!("negative sample {v}"),
        ));
    }
    ConformalFactor::from_values(grid, values, floor, p)
}

fn sample_form(grid: &Grid, form: &FactorForm) -> Result<Vec<f64>> {
    use rand::Rng;
    use rand::SeedableRng;
    let n = grid.len();
    match form {
        FactorForm::Constant { value } => Ok(vec![*value; n]),
        FactorForm::ColatitudeBump { amplitude } => Ok((0..n)
            .map(|i| match grid.surface.kind {
                SurfaceKind::RoundSphere => 1.0 + amplitude * grid.coords[i][0].cos(),
                SurfaceKind::FlatTorus => {
                    1.0 + amplitude * (2.0 * std::f64::consts::PI * grid.coords[i][0]).cos()
                }
            })
            .collect()),
        FactorForm::SymmetricBump { amplitude } => Ok((0..n)
            .map(|i| match grid.surface.kind {
                SurfaceKind::RoundSphere => 1.0 + amplitude * (2.0 * grid.coords[i][0]).cos(),
                SurfaceKind::FlatTorus => {
                    1.0 + amplitude * (4.0 * std::f64::consts::PI * grid.coords[i][0]).cos()
                }
            })
            .collect()),
        FactorForm::RandomSmooth {
            seed,
            amplitude,
            terms,
        } => {
            if !(0.0..1.0).contains(amplitude) {
                return Err(Error::validation(
                    "amplitude",
                    "random-smooth amplitude must lie in [0, 1)",
                ));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
            let mut field = vec![0.0f64; n];
            match grid.surface.kind {
                SurfaceKind::RoundSphere => {
                    for _ in 0..*terms {
                        let a: f64 = rng.random_range(-1.0..1.0);
                        let kappa: f64 = rng.random_range(1.0..4.0);
                        // Random direction, area-uniform.
                        let z: f64 = rng.random_range(-1.0..1.0);
                        let az: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                        let rho = (1.0 - z * z).sqrt();
                        let u = [rho * az.cos(), rho * az.sin(), z];
                        for (i, f) in field.iter_mut().enumerate() {
                            let p = grid.positions[i];
                            let dot = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
                            *f += a * (kappa * (dot - 1.0)).exp();
                        }
                    }
                }
                SurfaceKind::FlatTorus => {
                    for _ in 0..*terms {
                        let a: f64 = rng.random_range(-1.0..1.0);
                        let m1: i32 = rng.random_range(-2..=2);
                        let m2: i32 = rng.random_range(-2..=2);
                        let ph: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                        for (i, f) in field.iter_mut().enumerate() {
                            let t = grid.coords[i];
                            *f += a
                                * (2.0
                                    * std::f64::consts::PI
                                    * (m1 as f64 * t[0] + m2 as f64 * t[1])
                                    + ph)
                                    .cos();
                        }
                    }
                }
            }
            let max = field.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            Ok(field.iter().map(|v| 1.0 + amplitude * v / max).collect())
        }
        FactorForm::GaussianBump {
            node,
            width,
            amplitude,
            background,
        } => {
            if *node >= n {
                return Err(Error::validation("node", "bump center outside the grid"));
            }
            Ok((0..n)
                .map(|i| {
                    let d = grid.geodesic_distance(i, *node);
                    background + amplitude * (-d * d / (2.0 * width * width)).exp()
                })
                .collect())
        }
        FactorForm::Wells { nodes, width } => {
            for c in nodes {
                if *c >= n {
                    return Err(Error::validation("nodes", "well center outside the grid"));
                }
            }
            Ok((0..n)
                .map(|i| {
                    nodes
                        .iter()
                        .map(|c| {
                            let d = grid.geodesic_distance(i, *c);
                            1.0 - (-d * d / (width * width)).exp()
                        })
                        .product()
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_sphere_basis;
    use approx::assert_relative_eq;

    #[test]
    fn constant_norms_on_sphere() {
        let basis = build_sphere_basis(2, 6).unwrap();
        let one = evaluate_factor(&basis, &FactorForm::Constant { value: 1.0 }, 0.0, 2.0).unwrap();
        assert_relative_eq!(
            one.norm_l2(),
            (4.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-13
        );
        let c = (4.0 * std::f64::consts::PI).powf(-0.5);
        let unit = evaluate_factor(&basis, &FactorForm::Constant { value: c }, 0.0, 2.0).unwrap();
        assert_relative_eq!(unit.norm_l2(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn bump_range() {
        let basis = build_sphere_basis(2, 6).unwrap();
        let f = evaluate_factor(
            &basis,
            &FactorForm::ColatitudeBump { amplitude: 0.3 },
            0.0,
            2.0,
        )
        .unwrap();
        assert!(f.values().iter().all(|&v| (0.7..=1.3).contains(&v)));
    }

    #[test]
    fn negative_form_rejected() {
        let basis = build_sphere_basis(2, 6).unwrap();
        let err =
            evaluate_factor(&basis, &FactorForm::Constant { value: -0.1 }, 0.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn cached_norm_matches_recomputation() {
        let basis = build_sphere_basis(3, 8).unwrap();
        let f = evaluate_factor(
            &basis,
            &FactorForm::RandomSmooth {
                seed: 5,
                amplitude: 0.4,
                terms: 6,
            },
            0.0,
            2.5,
        )
        .unwrap();
        let recomputed = f.norm(&basis.grid, 2.5);
        assert!((f.norm_lp() - recomputed).abs() <= 1e-12 * recomputed);
    }

    #[test]
    fn floor_is_applied() {
        let basis = build_sphere_basis(2, 6).unwrap();
        let f = evaluate_factor(
            &basis,
            &FactorForm::Wells {
                nodes: vec![0],
                width: 0.4,
            },
            1e-3,
            2.0,
        )
        .unwrap();
        assert!(f.values().iter().all(|&v| v >= 1e-3));
    }
}
