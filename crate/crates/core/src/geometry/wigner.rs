//! Wigner small-d functions d^j_{m',m}(θ) for half-integer indices.
//!
//! Evaluated through the Jacobi-polynomial representation, which is stable for
//! the degrees used here. Indices are passed doubled (2j, 2m', 2m) so that
//! half-integers stay exact integers.

/// ln(k!) table, grown on demand is not needed: degrees stay small.
fn ln_factorial(k: i64) -> f64 {
    debug_assert!(k >= 0);
    let mut s = 0.0;
    for i in 2..=k {
        s += (i as f64).ln();
    }
    s
}

fn ln_binomial(n: i64, k: i64) -> f64 {
    debug_assert!(n >= 0 && (0..=n).contains(&k));
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Jacobi polynomial P_n^{(a,b)}(x) by the three-term recurrence.
fn jacobi(n: i64, a: i64, b: i64, x: f64) -> f64 {
    let (af, bf) = (a as f64, b as f64);
    if n == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = 0.5 * (af - bf) + (1.0 + 0.5 * (af + bf)) * x;
    for k in 2..=n {
        let kf = k as f64;
        let c = 2.0 * kf + af + bf;
        let a1 = 2.0 * kf * (kf + af + bf) * (c - 2.0);
        let a2 = (c - 1.0) * (af * af - bf * bf);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (kf + af - 1.0) * (kf + bf - 1.0) * c;
        let p_next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = p_next;
    }
    p
}

/// d^j_{m',m}(θ) with doubled indices: `two_j = 2j`, `two_mp = 2m'`, `two_m = 2m`.
pub fn wigner_d(two_j: i64, two_mp: i64, two_m: i64, theta: f64) -> f64 {
    debug_assert!(two_j >= 0);
    debug_assert!(two_mp.abs() <= two_j && (two_j + two_mp) % 2 == 0);
    debug_assert!(two_m.abs() <= two_j && (two_j + two_m) % 2 == 0);

    // k = min(j+m, j-m, j+m', j-m'), all exact integers after halving.
    let jm = (two_j + two_m) / 2;
    let jmm = (two_j - two_m) / 2;
    let jmp = (two_j + two_mp) / 2;
    let jmmp = (two_j - two_mp) / 2;
    let k = jm.min(jmm).min(jmp).min(jmmp);

    // The two middle cases of the standard selection table coincide.
    let (a, lambda) = if k == jm {
        ((two_mp - two_m) / 2, (two_mp - two_m) / 2)
    } else if k == jmm || k == jmp {
        ((two_m - two_mp) / 2, 0)
    } else {
        ((two_mp - two_m) / 2, (two_mp - two_m) / 2)
    };
    let b = two_j - 2 * k - a;
    debug_assert!(a >= 0 && b >= 0);

    let sign = if lambda.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let ln_coeff = 0.5 * (ln_binomial(two_j - k, k + a) - ln_binomial(k + b, b));
    let half = 0.5 * theta;
    sign * ln_coeff.exp()
        * half.sin().powi(a as i32)
        * half.cos().powi(b as i32)
        * jacobi(k, a, b, theta.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spin_half_closed_forms() {
        for &theta in &[0.17, 0.9, 1.7, 2.9] {
            let h = 0.5 * theta;
            assert_relative_eq!(wigner_d(1, 1, 1, theta), h.cos(), max_relative = 1e-13);
            assert_relative_eq!(wigner_d(1, 1, -1, theta), -h.sin(), max_relative = 1e-13);
            assert_relative_eq!(wigner_d(1, -1, 1, theta), h.sin(), max_relative = 1e-13);
            assert_relative_eq!(wigner_d(1, -1, -1, theta), h.cos(), max_relative = 1e-13);
        }
    }

    #[test]
    fn spin_one_closed_forms() {
        for &theta in &[0.3, 1.2, 2.6] {
            assert_relative_eq!(wigner_d(2, 0, 0, theta), theta.cos(), max_relative = 1e-13);
            assert_relative_eq!(
                wigner_d(2, 2, 0, theta),
                -theta.sin() / 2f64.sqrt(),
                max_relative = 1e-13
            );
            assert_relative_eq!(
                wigner_d(2, 2, 2, theta),
                (1.0 + theta.cos()) / 2.0,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn symmetry_relations() {
        // d^j_{m',m} = (-1)^{m'-m} d^j_{m,m'} = d^j_{-m,-m'}
        for two_j in [1i64, 3, 5, 9] {
            for two_mp in (-two_j..=two_j).step_by(2) {
                for two_m in (-two_j..=two_j).step_by(2) {
                    let theta = 1.234;
                    let d = wigner_d(two_j, two_mp, two_m, theta);
                    let sign = if ((two_mp - two_m) / 2).rem_euclid(2) == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    let swapped = wigner_d(two_j, two_m, two_mp, theta);
                    let negated = wigner_d(two_j, -two_m, -two_mp, theta);
                    assert_relative_eq!(d, sign * swapped, epsilon = 1e-13, max_relative = 1e-12);
                    assert_relative_eq!(d, negated, epsilon = 1e-13, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn column_orthogonality_under_quadrature() {
        // ∫ d^j_{m,s} d^{j'}_{m,s} sinθ dθ = 2/(2j+1) δ_{jj'}
        let (x, w) = crate::geometry::quadrature::gauss_legendre(40);
        for &two_s in &[1i64, -1] {
            for two_m in (-9i64..=9).step_by(2) {
                for two_j in [1i64, 3, 5, 7, 9] {
                    if two_m.abs() > two_j {
                        continue;
                    }
                    for two_jp in [1i64, 3, 5, 7, 9] {
                        if two_m.abs() > two_jp {
                            continue;
                        }
                        let mut s = 0.0;
                        for (xi, wi) in x.iter().zip(&w) {
                            let theta = xi.acos();
                            s += wi
                                * wigner_d(two_j, two_m, two_s, theta)
                                * wigner_d(two_jp, two_m, two_s, theta);
                        }
                        let expect = if two_j == two_jp {
                            2.0 / (two_j as f64 + 1.0)
                        } else {
                            0.0
                        };
                        assert!(
                            (s - expect).abs() < 1e-12,
                            "2j={two_j} 2j'={two_jp} 2m={two_m} 2s={two_s}: {s} vs {expect}"
                        );
                    }
                }
            }
        }
    }
}
