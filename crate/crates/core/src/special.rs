//! Small special-function helpers shared by the spectral and hypothesis code.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

/// Surface area of the unit sphere `S^{d-1}` in `R^d` (2 for `d = 1`).
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    unit_sphere_area(d) / d as f64
}

/// `x − sin x`, accurate for small `x`.
pub fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // x³/6 − x⁵/120 + x⁷/5040 − x⁹/362880
        let x2 = x * x;
        x * x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 / 362_880.0)))
    } else {
        x - x.sin()
    }
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Series `Σ_{k≥1} (−x²/4)^k Γ(d/2) / (k! Γ(k + d/2))`, i.e. `Λ_d(x) − 1`.
fn angular_cos_series_minus_one(d: usize, x: f64) -> f64 {
    let nu1 = d as f64 / 2.0;
    let q = -x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= q / (k as f64 * (k as f64 - 1.0 + nu1));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Bessel `J_ν(x)` for large `x` by the Hankel asymptotic expansion.
fn bessel_j_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let omega = x - nu * PI / 2.0 - PI / 4.0;
    (2.0 / (PI * x)).sqrt() * (p * omega.cos() - q * omega.sin())
}

/// Mean of `cos(x ω·e)` over the unit sphere in `R^d`, i.e. the normalized
/// Fourier transform of the uniform measure on `S^{d-1}`:
/// `cos x` for `d = 1`, `J₀(x)` for `d = 2`, `sin x / x` for `d = 3`.
pub fn angular_cos_mean(d: usize, x: f64) -> f64 {
    1.0 - one_minus_angular_cos_mean(d, x)
}

/// `1 − angular_cos_mean(d, x)`, without cancellation at small `x`.
pub fn one_minus_angular_cos_mean(d: usize, x: f64) -> f64 {
    let x = x.abs();
    match d {
        1 => 2.0 * (0.5 * x).sin().powi(2),
        3 => {
            if x < 0.1 {
                -angular_cos_series_minus_one(3, x)
            } else {
                1.0 - x.sin() / x
            }
        }
        _ => {
            if x < 12.0 {
                -angular_cos_series_minus_one(d, x)
            } else {
                let nu = d as f64 / 2.0 - 1.0;
                let lam = gamma(d as f64 / 2.0) * (2.0 / x).powf(nu) * bessel_j_asymptotic(nu, x);
                1.0 - lam
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, epsilon = 1e-13);
    }

    #[test]
    fn x_minus_sin_matches_direct_evaluation() {
        for &x in &[1e-3, 0.05, 0.099, 0.1, 0.5, 3.0] {
            let direct = x - f64::sin(x);
            assert!((x_minus_sin(x) - direct).abs() <= 1e-12 * direct.abs().max(1e-30) + 1e-18);
        }
    }

    #[test]
    fn angular_mean_closed_forms() {
        for &x in &[0.01, 0.3, 2.0, 7.5, 15.0, 40.0] {
            assert_relative_eq!(angular_cos_mean(1, x), x.cos(), epsilon = 1e-12);
            assert_relative_eq!(angular_cos_mean(3, x), x.sin() / x, epsilon = 1e-12);
        }
    }

    #[test]
    fn angular_mean_d2_is_bessel_j0() {
        // J0 by its integral representation (1/π)∫_0^π cos(x sin θ) dθ
        for &x in &[0.5, 5.0, 11.9, 12.1, 25.0, 60.0] {
            let n = 20_000;
            let h = PI / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                let th = (i as f64 + 0.5) * h;
                s += (x * th.sin()).cos();
            }
            let j0 = s * h / PI;
            assert!((angular_cos_mean(2, x) - j0).abs() < 1e-9, "x={x}: {} vs {j0}", angular_cos_mean(2, x));
        }
    }
}
