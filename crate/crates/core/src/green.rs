//! Fundamental solutions of the heat operator `∂_t − ½Δ` and of the wave
//! operator, with Fourier multipliers
//!
//! * heat: `ℱΓ(t)(ξ) = exp(−2π²t‖ξ‖²)`, total mass 1;
//! * wave: `ℱΓ(t)(ξ) = sin(2πt‖ξ‖)/(2π‖ξ‖)`, total mass `t`, `d ≤ 3`.
//!
//! Besides pointwise evaluation this module provides the closed-form time
//! integrals of `|ℱΓ|²` that the hypothesis integrals are built on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::quadrature::{gauss_kronrod, Tolerance};
use crate::spectral::norm;
use crate::special::x_minus_sin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Heat,
    Wave,
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Operator::Heat => "heat",
            Operator::Wave => "wave",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenFunction {
    pub operator: Operator,
    pub d: usize,
}

const FOUR_PI2: f64 = 4.0 * PI * PI;

impl GreenFunction {
    pub fn new(operator: Operator, d: usize) -> Result<Self> {
        let g = Self { operator, d };
        g.validate()?;
        Ok(g)
    }

    pub fn heat(d: usize) -> Result<Self> {
        Self::new(Operator::Heat, d)
    }

    pub fn wave(d: usize) -> Result<Self> {
        Self::new(Operator::Wave, d)
    }

    pub fn validate(&self) -> Result<()> {
        match self.operator {
            Operator::Heat if self.d >= 1 => Ok(()),
            Operator::Wave if (1..=3).contains(&self.d) => Ok(()),
            _ => Err(Error::config(format!(
                "{} fundamental solution is not a nonnegative measure in d = {}",
                self.operator, self.d
            ))),
        }
    }

    /// `ℱΓ(t)(ξ)`.
    pub fn fourier_value(&self, t: f64, xi: &[f64]) -> Result<f64> {
        check_time(t)?;
        Ok(self.radial_fourier(t, norm(xi)))
    }

    /// `ℱΓ(t)` at `‖ξ‖ = rho`, for any `t ≥ 0`.
    pub fn radial_fourier(&self, t: f64, rho: f64) -> f64 {
        match self.operator {
            Operator::Heat => (-2.0 * PI * PI * t * rho * rho).exp(),
            Operator::Wave => {
                let x = 2.0 * PI * t * rho;
                if rho * t < 1e-8 {
                    t * (1.0 - x * x / 6.0)
                } else {
                    x.sin() / (2.0 * PI * rho)
                }
            }
        }
    }

    /// `∫ Γ(t, dx)`.
    pub fn total_mass(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.mass(t))
    }

    pub(crate) fn mass(&self, t: f64) -> f64 {
        match self.operator {
            Operator::Heat => 1.0,
            Operator::Wave => t,
        }
    }

    /// Density of `Γ(t, ·)` at distance `r` from the origin, when `Γ(t)` has one
    /// (heat, wave with `d ≤ 2`).
    pub fn density(&self, t: f64, r: f64) -> Option<f64> {
        match (self.operator, self.d) {
            (Operator::Heat, d) => Some((2.0 * PI * t).powf(-(d as f64) / 2.0) * (-r * r / (2.0 * t)).exp()),
            (Operator::Wave, 1) => Some(if r <= t { 0.5 } else { 0.0 }),
            (Operator::Wave, 2) => Some(if r < t { 1.0 / (2.0 * PI * (t * t - r * r).sqrt()) } else { 0.0 }),
            _ => None,
        }
    }

    /// `∫_a^b |ℱΓ(r)(ρ)|² dr`, in closed form.
    pub fn squared_multiplier_integral(&self, a: f64, b: f64, rho: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self.operator {
            Operator::Heat => {
                let p = FOUR_PI2 * rho * rho;
                decay_integral(p, a, b)
            }
            Operator::Wave => {
                if rho == 0.0 {
                    return (b * b * b - a * a * a) / 3.0;
                }
                // ∫ sin²(2πrρ) dr = (x − sin x)/(8πρ), x = 4πrρ
                let g = |r: f64| x_minus_sin(4.0 * PI * r * rho) / (8.0 * PI * rho);
                (g(b) - g(a)) / (FOUR_PI2 * rho * rho)
            }
        }
    }

    /// Cycle-averaged stand-in for [`squared_multiplier_integral`](Self::squared_multiplier_integral)
    /// at large `ρ`.
    pub fn squared_multiplier_envelope(&self, a: f64, b: f64, rho: f64) -> f64 {
        match self.operator {
            Operator::Heat => self.squared_multiplier_integral(a, b, rho),
            Operator::Wave => (b - a) / (2.0 * FOUR_PI2 * rho * rho),
        }
    }

    /// `∫_0^T |ℱΓ(r+h)(ρ) − ℱΓ(r)(ρ)|² dr`, in closed form.
    pub fn increment_multiplier_integral(&self, h: f64, t_max: f64, rho: f64) -> f64 {
        match self.operator {
            Operator::Heat => {
                let p = FOUR_PI2 * rho * rho;
                let jump = (-0.5 * p * h).exp_m1();
                jump * jump * decay_integral(p, 0.0, t_max)
            }
            Operator::Wave => {
                if rho == 0.0 {
                    return h * h * t_max;
                }
                // 4 sin²(πhρ) cos²(2π(r+h/2)ρ) / (4π²ρ²), integrated in r
                let s = (PI * h * rho).sin();
                let cycle = 0.5 * t_max
                    + (2.0 * PI * (t_max + h) * rho).cos() * (2.0 * PI * t_max * rho).sin() / (4.0 * PI * rho);
                4.0 * s * s * cycle / (FOUR_PI2 * rho * rho)
            }
        }
    }

    /// Cycle-averaged stand-in for [`increment_multiplier_integral`](Self::increment_multiplier_integral).
    pub fn increment_multiplier_envelope(&self, h: f64, t_max: f64, rho: f64) -> f64 {
        match self.operator {
            Operator::Heat => self.increment_multiplier_integral(h, t_max, rho),
            Operator::Wave => t_max / (FOUR_PI2 * rho * rho),
        }
    }

    /// Discretisation of `Γ(t, dx)` on the grid, centred at the origin and
    /// normalised so the weights sum to `total_mass(t)`.
    pub fn kernel_weights(&self, t: f64, grid: &GridSpec) -> Result<Vec<f64>> {
        check_time(t)?;
        if grid.d != self.d {
            return Err(Error::config("grid and Green function dimensions differ"));
        }
        if self.operator == Operator::Wave && t > 0.5 * grid.extent {
            return Err(Error::config("wave cone leaves the torus"));
        }
        let vol = grid.cell_volume();
        let dx = grid.dx();
        let mut w = match (self.operator, self.d) {
            (Operator::Wave, 1) => (0..grid.len())
                .map(|i| {
                    let x = grid.displacement(i)[0];
                    let lo = (x - 0.5 * dx).max(-t);
                    let hi = (x + 0.5 * dx).min(t);
                    0.5 * (hi - lo).max(0.0)
                })
                .collect::<Vec<_>>(),
            (Operator::Wave, 2) => (0..grid.len())
                .map(|i| {
                    let x = grid.displacement(i);
                    let (cx, cy) = (x[0], x[1]);
                    let far = (cx.abs() + 0.5 * dx).hypot(cy.abs() + 0.5 * dx);
                    if far < t {
                        self.density(t, cx.hypot(cy)).unwrap() * vol
                    } else {
                        wave2_cell_mass(t, cx - 0.5 * dx, cx + 0.5 * dx, cy - 0.5 * dx, cy + 0.5 * dx)
                    }
                })
                .collect(),
            (Operator::Wave, _) => wave3_shell_weights(t, grid),
            (Operator::Heat, _) => (0..grid.len())
                .map(|i| self.density(t, norm(&grid.displacement(i)[..grid.d])).unwrap() * vol)
                .collect(),
        };
        let sum = crate::stats::pairwise_sum(&w);
        if !(sum > 0.0) {
            return Err(Error::config("kernel is not resolved by the grid"));
        }
        let scale = self.mass(t) / sum;
        for v in w.iter_mut() {
            *v *= scale;
        }
        Ok(w)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time t = {t} must be positive")))
    }
}

/// `∫_a^b e^{−p r} dr` without cancellation for small `p(b − a)`.
fn decay_integral(p: f64, a: f64, b: f64) -> f64 {
    let x = p * (b - a);
    if x == 0.0 {
        return (-p * a).exp() * (b - a);
    }
    (-p * a).exp() * (-(-x).exp_m1()) / p
}

/// Mass of the wave d = 2 kernel `(t² − ‖x‖²)_+^{−1/2}/(2π)` in a rectangle.
/// In polar coordinates the radial integral is explicit,
/// `∫ r (t² − r²)^{−1/2} dr = −√(t² − r²)`, leaving a smooth angular integral.
fn wave2_cell_mass(t: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    // split at the axes so every piece lies in one closed quadrant
    let mut total = 0.0;
    let xs = split_at_zero(x0, x1);
    let ys = split_at_zero(y0, y1);
    for &(a0, a1) in &xs {
        for &(b0, b1) in &ys {
            total += quadrant_piece(t, a0, a1, b0, b1);
        }
    }
    total
}

fn split_at_zero(a: f64, b: f64) -> Vec<(f64, f64)> {
    if a < 0.0 && b > 0.0 {
        vec![(a, 0.0), (0.0, b)]
    } else {
        vec![(a, b)]
    }
}

fn quadrant_piece(t: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    // reflect into the first quadrant
    let (ax0, ax1) = if x1 <= 0.0 { (-x1, -x0) } else { (x0, x1) };
    let (ay0, ay1) = if y1 <= 0.0 { (-y1, -y0) } else { (y0, y1) };
    if ax0.hypot(ay0) >= t || ax1 <= ax0 || ay1 <= ay0 {
        return 0.0;
    }
    let th_lo = ay0.atan2(ax1);
    let th_hi = ay1.atan2(ax0);
    let ray = |th: f64| -> f64 {
        let (c, s) = (th.cos(), th.sin());
        // slab intersection of the ray with the rectangle
        let mut r_in: f64 = 0.0;
        let mut r_out = f64::INFINITY;
        for &(lo, hi, dir) in &[(ax0, ax1, c), (ay0, ay1, s)] {
            if dir > 1e-300 {
                r_in = r_in.max(lo / dir);
                r_out = r_out.min(hi / dir);
            } else if lo > 0.0 {
                return 0.0;
            }
        }
        if r_out <= r_in || r_in >= t {
            return 0.0;
        }
        let r_out = r_out.min(t);
        ((t * t - r_in * r_in).max(0.0).sqrt() - (t * t - r_out * r_out).max(0.0).sqrt()) / (2.0 * PI)
    };
    // kinks where the ray passes a rectangle corner or enters the circle
    let mut pts = vec![th_lo, th_hi, ay0.atan2(ax0), ay1.atan2(ax1)];
    for &yv in &[ay0, ay1] {
        if yv < t {
            let xv = (t * t - yv * yv).sqrt();
            if xv >= ax0 && xv <= ax1 {
                pts.push(yv.atan2(xv));
            }
        }
    }
    for &xv in &[ax0, ax1] {
        if xv < t {
            let yv = (t * t - xv * xv).sqrt();
            if yv >= ay0 && yv <= ay1 {
                pts.push(yv.atan2(xv));
            }
        }
    }
    pts.retain(|p| *p >= th_lo && *p <= th_hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut sum = 0.0;
    for w in pts.windows(2) {
        sum += gauss_kronrod(ray, w[0], w[1], Tolerance::new(1e-15, 1e-12), 200).value;
    }
    sum
}

/// The d = 3 wave kernel `σ_t/(4πt)` spread over the cells its sphere crosses,
/// by an equal-area sampling of the sphere fine enough that each crossed cell
/// receives many samples.
fn wave3_shell_weights(t: f64, grid: &GridSpec) -> Vec<f64> {
    let dx = grid.dx();
    let nu = ((16.0 * t / dx).ceil() as usize).max(64);
    let nphi = 2 * nu;
    let area = 4.0 * PI * t * t / (nu * nphi) as f64;
    let mass = area / (4.0 * PI * t);
    let mut w = vec![0.0; grid.len()];
    for i in 0..nu {
        let u = -1.0 + (2.0 * i as f64 + 1.0) / nu as f64;
        let s = (1.0 - u * u).sqrt();
        for j in 0..nphi {
            let phi = 2.0 * PI * (j as f64 + 0.5) / nphi as f64;
            let p = [t * s * phi.cos(), t * s * phi.sin(), t * u];
            let (idx, _) = grid.snap(&p);
            w[idx] += mass;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dimensions_admitted() {
        assert!(GreenFunction::wave(4).is_err());
        assert!(GreenFunction::wave(3).is_ok());
        assert!(GreenFunction::heat(5).is_ok());
        assert!(GreenFunction::heat(0).is_err());
    }

    #[test]
    fn multiplier_values() {
        let h = GreenFunction::heat(1).unwrap();
        assert_eq!(h.fourier_value(1.0, &[0.0]).unwrap(), 1.0);
        assert!(h.fourier_value(0.0, &[0.0]).is_err());
        let w = GreenFunction::wave(1).unwrap();
        assert!(w.fourier_value(1.0, &[0.5]).unwrap().abs() < 1e-15);
        let w3 = GreenFunction::wave(3).unwrap();
        assert_eq!(w3.fourier_value(2.0, &[0.0, 0.0, 0.0]).unwrap(), 2.0);
        assert_relative_eq!(w3.fourier_value(2.0, &[1e-12, 0.0, 0.0]).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn masses() {
        assert_eq!(GreenFunction::heat(2).unwrap().total_mass(0.37).unwrap(), 1.0);
        assert_eq!(GreenFunction::wave(1).unwrap().total_mass(0.5).unwrap(), 0.5);
        assert_eq!(GreenFunction::wave(3).unwrap().total_mass(2.0).unwrap(), 2.0);
    }

    #[test]
    fn densities_integrate_to_mass() {
        let tol = Tolerance::new(1e-13, 1e-12);
        // d = 1 wave: ∫ ½ 1_{|x|≤t}
        let w1 = GreenFunction::wave(1).unwrap();
        let q = gauss_kronrod(|x| 2.0 * w1.density(0.7, x).unwrap(), 0.0, 0.7, tol, 100);
        assert_relative_eq!(q.value, 0.7, epsilon = 1e-12);
        // d = 2 wave in polar form; substitute r = t sin θ to remove the edge singularity
        let w2 = GreenFunction::wave(2).unwrap();
        let t = 1.3;
        let q = gauss_kronrod(
            |th: f64| {
                let r = t * th.sin();
                2.0 * PI * r * w2.density(t, r.min(t * (1.0 - 1e-16))).unwrap() * t * th.cos()
            },
            0.0,
            PI / 2.0,
            tol,
            100,
        );
        assert_relative_eq!(q.value, t, epsilon = 1e-9);
        // d = 3 shell: (1/(4πt))·4πt² = t
        let t = 2.0;
        assert_relative_eq!(4.0 * PI * t * t / (4.0 * PI * t), t, epsilon = 1e-15);
    }

    #[test]
    fn squared_integrals_match_quadrature() {
        let tol = Tolerance::new(1e-15, 1e-12);
        for g in [GreenFunction::heat(1).unwrap(), GreenFunction::wave(2).unwrap()] {
            for &rho in &[0.0, 1e-6, 0.3, 4.0] {
                let (a, b) = (0.2, 0.9);
                let q = gauss_kronrod(|r| g.radial_fourier(r, rho).powi(2), a, b, tol, 500);
                assert_relative_eq!(g.squared_multiplier_integral(a, b, rho), q.value, max_relative = 1e-9);
                let h = 0.15;
                let q = gauss_kronrod(
                    |r| (g.radial_fourier(r + h, rho) - g.radial_fourier(r, rho)).powi(2),
                    0.0,
                    b,
                    tol,
                    500,
                );
                assert_relative_eq!(g.increment_multiplier_integral(h, b, rho), q.value, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn kernel_weight_sums() {
        let g = GridSpec::new(1, 64, 8.0, 0.01).unwrap();
        let w = GreenFunction::heat(1).unwrap().kernel_weights(1.0, &g).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let g = GridSpec::new(1, 64, 4.0, 0.01).unwrap();
        let w = GreenFunction::wave(1).unwrap().kernel_weights(0.25, &g).unwrap();
        assert!((w.iter().sum::<f64>() - 0.25).abs() < 1e-12);
        assert!(GreenFunction::wave(1).unwrap().kernel_weights(2.5, &g).is_err());
    }

    #[test]
    fn wave2_boundary_cells_are_exact() {
        // without renormalisation the cell masses already sum to t
        let t = 0.8;
        let g = GridSpec::new(2, 32, 4.0, 0.01).unwrap();
        let dx = g.dx();
        let mut total = 0.0;
        for i in 0..g.len() {
            let x = g.displacement(i);
            total += wave2_cell_mass(t, x[0] - 0.5 * dx, x[0] + 0.5 * dx, x[1] - 0.5 * dx, x[1] + 0.5 * dx);
        }
        assert_relative_eq!(total, t, epsilon = 1e-9);
    }

    #[test]
    fn heat_weights_dft_matches_multiplier() {
        let g = GridSpec::new(1, 128, 16.0, 0.01).unwrap();
        let t = 0.2;
        let heat = GreenFunction::heat(1).unwrap();
        let w = heat.kernel_weights(t, &g).unwrap();
        for q in 0..g.n_points / 4 {
            let xi = q as f64 / g.extent;
            let dft: f64 = (0..g.len())
                .map(|i| w[i] * (2.0 * PI * xi * g.displacement(i)[0]).cos())
                .sum();
            let want = heat.radial_fourier(t, xi);
            assert!((dft - want).abs() <= 1e-3 * want, "mode {q}: {dft} vs {want}");
        }
    }
}
