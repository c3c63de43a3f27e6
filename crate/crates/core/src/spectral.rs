//! Covariance kernels `f` and their spectral measures `μ`, with `f = ℱμ`
//! under the convention `ℱg(ξ) = ∫ g(x) e^{−2πi x·ξ} dx`.
//!
//! Two families ship:
//!
//! * Riesz: `f(x) = ‖x‖^{−β}`, `μ(dξ) = ‖ξ‖^{β−d} dξ`, `0 < β < min(2, d)`.
//!   The Fourier pair holds up to the constant [`SpectralModel::fourier_constant`];
//!   the measure is used exactly as written and the constant is reported,
//!   not absorbed.
//! * Gaussian: `f(x) = exp(−‖x‖²/(2ℓ²))` with density
//!   `(2πℓ²)^{d/2} exp(−2π²ℓ²‖ξ‖²)`.
//!
//! New radial families implement [`SpectralFamily`] and get a [`Kernel`]
//! variant; everything downstream talks to a model only through that trait.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{kronrod15, gauss_kronrod, gauss_kronrod_breakpoints, tanh_sinh, Tolerance};
use crate::special::unit_sphere_area;

/// Interface a radially symmetric covariance family must provide.
pub trait SpectralFamily {
    /// `dμ/dξ` at `‖ξ‖ = rho` in dimension `d` (may be infinite at 0).
    fn radial_density(&self, rho: f64, d: usize) -> f64;

    /// `f(x)` at `‖x‖ = r`.
    fn radial_kernel(&self, r: f64, d: usize) -> f64;

    /// `p` with `dμ/dξ ~ ρ^p` as `ρ → ∞`, or `None` if the density decays
    /// faster than every power.
    fn tail_exponent(&self, d: usize) -> Option<f64>;

    /// `q` with `dμ/dξ ~ ρ^q` as `ρ → 0` (0 for a bounded density).
    fn origin_exponent(&self, d: usize) -> f64;

    /// `μ([−a, a]^d)`.
    fn origin_cell_mass(&self, a: f64, d: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Riesz { beta: f64 },
    GaussianKernel { ell: f64 },
}

impl SpectralFamily for Kernel {
    fn radial_density(&self, rho: f64, d: usize) -> f64 {
        match *self {
            Kernel::Riesz { beta } => rho.powf(beta - d as f64),
            Kernel::GaussianKernel { ell } => {
                (2.0 * PI * ell * ell).powf(d as f64 / 2.0) * (-2.0 * PI * PI * ell * ell * rho * rho).exp()
            }
        }
    }

    fn radial_kernel(&self, r: f64, _d: usize) -> f64 {
        match *self {
            Kernel::Riesz { beta } => r.powf(-beta),
            Kernel::GaussianKernel { ell } => (-r * r / (2.0 * ell * ell)).exp(),
        }
    }

    fn tail_exponent(&self, d: usize) -> Option<f64> {
        match *self {
            Kernel::Riesz { beta } => Some(beta - d as f64),
            Kernel::GaussianKernel { .. } => None,
        }
    }

    fn origin_exponent(&self, d: usize) -> f64 {
        match *self {
            Kernel::Riesz { beta } => beta - d as f64,
            Kernel::GaussianKernel { .. } => 0.0,
        }
    }

    fn origin_cell_mass(&self, a: f64, d: usize) -> f64 {
        match *self {
            Kernel::Riesz { beta } => riesz_cube_mass(beta, d, a),
            Kernel::GaussianKernel { .. } => {
                // product of one-dimensional Gaussian masses
                let one = gauss_kronrod(
                    |x| self.radial_density(x, 1),
                    -a,
                    a,
                    Tolerance::new(1e-15, 1e-13),
                    200,
                )
                .value;
                one.powi(d as i32)
            }
        }
    }
}

/// `∫_{[−a,a]^d} ‖ξ‖^{β−d} dξ`. Splitting the cube into `2d` pyramids with
/// apex at the origin and scaling each to its face gives
/// `2d · a^β/β · ∫_{[−1,1]^{d−1}} (1 + ‖v‖²)^{(β−d)/2} dv`.
fn riesz_cube_mass(beta: f64, d: usize, a: f64) -> f64 {
    let p = (beta - d as f64) / 2.0;
    let tol = Tolerance::new(1e-15, 1e-13);
    let face = match d {
        1 => 1.0,
        2 => 2.0 * gauss_kronrod(|v| (1.0 + v * v).powf(p), 0.0, 1.0, tol, 200).value,
        3 => {
            let inner = |u: f64| gauss_kronrod(|v| (1.0 + u * u + v * v).powf(p), 0.0, 1.0, tol, 200).value;
            4.0 * gauss_kronrod(inner, 0.0, 1.0, tol, 200).value
        }
        _ => unreachable!("dimension checked at construction"),
    };
    2.0 * d as f64 * a.powf(beta) / beta * face
}

/// A covariance family in a fixed spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub kind: Kernel,
    pub d: usize,
}

/// Quadrature value over a ball plus the analytic finiteness verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrability {
    /// Integral over `‖ξ‖ ≤ cutoff`.
    pub value: f64,
    pub error: f64,
    /// Verdict for the integral over all of `R^d`.
    pub finite: bool,
    /// Power of `‖ξ‖` in the integrand at infinity, if polynomial; the
    /// integral is finite iff it is below `−d`.
    pub radial_exponent: Option<f64>,
}

impl SpectralModel {
    pub fn new(kind: Kernel, d: usize) -> Result<Self> {
        let m = Self { kind, d };
        m.validate()?;
        Ok(m)
    }

    pub fn riesz(beta: f64, d: usize) -> Result<Self> {
        Self::new(Kernel::Riesz { beta }, d)
    }

    pub fn gaussian(ell: f64, d: usize) -> Result<Self> {
        Self::new(Kernel::GaussianKernel { ell }, d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::config(format!("dimension {} outside 1..=3", self.d)));
        }
        match self.kind {
            Kernel::Riesz { beta } => {
                let upper = (self.d as f64).min(2.0);
                if !(beta > 0.0 && beta < upper) {
                    return Err(Error::config(format!(
                        "riesz beta = {beta} must lie in (0, {upper}) for d = {}",
                        self.d
                    )));
                }
            }
            Kernel::GaussianKernel { ell } => {
                if !(ell > 0.0 && ell.is_finite()) {
                    return Err(Error::config(format!("gaussian_kernel ell = {ell} must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn is_riesz(&self) -> bool {
        matches!(self.kind, Kernel::Riesz { .. })
    }

    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            Kernel::Riesz { beta } => Some(beta),
            Kernel::GaussianKernel { .. } => None,
        }
    }

    /// `dμ/dξ` at `ξ`.
    pub fn spectral_density(&self, xi: &[f64]) -> Result<f64> {
        let rho = norm(xi);
        if rho == 0.0 && self.is_riesz() {
            return Err(Error::domain("singular spectral density at origin"));
        }
        Ok(self.radial_density(rho))
    }

    /// `f(x)`.
    pub fn covariance_kernel(&self, x: &[f64]) -> Result<f64> {
        let r = norm(x);
        if r == 0.0 && self.is_riesz() {
            return Err(Error::domain("kernel singular at origin"));
        }
        Ok(self.radial_kernel(r))
    }

    pub fn radial_density(&self, rho: f64) -> f64 {
        self.kind.radial_density(rho, self.d)
    }

    pub fn radial_kernel(&self, r: f64) -> f64 {
        self.kind.radial_kernel(r, self.d)
    }

    /// Radial density of `μ`: `μ(‖ξ‖ ∈ dρ) = radial_measure(ρ) dρ`.
    pub fn radial_measure(&self, rho: f64) -> f64 {
        let area = unit_sphere_area(self.d);
        match self.kind {
            // one power, so tiny ρ never forms 0·∞
            Kernel::Riesz { beta } => area * rho.powf(beta - 1.0),
            _ => area * rho.powi(self.d as i32 - 1) * self.radial_density(rho),
        }
    }

    pub fn origin_cell_mass(&self, a: f64) -> f64 {
        self.kind.origin_cell_mass(a, self.d)
    }

    /// `μ` of the cube `centre + [−half, half]^d` by the tensor 15-point
    /// Kronrod rule; the cube must not contain the origin.
    pub fn cell_mass(&self, centre: &[f64], half: f64) -> f64 {
        let rule = kronrod15();
        let d = self.d;
        let mut total = 0.0;
        let mut xi = [0.0; 3];
        for flat in 0..15usize.pow(d as u32) {
            let mut w = 1.0;
            let mut r = flat;
            for a in 0..d {
                let (x, wa) = rule[r % 15];
                r /= 15;
                xi[a] = centre[a] + half * x;
                w *= wa * half;
            }
            total += w * self.radial_density(norm(&xi[..d]));
        }
        total
    }

    /// `c` with `ℱ(dμ/dξ) = c·f`: `π^{d/2−β} Γ(β/2)/Γ((d−β)/2)` for Riesz,
    /// 1 for the Gaussian kernel.
    pub fn fourier_constant(&self) -> f64 {
        match self.kind {
            Kernel::Riesz { beta } => {
                let d = self.d as f64;
                PI.powf(d / 2.0 - beta) * gamma(beta / 2.0) / gamma((d - beta) / 2.0)
            }
            Kernel::GaussianKernel { .. } => 1.0,
        }
    }

    /// Mean of `f(a·e − b·ω)` over unit vectors `ω`, for a fixed unit `e`.
    pub fn kernel_shell_mean(&self, a: f64, b: f64) -> f64 {
        let d = self.d;
        match (self.kind, d) {
            (Kernel::Riesz { beta }, 1) => 0.5 * ((a - b).abs().powf(-beta) + (a + b).powf(-beta)),
            (Kernel::Riesz { beta }, 3) => {
                let e = 2.0 - beta;
                ((a + b).powf(e) - (a - b).abs().powf(e)) / (2.0 * a * b * e)
            }
            (Kernel::GaussianKernel { ell }, 1) => {
                let s = 2.0 * ell * ell;
                0.5 * ((-(a - b).powi(2) / s).exp() + (-(a + b).powi(2) / s).exp())
            }
            (Kernel::GaussianKernel { ell }, 3) => {
                let x = a * b / (ell * ell);
                let shell = if x < 1e-8 { 1.0 - x } else { -(-2.0 * x).exp_m1() / (2.0 * x) };
                (-(a - b).powi(2) / (2.0 * ell * ell)).exp() * shell
            }
            _ => {
                // d = 2: (1/π)∫_0^π f(√((a−b)² + 4ab sin²(θ/2))) dθ, singular at θ = 0 when a = b
                let q = tanh_sinh(
                    |th: f64| {
                        let s = (0.5 * th).sin();
                        self.radial_kernel(((a - b).powi(2) + 4.0 * a * b * s * s).sqrt())
                    },
                    0.0,
                    PI,
                    Tolerance::new(1e-13, 1e-11),
                );
                q.value / PI
            }
        }
    }

    /// `∫ μ(dξ)/(1+‖ξ‖²)^m` over the ball of radius `cutoff`, with the
    /// verdict for the whole space decided from the radial decay exponent.
    pub fn dalang_integral(&self, exponent_m: u32, cutoff: f64) -> Result<Integrability> {
        if exponent_m < 1 {
            return Err(Error::precondition("exponent_m must be at least 1"));
        }
        self.weighted_integral(exponent_m as f64, cutoff)
    }

    /// As [`dalang_integral`](Self::dalang_integral) with a real exponent `ε ∈ (0,1)`.
    pub fn epsilon_integrability(&self, eps: f64, cutoff: f64) -> Result<Integrability> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::precondition(format!("epsilon = {eps} outside (0, 1)")));
        }
        self.weighted_integral(eps, cutoff)
    }

    /// Smallest `m ∈ 1..=8` for which the Dalang integral is finite.
    pub fn smallest_dalang_exponent(&self) -> Option<u32> {
        (1..=8).find(|&m| self.tail_verdict(m as f64).0)
    }

    fn tail_verdict(&self, m: f64) -> (bool, Option<f64>) {
        match self.kind.tail_exponent(self.d) {
            // ‖ξ‖^{p − 2m} is integrable at infinity iff p − 2m < −d
            Some(p) => {
                let e = p - 2.0 * m;
                (e < -(self.d as f64), Some(e))
            }
            None => (true, None),
        }
    }

    fn weighted_integral(&self, m: f64, cutoff: f64) -> Result<Integrability> {
        if !(cutoff > 0.0) {
            return Err(Error::precondition("cutoff must be positive"));
        }
        let d = self.d as f64;
        let area = unit_sphere_area(self.d);
        let weight = |rho: f64| (-m * (rho * rho).ln_1p()).exp();
        let tol = Tolerance::default();
        let r0 = cutoff.min(1.0);
        let (origin, origin_err) = match self.kind {
            Kernel::Riesz { beta } => {
                // ρ^{β−1} analytically on [0, r0], the regular remainder
                // ρ^{β−1}((1+ρ²)^{−m} − 1) numerically
                let q = gauss_kronrod(
                    |rho| rho.powf(beta - 1.0) * (-m * (rho * rho).ln_1p()).exp_m1(),
                    0.0,
                    r0,
                    tol,
                    500,
                );
                (r0.powf(beta) / beta + q.value, q.error)
            }
            Kernel::GaussianKernel { .. } => {
                let q = gauss_kronrod(|rho| rho.powf(d - 1.0) * self.radial_density(rho) * weight(rho), 0.0, r0, tol, 500);
                (q.value, q.error)
            }
        };
        let mut pts = vec![r0];
        while *pts.last().unwrap() < cutoff {
            let r = *pts.last().unwrap();
            pts.push((2.0 * r).min(cutoff));
        }
        let outer = gauss_kronrod_breakpoints(
            |rho| rho.powf(d - 1.0) * self.radial_density(rho) * weight(rho),
            &pts,
            tol,
            10_000,
        );
        let (finite, radial_exponent) = self.tail_verdict(m);
        Ok(Integrability {
            value: area * (origin + outer.value),
            error: area * (origin_err + outer.error),
            finite,
            radial_exponent,
        })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
