//! Spectral synthesis of Gaussian noise increments on a periodic grid.
//!
//! Mode `q` of the grid has frequency `ξ_q = q/L` and weight
//! `λ_q = (dμ/dξ)(ξ_q)/L^d`. For the Riesz kernel the origin cell
//! `[−1/(2L), 1/(2L)]^d` is integrated exactly and its neighbours by
//! quadrature, since the density is singular there. An increment over one time step is
//!
//! ```text
//! X(x) = Σ_q √(λ_q dt) Z_q e^{2πi ξ_q·x},   Z_{−q} = conj(Z_q),  E|Z_q|² = 1,
//! ```
//!
//! so `E[X(x)X(y)] = dt Σ_q λ_q cos(2π ξ_q·(x−y))`, the band-limited covariance.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::grid::GridSpec;
use crate::rng::StreamKey;
use crate::spectral::SpectralModel;
use crate::stats::{mean, pairwise_sum, std_error};

/// Cells within this many indices of the origin are integrated for Riesz
/// kernels; farther out the density is sampled at the cell centre.
const RIESZ_AVERAGED_CELLS: i64 = 2;

/// Per-mode weights `λ_q`, in FFT index order.
pub fn spectral_weights(m: &SpectralModel, grid: &GridSpec) -> Vec<f64> {
    let cell = grid.dxi().powi(grid.d as i32);
    let half = 0.5 * grid.dxi();
    (0..grid.len())
        .map(|q| {
            let near = (0..grid.d).all(|a| grid.signed(grid.unflatten(q)[a]).abs() <= RIESZ_AVERAGED_CELLS);
            if q == 0 {
                if m.is_riesz() {
                    m.origin_cell_mass(half)
                } else {
                    m.radial_density(0.0) * cell
                }
            } else if m.is_riesz() && near {
                // |ξ| per axis, so mirrored cells get bit-identical weights
                let centre: Vec<f64> = grid.frequency(q)[..grid.d].iter().map(|x| x.abs()).collect();
                m.cell_mass(&centre, half)
            } else {
                m.radial_density(grid.frequency_norm(q)) * cell
            }
        })
        .collect()
}

/// `Σ_q λ_q cos(2π ξ_q·ℓ)` for a lag `ℓ` given in grid cells.
pub fn band_limited_covariance(weights: &[f64], grid: &GridSpec, lag: &[i64]) -> f64 {
    let terms: Vec<f64> = (0..grid.len())
        .map(|q| {
            let xi = grid.frequency(q);
            let phase: f64 = (0..grid.d).map(|a| xi[a] * lag.get(a).copied().unwrap_or(0) as f64 * grid.dx()).sum();
            weights[q] * (2.0 * std::f64::consts::PI * phase).cos()
        })
        .collect();
    pairwise_sum(&terms)
}

/// One time step of `k` independent noise components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseIncrement {
    pub fields: Vec<Vec<f64>>,
    pub seed: u64,
    pub sample: u64,
    pub step: u64,
}

/// Precomputed amplitudes `√(λ_q dt)` and FFT plan for one grid.
#[derive(Debug, Clone)]
pub struct NoiseGenerator {
    grid: GridSpec,
    amplitude: Vec<f64>,
    /// `(q, mirror(q))` for every `q ≤ mirror(q)`, in index order.
    pairs: Vec<(usize, usize)>,
    fft: FftNd,
}

impl NoiseGenerator {
    pub fn new(weights: &[f64], grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        if weights.len() != grid.len() {
            return Err(Error::precondition("weights do not match the grid"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::precondition("spectral weights must be finite and nonnegative"));
        }
        let amplitude = weights.iter().map(|w| (w * grid.dt).sqrt()).collect();
        let pairs = (0..grid.len())
            .filter_map(|q| {
                let m = grid.mirror(q);
                (q <= m).then_some((q, m))
            })
            .collect();
        Ok(Self {
            grid: *grid,
            amplitude,
            pairs,
            fft: FftNd::new(grid),
        })
    }

    pub fn from_model(m: &SpectralModel, grid: &GridSpec) -> Result<Self> {
        if m.d != grid.d {
            return Err(Error::config("grid and spectral model dimensions differ"));
        }
        Self::new(&spectral_weights(m, grid), grid)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Write component `component` of step `step` into `out`, using `buf` as
    /// spectral scratch space. Returns the largest imaginary residue.
    pub fn fill(&self, key: StreamKey, step: u64, component: u8, out: &mut [f64], buf: &mut Vec<Complex64>) -> f64 {
        let n = self.grid.len();
        buf.clear();
        buf.resize(n, Complex64::new(0.0, 0.0));
        let mut rng = key.stream(step, component);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for &(q, m) in &self.pairs {
            let a = self.amplitude[q];
            if q == m {
                let z: f64 = StandardNormal.sample(&mut rng);
                buf[q] = Complex64::new(a * z, 0.0);
            } else {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let z = Complex64::new(a * re * s, a * im * s);
                buf[q] = z;
                buf[m] = z.conj();
            }
        }
        self.fft.inverse(buf);
        let mut residue: f64 = 0.0;
        for (o, v) in out.iter_mut().zip(buf.iter()) {
            *o = v.re;
            residue = residue.max(v.im.abs());
        }
        residue
    }

    /// Sample all `k` components of one step.
    pub fn sample_increment(&self, k: usize, key: StreamKey, step: u64) -> NoiseIncrement {
        let mut buf = Vec::new();
        let fields = (0..k)
            .map(|c| {
                let mut f = vec![0.0; self.grid.len()];
                self.fill(key, step, c as u8, &mut f, &mut buf);
                f
            })
            .collect();
        NoiseIncrement {
            fields,
            seed: key.seed,
            sample: key.sample,
            step,
        }
    }
}

/// Lag estimate with its standard error over samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub lag: Vec<i64>,
    pub estimate: f64,
    pub std_error: f64,
}

/// Spatial average of `X(x)X(x+ℓ)/dt` for one field.
fn lag_product(field: &[f64], grid: &GridSpec, lag: &[i64]) -> f64 {
    let n = grid.n_points as i64;
    let prods: Vec<f64> = (0..grid.len())
        .map(|i| {
            let ix = grid.unflatten(i);
            let mut jx = [0usize; 3];
            for a in 0..grid.d {
                jx[a] = (ix[a] as i64 + lag.get(a).copied().unwrap_or(0)).rem_euclid(n) as usize;
            }
            field[i] * field[grid.flatten(&jx[..grid.d])]
        })
        .collect();
    pairwise_sum(&prods) / grid.len() as f64 / grid.dt
}

fn summarize(per_sample: Vec<Vec<f64>>, lags: &[Vec<i64>]) -> Vec<CovarianceEstimate> {
    lags.iter()
        .enumerate()
        .map(|(j, lag)| {
            let xs: Vec<f64> = per_sample.iter().map(|v| v[j]).collect();
            CovarianceEstimate {
                lag: lag.clone(),
                estimate: mean(&xs),
                std_error: std_error(&xs),
            }
        })
        .collect()
}

/// Covariance at each lag, averaged over grid points and then over samples;
/// every component of every increment counts as one sample.
pub fn empirical_covariance(
    samples: &[NoiseIncrement],
    grid: &GridSpec,
    lags: &[Vec<i64>],
) -> Result<Vec<CovarianceEstimate>> {
    let fields: Vec<&Vec<f64>> = samples.iter().flat_map(|s| s.fields.iter()).collect();
    if fields.len() < 100 {
        return Err(Error::precondition("empirical covariance needs at least 100 samples"));
    }
    let per: Vec<Vec<f64>> = fields
        .par_iter()
        .map(|f| lags.iter().map(|l| lag_product(f, grid, l)).collect())
        .collect();
    Ok(summarize(per, lags))
}

/// [`empirical_covariance`] over `m` fresh single-component increments
/// (sample index `0..m`, step 0), without storing them.
pub fn generator_covariance(
    gen: &NoiseGenerator,
    seed: u64,
    m: usize,
    lags: &[Vec<i64>],
) -> Result<Vec<CovarianceEstimate>> {
    if m < 100 {
        return Err(Error::precondition("empirical covariance needs at least 100 samples"));
    }
    let grid = *gen.grid();
    let per: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; grid.len()], Vec::new()),
            |(field, buf), s| {
                gen.fill(StreamKey::new(seed, s), 0, 0, field, buf);
                lags.iter().map(|l| lag_product(field, &grid, l)).collect()
            },
        )
        .collect();
    Ok(summarize(per, lags))
}
