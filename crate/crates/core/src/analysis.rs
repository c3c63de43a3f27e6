//! Monte Carlo estimators: kernel density estimates and a positivity check on
//! the nondegeneracy set, Hölder exponents from increment moments, the
//! linear Gaussian variance oracle and the short-window localization
//! statistic.

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::GreenFunction;
use crate::grid::GridSpec;
use crate::hyp::{j_integral, HInner};
use crate::noise::spectral_weights;
use crate::rng::StreamKey;
use crate::solver::{ensemble_map, scheme_steps, CoefficientSet, RunSpec, SolutionField, Stepper};
use crate::spectral::SpectralModel;
use crate::stats::{linear_fit, mean, pairwise_sum, quantile_sorted, std_error, variance};

pub const MIN_KDE_SAMPLES: usize = 500;

/// Evaluation points per axis for `k = 1, 2, 3`.
const KDE_POINTS: [usize; 3] = [256, 64, 24];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Auto,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub t: f64,
    pub x: Vec<f64>,
}

/// Product-Gaussian KDE tabulated on a regular grid (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub k: usize,
    pub axes: Vec<Vec<f64>>,
    pub bandwidth: Vec<f64>,
    pub values: Vec<f64>,
    pub m: usize,
    pub probe: Option<Probe>,
    #[serde(skip)]
    sorted: Vec<Vec<f64>>,
}

impl DensityEstimate {
    pub fn with_probe(mut self, probe: Probe) -> Self {
        self.probe = Some(probe);
        self
    }

    fn index(&self, flat: usize) -> Vec<usize> {
        let mut ix = vec![0; self.k];
        let mut r = flat;
        for a in (0..self.k).rev() {
            let n = self.axes[a].len();
            ix[a] = r % n;
            r /= n;
        }
        ix
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index(flat).iter().enumerate().map(|(a, &i)| self.axes[a][i]).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|ax| ax[1] - ax[0]).product()
    }

    /// Riemann sum over the grid.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.cell_volume()
    }

    /// Multilinear interpolation; zero outside the grid.
    pub fn interpolate(&self, y: &[f64]) -> f64 {
        let mut base = vec![0usize; self.k];
        let mut frac = vec![0.0; self.k];
        for a in 0..self.k {
            let ax = &self.axes[a];
            let h = ax[1] - ax[0];
            let s = (y[a] - ax[0]) / h;
            if !(0.0..=(ax.len() - 1) as f64).contains(&s) {
                return 0.0;
            }
            let i = (s.floor() as usize).min(ax.len() - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << self.k) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..self.k {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * self.axes[a].len() + base[a] + bit;
            }
            total += w * self.values[flat];
        }
        total
    }

    /// Componentwise central quantile box `[q_{(1−q)/2}, q_{(1+q)/2}]`.
    pub fn quantile_box(&self, q: f64) -> Result<Vec<[f64; 2]>> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::precondition("quantile box level must lie in (0, 1)"));
        }
        Ok(self
            .sorted
            .iter()
            .map(|s| [quantile_sorted(s, 0.5 * (1.0 - q)), quantile_sorted(s, 0.5 * (1.0 + q))])
            .collect())
    }
}

fn spread(sorted: &[f64]) -> f64 {
    let sd = variance(sorted).sqrt();
    let iqr = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 1.349;
    if iqr > 0.0 {
        sd.min(iqr)
    } else {
        sd
    }
}

/// Product-Gaussian kernel density estimate. `Bandwidth::Auto` is the
/// Silverman rule `h_i = s_i (4/((k+2)M))^{1/(k+4)}` with the robust spread
/// `s_i = min(sd, IQR/1.349)`.
pub fn kde(samples: &[Vec<f64>], bandwidth: &Bandwidth) -> Result<DensityEstimate> {
    let m = samples.len();
    let k = samples.first().map_or(0, Vec::len);
    if m < MIN_KDE_SAMPLES {
        return Err(Error::precondition(format!("kde needs at least {MIN_KDE_SAMPLES} samples, got {m}")));
    }
    if !(1..=3).contains(&k) || samples.iter().any(|s| s.len() != k) {
        return Err(Error::precondition("kde supports samples in R^k with k = 1, 2, 3"));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::precondition("samples must be finite"));
    }
    let sorted: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let mut c: Vec<f64> = samples.iter().map(|s| s[a]).collect();
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();
    if sorted.iter().any(|c| c[0] == c[m - 1]) {
        return Err(Error::DegenerateSample);
    }
    let h: Vec<f64> = match bandwidth {
        Bandwidth::Auto => {
            let factor = (4.0 / ((k as f64 + 2.0) * m as f64)).powf(1.0 / (k as f64 + 4.0));
            sorted.iter().map(|c| spread(c) * factor).collect()
        }
        Bandwidth::Explicit(h) => {
            if h.len() != k || h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::precondition("explicit bandwidth needs k positive entries"));
            }
            h.clone()
        }
    };
    let n = KDE_POINTS[k - 1];
    let axes: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let (lo, hi) = (sorted[a][0] - 4.0 * h[a], sorted[a][m - 1] + 4.0 * h[a]);
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        })
        .collect();
    // kernels[a][g * m + s] = φ_h(axis_a[g] − x_s)
    let kernels: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let (ha, norm) = (h[a], 1.0 / (h[a] * (2.0 * PI).sqrt()));
            axes[a]
                .iter()
                .flat_map(|&y| {
                    samples.iter().map(move |s| {
                        let z = (y - s[a]) / ha;
                        norm * (-0.5 * z * z).exp()
                    })
                })
                .collect()
        })
        .collect();
    let total = n.pow(k as u32);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut ix = [0usize; 3];
            let mut r = flat;
            for a in (0..k).rev() {
                ix[a] = r % n;
                r /= n;
            }
            let terms: Vec<f64> = (0..m)
                .map(|s| (0..k).map(|a| kernels[a][ix[a] * m + s]).product::<f64>())
                .collect();
            pairwise_sum(&terms) / m as f64
        })
        .collect();
    Ok(DensityEstimate {
        k,
        axes,
        bandwidth: h,
        values,
        m,
        probe: None,
        sorted,
    })
}

/// Operational nondegeneracy set `{y : |det σ(y)| ≥ margin}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaRegion {
    pub coeffs: CoefficientSet,
    pub margin: f64,
}

impl SigmaRegion {
    pub fn new(coeffs: CoefficientSet, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::precondition("Σ margin must be positive"));
        }
        Ok(Self { coeffs, margin })
    }

    /// Margin `fraction × max |det σ|` over the samples.
    pub fn from_samples(coeffs: CoefficientSet, samples: &[Vec<f64>], fraction: f64) -> Result<Self> {
        let max = samples
            .iter()
            .map(|y| coeffs.determinant(y).abs())
            .fold(0.0, f64::max);
        Self::new(coeffs, fraction * max)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.coeffs.determinant(y).abs() >= self.margin
    }
}

pub const DEFAULT_MARGIN_FRACTION: f64 = 0.05;
pub const DEFAULT_QUANTILE_BOX: f64 = 0.9;

/// `10⁻³ ×` the uniform density on the quantile box.
pub fn default_threshold(est: &DensityEstimate, quantile_box: f64) -> Result<f64> {
    let vol: f64 = est.quantile_box(quantile_box)?.iter().map(|[a, b]| b - a).product();
    Ok(1e-3 / vol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub outcome: Outcome,
    pub min_density: Option<f64>,
    pub argmin: Option<Vec<f64>>,
    pub threshold: f64,
    pub evaluated: usize,
    /// Grid points inside the quantile box dropped by the Σ margin.
    pub excluded_by_margin: usize,
    pub quantile_box: Vec<[f64; 2]>,
    pub note: String,
}

const POSITIVITY_NOTE: &str = "positivity on Σ is checked as density >= threshold on the estimate grid \
restricted to the central quantile box and to |det σ| >= margin; points the law barely charges are not certified";

pub fn positivity_check(
    est: &DensityEstimate,
    region: &SigmaRegion,
    quantile_box: f64,
    threshold: f64,
) -> Result<PositivityReport> {
    if !(threshold > 0.0) {
        return Err(Error::precondition("threshold must be positive"));
    }
    if region.coeffs.k != est.k {
        return Err(Error::precondition("Σ region and estimate dimensions differ"));
    }
    let qbox = est.quantile_box(quantile_box)?;
    let mut evaluated = 0;
    let mut excluded = 0;
    let mut best: Option<(f64, usize)> = None;
    for flat in 0..est.values.len() {
        let y = est.point(flat);
        if !y.iter().zip(&qbox).all(|(v, [a, b])| v >= a && v <= b) {
            continue;
        }
        if !region.contains(&y) {
            excluded += 1;
            continue;
        }
        evaluated += 1;
        if best.map_or(true, |(v, _)| est.values[flat] < v) {
            best = Some((est.values[flat], flat));
        }
    }
    let (outcome, note) = match best {
        None => (
            Outcome::Inconclusive,
            "inconclusive: no evaluation points in Σ ∩ quantile box".to_string(),
        ),
        Some((v, _)) if v >= threshold => (Outcome::Pass, POSITIVITY_NOTE.to_string()),
        Some(_) => (Outcome::Fail, POSITIVITY_NOTE.to_string()),
    };
    Ok(PositivityReport {
        outcome,
        min_density: best.map(|b| b.0),
        argmin: best.map(|b| est.point(b.1)),
        threshold,
        evaluated,
        excluded_by_margin: excluded,
        quantile_box: qbox,
        note,
    })
}

/// `c² · J(0, t)`: the marginal variance of each component of `u(t, x)` when
/// `σ ≡ c·I` and `b ≡ 0`.
pub fn gaussian_oracle_variance(g: &GreenFunction, m: &SpectralModel, c: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::precondition("oracle variance needs t > 0"));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(c * c * j_integral(g, m, 0.0, t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Time,
    Space,
}

/// Exact variance, under the discrete scheme with `σ ≡ c·I`, of the
/// increment `u(t0 + h, x) − u(t0, x)` (time) or `u(t0, x + h e₁) − u(t0, x)`
/// (space) of one component.
pub fn linear_increment_variance(
    g: &GreenFunction,
    m: &SpectralModel,
    grid: &GridSpec,
    c: f64,
    t0: f64,
    direction: Direction,
    lag: f64,
) -> Result<f64> {
    let n = scheme_steps(grid, t0)?;
    let weights = spectral_weights(m, grid);
    let dt = grid.dt;
    let terms: Vec<f64> = match direction {
        Direction::Time => {
            let h = scheme_steps(grid, lag)?;
            (0..grid.len())
                .into_par_iter()
                .map(|q| {
                    let rho = grid.frequency_norm(q);
                    let mult = |j: usize| g.radial_fourier(j as f64 * dt, rho);
                    let mut s: Vec<f64> = (1..=n).map(|j| (mult(j + h) - mult(j)).powi(2)).collect();
                    s.extend((1..=h).map(|j| mult(j).powi(2)));
                    weights[q] * pairwise_sum(&s)
                })
                .collect()
        }
        Direction::Space => (0..grid.len())
            .into_par_iter()
            .map(|q| {
                let rho = grid.frequency_norm(q);
                let s: Vec<f64> = (1..=n).map(|j| g.radial_fourier(j as f64 * dt, rho).powi(2)).collect();
                let phase = 2.0 * PI * grid.frequency(q)[0] * lag;
                weights[q] * pairwise_sum(&s) * 2.0 * (1.0 - phase.cos())
            })
            .collect(),
    };
    Ok(c * c * dt * pairwise_sum(&terms))
}

pub const DEFAULT_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoelderEstimate {
    pub direction: Option<Direction>,
    pub p: f64,
    pub lags: Vec<f64>,
    /// Ensemble mean of `‖Δu‖^p` per lag.
    pub moments: Vec<f64>,
    /// `(slope of log moment vs log lag) / p`.
    pub exponent: f64,
    /// 95% percentile-bootstrap interval.
    pub ci: [f64; 2],
    pub r_squared: f64,
    pub resamples: usize,
    pub samples: usize,
}

impl HoelderEstimate {
    pub fn covers(&self, target: f64) -> bool {
        self.ci[0] <= target && target <= self.ci[1]
    }
}

fn check_lags(lags: &[f64]) -> Result<()> {
    if lags.len() < 4 {
        return Err(Error::precondition("Hölder fit needs at least 4 lags"));
    }
    if lags.iter().any(|l| !(*l > 0.0)) || lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::precondition("lags must be positive and increasing"));
    }
    if (lags[lags.len() - 1] / lags[0]).log10() < 1.5 - 1e-9 {
        return Err(Error::precondition("lags must span at least 1.5 decades"));
    }
    Ok(())
}

fn log_moment_slope(lags_ln: &[f64], moments: &[f64]) -> (f64, f64) {
    let y: Vec<f64> = moments.iter().map(|v| v.ln()).collect();
    let (slope, _, r2) = linear_fit(lags_ln, &y);
    (slope, r2)
}

/// Fit from per-sample absolute increments `increments[s][l]` at `lags[l]`,
/// with a percentile bootstrap over samples.
pub fn fit_hoelder(lags: &[f64], increments: &[Vec<f64>], p: f64, resamples: usize, seed: u64) -> Result<HoelderEstimate> {
    check_lags(lags)?;
    if !(p > 0.0) {
        return Err(Error::precondition("moment order must be positive"));
    }
    let m = increments.len();
    if m < 2 || increments.iter().any(|v| v.len() != lags.len()) {
        return Err(Error::precondition("need at least 2 samples with one increment per lag"));
    }
    let powered: Vec<Vec<f64>> = increments
        .iter()
        .map(|v| v.iter().map(|x| x.abs().powf(p)).collect())
        .collect();
    let column_means = |idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let rows: Vec<usize> = idx.collect();
        (0..lags.len())
            .map(|l| pairwise_sum(&rows.iter().map(|&s| powered[s][l]).collect::<Vec<_>>()) / rows.len() as f64)
            .collect()
    };
    let moments = column_means(&mut (0..m));
    if moments.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateSample);
    }
    let ln_lags: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let (slope, r2) = log_moment_slope(&ln_lags, &moments);
    let mut boot: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = StreamKey::new(seed, b).stream(0, 0xb0);
            let pick = Uniform::new(0, m);
            let means = column_means(&mut (0..m).map(|_| pick.sample(&mut rng)));
            log_moment_slope(&ln_lags, &means).0 / p
        })
        .collect();
    boot.retain(|v| v.is_finite());
    boot.sort_by(f64::total_cmp);
    let ci = if boot.is_empty() {
        [f64::NAN, f64::NAN]
    } else {
        [quantile_sorted(&boot, 0.025), quantile_sorted(&boot, 0.975)]
    };
    Ok(HoelderEstimate {
        direction: None,
        p,
        lags: lags.to_vec(),
        moments,
        exponent: slope / p,
        ci,
        r_squared: r2,
        resamples,
        samples: m,
    })
}

fn lag_units(lags: &[f64], unit: f64, what: &str) -> Result<Vec<usize>> {
    lags.iter()
        .map(|&l| {
            let s = l / unit;
            if s < 1.0 - 1e-9 {
                return Err(Error::precondition(format!("{what} lag {l} is below the resolution {unit}")));
            }
            if (s - s.round()).abs() > 1e-6 {
                return Err(Error::precondition(format!("{what} lag {l} is not a multiple of {unit}")));
            }
            Ok(s.round() as usize)
        })
        .collect()
}

/// Increment moments of the simulated solution at `probe`. Time increments
/// are `u(t0 + h) − u(t0)` with `t0 = horizon − max lag`; space increments
/// are taken at the horizon along the first axis.
pub fn hoelder_estimate(
    spec: &RunSpec,
    probe: &[f64],
    direction: Direction,
    lags: &[f64],
    p: f64,
    m: usize,
    seed: u64,
) -> Result<HoelderEstimate> {
    check_lags(lags)?;
    let stepper = Stepper::new(spec)?;
    let grid = spec.grid;
    let (idx, _) = grid.snap(probe);
    let n_steps = spec.steps_to(spec.horizon)?;
    let increments = match direction {
        Direction::Time => {
            let hs = lag_units(lags, grid.dt, "time")?;
            let hmax = *hs.last().unwrap_or(&0);
            if hmax >= n_steps {
                return Err(Error::precondition("largest time lag must be shorter than the horizon"));
            }
            let base = n_steps - hmax;
            ensemble_map(&stepper, m, |st, s, ws| {
                let mut at_base = Vec::new();
                let mut inc = vec![0.0; hs.len()];
                st.run(StreamKey::new(seed, s), n_steps, ws, |f| {
                    let step = f.provenance.steps;
                    if step == base {
                        at_base = f.at(idx);
                    }
                    for (l, &h) in hs.iter().enumerate() {
                        if step == base + h {
                            inc[l] = distance(&f.at(idx), &at_base);
                        }
                    }
                    Ok(())
                })?;
                Ok(inc)
            })?
        }
        Direction::Space => {
            let cells = lag_units(lags, grid.dx(), "space")?;
            if cells.iter().any(|&c| c >= grid.n_points) {
                return Err(Error::precondition("space lag exceeds the grid"));
            }
            let mut ix = grid.unflatten(idx);
            let base = ix[0];
            let shifted: Vec<usize> = cells
                .iter()
                .map(|&c| {
                    ix[0] = (base + c) % grid.n_points;
                    grid.flatten(&ix[..grid.d])
                })
                .collect();
            ensemble_map(&stepper, m, |st, s, ws| {
                let mut inc = Vec::new();
                st.run(StreamKey::new(seed, s), n_steps, ws, |f| {
                    if f.provenance.steps == n_steps {
                        let u0 = f.at(idx);
                        inc = shifted.iter().map(|&j| distance(&f.at(j), &u0)).collect();
                    }
                    Ok(())
                })?;
                Ok(inc)
            })?
        }
    };
    let mut est = fit_hoelder(lags, &increments, p, DEFAULT_RESAMPLES, seed ^ 0x5eed)?;
    est.direction = Some(direction);
    Ok(est)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Exact draws of fractional Brownian motion with Hurst index `hurst` at the
/// given times, by Cholesky factorisation of its covariance.
pub fn sample_fbm(hurst: f64, times: &[f64], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(hurst > 0.0 && hurst < 1.0) || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::domain("fBm needs 0 < H < 1 and positive times"));
    }
    let n = times.len();
    let h2 = 2.0 * hurst;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (s, t) = (times[i], times[j]);
            let cov = 0.5 * (s.powf(h2) + t.powf(h2) - (s - t).abs().powf(h2));
            let acc = cov - (0..j).map(|r| l[i * n + r] * l[j * n + r]).sum::<f64>();
            l[i * n + j] = if i == j {
                if acc <= 0.0 {
                    return Err(Error::domain("fBm covariance is not positive definite at these times"));
                }
                acc.sqrt()
            } else {
                acc / l[j * n + j]
            };
        }
    }
    Ok((0..m as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng: ChaCha8Rng = StreamKey::new(seed, s).stream(0, 0xfb);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..n).map(|i| (0..=i).map(|r| l[i * n + r] * z[r]).sum()).collect()
        })
        .collect())
}

/// Precomputed band-limited `Γ(r_l, x* − ·)` over the window `r_l = l dt`,
/// `l = 0..=L`, for the localization statistic.
#[derive(Debug, Clone)]
pub struct Localizer {
    inner: HInner,
    grid: GridSpec,
    coeffs: CoefficientSet,
    probe: usize,
    kernels: Vec<Vec<f64>>,
    spectra: Vec<Vec<Complex64>>,
}

impl Localizer {
    pub fn new(
        g: &GreenFunction,
        m: &SpectralModel,
        grid: &GridSpec,
        coeffs: &CoefficientSet,
        probe: usize,
        max_steps: usize,
    ) -> Result<Self> {
        let inner = HInner::new(m, grid)?;
        let fft = crate::fft::FftNd::new(grid);
        let x = grid.position(probe);
        let scale = 1.0 / grid.extent.powi(grid.d as i32);
        let mut kernels = Vec::with_capacity(max_steps + 1);
        let mut spectra = Vec::with_capacity(max_steps + 1);
        for l in 0..=max_steps {
            let r = l as f64 * grid.dt;
            let mut buf: Vec<Complex64> = (0..grid.len())
                .map(|q| {
                    let xi = grid.frequency(q);
                    let phase = -2.0 * PI * (0..grid.d).map(|a| xi[a] * x[a]).sum::<f64>();
                    Complex64::from_polar(g.radial_fourier(r, grid.frequency_norm(q)) * scale, phase)
                })
                .collect();
            fft.inverse(&mut buf);
            let field: Vec<f64> = buf.iter().map(|z| z.re).collect();
            spectra.push(inner.transform_real(&field)?);
            kernels.push(field);
        }
        Ok(Self {
            inner,
            grid: *grid,
            coeffs: coeffs.clone(),
            probe,
            kernels,
            spectra,
        })
    }

    fn window_steps(&self, n: u32) -> Result<usize> {
        let w = 2f64.powi(-(n as i32)) / self.grid.dt;
        if w < 4.0 - 1e-9 || (w - w.round()).abs() > 1e-6 {
            return Err(Error::precondition(
                "increase step resolution or decrease n: the window 2^-n must be a multiple of dt and at least 4 dt",
            ));
        }
        let w = w.round() as usize;
        if w >= self.kernels.len() {
            return Err(Error::precondition("window exceeds the precomputed kernels"));
        }
        Ok(w)
    }

    fn trapezoid(w: usize, l: usize) -> f64 {
        if l == 0 || l == w {
            0.5
        } else {
            1.0
        }
    }

    /// `c_n = Σ_l w_l dt ⟨Γ(r_l), Γ(r_l)⟩_ℋ`.
    pub fn c_n(&self, n: u32) -> Result<f64> {
        let w = self.window_steps(n)?;
        let terms: Vec<f64> = (0..=w)
            .map(|l| Self::trapezoid(w, l) * self.inner.spectral(&self.spectra[l], &self.spectra[l]).re)
            .collect();
        Ok(pairwise_sum(&terms) * self.grid.dt)
    }

    /// `𝒲⁰ₙ` (row-major `k × k`) from fields ordered in time, the last one at `t`.
    pub fn statistic(&self, history: &[&SolutionField], n: u32) -> Result<Vec<f64>> {
        let w = self.window_steps(n)?;
        if history.len() < w + 1 {
            return Err(Error::precondition("window exceeds history"));
        }
        let k = self.coeffs.k;
        let npts = self.grid.len();
        let mut sig = vec![vec![0.0; npts]; k * k];
        let mut y = vec![0.0; k];
        let mut s = vec![0.0; k * k];
        let mut num = vec![vec![0.0; w + 1]; k * k];
        for l in 0..=w {
            let f = history[history.len() - 1 - l];
            for x in 0..npts {
                for i in 0..k {
                    y[i] = f.fields[i][x];
                }
                self.coeffs.sigma(&y, &mut s);
                for e in 0..k * k {
                    sig[e][x] = s[e] * self.kernels[l][x];
                }
            }
            for e in 0..k * k {
                let a = self.inner.transform_real(&sig[e])?;
                num[e][l] = Self::trapezoid(w, l) * self.inner.spectral(&a, &self.spectra[l]).re;
            }
        }
        let c = self.c_n(n)?;
        Ok(num.iter().map(|v| pairwise_sum(v) * self.grid.dt / c).collect())
    }

    /// `‖𝒲⁰ₙ − σ(u(t, x*))‖_F`.
    pub fn error(&self, history: &[&SolutionField], n: u32) -> Result<f64> {
        let w = self.statistic(history, n)?;
        let last = history[history.len() - 1];
        let mut s = vec![0.0; self.coeffs.k * self.coeffs.k];
        self.coeffs.sigma(&last.at(self.probe), &mut s);
        Ok(w.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }
}

/// `𝒲⁰ₙ` for one stored trajectory (fields ordered in time, the last at `t`).
pub fn localization_statistic(
    history: &[SolutionField],
    probe: &[f64],
    n: u32,
    g: &GreenFunction,
    m: &SpectralModel,
    grid: &GridSpec,
    coeffs: &CoefficientSet,
) -> Result<Vec<f64>> {
    let t = history.last().map_or(0.0, |f| f.t);
    if 2f64.powi(-(n as i32)) > t + 1e-12 {
        return Err(Error::precondition("window 2^-n exceeds the history"));
    }
    let (idx, _) = grid.snap(probe);
    let w = (2f64.powi(-(n as i32)) / grid.dt).round() as usize;
    let loc = Localizer::new(g, m, grid, coeffs, idx, w)?;
    let refs: Vec<&SolutionField> = history.iter().collect();
    loc.statistic(&refs, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationPoint {
    pub n: u32,
    pub c_n: f64,
    /// Ensemble mean of `𝒲⁰ₙ`, row-major.
    pub mean_statistic: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationCurve {
    pub t: f64,
    pub probe: Vec<f64>,
    pub points: Vec<LocalizationPoint>,
    /// Minus the slope of `log₂(mean error)` against `n`.
    pub decay_slope: f64,
}

impl LocalizationCurve {
    pub fn strictly_decreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].mean_error < w[0].mean_error)
    }
}

/// Ensemble-averaged localization error at the horizon for each `n`.
pub fn localization_convergence(spec: &RunSpec, probe: &[f64], n_range: &[u32], m: usize, seed: u64) -> Result<LocalizationCurve> {
    if n_range.is_empty() || n_range.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::precondition("n range must be nonempty and increasing"));
    }
    let n_steps = spec.steps_to(spec.horizon)?;
    let w_max = (2f64.powi(-(n_range[0] as i32)) / spec.grid.dt).round() as usize;
    if w_max > n_steps {
        return Err(Error::precondition("window 2^-n exceeds the history"));
    }
    let stepper = Stepper::new(spec)?;
    let (idx, snapped) = spec.grid.snap(probe);
    let loc = Localizer::new(&spec.green, &spec.model, &spec.grid, &spec.coeffs, idx, w_max)?;
    for &n in n_range {
        loc.window_steps(n)?;
    }
    let per: Vec<Vec<(Vec<f64>, f64)>> = ensemble_map(&stepper, m, |st, s, ws| {
        let mut hist = std::collections::VecDeque::with_capacity(w_max + 1);
        st.run(StreamKey::new(seed, s), n_steps, ws, |f| {
            if f.provenance.steps + w_max >= n_steps {
                hist.push_back(f.clone());
            }
            Ok(())
        })?;
        let refs: Vec<&SolutionField> = hist.iter().collect();
        n_range
            .iter()
            .map(|&n| {
                let w = loc.statistic(&refs, n)?;
                let e = loc.error(&refs, n)?;
                Ok((w, e))
            })
            .collect()
    })?;
    let kk = spec.coeffs.k * spec.coeffs.k;
    let mut points = Vec::with_capacity(n_range.len());
    for (j, &n) in n_range.iter().enumerate() {
        let errs: Vec<f64> = per.iter().map(|v| v[j].1).collect();
        let mean_statistic = (0..kk)
            .map(|e| mean(&per.iter().map(|v| v[j].0[e]).collect::<Vec<_>>()))
            .collect();
        points.push(LocalizationPoint {
            n,
            c_n: loc.c_n(n)?,
            mean_statistic,
            mean_error: mean(&errs),
            std_error: if m > 1 { std_error(&errs) } else { 0.0 },
        });
    }
    let decay_slope = if points.len() >= 2 && points.iter().all(|p| p.mean_error > 0.0) {
        let x: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
        let y: Vec<f64> = points.iter().map(|p| p.mean_error.log2()).collect();
        -linear_fit(&x, &y).0
    } else {
        f64::NAN
    };
    Ok(LocalizationCurve {
        t: n_steps as f64 * spec.grid.dt,
        probe: snapped[..spec.grid.d].to_vec(),
        points,
        decay_slope,
    })
}
