//! Time stepping of the mild equation on the periodic grid, started from
//! zero initial data.
//!
//! Heat uses exponential Euler, `u ← S_dt[u + σ(u)X + b(u)dt]`. Wave
//! rotates the Fourier pair `(û, v̂)` exactly over one step after the
//! forcing `σ(u)X + b(u)dt` has been added to the velocity, so that
//! `û` picks up `sin(2π dt ρ)/(2πρ)` times the forcing. In both schemes the
//! contribution of step `k` to `u(N dt)` carries the exact multiplier
//! `ℱΓ((N − k) dt)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::green::{GreenFunction, Operator};
use crate::grid::GridSpec;
use crate::noise::{spectral_weights, NoiseGenerator, NoiseIncrement};
use crate::rng::StreamKey;
use crate::spectral::SpectralModel;
use crate::stats::pairwise_sum;

/// Registry of coefficient pairs `(σ, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Coefficients {
    /// `σ ≡ c·I`, `b ≡ 0`.
    LinearConst { c: f64 },
    /// `σ ≡ 0`, `b ≡ b0`.
    DriftOnly { b0: Vec<f64> },
    /// `σ(u) = I + a·diag(sin u_i)`, `b ≡ 0`.
    SinDiag { a: f64 },
    /// `σ(u) = I + a·diag(tanh u_i)`, `b ≡ 0`.
    TanhDiag { a: f64 },
    /// `σ_ij(u) = δ_ij + (a/k)·tanh(u_i + u_j)`, `b ≡ 0`.
    SigmoidMix { a: f64 },
    /// `σ(u) = diag(u_1, 1, …, 1)`. Unbounded and singular on `u_1 = 0`;
    /// kept for exercising the nondegeneracy predicate, not (H2).
    DiagLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub k: usize,
    pub coefficients: Coefficients,
}

impl CoefficientSet {
    pub fn new(k: usize, coefficients: Coefficients) -> Result<Self> {
        let c = Self { k, coefficients };
        c.validate()?;
        Ok(c)
    }

    pub fn linear_const(k: usize, c: f64) -> Result<Self> {
        Self::new(k, Coefficients::LinearConst { c })
    }

    pub fn drift_only(b0: Vec<f64>) -> Result<Self> {
        Self::new(b0.len(), Coefficients::DriftOnly { b0 })
    }

    pub fn sin_diag(k: usize, a: f64) -> Result<Self> {
        Self::new(k, Coefficients::SinDiag { a })
    }

    pub fn tanh_diag(k: usize, a: f64) -> Result<Self> {
        Self::new(k, Coefficients::TanhDiag { a })
    }

    pub fn sigmoid_mix(k: usize, a: f64) -> Result<Self> {
        Self::new(k, Coefficients::SigmoidMix { a })
    }

    pub fn diag_linear(k: usize) -> Result<Self> {
        Self::new(k, Coefficients::DiagLinear)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > 255 {
            return Err(Error::config("system size k must lie in 1..=255"));
        }
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be finite")))
            }
        };
        match &self.coefficients {
            Coefficients::LinearConst { c } => finite(*c, "c"),
            Coefficients::DriftOnly { b0 } => {
                if b0.len() != self.k {
                    return Err(Error::config("drift vector length differs from k"));
                }
                b0.iter().try_for_each(|b| finite(*b, "b0"))
            }
            Coefficients::SinDiag { a } | Coefficients::TanhDiag { a } | Coefficients::SigmoidMix { a } => finite(*a, "a"),
            Coefficients::DiagLinear => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.coefficients {
            Coefficients::LinearConst { .. } => "linear_const",
            Coefficients::DriftOnly { .. } => "drift_only",
            Coefficients::SinDiag { .. } => "sin_diag",
            Coefficients::TanhDiag { .. } => "tanh_diag",
            Coefficients::SigmoidMix { .. } => "sigmoid_mix",
            Coefficients::DiagLinear => "diag_linear",
        }
    }

    pub fn bounded(&self) -> bool {
        !matches!(self.coefficients, Coefficients::DiagLinear)
    }

    /// Global Lipschitz constant of `(σ, b)` in the Frobenius norm.
    pub fn lipschitz_constant(&self) -> f64 {
        match self.coefficients {
            Coefficients::LinearConst { .. } | Coefficients::DriftOnly { .. } => 0.0,
            Coefficients::SinDiag { a } | Coefficients::TanhDiag { a } => a.abs(),
            Coefficients::SigmoidMix { a } => a.abs() * 2f64.sqrt(),
            Coefficients::DiagLinear => 1.0,
        }
    }

    /// Smooth, bounded, with bounded derivatives of every order.
    pub fn satisfies_h2(&self) -> bool {
        self.bounded()
    }

    /// Whether `σ` is independent of `u`.
    pub fn constant_sigma(&self) -> bool {
        matches!(
            self.coefficients,
            Coefficients::LinearConst { .. } | Coefficients::DriftOnly { .. }
        )
    }

    pub fn has_drift(&self) -> bool {
        matches!(self.coefficients, Coefficients::DriftOnly { .. })
    }

    /// `σ(u)` written row-major into `out` (`k × k`).
    pub fn sigma(&self, u: &[f64], out: &mut [f64]) {
        let k = self.k;
        out[..k * k].iter_mut().for_each(|v| *v = 0.0);
        match self.coefficients {
            Coefficients::LinearConst { c } => (0..k).for_each(|i| out[i * k + i] = c),
            Coefficients::DriftOnly { .. } => {}
            Coefficients::SinDiag { a } => (0..k).for_each(|i| out[i * k + i] = 1.0 + a * u[i].sin()),
            Coefficients::TanhDiag { a } => (0..k).for_each(|i| out[i * k + i] = 1.0 + a * u[i].tanh()),
            Coefficients::SigmoidMix { a } => {
                let s = a / k as f64;
                for i in 0..k {
                    for j in 0..k {
                        out[i * k + j] = f64::from(u8::from(i == j)) + s * (u[i] + u[j]).tanh();
                    }
                }
            }
            Coefficients::DiagLinear => {
                (0..k).for_each(|i| out[i * k + i] = 1.0);
                out[0] = u[0];
            }
        }
    }

    pub fn drift(&self, _u: &[f64], out: &mut [f64]) {
        match &self.coefficients {
            Coefficients::DriftOnly { b0 } => out[..self.k].copy_from_slice(b0),
            _ => out[..self.k].iter_mut().for_each(|v| *v = 0.0),
        }
    }

    pub fn determinant(&self, u: &[f64]) -> f64 {
        let mut s = vec![0.0; self.k * self.k];
        self.sigma(u, &mut s);
        determinant(&mut s, self.k)
    }
}

/// Determinant by partial-pivot elimination; `a` is overwritten.
pub fn determinant(a: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..k {
        let p = (c..k)
            .max_by(|&i, &j| a[i * k + c].abs().total_cmp(&a[j * k + c].abs()))
            .unwrap_or(c);
        if a[p * k + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..k {
                a.swap(p * k + j, c * k + j);
            }
            det = -det;
        }
        det *= a[c * k + c];
        for i in c + 1..k {
            let f = a[i * k + c] / a[c * k + c];
            for j in c..k {
                a[i * k + j] -= f * a[c * k + j];
            }
        }
    }
    det
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExponentialEuler,
    SpectralLeapfrog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub sample: u64,
    pub scheme: Scheme,
    pub steps: usize,
}

/// The `k` solution components at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionField {
    pub t: f64,
    pub fields: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl SolutionField {
    pub fn at(&self, idx: usize) -> Vec<f64> {
        self.fields.iter().map(|f| f[idx]).collect()
    }
}

/// Wave state: the field plus its spectral pair `(û, v̂)` (unnormalised FFT
/// convention).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub field: SolutionField,
    pub u_hat: Vec<Vec<Complex64>>,
    pub v_hat: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Heat(SolutionField),
    Wave(WaveState),
}

impl State {
    pub fn field(&self) -> &SolutionField {
        match self {
            State::Heat(f) => f,
            State::Wave(w) => &w.field,
        }
    }
}

/// Everything that defines one run apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub green: GreenFunction,
    pub model: SpectralModel,
    pub grid: GridSpec,
    pub coeffs: CoefficientSet,
    pub horizon: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        self.green.validate()?;
        self.model.validate()?;
        self.grid.validate()?;
        self.coeffs.validate()?;
        if self.green.d != self.grid.d || self.model.d != self.grid.d {
            return Err(Error::config("operator, spectral model and grid dimensions differ"));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon must be finite and nonnegative"));
        }
        self.steps_to(self.horizon)?;
        for &t in &self.output_times {
            if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
                return Err(Error::config(format!("output time {t} lies outside [0, horizon]")));
            }
        }
        if self.green.operator == Operator::Wave && self.grid.dt > self.grid.extent / (2.0 * self.grid.n_points as f64) {
            return Err(Error::config("wave resolution: dt must not exceed extent / (2 n_points)"));
        }
        let radius = support_radius(&self.green, self.horizon);
        if self.grid.extent < 8.0 * radius {
            return Err(Error::config(format!(
                "extent {} is below 8 × the Green-function radius {radius:.4} at the horizon",
                self.grid.extent
            )));
        }
        Ok(())
    }

    /// Number of steps to reach `t`; `t` must be a multiple of `dt`.
    pub fn steps_to(&self, t: f64) -> Result<usize> {
        let s = t / self.grid.dt;
        let n = s.round();
        if (s - n).abs() > 1e-6 {
            return Err(Error::config(format!("time {t} is not a multiple of dt = {}", self.grid.dt)));
        }
        Ok(n as usize)
    }

    pub fn scheme(&self) -> Scheme {
        match self.green.operator {
            Operator::Heat => Scheme::ExponentialEuler,
            Operator::Wave => Scheme::SpectralLeapfrog,
        }
    }
}

/// Support radius of `Γ(t)` for wave; root-mean-square displacement
/// `√(d t)` for heat.
pub fn support_radius(g: &GreenFunction, t: f64) -> f64 {
    match g.operator {
        Operator::Heat => (g.d as f64 * t).sqrt(),
        Operator::Wave => t,
    }
}

#[derive(Debug, Clone)]
enum Multipliers {
    Heat(Vec<f64>),
    Wave {
        cos: Vec<f64>,
        /// `sin(ω dt)/ω`
        sin_over: Vec<f64>,
        /// `ω sin(ω dt)`
        sin_times: Vec<f64>,
    },
}

/// Scratch buffers for one trajectory.
#[derive(Debug, Clone)]
pub struct Workspace {
    noise: Vec<Vec<f64>>,
    forcing: Vec<Vec<f64>>,
    spectral: Vec<Complex64>,
    u: Vec<f64>,
    sigma: Vec<f64>,
    drift: Vec<f64>,
}

/// Precomputed plan for one [`RunSpec`].
#[derive(Debug, Clone)]
pub struct Stepper {
    spec: RunSpec,
    generator: NoiseGenerator,
    fft: FftNd,
    multipliers: Multipliers,
}

impl Stepper {
    pub fn new(spec: &RunSpec) -> Result<Self> {
        spec.validate()?;
        let grid = &spec.grid;
        let generator = NoiseGenerator::new(&spectral_weights(&spec.model, grid), grid)?;
        let dt = grid.dt;
        let rho: Vec<f64> = (0..grid.len()).map(|q| grid.frequency_norm(q)).collect();
        let multipliers = match spec.green.operator {
            Operator::Heat => Multipliers::Heat(rho.iter().map(|&r| spec.green.radial_fourier(dt, r)).collect()),
            Operator::Wave => Multipliers::Wave {
                cos: rho.iter().map(|&r| (2.0 * PI * r * dt).cos()).collect(),
                sin_over: rho.iter().map(|&r| spec.green.radial_fourier(dt, r)).collect(),
                sin_times: rho.iter().map(|&r| 2.0 * PI * r * (2.0 * PI * r * dt).sin()).collect(),
            },
        };
        Ok(Self {
            spec: spec.clone(),
            generator,
            fft: FftNd::new(grid),
            multipliers,
        })
    }

    pub fn spec(&self) -> &RunSpec {
        &self.spec
    }

    pub fn workspace(&self) -> Workspace {
        let (n, k) = (self.spec.grid.len(), self.spec.coeffs.k);
        Workspace {
            noise: vec![vec![0.0; n]; k],
            forcing: vec![vec![0.0; n]; k],
            spectral: vec![Complex64::new(0.0, 0.0); n],
            u: vec![0.0; k],
            sigma: vec![0.0; k * k],
            drift: vec![0.0; k],
        }
    }

    pub fn initial(&self, key: StreamKey) -> State {
        let (n, k) = (self.spec.grid.len(), self.spec.coeffs.k);
        let field = SolutionField {
            t: 0.0,
            fields: vec![vec![0.0; n]; k],
            provenance: Provenance {
                seed: key.seed,
                sample: key.sample,
                scheme: self.spec.scheme(),
                steps: 0,
            },
        };
        match self.spec.green.operator {
            Operator::Heat => State::Heat(field),
            Operator::Wave => State::Wave(WaveState {
                field,
                u_hat: vec![vec![Complex64::new(0.0, 0.0); n]; k],
                v_hat: vec![vec![Complex64::new(0.0, 0.0); n]; k],
            }),
        }
    }

    /// Writes `σ(u)X + b(u)dt` (plus `u` when `with_u`) into the forcing buffers.
    fn forcing(&self, field: &SolutionField, noise: &[Vec<f64>], with_u: bool, ws: &mut Workspace) {
        let c = &self.spec.coeffs;
        let (k, dt) = (c.k, self.spec.grid.dt);
        let drift = c.has_drift();
        if c.constant_sigma() {
            c.sigma(&ws.u, &mut ws.sigma);
            c.drift(&ws.u, &mut ws.drift);
        }
        for x in 0..self.spec.grid.len() {
            for i in 0..k {
                ws.u[i] = field.fields[i][x];
            }
            if !c.constant_sigma() {
                c.sigma(&ws.u, &mut ws.sigma);
                if drift {
                    c.drift(&ws.u, &mut ws.drift);
                }
            }
            for i in 0..k {
                let row = &ws.sigma[i * k..(i + 1) * k];
                let mut s = if with_u { ws.u[i] } else { 0.0 };
                for j in 0..k {
                    s += row[j] * noise[j][x];
                }
                if drift {
                    s += ws.drift[i] * dt;
                }
                ws.forcing[i][x] = s;
            }
        }
    }

    /// `u ← S_dt[u + σ(u)·incr + b(u)dt]`.
    pub fn step_heat(&self, state: &mut SolutionField, incr: &[Vec<f64>], ws: &mut Workspace) -> Result<()> {
        let Multipliers::Heat(heat) = &self.multipliers else {
            return Err(Error::config("step_heat called on a wave plan"));
        };
        let step = state.provenance.steps;
        self.forcing(state, incr, true, ws);
        let scale = 1.0 / self.spec.grid.len() as f64;
        for i in 0..self.spec.coeffs.k {
            fill_complex(&mut ws.spectral, &ws.forcing[i]);
            self.fft.forward(&mut ws.spectral);
            for (z, m) in ws.spectral.iter_mut().zip(heat) {
                *z *= m * scale;
            }
            self.fft.inverse(&mut ws.spectral);
            for (u, z) in state.fields[i].iter_mut().zip(&ws.spectral) {
                *u = z.re;
            }
        }
        finish_step(state, self.spec.grid.dt, step)
    }

    /// One exact rotation of `(û, v̂)` after the forcing kick `v̂ += ℱ[σ(u)·incr + b(u)dt]`.
    pub fn step_wave(&self, state: &mut WaveState, incr: &[Vec<f64>], ws: &mut Workspace) -> Result<()> {
        let Multipliers::Wave {
            cos,
            sin_over,
            sin_times,
        } = &self.multipliers
        else {
            return Err(Error::config("step_wave called on a heat plan"));
        };
        let step = state.field.provenance.steps;
        self.forcing(&state.field, incr, false, ws);
        let scale = 1.0 / self.spec.grid.len() as f64;
        for i in 0..self.spec.coeffs.k {
            fill_complex(&mut ws.spectral, &ws.forcing[i]);
            self.fft.forward(&mut ws.spectral);
            let (uh, vh) = (&mut state.u_hat[i], &mut state.v_hat[i]);
            for q in 0..uh.len() {
                let v = vh[q] + ws.spectral[q];
                let u = uh[q];
                uh[q] = u * cos[q] + v * sin_over[q];
                vh[q] = v * cos[q] - u * sin_times[q];
                ws.spectral[q] = uh[q] * scale;
            }
            self.fft.inverse(&mut ws.spectral);
            for (u, z) in state.field.fields[i].iter_mut().zip(&ws.spectral) {
                *u = z.re;
            }
        }
        finish_step(&mut state.field, self.spec.grid.dt, step)
    }

    /// Draw the noise of step `provenance.steps` and advance.
    pub fn advance(&self, state: &mut State, key: StreamKey, ws: &mut Workspace) -> Result<()> {
        let step = state.field().provenance.steps as u64;
        let mut noise = std::mem::take(&mut ws.noise);
        for (c, f) in noise.iter_mut().enumerate() {
            self.generator.fill(key, step, c as u8, f, &mut ws.spectral);
        }
        let r = match state {
            State::Heat(f) => self.step_heat(f, &noise, ws),
            State::Wave(w) => self.step_wave(w, &noise, ws),
        };
        ws.noise = noise;
        r
    }

    /// Run sample `key` for `n_steps`, calling `observe(state)` on the
    /// initial state and after every step.
    pub fn run<F>(&self, key: StreamKey, n_steps: usize, ws: &mut Workspace, mut observe: F) -> Result<()>
    where
        F: FnMut(&SolutionField) -> Result<()>,
    {
        let mut state = self.initial(key);
        observe(state.field())?;
        for _ in 0..n_steps {
            self.advance(&mut state, key, ws)?;
            observe(state.field())?;
        }
        Ok(())
    }
}

fn fill_complex(buf: &mut [Complex64], src: &[f64]) {
    for (z, &v) in buf.iter_mut().zip(src) {
        *z = Complex64::new(v, 0.0);
    }
}

fn finish_step(field: &mut SolutionField, dt: f64, step: usize) -> Result<()> {
    if field.fields.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { step });
    }
    field.provenance.steps = step + 1;
    field.t = (step + 1) as f64 * dt;
    Ok(())
}

/// `step_heat` with a noise increment drawn elsewhere.
pub fn step_heat(stepper: &Stepper, state: &mut SolutionField, incr: &NoiseIncrement) -> Result<()> {
    stepper.step_heat(state, &incr.fields, &mut stepper.workspace())
}

pub fn step_wave(stepper: &Stepper, state: &mut WaveState, incr: &NoiseIncrement) -> Result<()> {
    stepper.step_wave(state, &incr.fields, &mut stepper.workspace())
}

/// Trajectory of sample 0 at the requested output times (snapped to steps).
/// With no output times, only the horizon is returned.
pub fn simulate(spec: &RunSpec, seed: u64) -> Result<Vec<SolutionField>> {
    let stepper = Stepper::new(spec)?;
    let mut wanted: Vec<usize> = if spec.output_times.is_empty() {
        vec![spec.steps_to(spec.horizon)?]
    } else {
        spec.output_times
            .iter()
            .map(|&t| (t / spec.grid.dt).round() as usize)
            .collect()
    };
    wanted.sort_unstable();
    wanted.dedup();
    let n_steps = spec.steps_to(spec.horizon)?;
    let mut out = Vec::with_capacity(wanted.len());
    let mut ws = stepper.workspace();
    stepper.run(StreamKey::new(seed, 0), n_steps, &mut ws, |f| {
        if wanted.binary_search(&f.provenance.steps).is_ok() {
            out.push(f.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

/// Apply `f` to every sample index in parallel, keeping sample order.
pub fn ensemble_map<T, F>(stepper: &Stepper, m: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Stepper, u64, &mut Workspace) -> Result<T> + Sync,
{
    (0..m as u64)
        .into_par_iter()
        .map_init(|| stepper.workspace(), |ws, s| f(stepper, s, ws))
        .collect()
}

/// Probe values `u(horizon, x*)` over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub t: f64,
    pub probe_index: usize,
    /// Snapped probe coordinate.
    pub probe: Vec<f64>,
    pub seed: u64,
    /// `samples[s][i]` is component `i` of sample `s`.
    pub samples: Vec<Vec<f64>>,
}

impl Ensemble {
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[i]).collect()
    }
}

pub fn simulate_ensemble(spec: &RunSpec, m: usize, probe: &[f64], seed: u64) -> Result<Ensemble> {
    if m == 0 {
        return Err(Error::precondition("ensemble size must be at least 1"));
    }
    let stepper = Stepper::new(spec)?;
    let (idx, snapped) = spec.grid.snap(probe);
    let n_steps = spec.steps_to(spec.horizon)?;
    let samples = ensemble_map(&stepper, m, |st, s, ws| {
        let mut v = Vec::new();
        st.run(StreamKey::new(seed, s), n_steps, ws, |f| {
            if f.provenance.steps == n_steps {
                v = f.at(idx);
            }
            Ok(())
        })?;
        Ok(v)
    })?;
    Ok(Ensemble {
        t: n_steps as f64 * spec.grid.dt,
        probe_index: idx,
        probe: snapped[..spec.grid.d].to_vec(),
        seed,
        samples,
    })
}

/// Exact variance of `u(N dt, x)` produced by the discrete scheme for
/// `σ ≡ c·I`, `b ≡ 0`: `c² dt Σ_{j=1}^{N} Σ_q λ_q ℱΓ(j dt)(ξ_q)²`.
pub fn linear_scheme_variance(g: &GreenFunction, m: &SpectralModel, grid: &GridSpec, c: f64, t: f64) -> Result<f64> {
    let n = scheme_steps(grid, t)?;
    let weights = spectral_weights(m, grid);
    let terms: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|q| {
            let rho = grid.frequency_norm(q);
            let s: Vec<f64> = (1..=n).map(|j| g.radial_fourier(j as f64 * grid.dt, rho).powi(2)).collect();
            weights[q] * pairwise_sum(&s)
        })
        .collect();
    Ok(c * c * grid.dt * pairwise_sum(&terms))
}

pub(crate) fn scheme_steps(grid: &GridSpec, t: f64) -> Result<usize> {
    let s = t / grid.dt;
    if !(s >= 0.0) || (s - s.round()).abs() > 1e-6 {
        return Err(Error::config(format!("time {t} is not a nonnegative multiple of dt")));
    }
    Ok(s.round() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, variance};

    fn spec(g: GreenFunction, coeffs: CoefficientSet, n: usize, extent: f64, dt: f64, t: f64) -> RunSpec {
        RunSpec {
            green: g,
            model: SpectralModel::riesz(0.5, g.d).unwrap(),
            grid: GridSpec::new(g.d, n, extent, dt).unwrap(),
            coeffs,
            horizon: t,
            output_times: vec![],
        }
    }

    #[test]
    fn heat_drift_only_grows_linearly() {
        let s = spec(GreenFunction::heat(1).unwrap(), CoefficientSet::drift_only(vec![2.0, -1.0]).unwrap(), 32, 8.0, 0.01, 0.5);
        let f = simulate(&s, 3).unwrap().pop().unwrap();
        for x in 0..32 {
            assert!((f.fields[0][x] - 1.0).abs() < 1e-12);
            assert!((f.fields[1][x] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn wave_drift_only_is_quadratic() {
        let s = spec(GreenFunction::wave(1).unwrap(), CoefficientSet::drift_only(vec![1.0]).unwrap(), 64, 8.0, 1e-3, 0.5);
        let f = simulate(&s, 0).unwrap().pop().unwrap();
        // Discrete sum gives b (t²/2 + t dt/2).
        assert!((f.fields[0][7] - (0.125 + 0.25e-3)).abs() < 1e-10);
    }

    #[test]
    fn zero_coefficients_keep_zero() {
        for g in [GreenFunction::heat(2).unwrap(), GreenFunction::wave(3).unwrap()] {
            let s = spec(g, CoefficientSet::linear_const(2, 0.0).unwrap(), 8, 8.0, 0.05, 0.25);
            let f = simulate(&s, 9).unwrap().pop().unwrap();
            assert!(f.fields.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn horizon_zero_returns_initial_field() {
        let s = spec(GreenFunction::heat(1).unwrap(), CoefficientSet::sin_diag(1, 0.25).unwrap(), 16, 8.0, 0.01, 0.0);
        let out = simulate(&s, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].t, 0.0);
        assert!(out[0].fields[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn guards() {
        let mut s = spec(GreenFunction::wave(1).unwrap(), CoefficientSet::linear_const(1, 1.0).unwrap(), 16, 8.0, 0.3, 0.6);
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        s.grid.dt = 0.1;
        s.horizon = 2.0;
        assert!(s.validate().is_err());
        s.horizon = 0.55;
        assert!(s.validate().is_err());
        s.horizon = 0.5;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn blow_up_is_reported() {
        let s = spec(GreenFunction::heat(1).unwrap(), CoefficientSet::diag_linear(1).unwrap(), 16, 8.0, 0.01, 0.1);
        let st = Stepper::new(&s).unwrap();
        let mut f = match st.initial(StreamKey::new(0, 0)) {
            State::Heat(f) => f,
            _ => unreachable!(),
        };
        f.fields[0][3] = f64::INFINITY;
        let incr = NoiseIncrement {
            fields: vec![vec![0.0; 16]],
            seed: 0,
            sample: 0,
            step: 0,
        };
        assert_eq!(step_heat(&st, &mut f, &incr), Err(Error::BlowUp { step: 0 }));
    }

    #[test]
    fn linear_heat_variance_matches_scheme() {
        let g = GreenFunction::heat(1).unwrap();
        let s = spec(g, CoefficientSet::linear_const(1, 1.5).unwrap(), 64, 8.0, 0.01, 0.2);
        let e = simulate_ensemble(&s, 2000, &[0.3], 5).unwrap();
        let x = e.component(0);
        let v = linear_scheme_variance(&g, &s.model, &s.grid, 1.5, 0.2).unwrap();
        let se = v * (2.0 / x.len() as f64).sqrt();
        assert!((variance(&x) - v).abs() < 3.0 * se, "{} vs {v}", variance(&x));
        assert!(mean(&x).abs() < 3.0 * (v / x.len() as f64).sqrt());
    }

    #[test]
    fn linear_wave_variance_matches_scheme() {
        let g = GreenFunction::wave(2).unwrap();
        let mut s = spec(g, CoefficientSet::linear_const(1, 1.0).unwrap(), 16, 8.0, 0.02, 0.4);
        s.model = SpectralModel::riesz(1.0, 2).unwrap();
        let e = simulate_ensemble(&s, 2000, &[0.0, 0.0], 2).unwrap();
        let x = e.component(0);
        let v = linear_scheme_variance(&g, &s.model, &s.grid, 1.0, 0.4).unwrap();
        assert!((variance(&x) - v).abs() < 3.0 * v * (2.0 / 2000f64).sqrt());
    }

    #[test]
    fn ensemble_prefix_is_stable() {
        let s = spec(GreenFunction::heat(1).unwrap(), CoefficientSet::sin_diag(2, 0.25).unwrap(), 16, 8.0, 0.02, 0.1);
        let a = simulate_ensemble(&s, 5, &[1.0], 11).unwrap();
        let b = simulate_ensemble(&s, 10, &[1.0], 11).unwrap();
        assert_eq!(a.samples[..], b.samples[..5]);
        assert_eq!(a.probe, vec![1.0]);
    }

    #[test]
    fn determinant_cases() {
        let mut a = vec![0.0, 2.0, 3.0, 1.0];
        assert!((determinant(&mut a, 2) + 6.0).abs() < 1e-15);
        let c = CoefficientSet::sin_diag(2, 0.2).unwrap();
        assert!((c.determinant(&[0.3, -1.0]) - (1.0 + 0.2 * 0.3f64.sin()) * (1.0 - 0.2 * 1f64.sin())).abs() < 1e-14);
        assert_eq!(CoefficientSet::diag_linear(2).unwrap().determinant(&[0.0, 4.0]), 0.0);
        let s = CoefficientSet::sigmoid_mix(3, 0.5).unwrap();
        let mut m = vec![0.0; 9];
        s.sigma(&[0.1, 0.2, -0.4], &mut m);
        assert!((m[1] - m[3]).abs() < 1e-15 && (m[0] - 1.0 - 0.5 / 3.0 * 0.2f64.tanh()).abs() < 1e-15);
    }
}
