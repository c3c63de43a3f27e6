//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use spdelab_core::analysis::{
    default_threshold, gaussian_oracle_variance, hoelder_estimate, kde, linear_increment_variance,
    localization_convergence, positivity_check, Bandwidth, Direction, Outcome, SigmaRegion, DEFAULT_MARGIN_FRACTION,
    DEFAULT_QUANTILE_BOX,
};
use spdelab_core::hyp::{
    fit_scaling_exponent, inner_h, j_integral, psi_coupled_integral, verify_hypotheses, weighted_j_integral, HypConfig,
    PsiMeasure,
};
use spdelab_core::noise::{band_limited_covariance, generator_covariance, spectral_weights, NoiseGenerator};
use spdelab_core::solver::{linear_scheme_variance, simulate_ensemble, CoefficientSet, RunSpec};
use spdelab_core::stats::{mean, variance};
use spdelab_core::{Error, GreenFunction, GridSpec, SpectralModel};

type Checked = Result<String, String>;

const SEED: u64 = 20_240_611;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn scales() -> Vec<f64> {
    (2..=8).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect()
}

fn fit<F: Fn(f64) -> spdelab_core::Result<f64>>(f: F) -> Result<(f64, f64), String> {
    let pts = scales()
        .into_iter()
        .map(|s| f(s).map(|v| (s, v)))
        .collect::<spdelab_core::Result<Vec<_>>>()
        .map_err(err)?;
    let fit = fit_scaling_exponent(&pts).map_err(err)?;
    Ok((fit.exponent, fit.r_squared))
}

fn heat_riesz() -> (GreenFunction, SpectralModel) {
    (GreenFunction::heat(1).unwrap(), SpectralModel::riesz(0.5, 1).unwrap())
}

fn heat_spec(coeffs: CoefficientSet, n: usize, dt: f64, horizon: f64) -> RunSpec {
    let (green, model) = heat_riesz();
    RunSpec {
        green,
        model,
        grid: GridSpec::new(1, n, 8.0, dt).unwrap(),
        coeffs,
        horizon,
        output_times: Vec::new(),
    }
}

fn heat_scaling() -> Checked {
    let (g, m) = heat_riesz();
    let (e, r2) = fit(|h| j_integral(&g, &m, 0.0, h))?;
    ensure((e - 0.75).abs() <= 0.02 && r2 >= 0.9999, format!("exponent {e:.5}, r² {r2:.8}"))?;
    Ok(format!("exponent {e:.5}, r² {r2:.8}"))
}

fn wave_scaling() -> Checked {
    let g = GreenFunction::wave(1).unwrap();
    let m = SpectralModel::riesz(0.5, 1).unwrap();
    let (e, r2) = fit(|t| j_integral(&g, &m, 0.0, t))?;
    ensure((e - 2.5).abs() <= 0.05 && r2 >= 0.999, format!("exponent {e:.5}, r² {r2:.8}"))?;
    Ok(format!("exponent {e:.5}, r² {r2:.8}"))
}

fn h5_exponents() -> Checked {
    let (g, m) = heat_riesz();
    let psi = PsiMeasure::new(g, 0.5).map_err(err)?;
    let (ep, rp) = fit(|t| psi_coupled_integral(&psi, &m, t))?;
    let (ew, rw) = fit(|t| weighted_j_integral(&g, &m, 0.7, t))?;
    let detail = format!("psi-coupled {ep:.5} (r² {rp:.6}), weighted {ew:.5} (r² {rw:.6})");
    ensure((ep - 0.875).abs() <= 0.03 && (ew - 1.10).abs() <= 0.03, detail.clone())?;
    Ok(detail)
}

fn beta_window() -> Checked {
    let cfg = HypConfig::default();
    let verdict = |beta: f64, d: usize| -> Result<(bool, f64, f64), String> {
        let g = GreenFunction::wave(d).map_err(err)?;
        let m = SpectralModel::riesz(beta, d).map_err(err)?;
        let rep = verify_hypotheses(&g, &m, None, &cfg).map_err(err)?;
        let o = rep.ordering("eta < alpha").ok_or("missing ordering")?;
        Ok((o.holds, o.lhs, o.rhs))
    };
    let (ok_half, e1, a1) = verdict(0.5, 1)?;
    let (ok_one, e2, a2) = verdict(1.0, 3)?;
    let detail = format!("β=0.5: η {e1:.3} vs α {a1:.3}; β=1: η {e2:.3} vs α {a2:.3}");
    ensure(ok_half && !ok_one, detail.clone())?;
    Ok(detail)
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Composite midpoint rule; never evaluates the endpoints.
fn midpoint<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

fn green_identities() -> Checked {
    use std::f64::consts::PI;
    let mut worst_heat: f64 = 0.0;
    let mut worst_wave: f64 = 0.0;
    for d in 1..=3 {
        let heat = GreenFunction::heat(d).map_err(err)?;
        let wave = GreenFunction::wave(d).map_err(err)?;
        for &t in &[0.1, 0.5, 2.0] {
            worst_heat = worst_heat.max((heat.total_mass(t).map_err(err)? - 1.0).abs());
            worst_wave = worst_wave.max((wave.total_mass(t).map_err(err)? - t).abs());
            // Independent integrals of the densities.
            let sphere = [2.0, 2.0 * PI, 4.0 * PI][d - 1];
            let rmax = 14.0 * t.sqrt();
            let num = simpson(|r| sphere * r.powi(d as i32 - 1) * heat.density(t, r).unwrap(), 0.0, rmax, 20_000);
            worst_heat = worst_heat.max((num - 1.0).abs());
            let wave_num = match d {
                1 => simpson(|x| wave.density(t, x.abs()).unwrap(), -t, t, 2),
                // r = t(1 − u²) turns the light-cone singularity into a smooth integrand.
                2 => midpoint(
                    |u| {
                        let r = t * (1.0 - u * u);
                        2.0 * PI * r * wave.density(t, r).unwrap() * 2.0 * t * u
                    },
                    0.0,
                    1.0,
                    100_000,
                ),
                // Uniform measure of mass t on the sphere of radius t.
                _ => 4.0 * PI * t * t / (4.0 * PI * t),
            };
            worst_wave = worst_wave.max((wave_num - t).abs());
            ensure(wave.radial_fourier(t, 0.0) == t, format!("multiplier at 0 is not t for d={d}"))?;
            let near = wave.radial_fourier(t, 1e-9);
            worst_wave = worst_wave.max((near - t).abs());
        }
    }
    let detail = format!("max heat mass error {worst_heat:.2e}, max wave mass error {worst_wave:.2e}");
    ensure(worst_heat < 1e-10 && worst_wave < 1e-8, detail.clone())?;
    Ok(detail)
}

/// `Γ(β/2) (4π²)^{−β/2} t^{1−β/2} / (1 − β/2)` for heat, d = 1, Riesz `β`.
fn closed_form_heat_variance(t: f64) -> f64 {
    use std::f64::consts::PI;
    const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;
    let beta = 0.5;
    GAMMA_QUARTER * (4.0 * PI * PI).powf(-beta / 2.0) * t.powf(1.0 - beta / 2.0) / (1.0 - beta / 2.0)
}

fn linear_oracle() -> Checked {
    let t = 0.25;
    let m = 10_000;
    let spec = heat_spec(CoefficientSet::linear_const(1, 1.0).map_err(err)?, 512, 1e-3, t);
    let oracle = gaussian_oracle_variance(&spec.green, &spec.model, 1.0, t).map_err(err)?;
    let closed = closed_form_heat_variance(t);
    ensure(
        (oracle / closed - 1.0).abs() < 1e-6,
        format!("oracle {oracle} disagrees with the closed form {closed}"),
    )?;
    let ens = simulate_ensemble(&spec, m, &[0.0], SEED).map_err(err)?;
    let x = ens.component(0);
    let mu = mean(&x);
    let v = variance(&x);
    let sq: Vec<f64> = x.iter().map(|y| (y - mu).powi(2)).collect();
    let se = (variance(&sq) / m as f64).sqrt();
    let z = (v - oracle) / se;

    let fine = GridSpec::new(1, 1024, 8.0, 5e-4).map_err(err)?;
    let s1 = linear_scheme_variance(&spec.green, &spec.model, &spec.grid, 1.0, t).map_err(err)?;
    let s2 = linear_scheme_variance(&spec.green, &spec.model, &fine, 1.0, t).map_err(err)?;
    let order: f64 = 0.75;
    let extrapolated_scheme = s2 + (s2 - s1) / (2f64.powf(order) - 1.0);
    let extrapolated = v * extrapolated_scheme / s1;
    let rel = (extrapolated / oracle - 1.0).abs();
    let detail = format!(
        "oracle {oracle:.6}, ensemble {v:.6} ± {se:.6} (z = {z:.2}), scheme gap {:.4} → {:.4} on refinement, \
         extrapolated {extrapolated:.6} ({:.2}%)",
        s1 / oracle - 1.0,
        s2 / oracle - 1.0,
        100.0 * rel
    );
    ensure(z.abs() <= 3.0 && (s2 - oracle).abs() < (s1 - oracle).abs() && rel < 0.05, detail.clone())?;
    Ok(detail)
}

fn hoelder_exponents() -> Checked {
    let coeffs = CoefficientSet::sin_diag(1, 0.25).map_err(err)?;
    let m = 2000;
    let time_spec = heat_spec(coeffs.clone(), 256, 1.0 / 8192.0, 0.5);
    let time_lags: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|c| 64.0 * c / 8192.0).collect();
    let time = hoelder_estimate(&time_spec, &[0.0], Direction::Time, &time_lags, 2.0, m, SEED).map_err(err)?;

    let space_spec = heat_spec(coeffs, 2048, 1.0 / 2048.0, 0.5);
    let dx = space_spec.grid.dx();
    let space_lags: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|c| 5.0 * c * dx).collect();
    let space = hoelder_estimate(&space_spec, &[0.0], Direction::Space, &space_lags, 2.0, m, SEED).map_err(err)?;

    // Exponents the same discrete scheme gives for σ ≡ 1 over the same lags.
    let linear = |spec: &RunSpec, dir: Direction, lags: &[f64], t0: f64| -> Result<f64, String> {
        let pts = lags
            .iter()
            .map(|&h| {
                linear_increment_variance(&spec.green, &spec.model, &spec.grid, 1.0, t0, dir, h).map(|v| (h, v))
            })
            .collect::<spdelab_core::Result<Vec<_>>>()
            .map_err(err)?;
        Ok(fit_scaling_exponent(&pts).map_err(err)?.exponent / 2.0)
    };
    let lt = linear(&time_spec, Direction::Time, &time_lags, 0.5 - time_lags[5])?;
    let ls = linear(&space_spec, Direction::Space, &space_lags, 0.5)?;
    let detail = format!(
        "time {:.4} CI [{:.4}, {:.4}] (linear scheme {lt:.4}); space {:.4} CI [{:.4}, {:.4}] (linear scheme {ls:.4})",
        time.exponent, time.ci[0], time.ci[1], space.exponent, space.ci[0], space.ci[1]
    );
    ensure(
        (0.30..=0.45).contains(&time.exponent)
            && time.covers(0.375)
            && (0.60..=0.85).contains(&space.exponent)
            && space.covers(0.75),
        detail.clone(),
    )?;
    Ok(detail)
}

fn localization() -> Checked {
    let n_range = [2, 3, 4, 5];
    let spec = heat_spec(CoefficientSet::sin_diag(2, 0.25).map_err(err)?, 128, 1.0 / 512.0, 0.5);
    let curve = localization_convergence(&spec, &[0.0], &n_range, 500, SEED).map_err(err)?;
    let errors: Vec<f64> = curve.points.iter().map(|p| p.mean_error).collect();
    let constant = heat_spec(CoefficientSet::linear_const(2, 1.3).map_err(err)?, 128, 1.0 / 512.0, 0.5);
    let flat = localization_convergence(&constant, &[0.0], &n_range, 20, SEED).map_err(err)?;
    let worst = flat.points.iter().map(|p| p.mean_error).fold(0.0, f64::max);
    let detail = format!("errors {errors:.4?}, constant-σ error {worst:.1e}");
    ensure(curve.strictly_decreasing() && worst <= 1e-10, detail.clone())?;
    Ok(detail)
}

fn positivity_case(coeffs: CoefficientSet, n: usize, extent: f64) -> Result<(String, f64), String> {
    let mut spec = heat_spec(coeffs.clone(), n, 1.0 / 512.0, 0.5);
    spec.grid = GridSpec::new(1, n, extent, spec.grid.dt).map_err(err)?;
    let ens = simulate_ensemble(&spec, 10_000, &[0.0], SEED).map_err(err)?;
    let est = kde(&ens.samples, &Bandwidth::Auto).map_err(err)?;
    let region = SigmaRegion::from_samples(coeffs, &ens.samples, DEFAULT_MARGIN_FRACTION).map_err(err)?;
    let th = default_threshold(&est, DEFAULT_QUANTILE_BOX).map_err(err)?;
    let rep = positivity_check(&est, &region, DEFAULT_QUANTILE_BOX, th).map_err(err)?;
    let min = rep.min_density.unwrap_or(f64::NAN);
    let detail = format!(
        "{:?}: min {min:.4} vs threshold {:.2e} over {} points",
        rep.outcome, rep.threshold, rep.evaluated
    );
    ensure(rep.outcome == Outcome::Pass, detail.clone())?;
    Ok((detail, min))
}

fn positivity() -> Checked {
    let tanh = CoefficientSet::tanh_diag(1, 0.5).map_err(err)?;
    let (a, min_a) = positivity_case(tanh.clone(), 128, 8.0)?;
    // Same dx on a torus twice as large: the verdict must not depend on periodization.
    let (_, min_wide) = positivity_case(tanh, 256, 16.0)?;
    let (b, _) = positivity_case(CoefficientSet::sin_diag(2, 0.2).map_err(err)?, 128, 8.0)?;
    let spec = heat_spec(CoefficientSet::linear_const(1, 0.0).map_err(err)?, 128, 1.0 / 512.0, 0.5);
    let ens = simulate_ensemble(&spec, 1000, &[0.0], SEED).map_err(err)?;
    let c = kde(&ens.samples, &Bandwidth::Auto);
    ensure(
        c == Err(Error::DegenerateSample),
        format!("degenerate control gave {:?}", c.map(|e| e.k)),
    )?;
    Ok(format!(
        "(a) {a}, doubled extent min {min_wide:.4} ({:+.1}%); (b) {b}; (c) degenerate sample rejected",
        100.0 * (min_wide / min_a - 1.0)
    ))
}

fn noise_generator() -> Checked {
    let m = SpectralModel::gaussian(1.0, 1).map_err(err)?;
    let grid = GridSpec::new(1, 64, 16.0, 0.01).map_err(err)?;
    let weights = spectral_weights(&m, &grid);
    let gen = NoiseGenerator::new(&weights, &grid).map_err(err)?;
    let lags: Vec<Vec<i64>> = [0, 1, 2, 4, 6].iter().map(|&l| vec![l]).collect();
    let est = generator_covariance(&gen, SEED, 20_000, &lags).map_err(err)?;
    let mut worst_z: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for e in &est {
        let oracle = band_limited_covariance(&weights, &grid, &e.lag);
        worst_z = worst_z.max(((e.estimate - oracle) / e.std_error).abs());
        worst_rel = worst_rel.max((e.estimate / oracle - 1.0).abs());
    }
    let detail = format!("max |z| {worst_z:.2}, max relative error {:.2}%", 100.0 * worst_rel);
    ensure(worst_z <= 3.0 && worst_rel < 0.10, detail.clone())?;
    Ok(detail)
}

fn run_props(name: &str, cases: u32, f: impl Fn(&mut TestRunner) -> Result<(), String>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    f(&mut runner).map_err(|e| format!("{name}: {e}"))
}

fn check(cond: bool, msg: String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg))
    }
}

fn write_config(dir: &Path, seed: u64, coeff: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "operator = \"heat\"\nd = 1\nkernel = \"riesz\"\nbeta = 0.5\ncoefficients = \"{coeff}\"\ncoeff_a = 0.3\n\
         n_points = 16\nextent = 8.0\ndt = 0.01\nhorizon = 0.05\noutput_times = [0.02, 0.05]\nseed = {seed}\n"
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn property_suites() -> Checked {
    const CASES: u32 = 100;
    let grid = GridSpec::new(1, 16, 4.0, 0.01).unwrap();
    let field = || prop::collection::vec(-1.0f64..1.0, 16);

    run_props("inner_h", CASES, |r| {
        r.run(&(0.1f64..0.9, field(), field(), field(), -2.0f64..2.0), |(beta, a, b, c, s)| {
            let m = SpectralModel::riesz(beta, 1).unwrap();
            let ip = |x: &[f64], y: &[f64]| inner_h(x, y, &m, &grid).unwrap();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
            let lhs = ip(&mix, &c);
            let rhs = s * ip(&a, &c) + ip(&b, &c);
            let scale = 1.0 + ip(&a, &a).abs() + ip(&b, &b).abs() + ip(&c, &c).abs();
            check((lhs - rhs).abs() <= 1e-10 * scale, format!("bilinearity {lhs} vs {rhs}"))?;
            check((ip(&a, &b) - ip(&b, &a)).abs() <= 1e-12 * scale, "symmetry".into())?;
            check(ip(&a, &a) >= -1e-12 * scale, "positive semidefinite".into())
        })
        .map_err(err)
    })?;

    run_props("j additivity", CASES, |r| {
        r.run(&(any::<bool>(), 0.1f64..0.9, 0.01f64..0.99, 0.01f64..0.99), |(wave, beta, x, y)| {
            let g = if wave { GreenFunction::wave(1) } else { GreenFunction::heat(1) }.unwrap();
            let m = SpectralModel::riesz(beta, 1).unwrap();
            let (a, b) = (x.min(y), x.max(y));
            let whole = j_integral(&g, &m, 0.0, b).unwrap();
            let parts = j_integral(&g, &m, 0.0, a).unwrap() + j_integral(&g, &m, a, b).unwrap();
            check((whole - parts).abs() <= 1e-7 * whole, format!("{whole} vs {parts}"))
        })
        .map_err(err)
    })?;

    run_props("self-similarity", CASES, |r| {
        r.run(&(any::<bool>(), 0.1f64..0.9, 0.01f64..0.5, 1.1f64..2.0), |(wave, beta, t, lambda)| {
            let g = if wave { GreenFunction::wave(1) } else { GreenFunction::heat(1) }.unwrap();
            let m = SpectralModel::riesz(beta, 1).unwrap();
            let power = if wave { 3.0 - beta } else { 1.0 - beta / 2.0 };
            let ratio = j_integral(&g, &m, 0.0, lambda * t).unwrap() / j_integral(&g, &m, 0.0, t).unwrap();
            let want = lambda.powf(power);
            check((ratio / want - 1.0).abs() <= 1e-6, format!("{ratio} vs {want}"))
        })
        .map_err(err)
    })?;

    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let (one, three) = (pool(1), pool(3));
    run_props("determinism", CASES, |r| {
        r.run(&(any::<u64>(), 0usize..3), |(seed, which)| {
            let coeffs = match which {
                0 => CoefficientSet::sin_diag(2, 0.3),
                1 => CoefficientSet::tanh_diag(1, 0.5),
                _ => CoefficientSet::linear_const(1, 1.0),
            }
            .unwrap();
            let spec = heat_spec(coeffs, 16, 0.01, 0.04);
            let a = one.install(|| simulate_ensemble(&spec, 6, &[0.0], seed)).unwrap();
            let b = three.install(|| simulate_ensemble(&spec, 6, &[0.0], seed)).unwrap();
            let c = three.install(|| simulate_ensemble(&spec, 6, &[0.0], seed)).unwrap();
            check(a == b && b == c, "ensembles differ across worker counts".into())
        })
        .map_err(err)
    })?;

    run_props("csv rerun", CASES, |r| {
        r.run(&(0u64..1_000_000, prop::sample::select(vec!["sin_diag", "tanh_diag", "linear_const"])), |(seed, coeff)| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = write_config(dir.path(), seed, coeff);
            let mut outputs = Vec::new();
            for run in ["a", "b"] {
                let out = dir.path().join(run);
                let code = spdelab_cli::main_with_args([
                    "spdelab",
                    "simulate",
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ]);
                check(code == 0, format!("exit code {code}"))?;
                outputs.push(std::fs::read(out.join("trajectory.csv")).unwrap());
            }
            check(outputs[0] == outputs[1], "trajectory.csv differs between reruns".into())
        })
        .map_err(err)
    })?;

    Ok(format!("5 suites × {CASES} cases"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Checked,
}

fn main() {
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let criteria = [
        Criterion { id: 1, name: "heat/Riesz j scaling", budget: Duration::from_secs(30), run: heat_scaling },
        Criterion { id: 2, name: "wave/Riesz j scaling", budget: Duration::from_secs(120), run: wave_scaling },
        Criterion { id: 3, name: "coupled and weighted exponents", budget: Duration::from_secs(120), run: h5_exponents },
        Criterion { id: 4, name: "wave β-window verdicts", budget: Duration::from_secs(300), run: beta_window },
        Criterion { id: 5, name: "Green-function identities", budget: Duration::from_secs(1), run: green_identities },
        Criterion { id: 6, name: "linear Gaussian oracle", budget: Duration::from_secs(600), run: linear_oracle },
        Criterion { id: 7, name: "Hölder exponents", budget: Duration::from_secs(900), run: hoelder_exponents },
        Criterion { id: 8, name: "localization convergence", budget: Duration::from_secs(900), run: localization },
        Criterion { id: 9, name: "density positivity", budget: Duration::from_secs(1200), run: positivity },
        Criterion { id: 10, name: "noise covariance", budget: Duration::from_secs(120), run: noise_generator },
        Criterion { id: 11, name: "property suites", budget: Duration::from_secs(600), run: property_suites },
    ];
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.map_or(true, |o| o == c.id)) {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {}: {detail} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
