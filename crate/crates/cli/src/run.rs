//! Subcommand implementations.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use spdelab_core::analysis::{
    default_threshold, gaussian_oracle_variance, hoelder_estimate, kde, localization_convergence, positivity_check,
    Bandwidth, Probe, SigmaRegion,
};
use spdelab_core::hyp::{verify_hypotheses, HypConfig, Verdict};
use spdelab_core::noise::{band_limited_covariance, generator_covariance, spectral_weights, NoiseGenerator};
use spdelab_core::rng::StreamKey;
use spdelab_core::solver::{ensemble_map, linear_scheme_variance, simulate, simulate_ensemble, CoefficientSet, Stepper};
use spdelab_core::stats::{mean, variance};

use crate::artifacts::{num, Artifacts};
use crate::config::{load, RunConfig, Source};
use crate::{CliError, Command, Common};

/// Loaded configuration with command-line overrides applied.
pub struct Context {
    pub cfg: RunConfig,
    pub src: Source,
    pub out: Artifacts,
}

pub fn prepare(common: &Common) -> Result<Context, CliError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config)))?;
    let (mut cfg, src) = load(&common.config, &text, &common.sets)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        // A pool may already exist when several commands run in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let dir = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| "out".into());
    let out = Artifacts::new(dir, cfg.hash(), cfg.seed)?;
    Ok(Context { cfg, src, out })
}

pub fn dispatch(cmd: &Command) -> Result<String, CliError> {
    let (common, f): (&Common, fn(&mut Context) -> Result<String, CliError>) = match cmd {
        Command::Hypcheck(c) => (c, hypcheck),
        Command::NoiseTest(c) => (c, noise_test),
        Command::Simulate(c) => (c, simulate_cmd),
        Command::Density(c) => (c, density),
        Command::Hoelder(c) => (c, hoelder),
        Command::Localize(c) => (c, localize),
        Command::Oracle(c) => (c, oracle),
    };
    let mut ctx = prepare(common)?;
    let summary = f(&mut ctx)?;
    ctx.out.json("config.json", &ctx.cfg)?;
    ctx.out.plot_stub()?;
    Ok(summary)
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

pub fn hypcheck(ctx: &mut Context) -> Result<String, CliError> {
    let (cfg, src) = (&ctx.cfg, &ctx.src);
    let g = cfg.green(src)?;
    let m = cfg.model(src)?;
    let coeffs = cfg.coefficients(src, cfg.coefficients)?;
    let hc = HypConfig {
        horizon: cfg.hyp_horizon,
        h2: if coeffs.satisfies_h2() { Verdict::Holds } else { Verdict::Fails },
        ..HypConfig::default()
    };
    let report = verify_hypotheses(&g, &m, cfg.hyp_gamma4, &hc)?;
    let exps = [
        ("gamma1", &report.gamma1),
        ("gamma2", &report.gamma2),
        ("gamma3", &report.gamma3),
        ("gamma4", &report.gamma4),
        ("alpha1", &report.alpha1),
        ("alpha2", &report.alpha2),
    ];
    ctx.out.csv(
        "exponents.csv",
        &header(&["name", "fitted", "predicted", "r_squared"]),
        exps.iter().map(|(n, e)| {
            vec![s(n), num(e.value), e.predicted.map_or(String::new(), num), num(e.r_squared)]
        }),
    )?;
    ctx.out.csv(
        "scaling.csv",
        &header(&["name", "scale", "value"]),
        exps.iter()
            .flat_map(|(n, e)| e.points.iter().map(move |(x, y)| vec![s(n), num(*x), num(*y)])),
    )?;
    ctx.out.csv(
        "orderings.csv",
        &header(&["ordering", "lhs", "rhs", "holds"]),
        report
            .orderings
            .iter()
            .map(|o| vec![o.label.clone(), num(o.lhs), num(o.rhs), s(o.holds)]),
    )?;
    let table = report.table();
    ctx.out.text("hypcheck.txt", &table)?;
    ctx.out.json("hypcheck.json", &report)?;
    Ok(table)
}

pub fn noise_test(ctx: &mut Context) -> Result<String, CliError> {
    let (cfg, src) = (&ctx.cfg, &ctx.src);
    let m = cfg.model(src)?;
    let grid = cfg.grid(src)?;
    let samples = cfg.samples(src)?;
    let weights = spectral_weights(&m, &grid);
    let gen = NoiseGenerator::new(&weights, &grid)?;
    let lags: Vec<Vec<i64>> = cfg
        .noise_lags
        .iter()
        .map(|&l| {
            let mut v = vec![0; grid.d];
            v[0] = l;
            v
        })
        .collect();
    let est = generator_covariance(&gen, cfg.seed, samples, &lags)?;
    let rows: Vec<Vec<String>> = est
        .iter()
        .map(|e| {
            let oracle = band_limited_covariance(&weights, &grid, &e.lag);
            let z = (e.estimate - oracle) / e.std_error;
            vec![s(e.lag[0]), num(e.estimate), num(e.std_error), num(oracle), num(z)]
        })
        .collect();
    let mut summary = String::from("lag  estimate  std_error  oracle  z\n");
    for r in &rows {
        let _ = writeln!(summary, "{}", r.join("  "));
    }
    ctx.out.csv(
        "covariance.csv",
        &header(&["lag", "estimate", "std_error", "oracle", "z"]),
        rows,
    )?;
    Ok(summary)
}

pub fn simulate_cmd(ctx: &mut Context) -> Result<String, CliError> {
    let spec = ctx.cfg.run_spec(&ctx.src)?;
    let traj = simulate(&spec, ctx.cfg.seed)?;
    let n = spec.grid.len();
    let rows = traj.iter().flat_map(|f| {
        (0..f.fields.len()).flat_map(move |c| {
            (0..n).map(move |i| vec![s(f.provenance.steps), num(f.t), s(i), s(c + 1), num(f.fields[c][i])])
        })
    });
    ctx.out.csv(
        "trajectory.csv",
        &header(&["step", "time", "index", "component", "value"]),
        rows,
    )?;
    let last = traj.last().map_or(0.0, |f| f.fields.iter().flatten().fold(0.0, |a: f64, v| a.max(v.abs())));
    Ok(format!(
        "{} snapshots, scheme {:?}, max |u| at the last one = {last}",
        traj.len(),
        spec.scheme()
    ))
}

#[derive(Serialize)]
struct DensitySummary<'a> {
    bandwidth: &'a [f64],
    samples: usize,
    probe: &'a Probe,
    margin: f64,
    report: &'a spdelab_core::analysis::PositivityReport,
}

pub fn density(ctx: &mut Context) -> Result<String, CliError> {
    let (cfg, src) = (&ctx.cfg, &ctx.src);
    let spec = cfg.run_spec(src)?;
    let samples = cfg.samples(src)?;
    let probe = cfg.probe(src)?;
    let ens = simulate_ensemble(&spec, samples, &probe, cfg.seed)?;
    let k = spec.coeffs.k;
    let mut cols = vec![s("sample")];
    cols.extend((1..=k).map(|i| format!("component_{i}")));
    ctx.out.csv(
        "ensemble.csv",
        &cols,
        ens.samples
            .iter()
            .enumerate()
            .map(|(i, v)| std::iter::once(s(i)).chain(v.iter().map(|x| num(*x))).collect()),
    )?;
    let p = Probe {
        t: ens.t,
        x: ens.probe.clone(),
    };
    let est = kde(&ens.samples, &Bandwidth::Auto)?.with_probe(p.clone());
    let mut cols: Vec<String> = (1..=k).map(|i| format!("y_{i}")).collect();
    cols.push(s("density"));
    ctx.out.csv(
        "density.csv",
        &cols,
        (0..est.values.len()).map(|j| {
            let mut r: Vec<String> = est.point(j).iter().map(|x| num(*x)).collect();
            r.push(num(est.values[j]));
            r
        }),
    )?;
    let region = SigmaRegion::from_samples(spec.coeffs.clone(), &ens.samples, cfg.density_margin_fraction)?;
    let threshold = match cfg.density_threshold {
        Some(t) => t,
        None => default_threshold(&est, cfg.density_quantile_box)?,
    };
    let report = positivity_check(&est, &region, cfg.density_quantile_box, threshold)?;
    ctx.out.json(
        "positivity.json",
        &DensitySummary {
            bandwidth: &est.bandwidth,
            samples: est.m,
            probe: &p,
            margin: region.margin,
            report: &report,
        },
    )?;
    Ok(format!(
        "positivity: {:?} (min density {} vs threshold {threshold}, {} points evaluated, {} excluded by the Σ margin)\n{}",
        report.outcome,
        report.min_density.map_or("n/a".into(), num),
        report.evaluated,
        report.excluded_by_margin,
        report.note
    ))
}

pub fn hoelder(ctx: &mut Context) -> Result<String, CliError> {
    let (cfg, src) = (&ctx.cfg, &ctx.src);
    let spec = cfg.run_spec(src)?;
    if cfg.hoelder_lags.is_empty() {
        return Err(src.error("hoelder_lags", "required by the hoelder subcommand"));
    }
    let probe = cfg.probe(src)?;
    let est = hoelder_estimate(
        &spec,
        &probe,
        cfg.hoelder_direction,
        &cfg.hoelder_lags,
        cfg.hoelder_p,
        cfg.samples(src)?,
        cfg.seed,
    )
    .map_err(|e| match e {
        spdelab_core::Error::Precondition(m) => src.error("hoelder_lags", m),
        e => e.into(),
    })?;
    ctx.out.csv(
        "moments.csv",
        &header(&["lag", "moment"]),
        est.lags.iter().zip(&est.moments).map(|(l, m)| vec![num(*l), num(*m)]),
    )?;
    ctx.out.json("hoelder.json", &est)?;
    Ok(format!(
        "{:?} Hölder exponent {} (95% bootstrap CI [{}, {}], r² {})",
        cfg.hoelder_direction, est.exponent, est.ci[0], est.ci[1], est.r_squared
    ))
}

pub fn localize(ctx: &mut Context) -> Result<String, CliError> {
    let (cfg, src) = (&ctx.cfg, &ctx.src);
    let spec = cfg.run_spec(src)?;
    let probe = cfg.probe(src)?;
    let curve = localization_convergence(&spec, &probe, &cfg.localize_n, cfg.samples(src)?, cfg.seed)?;
    ctx.out.csv(
        "localization.csv",
        &header(&["n", "c_n", "mean_error", "std_error"]),
        curve
            .points
            .iter()
            .map(|p| vec![s(p.n), num(p.c_n), num(p.mean_error), num(p.std_error)]),
    )?;
    ctx.out.json("localization.json", &curve)?;
    let mut out = String::from("n  mean_error  std_error\n");
    for p in &curve.points {
        let _ = writeln!(out, "{}  {}  {}", p.n, p.mean_error, p.std_error);
    }
    let _ = write!(
        out,
        "decay slope {} (strictly decreasing: {})",
        curve.decay_slope,
        curve.strictly_decreasing()
    );
    Ok(out)
}

#[derive(Serialize)]
struct OracleRow {
    t: f64,
    oracle: f64,
    scheme: f64,
    ensemble: f64,
    std_error: f64,
}

pub fn oracle(ctx: &mut Context) -> Result<String, CliError> {
    let (cfg, src) = (&ctx.cfg, &ctx.src);
    let coeffs = CoefficientSet::linear_const(cfg.k, cfg.oracle_c)?;
    let spec = cfg.run_spec_with(src, coeffs)?;
    let samples = cfg.samples(src)?;
    if samples < 2 {
        return Err(src.error("samples", "the oracle comparison needs at least 2 samples"));
    }
    let (idx, _) = spec.grid.snap(&cfg.probe(src)?);
    let mut steps: Vec<usize> = if spec.output_times.is_empty() {
        vec![spec.steps_to(spec.horizon)?]
    } else {
        spec.output_times.iter().map(|&t| spec.steps_to(t)).collect::<Result<_, _>>()?
    };
    steps.retain(|&n| n > 0);
    steps.sort_unstable();
    steps.dedup();
    let n_steps = spec.steps_to(spec.horizon)?;
    let stepper = Stepper::new(&spec)?;
    let seed = cfg.seed;
    let per = ensemble_map(&stepper, samples, |st, sidx, ws| {
        let mut v = Vec::with_capacity(steps.len());
        st.run(StreamKey::new(seed, sidx), n_steps, ws, |f| {
            if steps.binary_search(&f.provenance.steps).is_ok() {
                v.push(f.fields[0][idx]);
            }
            Ok(())
        })?;
        Ok(v)
    })?;
    let rows: Vec<OracleRow> = steps
        .par_iter()
        .enumerate()
        .map(|(j, &n)| {
            let t = n as f64 * spec.grid.dt;
            let xs: Vec<f64> = per.iter().map(|v| v[j]).collect();
            let var = variance(&xs);
            let centred: Vec<f64> = xs.iter().map(|x| (x - mean(&xs)).powi(2)).collect();
            Ok(OracleRow {
                t,
                oracle: gaussian_oracle_variance(&spec.green, &spec.model, cfg.oracle_c, t)?,
                scheme: linear_scheme_variance(&spec.green, &spec.model, &spec.grid, cfg.oracle_c, t)?,
                ensemble: var,
                std_error: (variance(&centred) / xs.len() as f64).sqrt(),
            })
        })
        .collect::<Result<_, spdelab_core::Error>>()?;
    ctx.out.csv(
        "oracle.csv",
        &header(&["t", "oracle_variance", "scheme_variance", "ensemble_variance", "std_error", "z_oracle"]),
        rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.oracle),
                num(r.scheme),
                num(r.ensemble),
                num(r.std_error),
                num((r.ensemble - r.oracle) / r.std_error),
            ]
        }),
    )?;
    let mut out = String::from("t  oracle  scheme  ensemble  std_error\n");
    for r in &rows {
        let _ = writeln!(out, "{}  {}  {}  {}  {}", r.t, r.oracle, r.scheme, r.ensemble, r.std_error);
    }
    Ok(out.trim_end().to_string())
}
