//! Flat TOML run configuration, `--set` overrides and validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spdelab_core::analysis::Direction;
use spdelab_core::solver::{CoefficientSet, Coefficients, RunSpec};
use spdelab_core::{GreenFunction, GridSpec, Kernel, Operator, SpectralModel};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Riesz,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientName {
    LinearConst,
    DriftOnly,
    SinDiag,
    TanhDiag,
    SigmoidMix,
    DiagLinear,
}

fn one() -> usize {
    1
}
fn default_coefficients() -> CoefficientName {
    CoefficientName::LinearConst
}
fn default_samples() -> usize {
    1000
}
fn default_hyp_horizon() -> f64 {
    1.0
}
fn default_noise_lags() -> Vec<i64> {
    vec![0, 1, 2, 4, 8]
}
fn default_quantile_box() -> f64 {
    0.9
}
fn default_margin_fraction() -> f64 {
    0.05
}
fn default_direction() -> Direction {
    Direction::Time
}
fn default_p() -> f64 {
    2.0
}
fn default_localize_n() -> Vec<u32> {
    vec![2, 3, 4, 5]
}
fn default_c() -> f64 {
    1.0
}

/// Every key of the configuration file. Field order is the canonical order
/// used for the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: Operator,
    pub d: usize,
    #[serde(default = "one")]
    pub k: usize,
    pub kernel: KernelName,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default = "default_coefficients")]
    pub coefficients: CoefficientName,
    #[serde(default)]
    pub coeff_a: Option<f64>,
    #[serde(default)]
    pub coeff_c: Option<f64>,
    #[serde(default)]
    pub coeff_b0: Option<Vec<f64>>,
    pub n_points: usize,
    pub extent: f64,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub probe: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    #[serde(default = "default_hyp_horizon")]
    pub hyp_horizon: f64,
    #[serde(default)]
    pub hyp_gamma4: Option<f64>,
    #[serde(default = "default_noise_lags")]
    pub noise_lags: Vec<i64>,
    #[serde(default = "default_quantile_box")]
    pub density_quantile_box: f64,
    #[serde(default)]
    pub density_threshold: Option<f64>,
    #[serde(default = "default_margin_fraction")]
    pub density_margin_fraction: f64,
    #[serde(default = "default_direction")]
    pub hoelder_direction: Direction,
    #[serde(default)]
    pub hoelder_lags: Vec<f64>,
    #[serde(default = "default_p")]
    pub hoelder_p: f64,
    #[serde(default = "default_localize_n")]
    pub localize_n: Vec<u32>,
    #[serde(default = "default_c")]
    pub oracle_c: f64,
    #[serde(default)]
    pub out: Option<String>,
}

/// Configuration text plus the keys overridden on the command line, kept
/// for line-referenced messages.
pub struct Source {
    pub path: String,
    pub text: String,
    pub overridden: Vec<String>,
}

impl Source {
    fn locate(&self, key: &str) -> String {
        if self.overridden.iter().any(|k| k == key) {
            return format!("--set {key}");
        }
        let line = self.text.lines().position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        });
        match line {
            Some(i) => format!("{}:{}: {key}", self.path, i + 1),
            None => format!("{}: {key}", self.path),
        }
    }

    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("{}: {msg}", self.locate(key)))
    }
}

/// Parse `text`, apply `key=value` overrides and deserialize.
pub fn load(path: &str, text: &str, sets: &[String]) -> Result<(RunConfig, Source), CliError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{path}: {e}")))?;
    let mut overridden = Vec::new();
    for s in sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
        let key = key.trim();
        let parsed: toml::Table = format!("{key} = {}", value.trim())
            .parse()
            .or_else(|_| format!("{key} = {:?}", value.trim()).parse())
            .map_err(|e: toml::de::Error| CliError::Config(format!("--set {key}: {e}")))?;
        table.extend(parsed);
        overridden.push(key.to_string());
    }
    let source = Source {
        path: path.to_string(),
        text: text.to_string(),
        overridden,
    };
    let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
        // Re-parse the file alone to recover a span; errors introduced by
        // --set parse cleanly there and keep the plain message.
        match toml::from_str::<RunConfig>(text).err().and_then(|fe| fe.span().map(|sp| (fe, sp))) {
            Some((fe, span)) => {
                let line = text[..span.start].matches('\n').count() + 1;
                CliError::Config(format!("{path}:{line}: {}", fe.message()))
            }
            None => CliError::Config(format!("{path}: {}", e.message())),
        }
    })?;
    Ok((cfg, source))
}

impl RunConfig {
    /// SHA-256 of the canonical JSON serialization, without the output
    /// directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn model(&self, src: &Source) -> Result<SpectralModel, CliError> {
        let kind = match self.kernel {
            KernelName::Riesz => {
                let beta = self.beta.ok_or_else(|| src.error("beta", "required for the riesz kernel"))?;
                let max = 2f64.min(self.d as f64);
                if !(beta > 0.0 && beta < max) {
                    return Err(src.error("beta", format!("must satisfy 0 < beta < min(2, d) = {max}")));
                }
                Kernel::Riesz { beta }
            }
            KernelName::Gaussian => {
                let ell = self.ell.ok_or_else(|| src.error("ell", "required for the gaussian kernel"))?;
                Kernel::GaussianKernel { ell }
            }
        };
        SpectralModel::new(kind, self.d).map_err(|e| src.error(if self.kernel == KernelName::Riesz { "beta" } else { "ell" }, e))
    }

    pub fn green(&self, src: &Source) -> Result<GreenFunction, CliError> {
        if self.operator == Operator::Wave && !(1..=3).contains(&self.d) {
            return Err(src.error("d", "the wave operator needs d <= 3"));
        }
        if !(1..=3).contains(&self.d) {
            return Err(src.error("d", "d must lie in 1..=3"));
        }
        GreenFunction::new(self.operator, self.d).map_err(|e| src.error("operator", e))
    }

    pub fn grid(&self, src: &Source) -> Result<GridSpec, CliError> {
        let g = GridSpec {
            d: self.d,
            n_points: self.n_points,
            extent: self.extent,
            dt: self.dt,
        };
        g.validate().map_err(|e| {
            let key = if !(self.n_points >= 8 && self.n_points.is_power_of_two()) {
                "n_points"
            } else if !(self.extent > 0.0) {
                "extent"
            } else {
                "dt"
            };
            src.error(key, e)
        })?;
        Ok(g)
    }

    pub fn coefficients(&self, src: &Source, name: CoefficientName) -> Result<CoefficientSet, CliError> {
        let a = || self.coeff_a.ok_or_else(|| src.error("coeff_a", "required by the chosen coefficients"));
        let kind = match name {
            CoefficientName::LinearConst => Coefficients::LinearConst {
                c: self.coeff_c.unwrap_or(1.0),
            },
            CoefficientName::DriftOnly => {
                let b0 = self
                    .coeff_b0
                    .clone()
                    .ok_or_else(|| src.error("coeff_b0", "required by drift_only"))?;
                if b0.len() != self.k {
                    return Err(src.error("coeff_b0", format!("needs k = {} entries", self.k)));
                }
                Coefficients::DriftOnly { b0 }
            }
            CoefficientName::SinDiag => Coefficients::SinDiag { a: a()? },
            CoefficientName::TanhDiag => Coefficients::TanhDiag { a: a()? },
            CoefficientName::SigmoidMix => Coefficients::SigmoidMix { a: a()? },
            CoefficientName::DiagLinear => Coefficients::DiagLinear,
        };
        CoefficientSet::new(self.k, kind).map_err(|e| src.error("coefficients", e))
    }

    /// Run specification with the configured coefficients.
    pub fn run_spec(&self, src: &Source) -> Result<RunSpec, CliError> {
        let coeffs = self.coefficients(src, self.coefficients)?;
        self.run_spec_with(src, coeffs)
    }

    pub fn run_spec_with(&self, src: &Source, coeffs: CoefficientSet) -> Result<RunSpec, CliError> {
        let spec = RunSpec {
            green: self.green(src)?,
            model: self.model(src)?,
            grid: self.grid(src)?,
            coeffs,
            horizon: self.horizon,
            output_times: self.output_times.clone(),
        };
        spec.validate().map_err(|e| {
            let msg = e.to_string();
            let key = if msg.contains("wave resolution") {
                "dt"
            } else if msg.contains("extent") {
                "extent"
            } else if msg.contains("output time") {
                "output_times"
            } else {
                "horizon"
            };
            src.error(key, msg)
        })?;
        Ok(spec)
    }

    pub fn probe(&self, src: &Source) -> Result<Vec<f64>, CliError> {
        if self.probe.is_empty() {
            return Ok(vec![0.0; self.d]);
        }
        if self.probe.len() != self.d {
            return Err(src.error("probe", format!("needs d = {} coordinates", self.d)));
        }
        Ok(self.probe.clone())
    }

    pub fn samples(&self, src: &Source) -> Result<usize, CliError> {
        if self.samples == 0 {
            return Err(src.error("samples", "must be at least 1"));
        }
        Ok(self.samples)
    }
}
