//! Run configuration: one TOML document with typed blocks. Unknown keys are
//! rejected everywhere and every block is validated before any computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::KernelSpec;
use crate::lattice::{NormParams, WeightFunction};
use crate::measure::Threshold;
use crate::simulator::Scheme;
use crate::timeplan::Regime;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing required block [{0}]")]
    MissingBlock(&'static str),
    #[error("invalid [{block}]: {msg}")]
    Invalid { block: &'static str, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    Gevrey { g: f64, c_f: f64 },
    LogUltra { theta: f64, c_f: f64 },
}

impl WeightConfig {
    pub fn build(&self) -> Result<WeightFunction, ConfigError> {
        let w = match *self {
            WeightConfig::Gevrey { g, c_f } => WeightFunction::gevrey(g, c_f),
            WeightConfig::LogUltra { theta, c_f } => WeightFunction::log_ultra(theta, c_f),
        };
        w.map_err(|e| ConfigError::Invalid { block: "weight", msg: e.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizeConfig {
    pub modes: usize,
    pub degree: usize,
    /// threshold gamma of the non-resonant domain
    pub gamma: f64,
    /// radius for the rational stage
    pub rational_radius: f64,
    #[serde(default = "yes")]
    pub rational: bool,
    #[serde(default)]
    pub keep_remainder: bool,
    #[serde(default)]
    pub h_budget: u32,
    #[serde(default = "ten")]
    pub c1: f64,
    #[serde(default = "ten")]
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    Zero,
    #[default]
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub modes: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "strang")]
    pub scheme: Scheme,
    #[serde(default = "hundred")]
    pub observer_stride: u64,
    pub radius: f64,
    pub gamma: f64,
    /// half the length of the gated multi-indices
    #[serde(default = "two")]
    pub d: usize,
    /// ensemble size of the stability experiment; 0 skips it
    #[serde(default)]
    pub members: usize,
    #[serde(default)]
    pub initial: InitialData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub modes: usize,
    pub d: usize,
    pub samples: usize,
    #[serde(default = "unit_radius")]
    pub radius: f64,
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub threshold: Threshold,
    /// volume-identity slice index; omitted skips the check
    #[serde(default)]
    pub jstar: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeplanConfig {
    pub regime: Regime,
    pub d_grid: Vec<u32>,
    pub iota: f64,
    pub a: f64,
    pub s: f64,
    pub weight: f64,
    pub p: u32,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub kernel: Option<KernelSpec>,
    pub weight: Option<WeightConfig>,
    pub norm: Option<NormParams>,
    pub normalize: Option<NormalizeConfig>,
    pub simulate: Option<SimulateConfig>,
    pub measure: Option<MeasureConfig>,
    pub timeplan: Option<TimeplanConfig>,
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn two() -> usize {
    2
}
fn hundred() -> u64 {
    100
}
fn unit_radius() -> f64 {
    1.0
}
fn strang() -> Scheme {
    Scheme::Strang
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn invalid(block: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { block, msg: msg.into() }
}

fn positive(block: &'static str, name: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(block, format!("{name} must be positive and finite, got {x}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.version != SCHEMA_VERSION {
            return Err(invalid("root", format!("unsupported schema version {} (expected {SCHEMA_VERSION})", cfg.version)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn kernel(&self) -> Result<KernelSpec, ConfigError> {
        let k = self.kernel.ok_or(ConfigError::MissingBlock("kernel"))?;
        k.validate().map_err(|e| invalid("kernel", e.to_string()))?;
        Ok(k)
    }

    pub fn weight(&self) -> Result<WeightFunction, ConfigError> {
        self.weight.ok_or(ConfigError::MissingBlock("weight"))?.build()
    }

    pub fn norm(&self) -> Result<NormParams, ConfigError> {
        let n = self.norm.ok_or(ConfigError::MissingBlock("norm"))?;
        positive("norm", "s", n.s)?;
        positive("norm", "r", n.r)?;
        if !(n.s0 >= 0.0 && n.s0 < n.s) {
            return Err(invalid("norm", format!("need 0 <= s0 < s, got s0 = {}, s = {}", n.s0, n.s)));
        }
        Ok(n)
    }

    pub fn normalize(&self) -> Result<NormalizeConfig, ConfigError> {
        let c = self.normalize.ok_or(ConfigError::MissingBlock("normalize"))?;
        if c.modes < 1 || c.modes > crate::poly::MAX_MODE as usize {
            return Err(invalid("normalize", format!("modes must lie in 1..={}", crate::poly::MAX_MODE)));
        }
        if c.degree < 4 {
            return Err(invalid("normalize", "degree must be at least 4"));
        }
        positive("normalize", "gamma", c.gamma)?;
        positive("normalize", "rational_radius", c.rational_radius)?;
        Ok(c)
    }

    pub fn simulate(&self) -> Result<SimulateConfig, ConfigError> {
        let c = self.simulate.ok_or(ConfigError::MissingBlock("simulate"))?;
        if c.modes < 1 {
            return Err(invalid("simulate", "modes must be at least 1"));
        }
        positive("simulate", "dt", c.dt)?;
        if !(c.t_end >= 0.0) {
            return Err(invalid("simulate", "t_end must be non-negative"));
        }
        positive("simulate", "radius", c.radius)?;
        if !(c.gamma >= 0.0) {
            return Err(invalid("simulate", "gamma must be non-negative"));
        }
        if c.observer_stride == 0 {
            return Err(invalid("simulate", "observer_stride must be positive"));
        }
        if c.d < 1 {
            return Err(invalid("simulate", "d must be at least 1"));
        }
        Ok(c)
    }

    pub fn measure(&self) -> Result<MeasureConfig, ConfigError> {
        let c = self.measure.clone().ok_or(ConfigError::MissingBlock("measure"))?;
        if c.modes < 1 || c.d < 1 {
            return Err(invalid("measure", "modes and d must be at least 1"));
        }
        if c.samples < crate::measure::MIN_SAMPLES {
            return Err(invalid("measure", format!("samples must be at least {}", crate::measure::MIN_SAMPLES)));
        }
        positive("measure", "radius", c.radius)?;
        if c.gammas.is_empty() || c.gammas.iter().any(|g| !(*g >= 0.0)) {
            return Err(invalid("measure", "gammas must be a non-empty list of non-negative values"));
        }
        Ok(c)
    }

    pub fn timeplan(&self) -> Result<TimeplanConfig, ConfigError> {
        let c = self.timeplan.clone().ok_or(ConfigError::MissingBlock("timeplan"))?;
        if c.d_grid.is_empty() || c.d_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("timeplan", "d_grid must be a non-empty increasing list"));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
version = 1
seed = 3
[kernel]
kind = "power"
p = 2
[weight]
kind = "gevrey"
g = 0.5
c_f = 0.9
[norm]
s = 1.0
s0 = 0.5
r = 0.05
"#;

    #[test]
    fn parses_blocks() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.kernel().unwrap(), KernelSpec::PowerLaw { p: 2 });
        assert!(cfg.weight().is_ok());
        assert!(matches!(cfg.simulate(), Err(ConfigError::MissingBlock("simulate"))));
    }

    #[test]
    fn rejects_unknown_keys_and_kinds() {
        let extra = format!("{BASE}\nbogus = 1\n");
        assert!(matches!(RunConfig::from_toml(&extra), Err(ConfigError::Parse(_))));
        let bad = BASE.replace("kind = \"power\"", "kind = \"gaussian\"");
        assert!(matches!(RunConfig::from_toml(&bad), Err(ConfigError::Parse(_))));
        let nested = BASE.replace("p = 2", "p = 2\nq = 1");
        assert!(RunConfig::from_toml(&nested).is_err());
    }

    #[test]
    fn validates_values() {
        let bad = BASE.replace("s0 = 0.5", "s0 = 2.0");
        assert!(matches!(RunConfig::from_toml(&bad).unwrap().norm(), Err(ConfigError::Invalid { .. })));
        let v2 = BASE.replace("version = 1", "version = 2");
        assert!(RunConfig::from_toml(&v2).is_err());
    }
}
