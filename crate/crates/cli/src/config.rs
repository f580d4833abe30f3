//! Run configuration: TOML, or JSON for the same schema. Unknown keys are
//! rejected everywhere, and errors name the offending field path.

use std::path::{Path, PathBuf};

use alignflow::geometry::geometric_radii;
use alignflow::{IntegratorConfig, KernelFamily, LimitConfig, ScenarioSpec};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    /// Replaces the kernel of the scenario builder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelFamily>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityConfig>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub limit: LimitConfig,
    /// Cantor truncation depth `J`; replaces the builder's `depth`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    /// Box-counting radii; the automatic window is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_radii: Option<RadiiSchedule>,
    /// Labels whose limit image gets a local-dimension fit.
    pub local: Vec<LocalPoint>,
}

/// Radii `r0, r0/2, ..., r0/2^(count-1)`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RadiiSchedule {
    pub r0: f64,
    pub count: usize,
}

impl RadiiSchedule {
    pub fn radii(&self) -> Vec<f64> {
        geometric_radii(self.r0, self.count)
    }
}

/// Local dimension at `Xbar(alpha)`, on `count` radii evenly spaced in log
/// from `r_max` down to `r_min`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LocalPoint {
    pub alpha: f64,
    pub r_max: f64,
    pub r_min: f64,
    pub count: usize,
}

impl Default for LocalPoint {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            r_max: 1e-2,
            r_min: 1e-4,
            count: 9,
        }
    }
}

impl LocalPoint {
    pub fn radii(&self) -> Vec<f64> {
        let n = self.count.max(2) - 1;
        (0..=n)
            .map(|k| self.r_max * (self.r_min / self.r_max).powf(k as f64 / n as f64))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Overridden by `--out`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// The second run of a stability pair: either a full scenario or a velocity
/// perturbation `u0 + eps psi` of the first.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub eps: f64,
    /// Expression in `x` (and `y`).
    pub psi: String,
}

#[derive(Debug)]
pub enum Loaded {
    Config(Box<RunConfig>),
    /// The file holds no keys at all.
    Empty,
}

pub fn parse(text: &str, json: bool) -> Result<Loaded> {
    if text.trim().is_empty() {
        return Ok(Loaded::Empty);
    }
    let cfg: RunConfig = if json {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("config error at `{}`: {}", e.path(), e.inner()))?
    } else {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            anyhow::anyhow!("config error at `{}`: {}", e.path(), e.inner().message().trim())
        })?
    };
    cfg.resolved().map(|c| Loaded::Config(Box::new(c)))
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse(&text, json).with_context(|| format!("in {}", path.display()))
}

impl RunConfig {
    /// Folds the override blocks into the scenario, so the manifest echoes
    /// exactly what runs.
    pub fn resolved(mut self) -> Result<Self> {
        if let Some(k) = self.kernel.take() {
            match self.scenario.kernel_mut() {
                Some(slot) => *slot = k,
                None => bail!(
                    "config error at `kernel`: the {} builder has a fixed constant kernel",
                    self.scenario.name()
                ),
            }
        }
        if let Some(j) = self.analysis.depth.take() {
            match &mut self.scenario {
                ScenarioSpec::Cantor(p) => p.depth = j,
                s => bail!("config error at `analysis.depth`: the {} builder has no truncation depth", s.name()),
            }
        }
        if let Some(st) = &self.stability {
            if st.second.is_some() == st.perturbation.is_some() {
                bail!("config error at `stability`: give exactly one of `second` and `perturbation`");
            }
        }
        Ok(self)
    }
}
