//! Run configuration: strict TOML parsing, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::belief::KernelSpec;
use crate::error::{Error, Result};
use crate::field::{two_hotspot_components, GmmComponent, PHI_FLOOR};
use crate::policies::dslc::{default_beta, DEFAULT_MAX_EPOCHS, DEFAULT_PROPAGATION_DELAY};
use crate::policies::{DslcConfig, EpochMode, PolicyKind};

pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;
pub const DEFAULT_PRIOR_MEAN: f64 = 0.5;
pub const DEFAULT_KERNEL_VARIANCE: f64 = 1.0;
pub const DEFAULT_LENGTH_SCALE: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_OUTPUT_DIR: &str = "out";
/// Smallest noise variance handed to the belief, relative to the kernel variance.
/// Keeps the posterior well defined when the sensor is noiseless.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSource {
    /// Gaussian mixture; an empty component list means the built-in two-hotspot field.
    Gmm {
        #[serde(default)]
        components: Vec<GmmComponent>,
    },
    /// Kernel density estimate over a CSV point cloud.
    Kde { path: PathBuf, bandwidth: f64 },
    /// Per-vertex field values from a CSV file.
    File { path: PathBuf },
}

impl Default for FieldSource {
    fn default() -> Self {
        FieldSource::Gmm {
            components: two_hotspot_components(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    variance: Option<f64>,
    length_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDslc {
    alpha: Option<f64>,
    beta: Option<f64>,
    epoch_mode: Option<EpochMode>,
    explicit_lengths: Option<Vec<usize>>,
    propagation_delay: Option<usize>,
    max_epochs: Option<usize>,
    strict_theorem: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    policy: Option<PolicyKind>,
    horizon: Option<i64>,
    seeds: Option<Vec<u64>>,
    num_agents: Option<i64>,
    noise_sigma: Option<f64>,
    output_dir: Option<PathBuf>,
    prior_mean: Option<f64>,
    phi_floor: Option<f64>,
    grid: Option<GridSpec>,
    kernel: Option<RawKernel>,
    dslc: Option<RawDslc>,
    field: Option<FieldSource>,
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub policy: PolicyKind,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub num_agents: usize,
    pub noise_sigma: f64,
    pub output_dir: PathBuf,
    pub prior_mean: f64,
    pub phi_floor: f64,
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    pub dslc: DslcConfig,
    pub field: FieldSource,
}

impl RunConfig {
    /// Noise variance used by the belief; never below the configured floor.
    pub fn belief_noise_variance(&self) -> f64 {
        (self.noise_sigma * self.noise_sigma).max(NOISE_VARIANCE_FLOOR * self.kernel.variance)
    }

    /// Every violated constraint.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.grid.rows == 0 || self.grid.cols == 0 {
            out.push("grid.rows and grid.cols must be >= 1".into());
        }
        if !(self.grid.spacing > 0.0 && self.grid.spacing.is_finite()) {
            out.push(format!("grid.spacing must be positive, got {}", self.grid.spacing));
        }
        let n = self.grid.rows * self.grid.cols;
        if self.num_agents == 0 {
            out.push("num_agents must be >= 1".into());
        } else if self.num_agents > n {
            out.push(format!("num_agents = {} exceeds the {n} grid vertices", self.num_agents));
        }
        if self.horizon == 0 {
            out.push("horizon must be >= 1".into());
        }
        if self.seeds.is_empty() {
            out.push("seeds must be nonempty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            out.push("seeds must be distinct".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            out.push(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !self.prior_mean.is_finite() {
            out.push("prior_mean must be finite".into());
        }
        if !(self.phi_floor > 0.0 && self.phi_floor < 1.0) {
            out.push(format!("phi_floor must lie in (0, 1), got {}", self.phi_floor));
        }
        if let Err(e) = self.kernel.validate() {
            out.push(format!("kernel: {e}"));
        }
        out.extend(self.dslc.problems());
        if self.policy == PolicyKind::Dslc && self.dslc.epoch_mode == EpochMode::Explicit {
            let total: usize = self.dslc.explicit_lengths.iter().sum();
            if (total as u64) < self.horizon {
                out.push(format!(
                    "horizon {} exceeds the {total} iterations covered by dslc.explicit_lengths",
                    self.horizon
                ));
            }
        }
        match &self.field {
            FieldSource::Gmm { components } => {
                for (k, c) in components.iter().enumerate() {
                    if !(c.weight > 0.0 && c.scale > 0.0) {
                        out.push(format!("field.components[{k}]: weight and scale must be positive"));
                    }
                }
            }
            FieldSource::Kde { bandwidth, .. } => {
                if !(*bandwidth > 0.0 && bandwidth.is_finite()) {
                    out.push(format!("field.bandwidth must be positive, got {bandwidth}"));
                }
            }
            FieldSource::File { .. } => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

/// Parses and validates a config file. Relative field paths resolve against
/// the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_owned(),
            message,
        },
        other => other,
    })
}

/// Parses and validates config text; `base` anchors relative paths.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: PathBuf::from("<config>"),
        message: e.to_string(),
    })?;
    let mut missing = Vec::new();
    if raw.grid.is_none() {
        missing.push("missing required section [grid]".to_string());
    }
    if raw.horizon.is_none() {
        missing.push("missing required key horizon".to_string());
    }
    if raw.seeds.is_none() {
        missing.push("missing required key seeds".to_string());
    }
    if raw.num_agents.is_none() {
        missing.push("missing required key num_agents".to_string());
    }
    let mut negative = Vec::new();
    if raw.horizon.is_some_and(|h| h < 0) {
        negative.push("horizon must be >= 1".to_string());
    }
    if raw.num_agents.is_some_and(|n| n < 0) {
        negative.push("num_agents must be >= 1".to_string());
    }
    if !missing.is_empty() || !negative.is_empty() {
        missing.extend(negative);
        return Err(Error::Config(missing));
    }

    let kernel = raw.kernel.unwrap_or_default();
    let d = raw.dslc.unwrap_or_default();
    let alpha = d.alpha.unwrap_or(DEFAULT_ALPHA);
    let epoch_mode = d.epoch_mode.unwrap_or(if d.explicit_lengths.is_some() {
        EpochMode::Explicit
    } else {
        EpochMode::Theorem
    });
    let explicit_lengths = d.explicit_lengths.unwrap_or_default();
    let max_epochs = d.max_epochs.unwrap_or(match epoch_mode {
        EpochMode::Explicit => explicit_lengths.len().max(1),
        EpochMode::Theorem => DEFAULT_MAX_EPOCHS,
    });
    let dslc = DslcConfig {
        alpha,
        beta: d.beta.unwrap_or_else(|| default_beta(alpha)),
        epoch_mode,
        explicit_lengths,
        propagation_delay: d.propagation_delay.unwrap_or(DEFAULT_PROPAGATION_DELAY),
        max_epochs,
        strict_theorem: d.strict_theorem.unwrap_or(false),
    };
    let field = match raw.field.unwrap_or_default() {
        FieldSource::Gmm { components } if components.is_empty() => FieldSource::default(),
        FieldSource::Kde { path, bandwidth } => FieldSource::Kde {
            path: base.join(path),
            bandwidth,
        },
        FieldSource::File { path } => FieldSource::File { path: base.join(path) },
        other => other,
    };
    let cfg = RunConfig {
        policy: raw.policy.unwrap_or(PolicyKind::Dslc),
        horizon: raw.horizon.expect("checked above") as u64,
        seeds: raw.seeds.expect("checked above"),
        num_agents: raw.num_agents.expect("checked above") as usize,
        noise_sigma: raw.noise_sigma.unwrap_or(DEFAULT_NOISE_SIGMA),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        prior_mean: raw.prior_mean.unwrap_or(DEFAULT_PRIOR_MEAN),
        phi_floor: raw.phi_floor.unwrap_or(PHI_FLOOR),
        grid: raw.grid.expect("checked above"),
        kernel: KernelSpec {
            variance: kernel.variance.unwrap_or(DEFAULT_KERNEL_VARIANCE),
            length_scale: kernel.length_scale.unwrap_or(DEFAULT_LENGTH_SCALE),
        },
        dslc,
        field,
    };
    cfg.validate()?;
    Ok(cfg)
}
