//! JSON configuration files. Relative paths inside a config resolve against
//! the directory holding that config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use corrgress::diagnostics::Profile;
use corrgress::engine::{PriorConfig, SamplerConfig};
use corrgress::feasibility::TestSetStrategy;
use corrgress::model::{MeasurementParams, ModelSpec, ModelSpecDoc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A model given inline or as a path to a JSON model file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(ModelSpecDoc),
}

/// Measurement parameters given inline or as a path.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasurementRef {
    Path(PathBuf),
    Inline(MeasurementParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateDist {
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl CovariateDist {
    fn validate(&self, name: &str) -> Result<(), CliError> {
        let ok = match *self {
            Self::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Self::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::invalid(format!("covariate {name:?}: invalid distribution {self:?}")))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelRef,
    pub n: usize,
    pub measurement: MeasurementRef,
    /// Structural parameters by column name; unnamed ones are 0 (`sigma` 1).
    #[serde(default)]
    pub truth: BTreeMap<String, f64>,
    /// One distribution per non-constant base covariate.
    pub covariates: BTreeMap<String, CovariateDist>,
    #[serde(default)]
    pub missing_rate: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMeasurementConfig {
    pub model: ModelRef,
    pub data: PathBuf,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_nodes() -> usize {
    64
}

fn default_tolerance() -> f64 {
    1e-5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: ModelRef,
    pub data: PathBuf,
    /// Defaults to `measurement.json` in the output directory.
    #[serde(default)]
    pub measurement: Option<MeasurementRef>,
    #[serde(default = "default_strategy")]
    pub test_set: TestSetStrategy,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Profiles for fitted correlations and class probabilities in `summarize`.
    #[serde(default)]
    pub profiles: Vec<Profile>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_strategy() -> TestSetStrategy {
    TestSetStrategy::ObservedDistinct
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckFeasibleConfig {
    pub model: ModelRef,
    /// Coefficients by column name, e.g. `alpha.A:B.const`; unnamed ones are 0.
    #[serde(default)]
    pub alpha: BTreeMap<String, f64>,
    #[serde(default = "default_strategy")]
    pub test_set: TestSetStrategy,
    /// Required by the observed-distinct strategy.
    #[serde(default)]
    pub data: Option<PathBuf>,
}

/// A parsed config and the directory its relative paths refer to.
pub struct Loaded<T> {
    pub config: T,
    pub dir: PathBuf,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    pub fn model(&self, m: &ModelRef) -> Result<ModelSpec, CliError> {
        let doc = match m {
            ModelRef::Inline(doc) => doc.clone(),
            ModelRef::Path(p) => read_json(&self.resolve(p))?,
        };
        ModelSpec::from_doc(doc).map_err(CliError::invalid)
    }

    pub fn measurement(&self, m: &MeasurementRef) -> Result<MeasurementParams, CliError> {
        match m {
            MeasurementRef::Inline(p) => Ok(p.clone()),
            MeasurementRef::Path(p) => read_json(&self.resolve(p)),
        }
    }

    /// Output directory: the flag wins over the config field.
    pub fn out_dir(&self, flag: Option<&Path>, field: Option<&Path>) -> Result<PathBuf, CliError> {
        match (flag, field) {
            (Some(p), _) => Ok(p.to_path_buf()),
            (None, Some(p)) => Ok(self.resolve(p)),
            (None, None) => Err(CliError::invalid("no output directory: pass --out or set \"out\"")),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, CliError> {
    let config = read_json(path)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, dir })
}

impl SimulateConfig {
    pub fn validate(&self, spec: &ModelSpec) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::invalid("n must be positive"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(CliError::invalid("missing_rate must lie in [0, 1)"));
        }
        for name in spec.base_names() {
            let d = self
                .covariates
                .get(name)
                .ok_or_else(|| CliError::invalid(format!("no distribution for covariate {name:?}")))?;
            d.validate(name)?;
        }
        if let Some(extra) = self.covariates.keys().find(|k| !spec.base_names().contains(k)) {
            return Err(CliError::invalid(format!("covariate {extra:?} is not in the model")));
        }
        Ok(())
    }
}

impl FitMeasurementConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.quadrature_nodes < corrgress::measurement::MIN_NODES {
            return Err(CliError::invalid(format!(
                "quadrature_nodes must be at least {}",
                corrgress::measurement::MIN_NODES
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(CliError::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}
