use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::learners::{BaseLearner, TreeConfig};
use crate::ssl::{PseudoInit, CONFIDENCE_LEVELS};
use crate::{Error, Result};

pub const DEFAULT_SPLITS: [f64; 5] = [0.01, 0.10, 0.33, 0.67, 0.90];
pub const DEFAULT_RUNS: usize = 10;
pub const TECHNIQUE_NAMES: [&str; 7] = [
    "supervised",
    "assemble-1nn",
    "assemble-class0",
    "sample-select",
    "reweight",
    "cotrain",
    "cc",
];

/// Where a dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    /// An artificial `A_B_C_D` dataset.
    Generated {
        generate: String,
        #[serde(default = "default_train_size")]
        train_size: usize,
        #[serde(default = "default_test_size")]
        test_size: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Typed-header CSV files. Relative paths resolve against the config
    /// file's directory.
    Files { train: PathBuf, test: PathBuf },
}

fn default_train_size() -> usize {
    8000
}

fn default_test_size() -> usize {
    4000
}

/// Missing-label mechanism used to split a dataset. MCAR when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum BiasSpec {
    Mcar,
    /// Censoring on two continuous features with equal-quantile thresholds
    /// chosen so the unlabeled share is `1 - fraction`.
    Mar {
        features: (usize, usize),
    },
    Mnar {
        rho: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
    #[serde(default)]
    pub bias: Option<BiasSpec>,
    /// The training file already marks unlabeled rows with `?`; the dataset
    /// contributes one run at its own labeled fraction.
    #[serde(default)]
    pub fixed_split: bool,
}

/// A technique entry as written in the config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueConfig {
    pub name: String,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub m: Option<usize>,
    /// `naive_bayes` or `tree`.
    #[serde(default)]
    pub base: Option<String>,
    #[serde(default)]
    pub n_bins: Option<usize>,
}

/// A validated technique with all hyperparameters resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Technique {
    Supervised {
        base: BaseLearner,
    },
    Assemble {
        init: PseudoInit,
        alpha: f64,
        base: BaseLearner,
    },
    SampleSelect {
        base: BaseLearner,
    },
    Reweight {
        base: BaseLearner,
        n_bins: usize,
    },
    CoTrain {
        confidence: f64,
    },
    Cc {
        m: usize,
    },
}

impl Technique {
    pub fn name(&self) -> &'static str {
        match self {
            Technique::Supervised { .. } => "supervised",
            Technique::Assemble {
                init: PseudoInit::Nn1, ..
            } => "assemble-1nn",
            Technique::Assemble {
                init: PseudoInit::Class0,
                ..
            } => "assemble-class0",
            Technique::SampleSelect { .. } => "sample-select",
            Technique::Reweight { .. } => "reweight",
            Technique::CoTrain { .. } => "cotrain",
            Technique::Cc { .. } => "cc",
        }
    }

    /// The swept hyperparameter as `key=value`, for techniques that have one.
    pub fn hyperparameter(&self) -> Option<String> {
        match self {
            Technique::Assemble { alpha, .. } => Some(format!("alpha={alpha}")),
            Technique::CoTrain { confidence } => Some(format!("confidence={confidence}")),
            Technique::Cc { m } => Some(format!("m={m}")),
            _ => None,
        }
    }

    /// Label used in result records: the name, plus `:key=value` when the
    /// technique has a swept hyperparameter.
    pub fn label(&self) -> String {
        match self.hyperparameter() {
            Some(h) => format!("{}:{h}", self.name()),
            None => self.name().to_string(),
        }
    }

    pub fn supervised() -> Self {
        Technique::Supervised {
            base: BaseLearner::NaiveBayes,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Splits a record label into technique name and hyperparameter.
pub fn split_label(label: &str) -> (&str, Option<&str>) {
    match label.split_once(':') {
        Some((n, h)) => (n, Some(h)),
        None => (label, None),
    }
}

fn parse_base(base: Option<&str>) -> Result<BaseLearner> {
    match base.unwrap_or("naive_bayes") {
        "naive_bayes" | "nb" => Ok(BaseLearner::NaiveBayes),
        "tree" => Ok(BaseLearner::Tree(TreeConfig::default())),
        other => Err(Error::Config(format!("unknown base learner `{other}`"))),
    }
}

impl TechniqueConfig {
    pub fn named(name: &str) -> Self {
        TechniqueConfig {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<Technique> {
        let unused = |what: &str, set: bool| {
            if set {
                Err(Error::Config(format!("`{what}` does not apply to {}", self.name)))
            } else {
                Ok(())
            }
        };
        let base = parse_base(self.base.as_deref())?;
        let t = match self.name.as_str() {
            "supervised" | "sample-select" | "reweight" => {
                unused("confidence", self.confidence.is_some())?;
                unused("alpha", self.alpha.is_some())?;
                unused("m", self.m.is_some())?;
                match self.name.as_str() {
                    "supervised" => Technique::Supervised { base },
                    "sample-select" => Technique::SampleSelect { base },
                    _ => {
                        let n_bins = self.n_bins.unwrap_or(10);
                        if n_bins == 0 {
                            return Err(Error::Config("n_bins must be at least 1".into()));
                        }
                        Technique::Reweight { base, n_bins }
                    }
                }
            }
            "assemble-1nn" | "assemble-class0" => {
                unused("confidence", self.confidence.is_some())?;
                unused("m", self.m.is_some())?;
                let alpha = self.alpha.unwrap_or(1.0);
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::Config(format!("alpha {alpha} outside (0, 1]")));
                }
                let init = if self.name == "assemble-1nn" {
                    PseudoInit::Nn1
                } else {
                    PseudoInit::Class0
                };
                Technique::Assemble { init, alpha, base }
            }
            "cotrain" => {
                unused("alpha", self.alpha.is_some())?;
                unused("m", self.m.is_some())?;
                unused("base", self.base.is_some())?;
                let confidence = self.confidence.unwrap_or(0.95);
                if !CONFIDENCE_LEVELS.contains(&confidence) {
                    return Err(Error::Config(format!(
                        "confidence {confidence} is not one of 0.90, 0.95, 0.99"
                    )));
                }
                Technique::CoTrain { confidence }
            }
            "cc" => {
                unused("confidence", self.confidence.is_some())?;
                unused("alpha", self.alpha.is_some())?;
                unused("base", self.base.is_some())?;
                let m = self.m.unwrap_or(6);
                if m == 0 {
                    return Err(Error::Config("m must be at least 1".into()));
                }
                Technique::Cc { m }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown technique `{other}`; expected one of {}",
                    TECHNIQUE_NAMES.join(", ")
                )))
            }
        };
        if self.n_bins.is_some() && !matches!(t, Technique::Reweight { .. }) {
            return Err(Error::Config(format!("`n_bins` does not apply to {}", self.name)));
        }
        Ok(t)
    }
}

fn default_splits() -> Vec<f64> {
    DEFAULT_SPLITS.to_vec()
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_splits")]
    pub splits: Vec<f64>,
    /// Worker threads; `None` uses every core, `Some(1)` runs serially.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Record wall-clock seconds per fit. Off by default so results files
    /// are byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default, rename = "technique")]
    pub techniques: Vec<TechniqueConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, resolving relative dataset paths against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if let DatasetSource::Files { train, test } = &mut d.source {
                for p in [train, test] {
                    if p.is_relative() {
                        *p = dir.join(&*p);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if self.splits.is_empty() {
            return Err(Error::Config("no labeled fractions given".into()));
        }
        for &f in &self.splits {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("labeled fraction {f} outside (0, 1]")));
            }
        }
        let mut seen = BTreeSet::new();
        for f in &self.splits {
            if !seen.insert(f.to_bits()) {
                return Err(Error::Config(format!("labeled fraction {f} listed twice")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if d.name.is_empty() {
                return Err(Error::Config("empty dataset name".into()));
            }
            if !names.insert(d.name.as_str()) {
                return Err(Error::Config(format!("duplicate dataset name `{}`", d.name)));
            }
            if d.fixed_split && d.bias.is_some() {
                return Err(Error::Config(format!(
                    "dataset `{}`: a fixed split cannot also carry a bias mechanism",
                    d.name
                )));
            }
            if let Some(BiasSpec::Mnar { rho }) = d.bias {
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(Error::Config(format!(
                        "dataset `{}`: rho {rho} outside [-1, 1]",
                        d.name
                    )));
                }
            }
        }
        self.resolved_techniques().map(|_| ())
    }

    /// The configured techniques, supervised first (added when absent),
    /// each label appearing once.
    pub fn resolved_techniques(&self) -> Result<Vec<Technique>> {
        let mut out: Vec<Technique> = Vec::new();
        for t in &self.techniques {
            let t = t.resolve()?;
            if out.iter().any(|o| o.label() == t.label()) {
                return Err(Error::Config(format!("technique `{}` listed twice", t.label())));
            }
            out.push(t);
        }
        if !out.iter().any(|t| t.name() == "supervised") {
            out.insert(0, Technique::supervised());
        }
        Ok(out)
    }
}
