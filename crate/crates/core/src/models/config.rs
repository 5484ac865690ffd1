use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden width used by every default architecture.
pub const DEFAULT_WIDTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "VAR")]
    Var,
    #[serde(rename = "LeKVAR")]
    LeKVar,
    #[serde(rename = "cMLP")]
    CMlp,
    #[serde(rename = "cMLPwF")]
    CMlpWf,
    #[serde(rename = "cLSTM")]
    CLstm,
    #[serde(rename = "cLSTMwF")]
    CLstmWf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Var,
        ModelKind::LeKVar,
        ModelKind::CMlp,
        ModelKind::CMlpWf,
        ModelKind::CLstm,
        ModelKind::CLstmWf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Var => "VAR",
            ModelKind::LeKVar => "LeKVAR",
            ModelKind::CMlp => "cMLP",
            ModelKind::CMlpWf => "cMLPwF",
            ModelKind::CLstm => "cLSTM",
            ModelKind::CLstmWf => "cLSTMwF",
        }
    }

    /// One model per target series rather than one joint model.
    pub fn is_component_wise(self) -> bool {
        !matches!(self, ModelKind::Var | ModelKind::LeKVar)
    }

    pub fn is_decoupled(self) -> bool {
        matches!(self, ModelKind::CMlpWf | ModelKind::CLstmWf)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, ModelKind::CLstm | ModelKind::CLstmWf)
    }
}

/// A named model family such as `cMLPwF` or `cLSTM_s` (the `_s` suffix
/// selects the single-hidden-layer variant).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub small: bool,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, small: bool) -> Self {
        Self { kind, small }
    }

    pub fn hidden(&self) -> Vec<usize> {
        match self.kind {
            ModelKind::Var => vec![],
            ModelKind::LeKVar => vec![DEFAULT_WIDTH],
            _ if self.small => vec![DEFAULT_WIDTH],
            _ => vec![DEFAULT_WIDTH, DEFAULT_WIDTH],
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        if self.small {
            f.write_str("_s")?;
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, small) = match s.strip_suffix("_s") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let kind = ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == base)
            .ok_or_else(|| Error::Config(format!("unknown model kind '{s}'")))?;
        if small && !kind.is_component_wise() {
            return Err(Error::Config(format!("'{s}': only component-wise models have a small variant")));
        }
        Ok(Self { kind, small })
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How LeKVAR transforms each lagged value before the linear map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    #[default]
    Learned,
    /// ξ(x) = x; reduces LeKVAR to VAR.
    Identity,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Target series for component-wise kinds; absent for joint models.
    pub target: Option<usize>,
    pub num_series: usize,
    pub max_lag: usize,
    pub hidden: Vec<usize>,
    pub small: bool,
    /// Use unit-norm penalized groups in the forward pass. Disabling it
    /// restores the degenerate objective and exists for demonstrations.
    #[serde(default = "default_true")]
    pub weight_normalization: bool,
    #[serde(default)]
    pub kernel: KernelMode,
}

impl ModelConfig {
    pub fn new(spec: ModelSpec, num_series: usize, max_lag: usize, target: Option<usize>) -> Result<Self> {
        let cfg = Self {
            kind: spec.kind,
            target,
            num_series,
            max_lag,
            hidden: spec.hidden(),
            small: spec.small,
            weight_normalization: true,
            kernel: KernelMode::Learned,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec::new(self.kind, self.small)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_series == 0 || self.max_lag == 0 {
            return Err(Error::Config("num_series and max_lag must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        match (self.kind.is_component_wise(), self.target) {
            (true, None) => Err(Error::Config(format!("{} needs a target series", self.kind.name()))),
            (true, Some(i)) if i >= self.num_series => Err(Error::Config(format!(
                "target {i} out of range for {} series",
                self.num_series
            ))),
            (false, Some(_)) => Err(Error::Config(format!(
                "{} predicts all series jointly and takes no target",
                self.kind.name()
            ))),
            _ if self.kind.is_component_wise() && self.hidden.is_empty() => {
                Err(Error::Config("component-wise models need at least one hidden layer".into()))
            }
            _ if self.kind == ModelKind::LeKVar && self.hidden.len() != 1 => {
                Err(Error::Config("the LeKVAR kernel has exactly one hidden layer".into()))
            }
            _ => Ok(()),
        }
    }

    /// Number of predicted outputs.
    pub fn outputs(&self) -> usize {
        if self.kind.is_component_wise() {
            1
        } else {
            self.num_series
        }
    }
}
