//! Run configuration: one JSON document per invocation, CLI flags override fields.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pgsom_core::estimator::BaselineKind;
use pgsom_core::{EstimatorConfig, PolicySpec};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Vanilla REINFORCE ascent.
    Pg,
    /// PG-SOM: momentum preconditioned by the diagonal-Hessian estimate.
    Hessian,
    /// Two-stage Runge-Kutta update.
    Rk,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pg, Method::Hessian, Method::Rk];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pg => "pg",
            Method::Hessian => "hessian",
            Method::Rk => "rk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stabilizer {
    None,
    Clip,
    Entropy,
    Baseline,
}

impl Stabilizer {
    pub const ALL: [Stabilizer; 4] = [Stabilizer::None, Stabilizer::Clip, Stabilizer::Entropy, Stabilizer::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Stabilizer::None => "none",
            Stabilizer::Clip => "clip",
            Stabilizer::Entropy => "entropy",
            Stabilizer::Baseline => "baseline",
        }
    }
}

macro_rules! impl_text {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = HarnessError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .into_iter()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| HarnessError::Config(format!("unknown {} `{s}`", $what)))
            }
        }
    };
}

impl_text!(Method, "method");
impl_text!(Stabilizer, "stabilizer");

/// Environment selector, written `cartpole` or `mdp:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum EnvChoice {
    #[default]
    CartPole,
    Mdp(PathBuf),
}

impl fmt::Display for EnvChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvChoice::CartPole => f.write_str("cartpole"),
            EnvChoice::Mdp(p) => write!(f, "mdp:{}", p.display()),
        }
    }
}

impl FromStr for EnvChoice {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "cartpole" {
            Ok(EnvChoice::CartPole)
        } else if let Some(path) = s.strip_prefix("mdp:").filter(|p| !p.is_empty()) {
            Ok(EnvChoice::Mdp(PathBuf::from(path)))
        } else {
            Err(HarnessError::Config(format!("unknown env `{s}` (expected cartpole or mdp:<path>)")))
        }
    }
}

impl Serialize for EnvChoice {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EnvChoice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_LR: f64 = 0.002;
pub const DEFAULT_CLIP_NORM: f64 = 50.0;
pub const DEFAULT_ENTROPY_COEFF: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub stabilizer: Stabilizer,
    pub env: EnvChoice,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// `None` selects 0.002, doubled when clipping.
    pub lr: Option<f64>,
    pub clip_norm: f64,
    pub gamma: f64,
    /// `None` selects a softmax-linear policy sized to the environment.
    pub policy: Option<PolicySpec>,
    pub estimator: EstimatorConfig<f64>,
    /// λ used by the entropy stabilizer.
    pub entropy_coeff: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub alpha: f64,
    /// Lookahead scale; `None` uses the learning rate.
    pub kappa: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Pg,
            stabilizer: Stabilizer::None,
            env: EnvChoice::CartPole,
            episodes: 500,
            seeds: (0..5).collect(),
            lr: None,
            clip_norm: DEFAULT_CLIP_NORM,
            gamma: 0.99,
            policy: None,
            estimator: EstimatorConfig::default(),
            entropy_coeff: DEFAULT_ENTROPY_COEFF,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            alpha: 0.5,
            kappa: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.episodes == 0 {
            return bad("episodes must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if !self.learning_rate().is_finite() || self.learning_rate() <= 0.0 {
            return bad("learning rate must be positive");
        }
        if !self.clip_norm.is_finite() || self.clip_norm <= 0.0 {
            return bad("clip_norm must be positive and finite");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon >= 0.0) || !(0.0..=1.0).contains(&self.alpha) {
            return bad("epsilon must be non-negative and alpha in [0, 1]");
        }
        if self.kappa.is_some_and(|k| !(k > 0.0 && k.is_finite())) {
            return bad("kappa must be positive");
        }
        if !(self.entropy_coeff >= 0.0) || !(self.estimator.entropy_coeff >= 0.0) {
            return bad("entropy coefficients must be non-negative");
        }
        if !(0.0..1.0).contains(&self.estimator.baseline_decay) {
            return bad("baseline_decay must lie in [0, 1)");
        }
        Ok(())
    }

    /// Effective step size: explicit `lr`, else 0.002 (0.004 with clipping).
    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or(match self.stabilizer {
            Stabilizer::Clip => 2.0 * DEFAULT_LR,
            _ => DEFAULT_LR,
        })
    }

    pub fn lookahead(&self) -> f64 {
        self.kappa.unwrap_or_else(|| self.learning_rate())
    }

    pub fn clipping(&self) -> bool {
        self.stabilizer == Stabilizer::Clip
    }

    /// Estimator settings after applying `gamma` and the stabilizer.
    pub fn effective_estimator(&self) -> EstimatorConfig<f64> {
        let mut est = self.estimator;
        est.discount = self.gamma;
        match self.stabilizer {
            Stabilizer::Entropy => est.entropy_coeff = self.entropy_coeff,
            Stabilizer::Baseline => est.baseline = BaselineKind::RunningMean,
            Stabilizer::None | Stabilizer::Clip => {}
        }
        est
    }

    /// Same configuration with another method/stabilizer pair.
    pub fn variant(&self, method: Method, stabilizer: Stabilizer) -> Self {
        Self {
            method,
            stabilizer,
            ..self.clone()
        }
    }
}
