//! Differentiable categorical policies π_θ(a | obs).
//!
//! Two policy classes share one flat parameter vector layout contract:
//!
//! * `SoftmaxLinear`: logits `z_a = Σ_i obs_i θ[i·A + a]`. Log-probability
//!   derivatives and the entropy gradient are available in closed form.
//! * `Mlp1h`: one hidden layer, `z = W2 · act(W1 · obs + b1) + b2`. The
//!   gradient comes from a reverse sweep and the exact Hessian diagonal from
//!   `D` forward-over-reverse Hessian-vector products.

pub mod ad;
mod linear;
mod mlp;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vecops::sample_index;
use crate::Real;

/// Probability floor applied before taking logarithms.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("action {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("malformed parameter bytes: length {0} is not a multiple of 8")]
    MalformedBytes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    SoftmaxLinear,
    #[serde(rename = "mlp-1h")]
    Mlp1h,
}

/// Hidden-layer nonlinearity of `Mlp1h`. `Identity` exists for testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub obs_dim: usize,
    pub n_actions: usize,
    /// Hidden width, used only by `Mlp1h`.
    #[serde(default)]
    pub hidden: usize,
    #[serde(default)]
    pub activation: Activation,
}

/// Flat policy parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector<T>(Vec<T>);

impl<T: Real> ParamVector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn from_vec(values: Vec<T>) -> Self {
        Self(values)
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Little-endian `f64` encoding, 8 bytes per entry.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|x| x.as_f64().to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self, PolicyError> {
        if !bytes.len().is_multiple_of(8) {
            return Err(PolicyError::MalformedBytes(bytes.len()));
        }
        Ok(Self(
            bytes
                .chunks_exact(8)
                .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
                .collect(),
        ))
    }
}

impl<T> std::ops::Deref for ParamVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> std::ops::DerefMut for ParamVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

/// ln π_θ(a | obs) with its gradient and Hessian diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbDerivatives<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess_diag: Vec<T>,
}

/// Numerically stable log-softmax.
pub(crate) fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub(crate) fn floored_ln<T: Real>(log_p: T) -> T {
    log_p.max(T::lit(LOG_PROB_FLOOR.ln()))
}

/// -Σ p ln p with the 0·ln 0 = 0 convention.
pub(crate) fn entropy_of<T: Real>(probs: &[T], log_probs: &[T]) -> T {
    -probs
        .iter()
        .zip(log_probs)
        .filter(|(&p, _)| p > T::zero())
        .map(|(&p, &lp)| p * lp)
        .sum::<T>()
}

impl PolicySpec {
    pub fn softmax_linear(obs_dim: usize, n_actions: usize) -> Self {
        Self {
            kind: PolicyKind::SoftmaxLinear,
            obs_dim,
            n_actions,
            hidden: 0,
            activation: Activation::Tanh,
        }
    }

    pub fn mlp(obs_dim: usize, hidden: usize, n_actions: usize) -> Self {
        Self {
            kind: PolicyKind::Mlp1h,
            obs_dim,
            n_actions,
            hidden,
            activation: Activation::Tanh,
        }
    }

    /// Number of parameters D.
    pub fn dim(&self) -> usize {
        match self.kind {
            PolicyKind::SoftmaxLinear => self.obs_dim * self.n_actions,
            PolicyKind::Mlp1h => {
                self.obs_dim * self.hidden + self.hidden + self.hidden * self.n_actions + self.n_actions
            }
        }
    }

    /// Uniform initialization in [-0.01, 0.01].
    pub fn init_params<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector<T> {
        ParamVector(
            (0..self.dim())
                .map(|_| T::lit(rng.gen_range(-0.01..=0.01)))
                .collect(),
        )
    }

    fn check<T: Real>(&self, theta: &[T], obs: &[T]) -> Result<(), PolicyError> {
        if theta.len() != self.dim() {
            return Err(PolicyError::DimensionMismatch {
                what: "parameter vector",
                expected: self.dim(),
                got: theta.len(),
            });
        }
        if obs.len() != self.obs_dim {
            return Err(PolicyError::DimensionMismatch {
                what: "observation",
                expected: self.obs_dim,
                got: obs.len(),
            });
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<(), PolicyError> {
        if action >= self.n_actions {
            return Err(PolicyError::ActionOutOfRange {
                action,
                n_actions: self.n_actions,
            });
        }
        Ok(())
    }

    pub fn logits<T: Real>(&self, theta: &[T], obs: &[T]) -> Result<Vec<T>, PolicyError> {
        self.check(theta, obs)?;
        Ok(match self.kind {
            PolicyKind::SoftmaxLinear => linear::logits(self, theta, obs),
            PolicyKind::Mlp1h => mlp::forward(self, theta, obs).logits,
        })
    }

    /// Softmax of the final-layer logits.
    pub fn action_distribution<T: Real>(&self, theta: &[T], obs: &[T]) -> Result<Vec<T>, PolicyError> {
        let logits = self.logits(theta, obs)?;
        Ok(log_softmax(&logits).into_iter().map(T::exp).collect())
    }

    pub fn sample_action<T: Real, R: Rng + ?Sized>(
        &self,
        theta: &[T],
        obs: &[T],
        rng: &mut R,
    ) -> Result<usize, PolicyError> {
        let probs = self.action_distribution(theta, obs)?;
        Ok(sample_index(&probs, rng))
    }

    /// ln π(a | obs), floored at ln(1e-12).
    pub fn log_prob<T: Real>(&self, theta: &[T], obs: &[T], action: usize) -> Result<T, PolicyError> {
        self.check_action(action)?;
        let logits = self.logits(theta, obs)?;
        Ok(floored_ln(log_softmax(&logits)[action]))
    }

    /// Value, exact gradient and exact Hessian diagonal of ln π(a | obs).
    pub fn log_prob_derivatives<T: Real>(
        &self,
        theta: &[T],
        obs: &[T],
        action: usize,
    ) -> Result<LogProbDerivatives<T>, PolicyError> {
        self.check(theta, obs)?;
        self.check_action(action)?;
        Ok(match self.kind {
            PolicyKind::SoftmaxLinear => linear::log_prob_derivatives(self, theta, obs, action),
            PolicyKind::Mlp1h => mlp::log_prob_derivatives(self, theta, obs, action),
        })
    }

    /// Gradient of ln π(a | obs) only; skips the Hessian-diagonal work.
    pub fn log_prob_grad<T: Real>(&self, theta: &[T], obs: &[T], action: usize) -> Result<Vec<T>, PolicyError> {
        self.check(theta, obs)?;
        self.check_action(action)?;
        Ok(match self.kind {
            PolicyKind::SoftmaxLinear => linear::log_prob_grad(self, theta, obs, action),
            PolicyKind::Mlp1h => mlp::log_prob_grad(self, theta, obs, action),
        })
    }

    pub fn entropy<T: Real>(&self, theta: &[T], obs: &[T]) -> Result<T, PolicyError> {
        let lp = log_softmax(&self.logits(theta, obs)?);
        let p: Vec<T> = lp.iter().map(|x| x.exp()).collect();
        Ok(entropy_of(&p, &lp))
    }

    pub fn entropy_grad<T: Real>(&self, theta: &[T], obs: &[T]) -> Result<Vec<T>, PolicyError> {
        self.check(theta, obs)?;
        Ok(match self.kind {
            PolicyKind::SoftmaxLinear => linear::entropy_grad(self, theta, obs),
            PolicyKind::Mlp1h => mlp::entropy_grad(self, theta, obs),
        })
    }
}

/// dH/dz_b = -π_b (ln π_b + H)
pub(crate) fn entropy_logit_grad<T: Real>(probs: &[T], log_probs: &[T]) -> Vec<T> {
    let h = entropy_of(probs, log_probs);
    probs
        .iter()
        .zip(log_probs)
        .map(|(&p, &lp)| if p > T::zero() { -p * (lp + h) } else { T::zero() })
        .collect()
}
