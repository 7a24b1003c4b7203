//! Episodic environments: the CartPole benchmark and enumerable tabular MDPs.

mod cartpole;
mod tabular;

pub use cartpole::{cartpole_reset, cartpole_step, CartAction, CartPole, CartPoleParams, CartPoleState};
pub use tabular::{mdp_reset, mdp_step, one_hot, MdpEnv, MdpModel, TabularMdp};

use rand::Rng;
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called on a terminal state")]
    TerminalStep,
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("failed to read MDP document: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse MDP document: {0}")]
    Json(#[from] serde_json::Error),
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub observation: Vec<T>,
    pub reward: T,
    pub done: bool,
}

/// Common episodic-environment contract.
///
/// The caller owns the random source, so a seeded generator fully determines
/// the episode together with the actions taken.
pub trait Episodic<T: Real> {
    /// Dimension of every observation vector this instance emits.
    fn obs_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<T>;
    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R)
        -> Result<StepOutcome<T>, EnvError>;
}
