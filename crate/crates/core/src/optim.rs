//! Parameter update rules: vanilla ascent, PG-SOM, Runge-Kutta rounds and
//! gradient-norm clipping. All rules perform gradient *ascent* on J.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::GradEstimate;
use crate::policy::ParamVector;
use crate::vecops::{all_finite, axpy, norm2};
use crate::Real;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: parameters have {expected} entries, {what} has {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), OptimError> {
    if expected != got {
        return Err(OptimError::Dimension { what, expected, got });
    }
    Ok(())
}

/// θ + η·g
pub fn vanilla_step<T: Real>(theta: &ParamVector<T>, g: &[T], eta: T) -> Result<ParamVector<T>, OptimError> {
    check_dim("gradient", theta.len(), g.len())?;
    let mut next = theta.clone();
    axpy(eta, g, &mut next);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipConfig<T> {
    pub max_norm: T,
    pub enabled: bool,
}

impl<T: Real> ClipConfig<T> {
    pub fn new(max_norm: T) -> Self {
        Self { max_norm, enabled: true }
    }

    pub fn disabled() -> Self {
        Self {
            max_norm: T::infinity(),
            enabled: false,
        }
    }
}

/// Rescales `g` onto the L2 ball of radius `max_norm` if it lies outside.
pub fn clip_gradient<T: Real>(g: &[T], config: &ClipConfig<T>) -> Vec<T> {
    let norm = norm2(g);
    if !config.enabled || norm <= config.max_norm {
        return g.to_vec();
    }
    let s = config.max_norm / norm;
    g.iter().map(|&x| x * s).collect()
}

/// PG-SOM optimizer state.
///
/// The moments are kept as unnormalized discounted sums
/// `S_t = β S_{t−1} + x_t` together with `N_t = β N_{t−1} + 1`. The EMA is
/// `(1 − β) S_t` and the bias-corrected EMA is `S_t / N_t`, which is the
/// first estimate itself (bitwise) after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomState<T> {
    g_sum: Vec<T>,
    h_sum: Vec<T>,
    g_norm: T,
    h_norm: T,
    t: u64,
    pub beta1: T,
    pub beta2: T,
    pub eta: T,
    pub epsilon: T,
}

impl<T: Real> SomState<T> {
    pub fn new(dim: usize, eta: T, beta1: T, beta2: T, epsilon: T) -> Self {
        Self {
            g_sum: vec![T::zero(); dim],
            h_sum: vec![T::zero(); dim],
            g_norm: T::zero(),
            h_norm: T::zero(),
            t: 0,
            beta1,
            beta2,
            eta,
            epsilon,
        }
    }

    /// β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn with_defaults(dim: usize, eta: T) -> Self {
        Self::new(dim, eta, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// EMA of gradient estimates, g_t.
    pub fn first_moment(&self) -> Vec<T> {
        let c = T::one() - self.beta1;
        self.g_sum.iter().map(|&s| c * s).collect()
    }

    /// EMA of Hessian-diagonal estimates, h_t.
    pub fn curvature_moment(&self) -> Vec<T> {
        let c = T::one() - self.beta2;
        self.h_sum.iter().map(|&s| c * s).collect()
    }

    /// Bias-corrected (ĝ, ĥ); zero vectors before the first step.
    pub fn corrected_moments(&self) -> (Vec<T>, Vec<T>) {
        if self.t == 0 {
            return (self.g_sum.clone(), self.h_sum.clone());
        }
        let g = self.g_sum.iter().map(|&s| s / self.g_norm).collect();
        let h = self.h_sum.iter().map(|&s| s / self.h_norm).collect();
        (g, h)
    }

    /// One PG-SOM update: θ' = θ + η·ĝ ⊘ (|ĥ| + ε).
    ///
    /// The state is left untouched when the estimate is rejected.
    pub fn step(&mut self, theta: &ParamVector<T>, est: &GradEstimate<T>) -> Result<ParamVector<T>, OptimError> {
        let d = theta.len();
        check_dim("g estimate", d, est.g.len())?;
        check_dim("h estimate", d, est.h.len())?;
        check_dim("optimizer state", d, self.g_sum.len())?;
        if !all_finite(&est.g) || !all_finite(&est.h) {
            return Err(OptimError::NonFinite("gradient estimate"));
        }
        for (s, &x) in self.g_sum.iter_mut().zip(&est.g) {
            *s = self.beta1 * *s + x;
        }
        for (s, &x) in self.h_sum.iter_mut().zip(&est.h) {
            *s = self.beta2 * *s + x;
        }
        self.g_norm = self.beta1 * self.g_norm + T::one();
        self.h_norm = self.beta2 * self.h_norm + T::one();
        self.t += 1;

        let (g_hat, h_hat) = self.corrected_moments();
        let mut next = theta.clone();
        for k in 0..d {
            next[k] += self.eta * (g_hat[k] / (h_hat[k].abs() + self.epsilon));
        }
        Ok(next)
    }
}

/// Functional form of [`SomState::step`].
pub fn pgsom_step<T: Real>(
    state: &SomState<T>,
    theta: &ParamVector<T>,
    est: &GradEstimate<T>,
) -> Result<(SomState<T>, ParamVector<T>), OptimError> {
    let mut next_state = state.clone();
    let next = next_state.step(theta, est)?;
    Ok((next_state, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkConfig<T> {
    /// Weight on the stage-1 gradient; stage 2 receives 1 − α.
    pub alpha: T,
    /// Lookahead scale: θ̃ = θ + κ·g1.
    pub kappa: T,
    pub eta: T,
}

impl<T: Real> RkConfig<T> {
    /// α = 0.5 and κ = η.
    pub fn with_eta(eta: T) -> Self {
        Self {
            alpha: T::lit(0.5),
            kappa: eta,
            eta,
        }
    }
}

/// Two-stage Runge-Kutta round.
///
/// `sampler` must draw fresh on-policy rollouts at the parameters it is
/// given; it is called exactly twice, first at θ and then at the lookahead
/// point θ̃ = θ + κ·g1. Returns θ + η·(α·g1 + (1 − α)·g2).
pub fn rk_round<T, E, F>(theta: &ParamVector<T>, config: &RkConfig<T>, mut sampler: F) -> Result<ParamVector<T>, E>
where
    T: Real,
    E: From<OptimError>,
    F: FnMut(&ParamVector<T>) -> Result<GradEstimate<T>, E>,
{
    let g1 = sampler(theta)?.g;
    check_dim("stage-1 gradient", theta.len(), g1.len())?;
    if !all_finite(&g1) {
        return Err(OptimError::NonFinite("stage-1 gradient").into());
    }
    let lookahead = vanilla_step(theta, &g1, config.kappa)?;
    let g2 = sampler(&lookahead)?.g;
    check_dim("stage-2 gradient", theta.len(), g2.len())?;
    if !all_finite(&g2) {
        return Err(OptimError::NonFinite("stage-2 gradient").into());
    }
    let one_minus = T::one() - config.alpha;
    let mixed: Vec<T> = g1
        .iter()
        .zip(&g2)
        .map(|(&a, &b)| config.alpha * a + one_minus * b)
        .collect();
    Ok(vanilla_step(theta, &mixed, config.eta)?)
}
