//! Trajectory-based estimates of ∇J and diag ∇²J.
//!
//! For a trajectory τ with per-step weights `w_h` (returns-to-go, optionally
//! minus a baseline) the surrogate is `Ψ(θ; τ) = Σ_h w_h ln π_θ(a_h | s_h)`.
//! The weights are constants with respect to θ. Then
//!
//! * `E[∇Ψ] = ∇J` (with the from-start return convention),
//! * `E[diag ∇²Ψ + score ⊙ ∇Ψ] = diag ∇²J`, where `score = Σ_h ∇ ln π(a_h | s_h)`
//!   never touches the transition kernel.

use std::cell::Cell;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Episodic};
use crate::policy::{floored_ln, log_softmax, PolicyError, PolicySpec};
use crate::vecops::{axpy, scale, zeros};
use crate::Real;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("estimate requested from an empty trajectory batch")]
    EmptyBatch,
}

/// How the return weight of step `t` is discounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnConvention {
    /// `G_t = Σ_{k≥t} γ^k r_k`: unbiased for ∇ of the discounted objective.
    FromStart,
    /// `G_t = Σ_{k≥t} γ^{k−t} r_k`.
    FromStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    #[default]
    None,
    RunningMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T> {
    pub discount: T,
    pub convention: ReturnConvention,
    #[serde(default)]
    pub baseline: BaselineKind,
    pub entropy_coeff: T,
    pub baseline_decay: T,
}

impl<T: Real> Default for EstimatorConfig<T> {
    fn default() -> Self {
        Self {
            discount: T::lit(0.99),
            convention: ReturnConvention::FromStep,
            baseline: BaselineKind::None,
            entropy_coeff: T::zero(),
            baseline_decay: T::lit(0.9),
        }
    }
}

impl<T: Real> EstimatorConfig<T> {
    /// Oracle-consistent configuration: from-start returns, no stabilizers.
    pub fn unbiased(discount: T) -> Self {
        Self {
            discount,
            convention: ReturnConvention::FromStart,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step<T> {
    pub obs: Vec<T>,
    pub action: usize,
    pub reward: T,
    /// ln π(action | obs) under the collecting parameters.
    pub log_prob: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T> {
    pub steps: Vec<Step<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<T> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    /// Undiscounted episode return.
    pub fn total_reward(&self) -> T {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Runs one episode of `env` under π_θ.
pub fn rollout<T: Real, E: Episodic<T>, R: Rng + ?Sized>(
    env: &mut E,
    spec: &PolicySpec,
    theta: &[T],
    rng: &mut R,
) -> Result<Trajectory<T>, EstimatorError> {
    let mut obs = env.reset(rng);
    let mut steps = Vec::new();
    loop {
        let lp = log_softmax(&spec.logits(theta, &obs)?);
        let probs: Vec<T> = lp.iter().map(|l| l.exp()).collect();
        let action = crate::vecops::sample_index(&probs, rng);
        let out = env.step(action, rng)?;
        steps.push(Step {
            obs: std::mem::replace(&mut obs, out.observation),
            action,
            reward: out.reward,
            log_prob: floored_ln(lp[action]),
        });
        if out.done {
            break;
        }
    }
    Ok(Trajectory { steps })
}

pub fn returns_to_go<T: Real>(rewards: &[T], discount: T, convention: ReturnConvention) -> Vec<T> {
    let n = rewards.len();
    let mut out = vec![T::zero(); n];
    let mut acc = T::zero();
    match convention {
        ReturnConvention::FromStep => {
            for t in (0..n).rev() {
                acc = rewards[t] + discount * acc;
                out[t] = acc;
            }
        }
        ReturnConvention::FromStart => {
            let mut powers = Vec::with_capacity(n);
            let mut gp = T::one();
            for _ in 0..n {
                powers.push(gp);
                gp *= discount;
            }
            for t in (0..n).rev() {
                acc += powers[t] * rewards[t];
                out[t] = acc;
            }
        }
    }
    out
}

/// Ψ and its derivatives at θ.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiDerivatives<T> {
    pub psi: T,
    pub grad: Vec<T>,
    pub hess_diag: Vec<T>,
}

fn step_weights<T: Real>(traj: &Trajectory<T>, config: &EstimatorConfig<T>, baseline: T) -> Vec<T> {
    let mut w = returns_to_go(&traj.rewards(), config.discount, config.convention);
    if baseline != T::zero() {
        for x in &mut w {
            *x -= baseline;
        }
    }
    w
}

/// Ψ = Σ_h w_h ln π_θ(a_h | s_h) with value, gradient and Hessian diagonal.
///
/// `baseline` is subtracted from every weight; pass zero to disable.
pub fn psi_derivatives<T: Real>(
    spec: &PolicySpec,
    traj: &Trajectory<T>,
    theta: &[T],
    config: &EstimatorConfig<T>,
    baseline: T,
) -> Result<PsiDerivatives<T>, PolicyError> {
    let w = step_weights(traj, config, baseline);
    let mut out = PsiDerivatives {
        psi: T::zero(),
        grad: zeros(spec.dim()),
        hess_diag: zeros(spec.dim()),
    };
    for (step, &wh) in traj.steps.iter().zip(&w) {
        let d = spec.log_prob_derivatives(theta, &step.obs, step.action)?;
        out.psi += wh * d.value;
        axpy(wh, &d.grad, &mut out.grad);
        axpy(wh, &d.hess_diag, &mut out.hess_diag);
    }
    Ok(out)
}

/// ∇Ψ only.
pub fn grad_psi<T: Real>(
    spec: &PolicySpec,
    traj: &Trajectory<T>,
    theta: &[T],
    config: &EstimatorConfig<T>,
    baseline: T,
) -> Result<Vec<T>, PolicyError> {
    let w = step_weights(traj, config, baseline);
    let mut g = zeros(spec.dim());
    for (step, &wh) in traj.steps.iter().zip(&w) {
        axpy(wh, &spec.log_prob_grad(theta, &step.obs, step.action)?, &mut g);
    }
    Ok(g)
}

/// Σ_h ∇ ln π_θ(a_h | s_h). Reads nothing but the policy and the recorded steps.
pub fn score<T: Real>(spec: &PolicySpec, traj: &Trajectory<T>, theta: &[T]) -> Result<Vec<T>, PolicyError> {
    let mut s = zeros(spec.dim());
    for step in &traj.steps {
        axpy(T::one(), &spec.log_prob_grad(theta, &step.obs, step.action)?, &mut s);
    }
    Ok(s)
}

/// Per-trajectory second-order sample: diag ∇²Ψ + score ⊙ ∇Ψ.
pub fn hess_diag_sample<T: Real>(
    spec: &PolicySpec,
    traj: &Trajectory<T>,
    theta: &[T],
    config: &EstimatorConfig<T>,
    baseline: T,
) -> Result<Vec<T>, PolicyError> {
    let w = step_weights(traj, config, baseline);
    let d = spec.dim();
    let (mut hd, mut g, mut sc) = (zeros(d), zeros(d), zeros(d));
    for (step, &wh) in traj.steps.iter().zip(&w) {
        let lp = spec.log_prob_derivatives(theta, &step.obs, step.action)?;
        axpy(wh, &lp.hess_diag, &mut hd);
        axpy(wh, &lp.grad, &mut g);
        axpy(T::one(), &lp.grad, &mut sc);
    }
    for k in 0..d {
        hd[k] += sc[k] * g[k];
    }
    Ok(hd)
}

/// Gradient and Hessian-diagonal estimate of J.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate<T> {
    pub g: Vec<T>,
    pub h: Vec<T>,
    pub n_trajectories: usize,
}

impl<T: Real> GradEstimate<T> {
    pub fn is_finite(&self) -> bool {
        self.g.iter().chain(&self.h).all(|x| x.is_finite())
    }
}

/// Counts derivative sweeps over trajectories.
///
/// One gradient sweep or one Hessian-diagonal sweep over one trajectory
/// counts as one pass.
#[derive(Debug, Default)]
pub struct PassCounter {
    grad_passes: Cell<u64>,
    hess_passes: Cell<u64>,
}

impl PassCounter {
    pub fn grad_passes(&self) -> u64 {
        self.grad_passes.get()
    }

    pub fn hess_passes(&self) -> u64 {
        self.hess_passes.get()
    }

    pub fn total(&self) -> u64 {
        self.grad_passes() + self.hess_passes()
    }

    pub fn reset(&self) {
        self.grad_passes.set(0);
        self.hess_passes.set(0);
    }
}

/// Batch estimator bound to a policy class and configuration.
#[derive(Debug)]
pub struct Estimator<T> {
    pub spec: PolicySpec,
    pub config: EstimatorConfig<T>,
    pub counter: PassCounter,
}

impl<T: Real> Estimator<T> {
    pub fn new(spec: PolicySpec, config: EstimatorConfig<T>) -> Self {
        Self {
            spec,
            config,
            counter: PassCounter::default(),
        }
    }

    /// Mean ∇Ψ over the batch plus λ times the mean per-step entropy gradient.
    pub fn grad_estimate(&self, trajs: &[Trajectory<T>], theta: &[T], baseline: T) -> Result<Vec<T>, EstimatorError> {
        if trajs.is_empty() {
            return Err(EstimatorError::EmptyBatch);
        }
        let mut g = zeros(self.spec.dim());
        let lambda = self.config.entropy_coeff;
        for traj in trajs {
            self.counter.grad_passes.set(self.counter.grad_passes.get() + 1);
            axpy(T::one(), &grad_psi(&self.spec, traj, theta, &self.config, baseline)?, &mut g);
            if lambda > T::zero() && !traj.is_empty() {
                let mut eg = zeros(self.spec.dim());
                for step in &traj.steps {
                    axpy(T::one(), &self.spec.entropy_grad(theta, &step.obs)?, &mut eg);
                }
                axpy(lambda / T::from_usize(traj.len()).unwrap(), &eg, &mut g);
            }
        }
        scale(T::one() / T::from_usize(trajs.len()).unwrap(), &mut g);
        Ok(g)
    }

    /// Mean of diag ∇²Ψ + score ⊙ ∇Ψ over the batch.
    pub fn hess_diag_estimate(
        &self,
        trajs: &[Trajectory<T>],
        theta: &[T],
        baseline: T,
    ) -> Result<Vec<T>, EstimatorError> {
        if trajs.is_empty() {
            return Err(EstimatorError::EmptyBatch);
        }
        let mut h = zeros(self.spec.dim());
        for traj in trajs {
            self.counter.hess_passes.set(self.counter.hess_passes.get() + 1);
            axpy(T::one(), &hess_diag_sample(&self.spec, traj, theta, &self.config, baseline)?, &mut h);
        }
        scale(T::one() / T::from_usize(trajs.len()).unwrap(), &mut h);
        Ok(h)
    }

    /// First-order estimate; `h` is left at zero.
    pub fn first_order(&self, trajs: &[Trajectory<T>], theta: &[T], baseline: T) -> Result<GradEstimate<T>, EstimatorError> {
        Ok(GradEstimate {
            g: self.grad_estimate(trajs, theta, baseline)?,
            h: zeros(self.spec.dim()),
            n_trajectories: trajs.len(),
        })
    }

    /// Gradient and Hessian-diagonal estimate (two passes per trajectory).
    pub fn second_order(&self, trajs: &[Trajectory<T>], theta: &[T], baseline: T) -> Result<GradEstimate<T>, EstimatorError> {
        Ok(GradEstimate {
            g: self.grad_estimate(trajs, theta, baseline)?,
            h: self.hess_diag_estimate(trajs, theta, baseline)?,
            n_trajectories: trajs.len(),
        })
    }
}

/// Scalar running mean of episode returns.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineState<T> {
    pub running_mean: T,
    pub initialized: bool,
}

impl<T: Real> BaselineState<T> {
    /// The first call adopts `episode_return` directly.
    pub fn update(&mut self, episode_return: T, decay: T) {
        if self.initialized {
            self.running_mean = decay * self.running_mean + (T::one() - decay) * episode_return;
        } else {
            self.running_mean = episode_return;
            self.initialized = true;
        }
    }

    /// Updates with the trajectory's return measured on the same scale as the
    /// step weights: G_0 at the configured discount.
    pub fn update_from(&mut self, traj: &Trajectory<T>, config: &EstimatorConfig<T>) {
        let g0 = returns_to_go(&traj.rewards(), config.discount, config.convention)
            .first()
            .copied()
            .unwrap_or_else(T::zero);
        self.update(g0, config.baseline_decay);
    }

    /// Value to subtract from step weights; zero until initialized.
    pub fn value(&self) -> T {
        if self.initialized {
            self.running_mean
        } else {
            T::zero()
        }
    }
}
