//! Closed-form derivatives of the softmax-linear policy.
//!
//! With `z_b = Σ_i obs_i θ[i,b]`:
//!   ∂ ln π_a / ∂θ[i,b]   = obs_i (δ_ab − π_b)
//!   ∂² ln π_a / ∂θ[i,b]² = −obs_i² π_b (1 − π_b)
//!   ∂H / ∂θ[i,b]         = −obs_i π_b (ln π_b + H)

use super::{entropy_logit_grad, floored_ln, log_softmax, LogProbDerivatives, PolicySpec};
use crate::Real;

pub(super) fn logits<T: Real>(spec: &PolicySpec, theta: &[T], obs: &[T]) -> Vec<T> {
    let na = spec.n_actions;
    let mut z = vec![T::zero(); na];
    for (i, &o) in obs.iter().enumerate() {
        let row = &theta[i * na..(i + 1) * na];
        for (zb, &w) in z.iter_mut().zip(row) {
            *zb += o * w;
        }
    }
    z
}

fn outer<T: Real>(obs: &[T], per_logit: &[T]) -> Vec<T> {
    obs.iter()
        .flat_map(|&o| per_logit.iter().map(move |&d| o * d))
        .collect()
}

pub(super) fn log_prob_grad<T: Real>(spec: &PolicySpec, theta: &[T], obs: &[T], action: usize) -> Vec<T> {
    let lp = log_softmax(&logits(spec, theta, obs));
    let dz: Vec<T> = lp
        .iter()
        .enumerate()
        .map(|(b, &l)| if b == action { T::one() - l.exp() } else { -l.exp() })
        .collect();
    outer(obs, &dz)
}

pub(super) fn log_prob_derivatives<T: Real>(
    spec: &PolicySpec,
    theta: &[T],
    obs: &[T],
    action: usize,
) -> LogProbDerivatives<T> {
    let lp = log_softmax(&logits(spec, theta, obs));
    let p: Vec<T> = lp.iter().map(|l| l.exp()).collect();
    let dz: Vec<T> = p
        .iter()
        .enumerate()
        .map(|(b, &pb)| if b == action { T::one() - pb } else { -pb })
        .collect();
    let curv: Vec<T> = p.iter().map(|&pb| -pb * (T::one() - pb)).collect();
    let hess_diag = obs
        .iter()
        .flat_map(|&o| curv.iter().map(move |&c| o * o * c))
        .collect();
    LogProbDerivatives {
        value: floored_ln(lp[action]),
        grad: outer(obs, &dz),
        hess_diag,
    }
}

pub(super) fn entropy_grad<T: Real>(spec: &PolicySpec, theta: &[T], obs: &[T]) -> Vec<T> {
    let lp = log_softmax(&logits(spec, theta, obs));
    let p: Vec<T> = lp.iter().map(|l| l.exp()).collect();
    outer(obs, &entropy_logit_grad(&p, &lp))
}
