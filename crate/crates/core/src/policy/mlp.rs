//! One-hidden-layer policy network with a hand-written reverse sweep.
//!
//! Parameter layout: `W1[j][i]` (hidden × obs), `b1[j]`, `W2[a][j]`
//! (actions × hidden), `b2[a]`.

use super::ad::{Dual, Smooth};
use super::{entropy_logit_grad, floored_ln, log_softmax, Activation, LogProbDerivatives, PolicySpec};
use crate::Real;

struct Layout {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl Layout {
    fn of(spec: &PolicySpec) -> Self {
        let (n_in, n_hidden, n_out) = (spec.obs_dim, spec.hidden, spec.n_actions);
        let b1 = n_in * n_hidden;
        let w2 = b1 + n_hidden;
        let b2 = w2 + n_hidden * n_out;
        Self { n_in, n_hidden, n_out, b1, w2, b2 }
    }
}

pub(super) struct Forward<S> {
    hidden: Vec<S>,
    pub(super) logits: Vec<S>,
}

fn forward_generic<T: Real, S: Smooth<T>>(spec: &PolicySpec, theta: &[S], obs: &[S]) -> Forward<S> {
    let l = Layout::of(spec);
    let hidden: Vec<S> = (0..l.n_hidden)
        .map(|j| {
            let mut pre = theta[l.b1 + j];
            for i in 0..l.n_in {
                pre = pre + theta[j * l.n_in + i] * obs[i];
            }
            match spec.activation {
                Activation::Tanh => pre.tanh(),
                Activation::Identity => pre,
            }
        })
        .collect();
    let logits = (0..l.n_out)
        .map(|a| {
            let mut z = theta[l.b2 + a];
            for j in 0..l.n_hidden {
                z = z + theta[l.w2 + a * l.n_hidden + j] * hidden[j];
            }
            z
        })
        .collect();
    Forward { hidden, logits }
}

/// Pulls an upstream logit gradient back to the parameters.
fn backward_generic<T: Real, S: Smooth<T>>(
    spec: &PolicySpec,
    theta: &[S],
    obs: &[S],
    fwd: &Forward<S>,
    dlogits: &[S],
) -> Vec<S> {
    let l = Layout::of(spec);
    let zero = S::lift(T::zero());
    let mut grad = vec![zero; spec.dim()];
    let mut dhidden = vec![zero; l.n_hidden];
    for a in 0..l.n_out {
        let dz = dlogits[a];
        grad[l.b2 + a] = dz;
        for j in 0..l.n_hidden {
            let k = l.w2 + a * l.n_hidden + j;
            grad[k] = dz * fwd.hidden[j];
            dhidden[j] = dhidden[j] + dz * theta[k];
        }
    }
    for j in 0..l.n_hidden {
        let dpre = match spec.activation {
            Activation::Tanh => dhidden[j] * (S::lift(T::one()) - fwd.hidden[j] * fwd.hidden[j]),
            Activation::Identity => dhidden[j],
        };
        grad[l.b1 + j] = dpre;
        for i in 0..l.n_in {
            grad[j * l.n_in + i] = dpre * obs[i];
        }
    }
    grad
}

/// ∂ ln π_a / ∂z = e_a − softmax(z), computed in the scalar type `S`.
fn log_prob_logit_grad<T: Real, S: Smooth<T>>(logits: &[S], action: usize) -> Vec<S> {
    let m = logits.iter().map(|z| z.primal()).fold(T::neg_infinity(), T::max);
    let shifted: Vec<S> = logits.iter().map(|&z| (z - S::lift(m)).exp()).collect();
    let mut total = shifted[0];
    for &e in &shifted[1..] {
        total = total + e;
    }
    shifted
        .iter()
        .enumerate()
        .map(|(b, &e)| {
            let p = e / total;
            if b == action {
                S::lift(T::one()) - p
            } else {
                -p
            }
        })
        .collect()
}

pub(super) fn forward<T: Real>(spec: &PolicySpec, theta: &[T], obs: &[T]) -> Forward<T> {
    forward_generic::<T, T>(spec, theta, obs)
}

pub(super) fn log_prob_grad<T: Real>(spec: &PolicySpec, theta: &[T], obs: &[T], action: usize) -> Vec<T> {
    let fwd = forward(spec, theta, obs);
    let dz = log_prob_logit_grad::<T, T>(&fwd.logits, action);
    backward_generic(spec, theta, obs, &fwd, &dz)
}

pub(super) fn log_prob_derivatives<T: Real>(
    spec: &PolicySpec,
    theta: &[T],
    obs: &[T],
    action: usize,
) -> LogProbDerivatives<T> {
    let fwd = forward(spec, theta, obs);
    let value = floored_ln(log_softmax(&fwd.logits)[action]);
    let dz = log_prob_logit_grad::<T, T>(&fwd.logits, action);
    let grad = backward_generic(spec, theta, obs, &fwd, &dz);

    // Hessian diagonal: one forward-over-reverse HVP per basis direction e_k.
    let obs_d: Vec<Dual<T>> = obs.iter().map(|&o| Dual::lift(o)).collect();
    let mut theta_d: Vec<Dual<T>> = theta.iter().map(|&t| Dual::lift(t)).collect();
    let hess_diag = (0..theta.len())
        .map(|k| {
            theta_d[k].d = T::one();
            let fwd_d = forward_generic::<T, Dual<T>>(spec, &theta_d, &obs_d);
            let dz_d = log_prob_logit_grad::<T, Dual<T>>(&fwd_d.logits, action);
            let g_d = backward_generic(spec, &theta_d, &obs_d, &fwd_d, &dz_d);
            theta_d[k].d = T::zero();
            g_d[k].d
        })
        .collect();

    LogProbDerivatives { value, grad, hess_diag }
}

pub(super) fn entropy_grad<T: Real>(spec: &PolicySpec, theta: &[T], obs: &[T]) -> Vec<T> {
    let fwd = forward(spec, theta, obs);
    let lp = log_softmax(&fwd.logits);
    let p: Vec<T> = lp.iter().map(|l| l.exp()).collect();
    let dz = entropy_logit_grad(&p, &lp);
    backward_generic(spec, theta, obs, &fwd, &dz)
}
